#include "rbm/io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "rbm/errors.hpp"

namespace rbm {

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string table_csv(const ErrorTable& table)
{
    std::string out = "tau,error,stderr,realizations\n";
    for (const auto& row : table.rows) {
        out += format_double(row.tau);
        out += ',';
        out += format_double(row.error);
        out += ',';
        out += format_double(row.std_error);
        out += ',';
        out += std::to_string(row.realizations);
        out += '\n';
    }
    return out;
}

void write_trajectory_csv(std::ostream& out, std::span<const ParticleState> states,
                          std::size_t n, std::size_t d)
{
    const bool velocities = !states.empty() && !states.front().v.empty();
    out << "t,particle";
    for (std::size_t k = 1; k <= d; ++k) out << ",x_" << k;
    if (velocities) {
        for (std::size_t k = 1; k <= d; ++k) out << ",v_" << k;
    }
    out << '\n';
    for (const auto& s : states) {
        if (s.x.size() != n * d || (velocities && s.v.size() != n * d)) {
            throw InvalidArgument("trajectory: state does not match N x d");
        }
        const std::string t = format_double(s.t);
        for (std::size_t i = 0; i < n; ++i) {
            out << t << ',' << i;
            for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(s.x[i * d + k]);
            if (velocities) {
                for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(s.v[i * d + k]);
            }
            out << '\n';
        }
    }
}

}  // namespace rbm
