// Bulk pair loops used by the integrators. The single-particle routines in
// model.cpp stay generic and serve as the reference these are tested against.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rbm/batching.hpp"
#include "rbm/detail/fast_exp.hpp"
#include "rbm/errors.hpp"
#include "rbm/model.hpp"

namespace rbm {

namespace {

// Every odd function in the catalog has the form F(r) = g(|r|^2) r.
struct GaussianProfile {
    double a;
    double inv_s2;
    double operator()(double r2) const
    {
        return a * detail::exp_nonpositive(-r2 * inv_s2);
    }
};

struct LinearProfile {
    double a;
    double operator()(double) const { return a; }
};

struct CosineProfile {
    double a;
    double omega;
    double operator()(double r2) const
    {
        return a * std::cos(omega * std::sqrt(r2)) / std::sqrt(1.0 + r2);
    }
};

struct Scratch {
    std::vector<double> x;
    std::vector<double> w;
    std::vector<double> acc;
};

Scratch& scratch()
{
    thread_local Scratch s;
    return s;
}

std::span<const Index> identity_indices(std::size_t n)
{
    thread_local std::vector<Index> ids;
    if (ids.size() != n) {
        ids.resize(n);
        std::iota(ids.begin(), ids.end(), Index{0});
    }
    return ids;
}

// acc_a += sum_{b != a} w_b g(|x_a - x_b|^2) (x_a - x_b), each pair once.
template <class Profile>
void antisymmetric_loop_1d(std::size_t m, const double* __restrict xs,
                           const double* __restrict ws, double* __restrict acc,
                           Profile g)
{
    for (std::size_t a = 0; a < m; ++a) {
        const double xa = xs[a];
        const double wa = ws[a];
        double sa = 0.0;
#pragma omp simd reduction(+ : sa)
        for (std::size_t b = a + 1; b < m; ++b) {
            const double r = xa - xs[b];
            const double f = g(r * r) * r;
            sa += ws[b] * f;
            acc[b] -= wa * f;
        }
        acc[a] += sa;
    }
}

template <class Profile>
void antisymmetric_loop(std::size_t m, std::size_t d, const double* xs,
                        const double* ws, double* acc, Profile g)
{
    if (d == 1) {
        antisymmetric_loop_1d(m, xs, ws, acc, g);
        return;
    }
    std::vector<double> r(d), sa(d);
    for (std::size_t a = 0; a < m; ++a) {
        const double* xa = xs + a * d;
        std::fill(sa.begin(), sa.end(), 0.0);
        for (std::size_t b = a + 1; b < m; ++b) {
            const double* xb = xs + b * d;
            double r2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                r[k] = xa[k] - xb[k];
                r2 += r[k] * r[k];
            }
            const double gv = g(r2);
            for (std::size_t k = 0; k < d; ++k) {
                const double f = gv * r[k];
                sa[k] += ws[b] * f;
                acc[b * d + k] -= ws[a] * f;
            }
        }
        for (std::size_t k = 0; k < d; ++k) acc[a * d + k] += sa[k];
    }
}

const RadialFunction* odd_function(const SystemModel& model, bool& charged)
{
    const auto& inter = model.kernel().interaction;
    charged = false;
    const RadialFunction* f = nullptr;
    if (const auto* k = std::get_if<RadialKernel>(&inter)) f = &k->f;
    if (const auto* k = std::get_if<ChargedKernel>(&inter)) {
        f = &k->f;
        charged = true;
    }
    if (f && is_odd(*f)) return f;
    return nullptr;
}

// out_a = scale * sum_{b in members, b != a} m_b K_ab(x_a, x_b) for every member.
void interaction_subset(const SystemModel& model, std::span<const Index> members,
                        std::span<const double> x, double scale, std::span<double> out)
{
    const std::size_t d = model.dim();
    const std::size_t m = members.size();
    const auto& inter = model.kernel().interaction;
    const auto& species = model.species();

    if (std::holds_alternative<ZeroKernel>(inter)) {
        for (Index a : members)
            for (std::size_t k = 0; k < d; ++k) out[a * d + k] = 0.0;
        return;
    }

    bool charged = false;
    if (const RadialFunction* f = odd_function(model, charged)) {
        auto& s = scratch();
        s.x.resize(m * d);
        s.w.resize(m);
        s.acc.assign(m * d, 0.0);
        for (std::size_t a = 0; a < m; ++a) {
            const Index i = members[a];
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                        s.x.begin() + static_cast<std::ptrdiff_t>(a * d));
            // contribution to a: z_a z_b m_b F(r_ab); to b: -z_b z_a m_a F(r_ab)
            s.w[a] = model.weights().mass(i) * (charged ? species.charge(i) : 1);
        }
        const double* xs = s.x.data();
        const double* ws = s.w.data();
        double* acc = s.acc.data();
        std::visit(
            [&](const auto& fn) {
                using T = std::decay_t<decltype(fn)>;
                if constexpr (std::is_same_v<T, GaussianEnvelopeFn>) {
                    antisymmetric_loop(m, d, xs, ws, acc,
                                       GaussianProfile{fn.a, 1.0 / (fn.s * fn.s)});
                }
                else if constexpr (std::is_same_v<T, LinearFn>) {
                    antisymmetric_loop(m, d, xs, ws, acc, LinearProfile{fn.a});
                }
                else if constexpr (std::is_same_v<T, CosineEnvelopeFn>) {
                    antisymmetric_loop(m, d, xs, ws, acc,
                                       CosineProfile{fn.a, fn.omega});
                }
            },
            *f);
        for (std::size_t a = 0; a < m; ++a) {
            const Index i = members[a];
            const double sign = charged ? species.charge(i) : 1.0;
            for (std::size_t k = 0; k < d; ++k) {
                out[i * d + k] = scale * sign * acc[a * d + k];
            }
        }
        return;
    }

    // Generic ordered double loop for kernels without pair antisymmetry.
    std::vector<double> acc(d);
    for (Index i : members) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const auto xi = x.subspan(i * d, d);
        for (Index j : members) {
            if (j == i) continue;
            const Vec kij = kernel_eval(model, i, j, xi, x.subspan(j * d, d));
            const double mj = model.weights().mass(j);
            for (std::size_t k = 0; k < d; ++k) acc[k] += mj * kij[k];
        }
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] = scale * acc[k];
    }
}

void check_shapes(const SystemModel& model, std::span<const double> x,
                  std::span<double> out)
{
    const std::size_t n = model.size() * model.dim();
    if (x.size() != n || out.size() != n) {
        throw InvalidArgument("interaction: arrays must be N x d");
    }
}

}  // namespace

void interaction_full(const SystemModel& model, std::span<const double> x,
                      std::span<double> out)
{
    if (model.size() < 2) throw InvalidModel("interaction_full needs N >= 2");
    check_shapes(model, x, out);
    const double scale = 1.0 / static_cast<double>(model.size() - 1);
    interaction_subset(model, identity_indices(model.size()), x, scale, out);
}

void interaction_batch(const SystemModel& model, std::span<const double> x,
                       const BatchPartition& partition, std::span<double> out)
{
    if (model.batch_size() < 2) throw InvalidModel("interaction_batch needs p >= 2");
    check_shapes(model, x, out);
    if (partition.size() != model.size() ||
        partition.batch_size() != model.batch_size()) {
        throw InvalidArgument("partition does not match model (N, p)");
    }
    const double scale = 1.0 / static_cast<double>(model.batch_size() - 1);
    for (std::size_t q = 0; q < partition.num_batches(); ++q) {
        interaction_subset(model, partition.batch(q), x, scale, out);
    }
}

}  // namespace rbm
