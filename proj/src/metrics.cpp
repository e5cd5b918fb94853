#include "rbm/metrics.hpp"

#include <cmath>
#include <sstream>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double smooth_step_piece(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// 1 on [0, 1], 0 on [2, inf), C-infinity in between
double cutoff(double s)
{
    const double up = smooth_step_piece(2.0 - s);
    const double down = smooth_step_piece(s - 1.0);
    return up / (up + down);
}

}  // namespace

double evaluate(const TestFunction& phi, std::span<const double> x)
{
    return std::visit(
        Overloaded{
            [](const ConstantPhi& f) { return f.c; },
            [&](const CosineMode& f) {
                double dot = 0.0;
                for (std::size_t k = 0; k < x.size(); ++k) dot += f.k[k] * x[k];
                return std::cos(dot) + f.offset;
            },
            [&](const GaussianBump& f) {
                double r2 = 0.0;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double c = f.center.empty() ? 0.0 : f.center[k];
                    r2 += (x[k] - c) * (x[k] - c);
                }
                return std::exp(-r2 / (f.width * f.width));
            },
            [&](const CoordinateCutoff& f) {
                double r2 = 0.0;
                for (double c : x) r2 += c * c;
                return x[f.axis] * cutoff(std::sqrt(r2) / f.radius);
            },
        },
        phi);
}

double sup_bound(const TestFunction& phi)
{
    return std::visit(Overloaded{
                          [](const ConstantPhi& f) { return std::abs(f.c); },
                          [](const CosineMode& f) { return 1.0 + std::abs(f.offset); },
                          [](const GaussianBump&) { return 1.0; },
                          [](const CoordinateCutoff& f) { return 2.0 * f.radius; },
                      },
                      phi);
}

std::string name(const TestFunction& phi)
{
    std::ostringstream out;
    std::visit(Overloaded{
                   [&](const ConstantPhi& f) { out << "const(" << f.c << ")"; },
                   [&](const CosineMode& f) {
                       out << "cos(k=";
                       for (std::size_t k = 0; k < f.k.size(); ++k) {
                           out << (k ? "," : "") << f.k[k];
                       }
                       out << ")";
                       if (f.offset != 0.0) out << "+" << f.offset;
                   },
                   [&](const GaussianBump& f) { out << "bump(w=" << f.width << ")"; },
                   [&](const CoordinateCutoff& f) {
                       out << "coord(axis=" << f.axis << ",R=" << f.radius << ")";
                   },
               },
               phi);
    return out.str();
}

std::vector<TestFunction> default_battery(std::size_t d)
{
    std::vector<TestFunction> battery;
    for (double k : {1.0, 2.0, 3.0}) {
        std::vector<double> kv(d, 0.0);
        kv[0] = k;
        battery.emplace_back(CosineMode{kv});
    }
    battery.emplace_back(GaussianBump{std::vector<double>(d, 0.0), 1.0});
    return battery;
}

Estimate mean_estimate(std::span<const double> samples)
{
    Estimate e;
    e.samples = samples.size();
    if (samples.empty()) return e;
    double sum = 0.0;
    for (double s : samples) sum += s;
    const auto n = static_cast<double>(samples.size());
    e.value = sum / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double s : samples) ss += (s - e.value) * (s - e.value);
        e.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

double weighted_squared_deviation(const WeightVector& weights, std::size_t d,
                                  const ParticleState& ref, const ParticleState& rbm)
{
    const std::size_t n = weights.size();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        double z2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double z = rbm.x[i * d + k] - ref.x[i * d + k];
            z2 += z * z;
        }
        total += weights.mass(i) * z2;
    }
    return total / (2.0 * static_cast<double>(n));
}

namespace {

void check_ensemble(std::span<const CoupledTrajectory> ensemble, std::size_t k)
{
    if (ensemble.empty()) throw InvalidArgument("ensemble is empty");
    const auto& first = ensemble.front();
    for (const auto& tr : ensemble) {
        if (tr.times.size() != first.times.size() ||
            tr.ref_states.size() != tr.times.size() ||
            tr.rbm_states.size() != tr.times.size()) {
            throw InvalidArgument("ensemble trajectories do not share a grid");
        }
        if (!tr.ref_states.empty() &&
            tr.ref_states.front().x.size() != first.ref_states.front().x.size()) {
            throw InvalidArgument("ensemble trajectories do not share a model");
        }
    }
    if (k >= first.times.size()) throw InvalidArgument("grid index out of range");
}

}  // namespace

Estimate strong_error_J(const WeightVector& weights,
                        std::span<const CoupledTrajectory> ensemble, std::size_t k)
{
    check_ensemble(ensemble, k);
    const std::size_t n = weights.size();
    const std::size_t values = ensemble.front().ref_states[k].x.size();
    if (values % n != 0) throw InvalidArgument("weights do not match ensemble");
    const std::size_t d = values / n;
    const auto r = static_cast<double>(ensemble.size());

    std::vector<double> mean_z2(n, 0.0);
    std::vector<double> per_realization;
    per_realization.reserve(ensemble.size());
    for (const auto& tr : ensemble) {
        const auto& ref = tr.ref_states[k];
        const auto& rbm = tr.rbm_states[k];
        for (Index i = 0; i < n; ++i) {
            double z2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double z = rbm.x[i * d + c] - ref.x[i * d + c];
                z2 += z * z;
            }
            mean_z2[i] += z2 / r;
        }
        per_realization.push_back(weighted_squared_deviation(weights, d, ref, rbm));
    }
    double j = 0.0;
    for (Index i = 0; i < n; ++i) j += weights.mass(i) * mean_z2[i];

    Estimate e = mean_estimate(per_realization);
    e.value = j / (2.0 * static_cast<double>(n));
    return e;
}

double empirical_apply(const ParticleState& state, const WeightVector& weights,
                       const TestFunction& phi)
{
    const std::size_t n = weights.size();
    if (n == 0 || state.x.size() % n != 0) {
        throw InvalidArgument("empirical_apply: state does not match weights");
    }
    if (!all_finite(state.x)) throw NumericDomain("empirical_apply: non-finite state");
    const std::size_t d = state.x.size() / n;
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
        total += weights.omega(j) * evaluate(phi, state.position(j, d));
    }
    return total / static_cast<double>(n);
}

double empirical_apply_species(const ParticleState& state, const WeightVector& weights,
                               const SpeciesSpec& species, int label,
                               const TestFunction& phi)
{
    const std::size_t n = weights.size();
    if (n == 0 || state.x.size() % n != 0) {
        throw InvalidArgument("empirical_apply: state does not match weights");
    }
    if (!all_finite(state.x)) throw NumericDomain("empirical_apply: non-finite state");
    const std::size_t d = state.x.size() / n;
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
        if (species.label(j) != label) continue;
        total += weights.omega(j) * evaluate(phi, state.position(j, d));
    }
    return total / static_cast<double>(n);
}

Estimate weak_error(std::span<const ParticleState> ref_states,
                    std::span<const ParticleState> rbm_states,
                    const WeightVector& weights, const TestFunction& phi,
                    Pairing pairing)
{
    if (ref_states.empty() || rbm_states.empty()) {
        throw InvalidArgument("weak_error: empty ensemble");
    }
    const std::size_t values = ref_states.front().x.size();
    for (const auto& s : ref_states)
        if (s.x.size() != values) throw InvalidArgument("weak_error: mismatched models");
    for (const auto& s : rbm_states)
        if (s.x.size() != values) throw InvalidArgument("weak_error: mismatched models");

    std::vector<double> ref_vals, rbm_vals;
    ref_vals.reserve(ref_states.size());
    rbm_vals.reserve(rbm_states.size());
    for (const auto& s : ref_states) ref_vals.push_back(empirical_apply(s, weights, phi));
    for (const auto& s : rbm_states) rbm_vals.push_back(empirical_apply(s, weights, phi));

    Estimate e;
    if (pairing == Pairing::Coupled) {
        if (ref_states.size() != rbm_states.size()) {
            throw InvalidArgument("weak_error: coupled ensembles must have equal size");
        }
        std::vector<double> diff(ref_vals.size());
        for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = rbm_vals[r] - ref_vals[r];
        e = mean_estimate(diff);
    }
    else {
        const Estimate a = mean_estimate(rbm_vals);
        const Estimate b = mean_estimate(ref_vals);
        e.value = a.value - b.value;
        e.std_error = std::hypot(a.std_error, b.std_error);
        e.samples = std::min(a.samples, b.samples);
    }
    e.value = std::abs(e.value);
    return e;
}

Estimate weak_error(std::span<const CoupledTrajectory> ensemble,
                    const WeightVector& weights, const TestFunction& phi, std::size_t k)
{
    check_ensemble(ensemble, k);
    std::vector<ParticleState> ref, rbm;
    ref.reserve(ensemble.size());
    rbm.reserve(ensemble.size());
    for (const auto& tr : ensemble) {
        ref.push_back(tr.ref_states[k]);
        rbm.push_back(tr.rbm_states[k]);
    }
    return weak_error(ref, rbm, weights, phi, Pairing::Coupled);
}

ChiMomentReport chi_moment_check(const SystemModel& model, const ParticleState& state,
                                 Index i, std::size_t mc_samples, RngStream* rng)
{
    const std::size_t n = model.size();
    const std::size_t p = model.batch_size();
    if (n < 3) throw InvalidArgument("chi_moment_check needs N >= 3");
    if (p < 2) throw InvalidArgument("chi_moment_check needs p >= 2");
    const std::size_t d = model.dim();

    ChiMomentReport report;
    report.particle = i;
    report.lambda = lambda_i(model, i, state);
    report.predicted = (1.0 / static_cast<double>(p - 1) - 1.0 / static_cast<double>(n - 1)) *
                       report.lambda;

    std::vector<double> sum(d, 0.0);
    std::vector<double> squares;
    double sum_sq = 0.0;
    std::size_t count = 0;
    auto accumulate = [&](const BatchPartition& part) {
        const Vec c = chi(model, i, state, part);
        double c2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            sum[k] += c[k];
            c2 += c[k] * c[k];
        }
        sum_sq += c2;
        if (!report.exhaustive) squares.push_back(c2);
        ++count;
    };

    if (division_count(n, p) <= kMaxEnumeratedDivisions) {
        report.exhaustive = true;
        for_each_division(n, p, accumulate);
    }
    else {
        if (mc_samples == 0 || rng == nullptr) {
            throw InvalidArgument(
                "chi_moment_check: too many divisions to enumerate; give samples and rng");
        }
        for (std::size_t s = 0; s < mc_samples; ++s) {
            accumulate(random_partition(n, p, *rng));
        }
        report.second_stderr = mean_estimate(squares).std_error;
    }

    report.draws = count;
    double mean2 = 0.0;
    for (double s : sum) {
        const double m = s / static_cast<double>(count);
        mean2 += m * m;
    }
    report.mean_norm = std::sqrt(mean2);
    report.second_moment = sum_sq / static_cast<double>(count);
    return report;
}

}  // namespace rbm
