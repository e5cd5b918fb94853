#include "rbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rbm/batching.hpp"
#include "rbm/errors.hpp"

namespace rbm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double norm2(std::span<const double> r)
{
    double s = 0.0;
    for (double c : r) s += c * c;
    return s;
}

void require_finite(double value, const char* what)
{
    if (!std::isfinite(value)) {
        throw InvalidModel(std::string(what) + " must be finite");
    }
}

void validate_function(const RadialFunction& f)
{
    std::visit(Overloaded{
                   [](const ZeroFn&) {},
                   [](const LinearFn& g) { require_finite(g.a, "linear.a"); },
                   [](const GaussianEnvelopeFn& g) {
                       require_finite(g.a, "gaussian.a");
                       require_finite(g.s, "gaussian.s");
                       if (g.s <= 0.0) throw InvalidModel("gaussian.s must be > 0");
                   },
                   [](const CosineEnvelopeFn& g) {
                       require_finite(g.a, "cosine.a");
                       require_finite(g.omega, "cosine.omega");
                   },
                   [](const ConstantFn& g) { require_finite(g.c, "constant.c"); },
               },
               f);
}

}  // namespace

//---------------------------------------------------------------------------//
// WeightVector
//---------------------------------------------------------------------------//
WeightVector::WeightVector(std::vector<double> masses, std::optional<double> bound)
    : masses_(std::move(masses))
{
    if (masses_.empty()) throw InvalidModel("weights: need at least one particle");
    double total = 0.0;
    double largest = 0.0;
    for (double m : masses_) {
        if (!std::isfinite(m) || m < 0.0) {
            throw InvalidModel("weights: every m_j must be finite and >= 0");
        }
        total += m;
        largest = std::max(largest, m);
    }
    if (!(total > 0.0)) throw InvalidModel("weights: at least one m_j must be > 0");
    if (bound) {
        if (!(*bound >= largest)) {
            std::ostringstream msg;
            msg << "weights: max m_j = " << largest << " exceeds declared bound "
                << *bound;
            throw InvalidModel(msg.str());
        }
        bound_ = *bound;
    }
    else {
        bound_ = largest;
    }
    const auto n = static_cast<double>(masses_.size());
    mean_ = total / n;
    omegas_.resize(masses_.size());
    for (std::size_t j = 0; j < masses_.size(); ++j) {
        omegas_[j] = n * masses_[j] / total;
    }
}

WeightVector WeightVector::permuted(std::span<const Index> perm) const
{
    if (perm.size() != masses_.size()) {
        throw InvalidArgument("permuted: permutation has wrong length");
    }
    std::vector<double> m(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) m[k] = masses_.at(perm[k]);
    return WeightVector(std::move(m), bound_);
}

int SpeciesSpec::num_species() const
{
    if (labels.empty()) return 1;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

//---------------------------------------------------------------------------//
// Radial functions and drifts
//---------------------------------------------------------------------------//
void evaluate(const RadialFunction& f, std::span<const double> r,
              std::span<double> out)
{
    const std::size_t d = r.size();
    std::visit(Overloaded{
                   [&](const ZeroFn&) { std::fill(out.begin(), out.end(), 0.0); },
                   [&](const LinearFn& g) {
                       for (std::size_t k = 0; k < d; ++k) out[k] = g.a * r[k];
                   },
                   [&](const GaussianEnvelopeFn& g) {
                       const double e = g.a * std::exp(-norm2(r) / (g.s * g.s));
                       for (std::size_t k = 0; k < d; ++k) out[k] = e * r[k];
                   },
                   [&](const CosineEnvelopeFn& g) {
                       const double r2 = norm2(r);
                       const double e =
                           g.a * std::cos(g.omega * std::sqrt(r2)) / std::sqrt(1.0 + r2);
                       for (std::size_t k = 0; k < d; ++k) out[k] = e * r[k];
                   },
                   [&](const ConstantFn& g) { std::fill(out.begin(), out.end(), g.c); },
               },
               f);
}

bool is_odd(const RadialFunction& f)
{
    return !std::holds_alternative<ConstantFn>(f);
}

std::optional<double> sup_bound(const RadialFunction& f, std::size_t d)
{
    return std::visit(
        Overloaded{
            [](const ZeroFn&) -> std::optional<double> { return 0.0; },
            [](const LinearFn& g) -> std::optional<double> {
                if (g.a == 0.0) return 0.0;
                return std::nullopt;
            },
            [](const GaussianEnvelopeFn& g) -> std::optional<double> {
                // max of s*t*exp(-t^2) over t >= 0 is at t = 1/sqrt(2)
                return std::abs(g.a) * g.s * std::exp(-0.5) / std::sqrt(2.0);
            },
            [](const CosineEnvelopeFn& g) -> std::optional<double> {
                return std::abs(g.a);
            },
            [d](const ConstantFn& g) -> std::optional<double> {
                return std::abs(g.c) * std::sqrt(static_cast<double>(d));
            },
        },
        f);
}

std::string name(const RadialFunction& f)
{
    return std::visit(Overloaded{
                          [](const ZeroFn&) { return std::string("zero"); },
                          [](const LinearFn&) { return std::string("linear"); },
                          [](const GaussianEnvelopeFn&) {
                              return std::string("gaussian_envelope");
                          },
                          [](const CosineEnvelopeFn&) {
                              return std::string("cosine_envelope");
                          },
                          [](const ConstantFn&) { return std::string("constant"); },
                      },
                      f);
}

void evaluate(const Drift& b, std::span<const double> x, std::span<double> out)
{
    const std::size_t d = x.size();
    std::visit(Overloaded{
                   [&](const ZeroDrift&) { std::fill(out.begin(), out.end(), 0.0); },
                   [&](const LinearDrift& g) {
                       for (std::size_t k = 0; k < d; ++k) {
                           const double c = g.center.empty() ? 0.0 : g.center[k];
                           out[k] = -g.kappa * (x[k] - c);
                       }
                   },
                   [&](const DoubleWellDrift& g) {
                       const double r2 = norm2(x);
                       for (std::size_t k = 0; k < d; ++k) {
                           out[k] = g.alpha * x[k] - r2 * x[k];
                       }
                   },
               },
               b);
}

std::string name(const Drift& b)
{
    return std::visit(Overloaded{
                          [](const ZeroDrift&) { return std::string("zero"); },
                          [](const LinearDrift&) { return std::string("linear"); },
                          [](const DoubleWellDrift&) {
                              return std::string("double_well");
                          },
                      },
                      b);
}

//---------------------------------------------------------------------------//
// SystemModel
//---------------------------------------------------------------------------//
namespace {

WeightVector make_weights(const SystemModel::Params& p)
{
    if (p.n_particles == 0) throw InvalidModel("N must be >= 1");
    if (p.masses.empty()) {
        return WeightVector(std::vector<double>(p.n_particles, 1.0), p.mass_bound);
    }
    if (p.masses.size() != p.n_particles) {
        throw InvalidModel("weights: expected N entries");
    }
    return WeightVector(p.masses, p.mass_bound);
}

void validate_initial(const InitialField& field, std::size_t expected,
                      const char* what)
{
    if (const auto* e = std::get_if<ExplicitInit>(&field)) {
        if (e->values.size() != expected) {
            throw InvalidModel(std::string(what) + ": expected N*d values");
        }
        if (!all_finite(e->values)) {
            throw InvalidModel(std::string(what) + ": values must be finite");
        }
    }
    if (const auto* g = std::get_if<NormalInit>(&field)) {
        require_finite(g->mean, what);
        if (!(g->stddev >= 0.0) || !std::isfinite(g->stddev)) {
            throw InvalidModel(std::string(what) + ": stddev must be >= 0");
        }
    }
}

}  // namespace

SystemModel::SystemModel(Params params)
    : params_(std::move(params)), weights_(make_weights(params_))
{
    const auto& p = params_;
    if (p.d == 0) throw InvalidModel("d must be >= 1");
    if (p.batch_size == 0) throw InvalidModel("p must be >= 1");
    if (p.n_particles % p.batch_size != 0) {
        throw InvalidModel("p must divide N");
    }
    const std::size_t n = p.n_particles;
    if (!p.species.labels.empty()) {
        if (p.species.labels.size() != n) {
            throw InvalidModel("species.labels must have N entries");
        }
        for (int label : p.species.labels) {
            if (label < 0) throw InvalidModel("species labels must be >= 0");
        }
    }
    if (!p.species.charges.empty()) {
        if (p.species.charges.size() != n) {
            throw InvalidModel("species.charges must have N entries");
        }
        for (int z : p.species.charges) {
            if (z != 1 && z != -1) throw InvalidModel("charges must be +1 or -1");
        }
    }

    std::visit(Overloaded{
                   [](const ZeroKernel&) {},
                   [](const RadialKernel& k) { validate_function(k.f); },
                   [&](const ChargedKernel& k) {
                       validate_function(k.f);
                       if (p.species.charges.empty()) {
                           throw InvalidModel("charged kernel requires species.charges");
                       }
                   },
                   [&](const PairwiseTableKernel& k) {
                       const auto s = static_cast<std::size_t>(p.species.num_species());
                       if (k.table.size() < s) {
                           throw InvalidModel("pairwise table smaller than species count");
                       }
                       for (const auto& row : k.table) {
                           if (row.size() != k.table.size()) {
                               throw InvalidModel("pairwise table must be square");
                           }
                           for (const auto& f : row) validate_function(f);
                       }
                   },
               },
               p.kernel.interaction);

    if (const auto* lin = std::get_if<LinearDrift>(&p.kernel.drift)) {
        require_finite(lin->kappa, "drift.kappa");
        if (!lin->center.empty() && lin->center.size() != p.d) {
            throw InvalidModel("drift.center must have d entries");
        }
    }
    if (const auto* dw = std::get_if<DoubleWellDrift>(&p.kernel.drift)) {
        require_finite(dw->alpha, "drift.alpha");
    }

    if (!std::isfinite(p.sigma) || p.sigma < 0.0) throw InvalidModel("sigma must be >= 0");
    if (const auto* so = std::get_if<SecondOrder>(&p.dynamics)) {
        if (!std::isfinite(so->gamma) || so->gamma < 0.0) {
            throw InvalidModel("gamma must be >= 0");
        }
    }
    if (!(p.final_time > 0.0) || !std::isfinite(p.final_time)) {
        throw InvalidModel("T must be > 0");
    }
    if (!(p.tau > 0.0) || !std::isfinite(p.tau)) throw InvalidModel("tau must be > 0");

    validate_initial(p.initial.positions, n * p.d, "initial.positions");
    validate_initial(p.initial.velocities, n * p.d, "initial.velocities");
}

double SystemModel::gamma() const
{
    if (const auto* so = std::get_if<SecondOrder>(&params_.dynamics)) return so->gamma;
    return 0.0;
}

std::size_t SystemModel::num_steps(double tau) const
{
    if (!(tau > 0.0)) throw InvalidArgument("tau must be > 0");
    const double q = params_.final_time / tau;
    const double nearest = std::round(q);
    if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, nearest)) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(q));
}

bool SystemModel::antisymmetric_pairs() const
{
    return std::visit(Overloaded{
                          [](const ZeroKernel&) { return true; },
                          [](const RadialKernel& k) { return is_odd(k.f); },
                          [](const ChargedKernel& k) { return is_odd(k.f); },
                          [](const PairwiseTableKernel&) { return false; },
                      },
                      params_.kernel.interaction);
}

SystemModel SystemModel::with_tau(double tau) const
{
    Params p = params_;
    p.tau = tau;
    return SystemModel(std::move(p));
}

SystemModel SystemModel::with_batch_size(std::size_t batch) const
{
    Params p = params_;
    p.batch_size = batch;
    return SystemModel(std::move(p));
}

SystemModel SystemModel::with_kernel(KernelSpec kernel) const
{
    Params p = params_;
    p.kernel = std::move(kernel);
    return SystemModel(std::move(p));
}

bool all_finite(std::span<const double> values)
{
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

void validate_state(const SystemModel& model, const ParticleState& state)
{
    const std::size_t expected = model.size() * model.dim();
    if (state.x.size() != expected) {
        throw InvalidArgument("state: positions must be N x d");
    }
    if (model.second_order() != (state.v.size() == expected)) {
        throw InvalidArgument("state: velocities present iff dynamics is second order");
    }
    if (!model.second_order() && !state.v.empty()) {
        throw InvalidArgument("state: first-order state carries velocities");
    }
    if (!all_finite(state.x) || !all_finite(state.v) || !std::isfinite(state.t)) {
        throw NumericDomain("state: non-finite entries");
    }
}

//---------------------------------------------------------------------------//
// Single-particle force evaluation (generic, any kernel)
//---------------------------------------------------------------------------//
namespace {

void kernel_into(const SystemModel& model, Index i, Index j,
                 std::span<const double> xi, std::span<const double> xj,
                 std::span<double> out, std::span<double> r)
{
    for (std::size_t k = 0; k < xi.size(); ++k) r[k] = xi[k] - xj[k];
    const auto& species = model.species();
    std::visit(Overloaded{
                   [&](const ZeroKernel&) { std::fill(out.begin(), out.end(), 0.0); },
                   [&](const RadialKernel& k) { evaluate(k.f, r, out); },
                   [&](const ChargedKernel& k) {
                       evaluate(k.f, r, out);
                       const double zz = species.charge(i) * species.charge(j);
                       for (double& c : out) c *= zz;
                   },
                   [&](const PairwiseTableKernel& k) {
                       const auto a = static_cast<std::size_t>(species.label(i));
                       const auto b = static_cast<std::size_t>(species.label(j));
                       evaluate(k.table[a][b], r, out);
                   },
               },
               model.kernel().interaction);
}

void check_index(const SystemModel& model, Index i)
{
    if (i >= model.size()) throw InvalidArgument("particle index out of range");
}

// sum_{j in members, j != i} m_j K_ij(x_i, x_j), in member order
Vec interaction_sum(const SystemModel& model, Index i, const ParticleState& state,
                    std::span<const Index> members)
{
    const std::size_t d = model.dim();
    Vec acc(d, 0.0), term(d), r(d);
    const auto xi = state.position(i, d);
    for (Index j : members) {
        if (j == i) continue;
        kernel_into(model, i, j, xi, state.position(j, d), term, r);
        const double mj = model.weights().mass(j);
        for (std::size_t k = 0; k < d; ++k) acc[k] += mj * term[k];
    }
    return acc;
}

std::vector<Index> all_indices(std::size_t n)
{
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
}

void check_partition(const SystemModel& model, const BatchPartition& partition)
{
    if (partition.size() != model.size() ||
        partition.batch_size() != model.batch_size()) {
        throw InvalidArgument("partition does not match model (N, p)");
    }
}

}  // namespace

Vec kernel_eval(const SystemModel& model, Index i, Index j,
                std::span<const double> xi, std::span<const double> xj)
{
    check_index(model, i);
    check_index(model, j);
    if (i == j) throw InvalidArgument("kernel_eval: i must differ from j");
    const std::size_t d = model.dim();
    if (xi.size() != d || xj.size() != d) {
        throw InvalidArgument("kernel_eval: positions must be d-vectors");
    }
    if (!all_finite(xi) || !all_finite(xj)) {
        throw NumericDomain("kernel_eval: non-finite position");
    }
    Vec out(d), r(d);
    kernel_into(model, i, j, xi, xj, out, r);
    return out;
}

Vec force_full(const SystemModel& model, Index i, const ParticleState& state)
{
    if (model.size() < 2) throw InvalidModel("force_full needs N >= 2");
    check_index(model, i);
    validate_state(model, state);
    const std::size_t d = model.dim();
    Vec acc = interaction_sum(model, i, state, all_indices(model.size()));
    Vec b(d);
    evaluate(model.kernel().drift, state.position(i, d), b);
    const double scale = 1.0 / static_cast<double>(model.size() - 1);
    for (std::size_t k = 0; k < d; ++k) b[k] += scale * acc[k];
    return b;
}

Vec force_batch(const SystemModel& model, Index i, const ParticleState& state,
                const BatchPartition& partition)
{
    if (model.batch_size() < 2) throw InvalidModel("force_batch needs p >= 2");
    check_index(model, i);
    check_partition(model, partition);
    validate_state(model, state);
    const std::size_t d = model.dim();
    Vec acc = interaction_sum(model, i, state, partition.members_with(i));
    Vec b(d);
    evaluate(model.kernel().drift, state.position(i, d), b);
    const double scale = 1.0 / static_cast<double>(model.batch_size() - 1);
    for (std::size_t k = 0; k < d; ++k) b[k] += scale * acc[k];
    return b;
}

Vec chi(const SystemModel& model, Index i, const ParticleState& state,
        const BatchPartition& partition)
{
    if (model.batch_size() < 2) throw InvalidModel("chi needs p >= 2");
    check_index(model, i);
    check_partition(model, partition);
    validate_state(model, state);
    const Vec batch = interaction_sum(model, i, state, partition.members_with(i));
    const Vec full = interaction_sum(model, i, state, all_indices(model.size()));
    const double pb = 1.0 / static_cast<double>(model.batch_size() - 1);
    const double pf = 1.0 / static_cast<double>(model.size() - 1);
    Vec out(model.dim());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = pb * batch[k] - pf * full[k];
    return out;
}

double lambda_i(const SystemModel& model, Index i, const ParticleState& state)
{
    const std::size_t n = model.size();
    if (n < 3) throw InvalidModel("lambda_i needs N >= 3");
    check_index(model, i);
    validate_state(model, state);
    const std::size_t d = model.dim();

    // two passes: mean of the per-neighbor terms, then squared deviations
    std::vector<Vec> terms;
    terms.reserve(n - 1);
    Vec term(d), r(d);
    const auto xi = state.position(i, d);
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        kernel_into(model, i, j, xi, state.position(j, d), term, r);
        Vec t(d);
        for (std::size_t k = 0; k < d; ++k) t[k] = model.weights().mass(j) * term[k];
        terms.push_back(std::move(t));
    }
    Vec mean(d, 0.0);
    for (const auto& t : terms)
        for (std::size_t k = 0; k < d; ++k) mean[k] += t[k];
    for (double& c : mean) c /= static_cast<double>(n - 1);
    double total = 0.0;
    for (const auto& t : terms) {
        for (std::size_t k = 0; k < d; ++k) {
            const double dev = t[k] - mean[k];
            total += dev * dev;
        }
    }
    return total / static_cast<double>(n - 2);
}

void drift_all(const SystemModel& model, std::span<const double> x,
               std::span<double> out)
{
    const std::size_t d = model.dim();
    const Drift& b = model.kernel().drift;
    if (std::holds_alternative<ZeroDrift>(b)) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (Index i = 0; i < model.size(); ++i) {
        evaluate(b, x.subspan(i * d, d), out.subspan(i * d, d));
    }
}

}  // namespace rbm
