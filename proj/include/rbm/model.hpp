#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rbm {

using Index = std::size_t;

class BatchPartition;

//---------------------------------------------------------------------------//
// Weights
//---------------------------------------------------------------------------//
/*!
 * Per-particle masses (or charge magnitudes) m_j >= 0 together with the
 * normalized weights omega_j = N m_j / sum_k m_k used by the empirical
 * measure. Construction validates the invariants; the object is immutable.
 */
class WeightVector {
  public:
    /// `bound` is the declared uniform upper bound A on max_j m_j; when
    /// absent the observed maximum is used.
    explicit WeightVector(std::vector<double> masses,
                          std::optional<double> bound = std::nullopt);

    std::size_t size() const { return masses_.size(); }
    double mass(Index j) const { return masses_[j]; }
    double omega(Index j) const { return omegas_[j]; }
    std::span<const double> masses() const { return masses_; }
    std::span<const double> omegas() const { return omegas_; }

    /// M = (1/N) sum_j m_j
    double mean() const { return mean_; }
    /// A, an upper bound for every m_j
    double bound() const { return bound_; }

    /// Same weights with every particle index relabeled: result[k] = m[perm[k]].
    WeightVector permuted(std::span<const Index> perm) const;

  private:
    std::vector<double> masses_;
    std::vector<double> omegas_;
    double mean_ = 0.0;
    double bound_ = 0.0;
};

//---------------------------------------------------------------------------//
// Species
//---------------------------------------------------------------------------//
struct SpeciesSpec {
    std::vector<int> labels;   // empty => single species 0
    std::vector<int> charges;  // z_i in {-1, +1}; required by Charged kernels

    int label(Index i) const { return labels.empty() ? 0 : labels[i]; }
    int charge(Index i) const { return charges.empty() ? 1 : charges[i]; }
    int num_species() const;
};

//---------------------------------------------------------------------------//
// Interaction functions F(r), r = x - y in R^d
//---------------------------------------------------------------------------//
struct ZeroFn {
};

/// F(r) = a r. Unbounded: violates the bounded-kernel assumption and is
/// meant only for hand-checkable tests.
struct LinearFn {
    double a = 1.0;
};

/// F(r) = a r exp(-|r|^2 / s^2); |F| <= |a| s exp(-1/2) / sqrt(2).
struct GaussianEnvelopeFn {
    double a = 1.0;
    double s = 1.0;
};

/// F(r) = a cos(omega |r|) r / sqrt(1 + |r|^2); |F| <= |a|.
struct CosineEnvelopeFn {
    double a = 1.0;
    double omega = 1.0;
};

/// F(r) = c (1, ..., 1). Even in r, so it cannot use the antisymmetric
/// pair loop.
struct ConstantFn {
    double c = 1.0;
};

using RadialFunction = std::variant<ZeroFn, LinearFn, GaussianEnvelopeFn,
                                    CosineEnvelopeFn, ConstantFn>;

void evaluate(const RadialFunction& f, std::span<const double> r,
              std::span<double> out);
/// F(-r) = -F(r)
bool is_odd(const RadialFunction& f);
/// sup_r |F(r)| for r in R^d, or nullopt for unbounded functions.
std::optional<double> sup_bound(const RadialFunction& f, std::size_t d = 1);
std::string name(const RadialFunction& f);

//---------------------------------------------------------------------------//
// Interaction kernels K_ij(x, y)
//---------------------------------------------------------------------------//
struct ZeroKernel {
};
/// K_ij(x, y) = F(x - y)
struct RadialKernel {
    RadialFunction f;
};
/// K_ij(x, y) = z_i z_j F(x - y)
struct ChargedKernel {
    RadialFunction f;
};
/// K_ij(x, y) = table[label_i][label_j](x - y)
struct PairwiseTableKernel {
    std::vector<std::vector<RadialFunction>> table;
};

using Interaction =
    std::variant<ZeroKernel, RadialKernel, ChargedKernel, PairwiseTableKernel>;

//---------------------------------------------------------------------------//
// External drift b(x)
//---------------------------------------------------------------------------//
struct ZeroDrift {
};
/// b(x) = -kappa (x - center); center empty means the origin.
struct LinearDrift {
    double kappa = 1.0;
    std::vector<double> center;
};
/// b(x) = alpha x - |x|^2 x
struct DoubleWellDrift {
    double alpha = 1.0;
};

using Drift = std::variant<ZeroDrift, LinearDrift, DoubleWellDrift>;

void evaluate(const Drift& b, std::span<const double> x, std::span<double> out);
std::string name(const Drift& b);

struct KernelSpec {
    Interaction interaction = ZeroKernel{};
    Drift drift = ZeroDrift{};
    // Declared regularity metadata: one-sided Lipschitz constant of b and the
    // polynomial growth exponent. Never inferred.
    double lipschitz_beta = 0.0;
    int growth_q = 1;
};

//---------------------------------------------------------------------------//
// Dynamics and initial data
//---------------------------------------------------------------------------//
struct FirstOrder {
};
struct SecondOrder {
    double gamma = 0.0;
};
using Dynamics = std::variant<FirstOrder, SecondOrder>;

struct ZeroInit {
};
struct NormalInit {
    double mean = 0.0;
    double stddev = 1.0;
};
/// Row-major N x d values.
struct ExplicitInit {
    std::vector<double> values;
};
using InitialField = std::variant<ZeroInit, NormalInit, ExplicitInit>;

struct InitialCondition {
    InitialField positions = NormalInit{};
    InitialField velocities = ZeroInit{};
};

//---------------------------------------------------------------------------//
/*!
 * Full description of the particle system. Immutable once built; every
 * constructor argument is validated.
 */
class SystemModel {
  public:
    struct Params {
        std::size_t d = 1;
        std::size_t n_particles = 2;
        std::size_t batch_size = 2;
        std::vector<double> masses;              // empty => all ones
        std::optional<double> mass_bound;
        SpeciesSpec species;
        KernelSpec kernel;
        double sigma = 0.0;
        Dynamics dynamics = FirstOrder{};
        double final_time = 1.0;
        double tau = 0.1;
        InitialCondition initial;
    };

    explicit SystemModel(Params params);

    std::size_t dim() const { return params_.d; }
    std::size_t size() const { return params_.n_particles; }
    std::size_t batch_size() const { return params_.batch_size; }
    std::size_t num_batches() const { return size() / batch_size(); }
    const WeightVector& weights() const { return weights_; }
    const SpeciesSpec& species() const { return params_.species; }
    const KernelSpec& kernel() const { return params_.kernel; }
    double sigma() const { return params_.sigma; }
    const Dynamics& dynamics() const { return params_.dynamics; }
    bool second_order() const
    {
        return std::holds_alternative<SecondOrder>(params_.dynamics);
    }
    double gamma() const;
    double final_time() const { return params_.final_time; }
    double tau() const { return params_.tau; }
    const InitialCondition& initial() const { return params_.initial; }
    const Params& params() const { return params_; }

    /// N_T = ceil(T / tau), tolerant to round-off in T / tau.
    std::size_t num_steps() const { return num_steps(params_.tau); }
    std::size_t num_steps(double tau) const;

    /// True when the interaction satisfies m_i K_ji(y, x) ~ -K_ij(x, y), so
    /// each pair can be evaluated once for both particles.
    bool antisymmetric_pairs() const;

    /// Copies with one parameter changed (everything re-validated).
    SystemModel with_tau(double tau) const;
    SystemModel with_batch_size(std::size_t p) const;
    SystemModel with_kernel(KernelSpec kernel) const;

  private:
    Params params_;
    WeightVector weights_;
};

//---------------------------------------------------------------------------//
/*!
 * Positions (and velocities for second-order dynamics) of all particles at
 * one time. Arrays are row-major N x d.
 */
struct ParticleState {
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> v;

    std::span<const double> position(Index i, std::size_t d) const
    {
        return std::span<const double>(x).subspan(i * d, d);
    }
    std::span<const double> velocity(Index i, std::size_t d) const
    {
        return std::span<const double>(v).subspan(i * d, d);
    }
};

/// Throws InvalidArgument on shape mismatch and NumericDomain on non-finite
/// entries.
void validate_state(const SystemModel& model, const ParticleState& state);
bool all_finite(std::span<const double> values);

//---------------------------------------------------------------------------//
// Force evaluation
//---------------------------------------------------------------------------//
using Vec = std::vector<double>;

/// K_ij(xi, xj) for i != j.
Vec kernel_eval(const SystemModel& model, Index i, Index j,
                std::span<const double> xi, std::span<const double> xj);

/// b(x_i) + 1/(N-1) sum_{j != i} m_j K_ij(x_i, x_j)
Vec force_full(const SystemModel& model, Index i, const ParticleState& state);

/// b(x_i) + 1/(p-1) sum_{j in batch(i), j != i} m_j K_ij(x_i, x_j)
Vec force_batch(const SystemModel& model, Index i, const ParticleState& state,
                const BatchPartition& partition);

/// Random force error: batch interaction sum minus full interaction sum, with
/// the drift excluded from both.
Vec chi(const SystemModel& model, Index i, const ParticleState& state,
        const BatchPartition& partition);

/// 1/(N-2) sum_{j != i} | m_j K_ij - 1/(N-1) sum_{l != i} m_l K_il |^2
double lambda_i(const SystemModel& model, Index i, const ParticleState& state);

/*!
 * Bulk interaction terms for every particle (drift excluded):
 * out_i = 1/(N-1) sum_{j != i} m_j K_ij(x_i, x_j). `x` and `out` are N x d.
 * Uses the once-per-pair vectorized loop when the kernel allows it.
 */
void interaction_full(const SystemModel& model, std::span<const double> x,
                      std::span<double> out);

/// Bulk batch interaction: out_i = 1/(p-1) sum_{j in batch(i), j != i} ...
void interaction_batch(const SystemModel& model, std::span<const double> x,
                       const BatchPartition& partition, std::span<double> out);

/// Drift b(x_i) for every particle, N x d.
void drift_all(const SystemModel& model, std::span<const double> x,
               std::span<double> out);

}  // namespace rbm
