#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rbm/batching.hpp"
#include "rbm/integrator.hpp"
#include "rbm/model.hpp"

namespace rbm {

//---------------------------------------------------------------------------//
// Test functions (all bounded with bounded derivatives)
//---------------------------------------------------------------------------//
struct ConstantPhi {
    double c = 1.0;
};
/// cos(k . x) + offset
struct CosineMode {
    std::vector<double> k;
    double offset = 0.0;
};
/// exp(-|x - center|^2 / width^2)
struct GaussianBump {
    std::vector<double> center;
    double width = 1.0;
};
/// x_axis inside |x| <= radius, smoothly cut off to 0 beyond 2 radius.
struct CoordinateCutoff {
    std::size_t axis = 0;
    double radius = 10.0;
};

using TestFunction = std::variant<ConstantPhi, CosineMode, GaussianBump, CoordinateCutoff>;

double evaluate(const TestFunction& phi, std::span<const double> x);
/// sup_x |phi(x)|
double sup_bound(const TestFunction& phi);
std::string name(const TestFunction& phi);

/// Three cosine modes (|k| = 1, 2, 3 along the first axis) and a unit
/// Gaussian bump at the origin.
std::vector<TestFunction> default_battery(std::size_t d);

//---------------------------------------------------------------------------//
// Estimates
//---------------------------------------------------------------------------//
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;  // standard error of `value`
    std::size_t samples = 0;
};

/// Sample mean and standard error in a fixed summation order.
Estimate mean_estimate(std::span<const double> samples);

//---------------------------------------------------------------------------//
// Error functionals
//---------------------------------------------------------------------------//

/// (1/(2N)) sum_i m_i |x~_i - x_i|^2 for one realization.
double weighted_squared_deviation(const WeightVector& weights, std::size_t d,
                                  const ParticleState& ref, const ParticleState& rbm);

/*!
 * Monte Carlo estimate of J(t_k) = (1/(2N)) sum_i m_i E|X~^i - X^i|^2 over a
 * coupled ensemble: |Z^i|^2 is averaged over realizations first, then
 * weighted. The standard error comes from the per-realization values.
 */
Estimate strong_error_J(const WeightVector& weights,
                        std::span<const CoupledTrajectory> ensemble, std::size_t k);

/// <mu^N, phi> = (1/N) sum_j omega_j phi(X^j)
double empirical_apply(const ParticleState& state, const WeightVector& weights,
                       const TestFunction& phi);

/// Species-restricted measure (1/N) sum_{j : label_j = s} omega_j phi(X^j).
/// Summing over every label recovers empirical_apply.
double empirical_apply_species(const ParticleState& state, const WeightVector& weights,
                               const SpeciesSpec& species, int label,
                               const TestFunction& phi);

enum class Pairing { Coupled, Independent };

/*!
 * E_k = |mean_r <mu_rbm, phi> - mean_r <mu_ref, phi>|. With Pairing::Coupled
 * the two ensembles must be realization-aligned and the standard error is
 * that of the paired differences; otherwise the two variances add.
 */
Estimate weak_error(std::span<const ParticleState> ref_states,
                    std::span<const ParticleState> rbm_states,
                    const WeightVector& weights, const TestFunction& phi,
                    Pairing pairing = Pairing::Coupled);

/// Coupled weak error at grid index k of an ensemble of trajectories.
Estimate weak_error(std::span<const CoupledTrajectory> ensemble,
                    const WeightVector& weights, const TestFunction& phi, std::size_t k);

//---------------------------------------------------------------------------//
// Consistency of the random force error
//---------------------------------------------------------------------------//
struct ChiMomentReport {
    Index particle = 0;
    bool exhaustive = false;
    std::size_t draws = 0;
    double mean_norm = 0.0;      // |E chi_i|
    double second_moment = 0.0;  // E |chi_i|^2
    double lambda = 0.0;         // Lambda_i(x)
    double predicted = 0.0;      // (1/(p-1) - 1/(N-1)) Lambda_i(x)
    double second_stderr = 0.0;  // Monte Carlo only
};

/*!
 * Exact moments of chi_i over every division when their number is at most
 * kMaxEnumeratedDivisions; otherwise `mc_samples` partitions drawn from `rng`
 * (mc_samples must then be > 0).
 */
ChiMomentReport chi_moment_check(const SystemModel& model, const ParticleState& state,
                                 Index i, std::size_t mc_samples = 0,
                                 RngStream* rng = nullptr);

}  // namespace rbm
