#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbm/batching.hpp"
#include "rbm/model.hpp"
#include "rbm/rng.hpp"

namespace rbm {

/// Brownian increments for one Euler-Maruyama sub-step, N x d, each entry
/// N(0, dt).
struct NoiseBlock {
    std::vector<double> increments;
};

//---------------------------------------------------------------------------//
/*!
 * Brownian increments on a fixed fine grid of step `dt`, generated on demand
 * from the counter stream (seed, Noise, realization, fine step). Increments
 * for a coarser step are exact sums of consecutive fine increments.
 */
class NoiseSource {
  public:
    NoiseSource(std::uint64_t seed, std::uint32_t realization, std::size_t n_values,
                double dt);

    double dt() const { return dt_; }
    std::size_t size() const { return n_values_; }

    /// Increments of fine step `step` (covering [step*dt, (step+1)*dt)).
    void fill(std::uint64_t step, std::span<double> out) const;
    NoiseBlock block(std::uint64_t step) const;

  private:
    std::uint64_t seed_;
    std::uint32_t realization_;
    std::size_t n_values_;
    double dt_;
    double scale_;
};

/// One Euler-Maruyama step of the full-interaction system.
ParticleState step_reference(const SystemModel& model, const ParticleState& state,
                             double dt, const NoiseBlock& noise);

/// `noise.size()` Euler-Maruyama sub-steps of size tau / substeps with the
/// batch interaction of a fixed partition.
ParticleState step_rbm(const SystemModel& model, const ParticleState& state,
                       const BatchPartition& partition, double tau,
                       std::size_t substeps, std::span<const NoiseBlock> noise);

/// Initial data for one realization: drawn from the model's initial
/// condition with stream (seed, Initial, realization).
ParticleState initial_state(const SystemModel& model, std::uint64_t seed,
                            std::uint32_t realization);

/// Partition used by the RBM macro-step k (1-based) of a realization.
BatchPartition macro_step_partition(const SystemModel& model, std::uint64_t seed,
                                    std::uint32_t realization, std::size_t k);

struct CoupledTrajectory {
    std::vector<double> times;                // t_k = k tau, k = 0..N_T
    std::vector<ParticleState> ref_states;    // reference X at t_k
    std::vector<ParticleState> rbm_states;    // RBM X~ at t_k
    std::uint64_t seed = 0;
    std::uint32_t realization = 0;
    std::size_t ref_substeps = 0;
    std::size_t rbm_substeps = 0;
};

/*!
 * Reference and RBM trajectories driven by the same initial data and the
 * same Brownian path. The reference runs Euler-Maruyama with step
 * tau / ref_substeps; RBM sub-step noise is the exact sum of the matching
 * reference increments. Requires ref_substeps % rbm_substeps == 0.
 */
CoupledTrajectory simulate_coupled(const SystemModel& model, std::uint64_t seed,
                                   std::uint32_t realization,
                                   std::size_t ref_substeps_per_tau = 10,
                                   std::size_t rbm_substeps_per_tau = 1);

//---------------------------------------------------------------------------//
/*!
 * Several RBM step sizes advanced in lockstep against one reference
 * trajectory. All levels share the reference fine step `fine_dt`; level l
 * has macro-step tau_l = fine_per_macro[l] * fine_dt. Each realization costs
 * one reference solve regardless of the number of levels, and every level
 * sees exactly what simulate_coupled would produce for it.
 */
class CoupledRunner {
  public:
    struct Level {
        double tau = 0.0;
        std::size_t fine_per_macro = 1;  // reference sub-steps per macro-step
        std::size_t rbm_substeps = 1;    // must divide fine_per_macro
    };

    /// Called at every grid point t_k of every level, k = 0..N_T(level).
    using Observer = std::function<void(std::size_t level, std::size_t k,
                                        const ParticleState& ref,
                                        const ParticleState& rbm)>;

    CoupledRunner(const SystemModel& model, double fine_dt, std::vector<Level> levels);

    const std::vector<Level>& levels() const { return levels_; }
    std::size_t fine_steps() const { return fine_steps_; }
    std::size_t macro_steps(std::size_t level) const;

    /// Throws Divergence when a state becomes non-finite.
    void run(std::uint64_t seed, std::uint32_t realization, const Observer& observe) const;

  private:
    SystemModel model_;
    double fine_dt_;
    std::vector<Level> levels_;
    std::size_t fine_steps_ = 0;
};

}  // namespace rbm
