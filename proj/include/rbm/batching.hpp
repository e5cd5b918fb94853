#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbm/model.hpp"
#include "rbm/rng.hpp"

namespace rbm {

//---------------------------------------------------------------------------//
/*!
 * One division of {0..N-1} into n = N/p batches of exactly p particles.
 *
 * Members of each batch are stored sorted, so a single batch covering every
 * particle visits them in the same order as the full interaction loop.
 */
class BatchPartition {
  public:
    /// Validates that the batches cover [0, N) exactly once with equal sizes.
    explicit BatchPartition(std::vector<std::vector<Index>> batches);

    std::size_t size() const { return assignment_.size(); }
    std::size_t num_batches() const { return batches_.size(); }
    std::size_t batch_size() const { return batches_.front().size(); }

    std::size_t batch_of(Index i) const { return assignment_[i]; }
    std::span<const Index> batch(std::size_t q) const { return batches_[q]; }
    std::span<const Index> members_with(Index i) const
    {
        return batches_[assignment_[i]];
    }
    const std::vector<std::vector<Index>>& batches() const { return batches_; }
    std::span<const std::size_t> assignment() const { return assignment_; }

    /// Canonical form: batches ordered by their smallest member.
    bool operator==(const BatchPartition& other) const;

  private:
    std::vector<std::vector<Index>> batches_;
    std::vector<std::size_t> assignment_;
};

/// Uniform random division: Fisher-Yates shuffle of [0, N) chopped into
/// consecutive blocks of p. Cost O(N).
BatchPartition random_partition(std::size_t n_particles, std::size_t p,
                                RngStream& rng);

/// I_ij: whether i and j share a batch. Requires i != j.
bool same_batch(const BatchPartition& partition, Index i, Index j);

/// Number of distinct divisions, N! / ((p!)^n n!), as a double (may be inf).
double division_count(std::size_t n_particles, std::size_t p);

/// Visit every division exactly once (each is equally likely under
/// random_partition). Intended for small N.
void for_each_division(std::size_t n_particles, std::size_t p,
                       const std::function<void(const BatchPartition&)>& visit);

inline constexpr double kMaxEnumeratedDivisions = 1e6;

struct IndicatorReport {
    std::size_t n_particles = 0;
    std::size_t batch_size = 0;
    bool exhaustive = false;
    std::size_t draws = 0;  // divisions visited or sampled

    double first = 0.0;   // estimate of E I_ij
    double second = 0.0;  // estimate of E I_ij I_il (distinct i, j, l)
    double first_stderr = 0.0;
    double second_stderr = 0.0;

    double predicted_first = 0.0;   // (p-1)/(N-1)
    double predicted_second = 0.0;  // (p-1)(p-2)/((N-1)(N-2))
};

/*!
 * Estimates the indicator moments for the fixed triple (i, j, l) = (0, 1, 2).
 * Uses exhaustive enumeration when the number of divisions is at most
 * kMaxEnumeratedDivisions (exact frequencies, zero stderr), otherwise
 * `samples` Monte Carlo partitions drawn from consecutive blocks of `rng`.
 */
IndicatorReport indicator_moment_check(std::size_t n_particles, std::size_t p,
                                       std::size_t samples, RngStream& rng);

/// Same, forcing the Monte Carlo path.
IndicatorReport indicator_moment_sample(std::size_t n_particles, std::size_t p,
                                        std::size_t samples, RngStream& rng);

}  // namespace rbm
