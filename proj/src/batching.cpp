#include "rbm/batching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rbm/errors.hpp"

namespace rbm {

BatchPartition::BatchPartition(std::vector<std::vector<Index>> batches)
    : batches_(std::move(batches))
{
    if (batches_.empty()) throw InvalidArgument("partition: no batches");
    const std::size_t p = batches_.front().size();
    if (p == 0) throw InvalidArgument("partition: empty batch");
    std::size_t n = 0;
    for (auto& b : batches_) {
        if (b.size() != p) throw InvalidArgument("partition: unequal batch sizes");
        std::sort(b.begin(), b.end());
        n += b.size();
    }
    std::sort(batches_.begin(), batches_.end(),
              [](const auto& l, const auto& r) { return l.front() < r.front(); });

    constexpr auto kUnset = static_cast<std::size_t>(-1);
    assignment_.assign(n, kUnset);
    for (std::size_t q = 0; q < batches_.size(); ++q) {
        for (Index i : batches_[q]) {
            if (i >= n) throw InvalidArgument("partition: index out of range");
            if (assignment_[i] != kUnset) {
                throw InvalidArgument("partition: index appears twice");
            }
            assignment_[i] = q;
        }
    }
}

bool BatchPartition::operator==(const BatchPartition& other) const
{
    return batches_ == other.batches_;
}

namespace {

void check_sizes(std::size_t n, std::size_t p)
{
    if (p < 2) throw InvalidArgument("batch size p must be >= 2");
    if (n < p || n % p != 0) throw InvalidArgument("p must divide N");
}

}  // namespace

BatchPartition random_partition(std::size_t n_particles, std::size_t p,
                                RngStream& rng)
{
    check_sizes(n_particles, p);
    std::vector<Index> perm(n_particles);
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = n_particles - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(perm[i], perm[j]);
    }
    std::vector<std::vector<Index>> batches(n_particles / p);
    for (std::size_t q = 0; q < batches.size(); ++q) {
        batches[q].assign(perm.begin() + static_cast<std::ptrdiff_t>(q * p),
                          perm.begin() + static_cast<std::ptrdiff_t>((q + 1) * p));
    }
    return BatchPartition(std::move(batches));
}

bool same_batch(const BatchPartition& partition, Index i, Index j)
{
    if (i == j) throw InvalidArgument("same_batch: i must differ from j");
    if (i >= partition.size() || j >= partition.size()) {
        throw InvalidArgument("same_batch: index out of range");
    }
    return partition.batch_of(i) == partition.batch_of(j);
}

double division_count(std::size_t n_particles, std::size_t p)
{
    check_sizes(n_particles, p);
    // batch containing the smallest free index picks p-1 partners each round
    double count = 1.0;
    for (std::size_t left = n_particles; left > 0; left -= p) {
        const std::size_t pool = left - 1;
        double binom = 1.0;
        for (std::size_t k = 1; k < p; ++k) {
            binom *= static_cast<double>(pool - (p - 1) + k) / static_cast<double>(k);
        }
        count *= std::round(binom);
    }
    return count;
}

namespace {

class DivisionEnumerator {
  public:
    DivisionEnumerator(std::size_t n, std::size_t p,
                       const std::function<void(const BatchPartition&)>& visit)
        : n_(n), p_(p), used_(n, false), visit_(visit)
    {
    }

    void run() { open_batch(); }

  private:
    void open_batch()
    {
        const auto first = std::find(used_.begin(), used_.end(), false);
        if (first == used_.end()) {
            visit_(BatchPartition(batches_));
            return;
        }
        const auto lead = static_cast<Index>(first - used_.begin());
        used_[lead] = true;
        batches_.push_back({lead});
        extend(lead + 1);
        batches_.pop_back();
        used_[lead] = false;
    }

    void extend(Index from)
    {
        // batches_ may reallocate during recursion; never hold a reference
        if (batches_.back().size() == p_) {
            open_batch();
            return;
        }
        for (Index j = from; j < n_; ++j) {
            if (used_[j]) continue;
            used_[j] = true;
            batches_.back().push_back(j);
            extend(j + 1);
            batches_.back().pop_back();
            used_[j] = false;
        }
    }

    std::size_t n_;
    std::size_t p_;
    std::vector<bool> used_;
    std::vector<std::vector<Index>> batches_;
    const std::function<void(const BatchPartition&)>& visit_;
};

struct MomentCounter {
    std::size_t n = 0;
    std::size_t pairs = 0;
    std::size_t triples = 0;

    void add(const BatchPartition& part, bool with_triple)
    {
        ++n;
        const bool i01 = part.batch_of(0) == part.batch_of(1);
        if (i01) ++pairs;
        if (with_triple && i01 && part.batch_of(0) == part.batch_of(2)) ++triples;
    }
};

IndicatorReport make_report(std::size_t n_particles, std::size_t p)
{
    IndicatorReport r;
    r.n_particles = n_particles;
    r.batch_size = p;
    const double pm1 = static_cast<double>(p - 1);
    const double nm1 = static_cast<double>(n_particles - 1);
    r.predicted_first = pm1 / nm1;
    if (n_particles >= 3) {
        r.predicted_second = static_cast<double>((p - 1) * (p - 2)) /
                             static_cast<double>((n_particles - 1) * (n_particles - 2));
    }
    else {
        r.predicted_second = std::nan("");
        r.second = std::nan("");
        r.second_stderr = std::nan("");
    }
    return r;
}

}  // namespace

void for_each_division(std::size_t n_particles, std::size_t p,
                       const std::function<void(const BatchPartition&)>& visit)
{
    check_sizes(n_particles, p);
    DivisionEnumerator(n_particles, p, visit).run();
}

IndicatorReport indicator_moment_sample(std::size_t n_particles, std::size_t p,
                                        std::size_t samples, RngStream& rng)
{
    if (samples == 0) throw InvalidArgument("indicator_moment_check: samples must be > 0");
    check_sizes(n_particles, p);
    IndicatorReport r = make_report(n_particles, p);
    const bool triple = n_particles >= 3;
    MomentCounter c;
    for (std::size_t s = 0; s < samples; ++s) {
        c.add(random_partition(n_particles, p, rng), triple);
    }
    const auto ns = static_cast<double>(c.n);
    r.draws = c.n;
    r.first = static_cast<double>(c.pairs) / ns;
    r.first_stderr = std::sqrt(r.first * (1.0 - r.first) / ns);
    if (triple) {
        r.second = static_cast<double>(c.triples) / ns;
        r.second_stderr = std::sqrt(r.second * (1.0 - r.second) / ns);
    }
    return r;
}

IndicatorReport indicator_moment_check(std::size_t n_particles, std::size_t p,
                                       std::size_t samples, RngStream& rng)
{
    if (samples == 0) throw InvalidArgument("indicator_moment_check: samples must be > 0");
    if (division_count(n_particles, p) > kMaxEnumeratedDivisions) {
        return indicator_moment_sample(n_particles, p, samples, rng);
    }
    IndicatorReport r = make_report(n_particles, p);
    const bool triple = n_particles >= 3;
    MomentCounter c;
    for_each_division(n_particles, p,
                      [&](const BatchPartition& part) { c.add(part, triple); });
    r.exhaustive = true;
    r.draws = c.n;
    r.first = static_cast<double>(c.pairs) / static_cast<double>(c.n);
    if (triple) r.second = static_cast<double>(c.triples) / static_cast<double>(c.n);
    return r;
}

}  // namespace rbm
