#include "rbm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "rbm/errors.hpp"
#include "rbm/integrator.hpp"

namespace rbm {

namespace {

std::size_t resolve_workers(std::size_t requested, std::size_t jobs)
{
    std::size_t w = requested;
    if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(w, jobs));
}

}  // namespace

// Results must be written to slot i only, so the outcome does not depend on
// which worker picked which index.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job)
{
    workers = resolve_workers(workers, count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            }
            catch (...) {
                std::lock_guard lock(failure_lock);
                if (!failure) failure = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

bool divides(double total, double tau)
{
    const double q = total / tau;
    return std::abs(q - std::round(q)) <= 1e-12 * std::max(1.0, std::round(q));
}

// Values recorded for one (realization, tau) pair.
struct LevelOutcome {
    bool diverged = false;
    std::vector<double> values;  // per grid point (strong) or grid point x phi (weak)
};

class SweepRunner {
  public:
    explicit SweepRunner(const SweepPlan& plan)
        : plan_(plan),
          battery_(plan.battery.empty() ? default_battery(plan.model.dim()) : plan.battery)
    {
        validate_plan(plan);
        per_point_ = plan.metric == Metric::Weak ? battery_.size() : 1;
        for (double tau : plan.taus) grid_.push_back(plan.model.num_steps(tau) + 1);
    }

    const std::vector<TestFunction>& battery() const { return battery_; }
    std::size_t per_point() const { return per_point_; }
    std::size_t grid(std::size_t level) const { return grid_[level]; }

    std::vector<LevelOutcome> realization(std::uint32_t r) const
    {
        std::vector<LevelOutcome> out(plan_.taus.size());
        if (plan_.reference == ReferenceGrid::PerTau) {
            for (std::size_t l = 0; l < out.size(); ++l) run_levels(r, {l}, out);
            return out;
        }
        std::vector<std::size_t> active(out.size());
        for (std::size_t l = 0; l < active.size(); ++l) active[l] = l;
        run_levels(r, active, out);
        return out;
    }

  private:
    // Runs `active` levels against one reference. A level that diverges is
    // dropped and the rest are rerun, so the result depends only on r.
    void run_levels(std::uint32_t r, std::vector<std::size_t> active,
                    std::vector<LevelOutcome>& out) const
    {
        const SystemModel& model = plan_.model;
        while (!active.empty()) {
            const double finest = plan_.taus[active.back()];
            const double fine_dt = finest / static_cast<double>(plan_.refinement);
            std::vector<CoupledRunner::Level> levels;
            for (std::size_t l : active) {
                const double tau = plan_.taus[l];
                const auto per = static_cast<std::size_t>(std::llround(tau / fine_dt));
                levels.push_back({tau, per, plan_.rbm_substeps});
                out[l].values.assign(grid_[l] * per_point_, 0.0);
            }
            const CoupledRunner runner(model, fine_dt, std::move(levels));
            const std::size_t d = model.dim();
            try {
                runner.run(plan_.seed, r,
                           [&](std::size_t li, std::size_t k, const ParticleState& ref,
                               const ParticleState& rbm) {
                               auto& v = out[active[li]].values;
                               if (plan_.metric == Metric::Strong) {
                                   v[k] = weighted_squared_deviation(model.weights(), d,
                                                                     ref, rbm);
                                   return;
                               }
                               for (std::size_t f = 0; f < battery_.size(); ++f) {
                                   v[k * per_point_ + f] =
                                       empirical_apply(rbm, model.weights(), battery_[f]) -
                                       empirical_apply(ref, model.weights(), battery_[f]);
                               }
                           });
                return;
            }
            catch (const Divergence& e) {
                if (e.level() < 0) {
                    for (std::size_t l : active) {
                        out[l].diverged = true;
                        out[l].values.clear();
                    }
                    return;
                }
                const std::size_t bad = active[static_cast<std::size_t>(e.level())];
                out[bad].diverged = true;
                out[bad].values.clear();
                active.erase(active.begin() + e.level());
            }
        }
    }

    const SweepPlan& plan_;
    std::vector<TestFunction> battery_;
    std::size_t per_point_ = 1;
    std::vector<std::size_t> grid_;
};

// Reduces over realizations in index order.
SweepResult reduce(const SweepPlan& plan, const SweepRunner& runner,
                   const std::vector<std::vector<LevelOutcome>>& outcomes)
{
    SweepResult result;
    const std::size_t per = runner.per_point();
    for (std::size_t l = 0; l < plan.taus.size(); ++l) {
        ErrorRow row;
        row.tau = plan.taus[l];
        std::vector<const LevelOutcome*> alive;
        for (const auto& o : outcomes) {
            if (o[l].diverged) ++row.diverged;
            else alive.push_back(&o[l]);
        }
        row.realizations = alive.size();
        if (alive.empty()) {
            row.error = std::numeric_limits<double>::quiet_NaN();
            row.std_error = std::numeric_limits<double>::quiet_NaN();
            result.table.rows.push_back(row);
            continue;
        }
        std::vector<double> samples(alive.size());
        bool first = true;
        for (std::size_t k = 0; k < runner.grid(l); ++k) {
            for (std::size_t f = 0; f < per; ++f) {
                for (std::size_t r = 0; r < alive.size(); ++r) {
                    samples[r] = alive[r]->values[k * per + f];
                }
                Estimate e = mean_estimate(samples);
                e.value = std::abs(e.value);
                if (first || e.value > row.error) {
                    first = false;
                    row.error = e.value;
                    row.std_error = e.std_error;
                    row.argmax_time = static_cast<double>(k) * row.tau;
                    if (plan.metric == Metric::Weak) row.argmax_phi = name(runner.battery()[f]);
                }
            }
        }
        result.table.rows.push_back(row);
    }

    for (const auto& row : result.table.rows) {
        if (row.diverged > 0) {
            std::ostringstream msg;
            msg << row.diverged << " realization(s) diverged at tau=" << row.tau
                << "; row excluded from the fit";
            result.warnings.push_back(msg.str());
        }
    }
    result.fit = fit_order(result.table);
    return result;
}

SweepResult sweep(const SweepPlan& plan)
{
    const SweepRunner runner(plan);
    std::vector<std::vector<LevelOutcome>> outcomes(plan.realizations);
    parallel_for(plan.realizations, plan.workers, [&](std::size_t r) {
        outcomes[r] = runner.realization(static_cast<std::uint32_t>(r));
    });
    return reduce(plan, runner, outcomes);
}

}  // namespace

void validate_plan(const SweepPlan& plan)
{
    if (plan.taus.empty()) throw InvalidArgument("sweep: tau list is empty");
    const double t_final = plan.model.final_time();
    for (std::size_t l = 0; l < plan.taus.size(); ++l) {
        const double tau = plan.taus[l];
        if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("sweep: tau must be > 0");
        if (l > 0 && !(tau < plan.taus[l - 1])) {
            throw InvalidArgument("sweep: taus must be strictly decreasing");
        }
        if (!divides(t_final, tau)) {
            std::ostringstream msg;
            msg << "sweep: tau=" << tau << " does not divide T=" << t_final;
            throw InvalidArgument(msg.str());
        }
    }
    if (plan.realizations < 2) throw InvalidArgument("sweep: need at least 2 realizations");
    if (plan.realizations > 0xffffffffull) throw InvalidArgument("sweep: too many realizations");
    if (plan.refinement == 0 || plan.rbm_substeps == 0 ||
        plan.refinement % plan.rbm_substeps != 0) {
        throw InvalidArgument("sweep: refinement must be a positive multiple of rbm_substeps");
    }
    if (plan.model.batch_size() < 2) throw InvalidArgument("sweep: RBM needs p >= 2");
    if (plan.reference == ReferenceGrid::Shared) {
        const double finest = plan.taus.back();
        for (double tau : plan.taus) {
            if (!divides(tau, finest)) {
                throw InvalidArgument(
                    "sweep: a shared reference needs every tau to be a multiple of the "
                    "smallest");
            }
        }
    }
}

std::string to_string(OrderFit::Status s)
{
    switch (s) {
        case OrderFit::Status::Ok: return "ok";
        case OrderFit::Status::AllZero: return "all-zero";
        case OrderFit::Status::Underpowered: return "underpowered";
        case OrderFit::Status::InsufficientRows: return "insufficient-rows";
    }
    return "unknown";
}

OrderFit fit_order(const ErrorTable& table)
{
    OrderFit fit;
    const auto& rows = table.rows;
    bool all_zero = !rows.empty();
    for (const auto& row : rows) {
        if (row.diverged > 0 || row.error != 0.0) all_zero = false;
    }
    if (all_zero) {
        fit.status = OrderFit::Status::AllZero;
        fit.diagnostic = "every error is exactly zero; nothing to fit";
        for (std::size_t i = 0; i < rows.size(); ++i) fit.excluded.push_back(i);
        return fit;
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const bool usable = row.diverged == 0 && row.realizations > 0 && row.tau > 0.0 &&
                            std::isfinite(row.error) && row.error > 0.0 &&
                            row.error > 10.0 * row.std_error;
        (usable ? fit.used : fit.excluded).push_back(i);
    }
    if (fit.used.size() < 3) {
        std::ostringstream msg;
        msg << "only " << fit.used.size()
            << " usable row(s); rows need error > 10 stderr and no divergence";
        fit.status = OrderFit::Status::InsufficientRows;
        fit.diagnostic = msg.str();
        return fit;
    }

    const auto m = static_cast<double>(fit.used.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i : fit.used) {
        mx += std::log(rows[i].tau);
        my += std::log(rows[i].error);
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i : fit.used) {
        const double dx = std::log(rows[i].tau) - mx;
        const double dy = std::log(rows[i].error) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) {
        fit.status = OrderFit::Status::InsufficientRows;
        fit.diagnostic = "usable rows share one tau";
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i : fit.used) {
        const double r =
            std::log(rows[i].error) - (fit.intercept + fit.slope * std::log(rows[i].tau));
        fit.residuals.push_back(r);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.status = OrderFit::Status::Ok;
    if (!fit.excluded.empty()) {
        std::ostringstream msg;
        msg << fit.excluded.size() << " row(s) excluded as diverged or noise-dominated";
        fit.diagnostic = msg.str();
    }
    return fit;
}

SweepResult run_strong_sweep(const SweepPlan& plan)
{
    SweepPlan p = plan;
    p.metric = Metric::Strong;
    SweepResult result = sweep(p);

    const auto& rows = result.table.rows;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = rows[i + 1];
        if (b.error > a.error + 2.0 * std::max(a.std_error, b.std_error)) {
            std::ostringstream msg;
            msg << "J rose from " << a.error << " at tau=" << a.tau << " to " << b.error
                << " at tau=" << b.tau << " (beyond 2 stderr)";
            result.warnings.push_back(msg.str());
        }
    }
    return result;
}

SweepResult run_weak_sweep(const SweepPlan& plan)
{
    SweepPlan p = plan;
    p.metric = Metric::Weak;
    SweepResult result = sweep(p);

    bool any = false, all_underpowered = true;
    for (const auto& row : result.table.rows) {
        if (row.diverged > 0 || row.realizations == 0) continue;
        any = true;
        if (!(row.std_error > 0.3 * row.error)) all_underpowered = false;
    }
    if (any && all_underpowered && result.fit.status != OrderFit::Status::AllZero) {
        result.fit.status = OrderFit::Status::Underpowered;
        result.fit.diagnostic = "stderr exceeds 30% of the error at every tau";
    }
    return result;
}

SweepResult run_sweep(const SweepPlan& plan)
{
    return plan.metric == Metric::Strong ? run_strong_sweep(plan) : run_weak_sweep(plan);
}

//---------------------------------------------------------------------------//
// bench_step_cost
//---------------------------------------------------------------------------//
namespace {

using Clock = std::chrono::steady_clock;

// Median ns per call of `step`, batching calls until one sample reaches
// `min_seconds`.
template <class Step>
double median_ns(Step&& step, std::size_t repetitions, double min_seconds,
                 std::size_t& inner)
{
    auto time_batch = [&](std::size_t count) {
        const auto start = Clock::now();
        for (std::size_t i = 0; i < count; ++i) step();
        return std::chrono::duration<double>(Clock::now() - start).count();
    };
    inner = 1;
    while (time_batch(inner) < min_seconds && inner < (std::size_t{1} << 30)) inner *= 2;
    std::vector<double> samples;
    for (std::size_t r = 0; r < repetitions; ++r) {
        samples.push_back(time_batch(inner) * 1e9 / static_cast<double>(inner));
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    return samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

}  // namespace

std::vector<BenchRow> bench_step_cost(const BenchPlan& plan)
{
    if (plan.sizes.empty()) throw InvalidArgument("bench: no sizes");
    if (plan.repetitions == 0) throw InvalidArgument("bench: repetitions must be >= 1");
    const auto [lo, hi] = std::minmax_element(plan.sizes.begin(), plan.sizes.end());
    if (static_cast<double>(*hi) < 100.0 * static_cast<double>(*lo)) {
        throw InvalidArgument("bench: sizes must span at least two decades");
    }

    const double dt = 1e-3;
    std::vector<BenchRow> rows;
    for (std::size_t n : plan.sizes) {
        SystemModel::Params params;
        params.d = plan.d;
        params.n_particles = n;
        params.batch_size = plan.batch_size == 0 ? n : plan.batch_size;
        params.kernel = plan.kernel;
        params.sigma = plan.sigma;
        params.tau = dt;
        params.final_time = 1.0;
        const SystemModel model(std::move(params));
        const NoiseSource noise(plan.seed, 0, n * plan.d, dt);

        BenchRow row;
        row.n = n;
        row.batch_size = model.batch_size();

        ParticleState state = initial_state(model, plan.seed, 0);
        std::uint64_t step = 0;
        row.full_ns = median_ns(
            [&] {
                state = step_reference(model, state, dt, noise.block(step % 0xffffffffu));
                ++step;
            },
            plan.repetitions, plan.min_sample_seconds, row.full_inner);

        state = initial_state(model, plan.seed, 0);
        step = 0;
        row.rbm_ns = median_ns(
            [&] {
                const BatchPartition part =
                    macro_step_partition(model, plan.seed, 0, step % 0xffffffffu + 1);
                const NoiseBlock block = noise.block(step % 0xffffffffu);
                state = step_rbm(model, state, part, dt, 1, std::span(&block, 1));
                ++step;
            },
            plan.repetitions, plan.min_sample_seconds, row.rbm_inner);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rbm
