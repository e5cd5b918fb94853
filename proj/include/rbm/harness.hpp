#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rbm/metrics.hpp"
#include "rbm/model.hpp"

namespace rbm {

enum class Metric { Strong, Weak };

enum class ReferenceGrid {
    PerTau,  // each tau gets its own reference at tau / refinement
    Shared,  // one reference at tau_min / refinement drives every tau
};

struct SweepPlan {
    SystemModel model;
    std::vector<double> taus;  // strictly decreasing
    std::size_t realizations = 200;
    std::size_t refinement = 10;
    std::size_t rbm_substeps = 1;
    ReferenceGrid reference = ReferenceGrid::PerTau;
    Metric metric = Metric::Strong;
    std::vector<TestFunction> battery;  // weak only; empty means default_battery(d)
    std::uint64_t seed = 0;
    std::size_t workers = 1;  // 0 picks the hardware concurrency
};

/// Calls job(i) for i in [0, count) on up to `workers` threads (0 = hardware
/// concurrency). The first exception thrown by a job is rethrown.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job);

/// Throws InvalidArgument when the plan cannot run.
void validate_plan(const SweepPlan& plan);

struct ErrorRow {
    double tau = 0.0;
    double error = 0.0;
    double std_error = 0.0;
    std::size_t realizations = 0;  // realizations that finished
    std::size_t diverged = 0;      // realizations that blew up
    double argmax_time = 0.0;      // grid time attaining the sup
    std::string argmax_phi;        // weak only
};

struct ErrorTable {
    std::vector<ErrorRow> rows;  // tau descending
};

struct OrderFit {
    enum class Status { Ok, AllZero, Underpowered, InsufficientRows };

    Status status = Status::InsufficientRows;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<std::size_t> used;      // row indices entering the fit
    std::vector<std::size_t> excluded;  // diverged or noise-dominated rows
    std::vector<double> residuals;      // log error - fitted line, per used row
    std::string diagnostic;

    bool ok() const { return status == Status::Ok; }
};

std::string to_string(OrderFit::Status s);

/*!
 * Least squares on (log tau, log error). Rows are excluded when any
 * realization diverged or error <= 10 stderr; fewer than 3 remaining rows
 * refuse the fit.
 */
OrderFit fit_order(const ErrorTable& table);

struct SweepResult {
    ErrorTable table;
    OrderFit fit;
    std::vector<std::string> warnings;
};

/// Row value: sup over the tau-grid of J(t_k).
SweepResult run_strong_sweep(const SweepPlan& plan);

/// Row value: sup over the tau-grid and the battery of the coupled E_k.
SweepResult run_weak_sweep(const SweepPlan& plan);

/// Dispatches on plan.metric.
SweepResult run_sweep(const SweepPlan& plan);

//---------------------------------------------------------------------------//
// Step cost
//---------------------------------------------------------------------------//
struct BenchPlan {
    std::size_t d = 1;
    std::vector<std::size_t> sizes;
    std::size_t batch_size = 2;  // 0 means p = N
    KernelSpec kernel;
    double sigma = 1.0;
    std::size_t repetitions = 5;
    double min_sample_seconds = 0.02;  // inner repetitions grow until reached
    std::uint64_t seed = 0;
};

struct BenchRow {
    std::size_t n = 0;
    std::size_t batch_size = 0;
    double full_ns = 0.0;  // median wall time of one full step
    double rbm_ns = 0.0;   // median of one RBM macro-step incl. its partition
    std::size_t full_inner = 0;
    std::size_t rbm_inner = 0;

    double ratio() const { return rbm_ns / full_ns; }
};

/// `sizes` must span at least two decades (max / min >= 100).
std::vector<BenchRow> bench_step_cost(const BenchPlan& plan);

}  // namespace rbm
