#include <doctest.h>

#include <cmath>

#include "rbm/errors.hpp"
#include "rbm/harness.hpp"
#include "rbm/io.hpp"
#include "support.hpp"

using namespace rbm;
using rbm::test::ModelBuilder;

namespace {

ErrorTable synthetic(const std::vector<double>& taus, double (*f)(double))
{
    ErrorTable t;
    for (double tau : taus) t.rows.push_back({tau, f(tau), 0.0, 10, 0, 0.0, ""});
    return t;
}

const std::vector<double> kTaus{0.5, 0.25, 0.125, 0.0625, 0.03125};

SystemModel small_model(std::size_t n = 10, std::size_t p = 2)
{
    return ModelBuilder(1, n, p)
        .kernel(RadialKernel{GaussianEnvelopeFn{1.0, 1.0}})
        .drift(LinearDrift{})
        .masses(rbm::test::uniforms(n, 1, 0.5, 1.5))
        .sigma(1.0)
        .time(1.0, 0.25)
        .build();
}

}  // namespace

TEST_CASE("fit_order recovers exact power laws")
{
    const auto lin = fit_order(synthetic(kTaus, [](double t) { return t; }));
    REQUIRE(lin.ok());
    CHECK(std::abs(lin.slope - 1.0) <= 1e-10);
    CHECK(lin.r_squared == doctest::Approx(1.0));

    const auto half = fit_order(synthetic(kTaus, [](double t) { return std::sqrt(t); }));
    REQUIRE(half.ok());
    CHECK(std::abs(half.slope - 0.5) <= 1e-10);
    CHECK(half.residuals.size() == kTaus.size());
}

TEST_CASE("fit_order with 1% noise and under rescaling")
{
    RngStream rng(1, {StreamPurpose::Sampling, 0, 0});
    ErrorTable t;
    for (double tau : kTaus) t.rows.push_back({tau, 3.0 * tau * (1.0 + 0.01 * rng.normal()), 0.0, 10, 0, 0.0, ""});
    const auto fit = fit_order(t);
    REQUIRE(fit.ok());
    CHECK(fit.slope >= 0.97);
    CHECK(fit.slope <= 1.03);

    ErrorTable scaled = t;
    for (auto& r : scaled.rows) r.error *= 17.5;
    const auto fs = fit_order(scaled);
    CHECK(std::abs(fs.slope - fit.slope) <= 1e-12);
    CHECK(std::abs(fs.intercept - fit.intercept - std::log(17.5)) <= 1e-12);
}

TEST_CASE("fit_order exclusions and refusals")
{
    auto t = synthetic(kTaus, [](double tau) { return tau; });
    t.rows[4].std_error = 0.1 * t.rows[4].error;  // error == 10 stderr: excluded
    t.rows[3].diverged = 1;
    auto fit = fit_order(t);
    CHECK(fit.ok());
    CHECK(fit.used == std::vector<std::size_t>{0, 1, 2});
    CHECK(fit.excluded == std::vector<std::size_t>{3, 4});

    t.rows[2].std_error = t.rows[2].error;
    fit = fit_order(t);
    CHECK(fit.status == OrderFit::Status::InsufficientRows);

    const auto zeros = fit_order(synthetic(kTaus, [](double) { return 0.0; }));
    CHECK(zeros.status == OrderFit::Status::AllZero);
    CHECK(fit_order(ErrorTable{}).status == OrderFit::Status::InsufficientRows);
}

TEST_CASE("plan validation")
{
    SweepPlan plan{small_model()};
    plan.realizations = 4;
    plan.taus = {0.25, 0.5};
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.taus = {0.25, 0.3};
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.taus = {0.3};
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.taus = {0.5, 0.2};
    CHECK_NOTHROW(validate_plan(plan));
    plan.reference = ReferenceGrid::Shared;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.taus = {0.5, 0.25};
    plan.refinement = 3;
    plan.rbm_substeps = 2;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.refinement = 4;
    CHECK_NOTHROW(validate_plan(plan));
    plan.realizations = 1;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
}

TEST_CASE("zero-kernel strong sweep is all zero and refuses the fit")
{
    SweepPlan plan{ModelBuilder(1, 6, 2).drift(LinearDrift{}).sigma(1.0).time(1.0, 0.25).build()};
    plan.taus = {0.5, 0.25, 0.125};
    plan.realizations = 4;
    plan.refinement = 4;
    plan.rbm_substeps = 4;
    const auto res = run_strong_sweep(plan);
    for (const auto& row : res.table.rows) CHECK(row.error == 0.0);
    CHECK(res.fit.status == OrderFit::Status::AllZero);
}

TEST_CASE("weak sweep: constant test function and single batch")
{
    SweepPlan plan{small_model()};
    plan.taus = {0.5, 0.25, 0.125};
    plan.realizations = 4;
    plan.refinement = 4;
    plan.battery = {ConstantPhi{1.0}};
    auto res = run_weak_sweep(plan);
    for (const auto& row : res.table.rows) CHECK(row.error == 0.0);

    // a single batch on the reference grid has no method error at all
    plan.model = small_model(10, 10);
    plan.battery.clear();
    plan.rbm_substeps = 4;
    res = run_weak_sweep(plan);
    for (const auto& row : res.table.rows) CHECK(row.error <= 1e-15);
    CHECK_FALSE(res.fit.ok());
}

TEST_CASE("sweep values agree with the metric functions")
{
    const auto m = small_model();
    SweepPlan plan{m};
    plan.taus = {0.25};
    plan.realizations = 5;
    plan.refinement = 4;
    plan.seed = 21;
    const auto strong = run_strong_sweep(plan);
    const auto weak = run_weak_sweep(plan);

    std::vector<CoupledTrajectory> e;
    for (std::uint32_t r = 0; r < 5; ++r) e.push_back(simulate_coupled(m, 21, r, 4, 1));
    double j = 0.0, ek = 0.0;
    for (std::size_t k = 0; k < e.front().times.size(); ++k) {
        j = std::max(j, strong_error_J(m.weights(), e, k).value);
        for (const auto& phi : default_battery(1)) ek = std::max(ek, weak_error(e, m.weights(), phi, k).value);
    }
    CHECK(strong.table.rows[0].error == doctest::Approx(j).epsilon(1e-12));
    CHECK(weak.table.rows[0].error == doctest::Approx(ek).epsilon(1e-12));
    CHECK(strong.table.rows[0].realizations == 5);
}

TEST_CASE("sweeps do not depend on the worker count")
{
    SweepPlan plan{small_model(12, 3)};
    plan.taus = {0.25, 0.125, 0.0625};
    plan.realizations = 9;
    plan.refinement = 4;
    plan.seed = 5;
    plan.workers = 1;
    const auto one = table_csv(run_strong_sweep(plan).table);
    plan.workers = 4;
    const auto four = table_csv(run_strong_sweep(plan).table);
    CHECK(one == four);
    plan.workers = 0;
    CHECK(table_csv(run_strong_sweep(plan).table) == one);
}

TEST_CASE("shared reference: the finest row matches the per-tau run")
{
    SweepPlan plan{small_model()};
    plan.taus = {0.25, 0.125, 0.0625};
    plan.realizations = 4;
    plan.refinement = 4;
    const auto per = run_strong_sweep(plan);
    plan.reference = ReferenceGrid::Shared;
    const auto shared = run_strong_sweep(plan);
    CHECK(per.table.rows.back().error == shared.table.rows.back().error);
    CHECK(per.table.rows.front().error != shared.table.rows.front().error);
}

TEST_CASE("strong error shrinks by at least sqrt(2) when tau halves (p = 2)")
{
    SweepPlan plan{ModelBuilder(1, 100, 2)
                       .kernel(RadialKernel{GaussianEnvelopeFn{1.0, 1.0}})
                       .drift(LinearDrift{})
                       .masses(rbm::test::uniforms(100, 2, 0.5, 1.5))
                       .sigma(1.0)
                       .time(1.0, 0.25)
                       .build()};
    plan.taus = {0.25, 0.125};
    plan.realizations = 30;
    plan.refinement = 8;
    const auto res = run_strong_sweep(plan);
    const auto& rows = res.table.rows;
    CHECK(rows[0].error / rows[1].error >= std::sqrt(2.0) - 0.1);
    CHECK(res.warnings.empty());
}

TEST_CASE("diverging rows are flagged and left out of the fit")
{
    SweepPlan plan{ModelBuilder(1, 2, 2)
                       .drift(DoubleWellDrift{1.0})
                       .time(8.0, 1.0)
                       .positions({3.0, 3.0})
                       .build()};
    plan.taus = {1.0, 0.5, 0.25};
    plan.realizations = 3;
    plan.refinement = 64;
    const auto res = run_strong_sweep(plan);
    CHECK(res.table.rows[0].diverged == 3);
    CHECK(res.table.rows[1].diverged == 3);
    CHECK(res.table.rows[2].diverged == 0);
    CHECK(res.table.rows[2].realizations == 3);
    CHECK_FALSE(res.fit.ok());
    CHECK(res.warnings.size() >= 2);
}

TEST_CASE("table CSV format")
{
    ErrorTable t;
    t.rows.push_back({0.125, 0.1, 1e-5, 200, 0, 1.0, ""});
    t.rows.push_back({0.0625, std::nan(""), 0.0, 0, 3, 0.0, ""});
    CHECK(table_csv(t) == "tau,error,stderr,realizations\n0.125,0.1,1e-05,200\n0.0625,nan,0,0\n");
    CHECK(format_double(0.30000000000000004) == "0.30000000000000004");
}

TEST_CASE("bench_step_cost reports medians for every size")
{
    BenchPlan plan;
    plan.sizes = {16, 1600};
    plan.repetitions = 3;
    plan.min_sample_seconds = 0.002;
    plan.kernel.interaction = RadialKernel{GaussianEnvelopeFn{}};
    const auto rows = bench_step_cost(plan);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.full_ns > 0.0);
        CHECK(r.rbm_ns > 0.0);
        CHECK(r.full_inner >= 1);
    }
    CHECK(rows[1].ratio() < 1.0);

    plan.sizes = {100, 200};
    CHECK_THROWS_AS(bench_step_cost(plan), InvalidArgument);
}
