#include <doctest.h>

#include <cmath>

#include "rbm/errors.hpp"
#include "rbm/integrator.hpp"
#include "support.hpp"

using namespace rbm;
using rbm::test::ModelBuilder;
using rbm::test::state_of;

namespace {

NoiseBlock block_of(std::vector<double> v) { return NoiseBlock{std::move(v)}; }

double max_deviation(const CoupledTrajectory& tr)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        for (std::size_t a = 0; a < tr.ref_states[k].x.size(); ++a)
            worst = std::max(worst, std::abs(tr.rbm_states[k].x[a] - tr.ref_states[k].x[a]));
    return worst;
}

}  // namespace

TEST_CASE("step_reference examples")
{
    const auto still = ModelBuilder(1, 2, 2).build();
    const auto s = state_of({1.0, -2.0});
    CHECK(step_reference(still, s, 0.1, block_of({0.3, 0.4})).x == s.x);

    const auto linear = ModelBuilder(1, 2, 2).drift(LinearDrift{1.0, {}}).build();
    const auto next = step_reference(linear, state_of({1.0, 0.0}), 0.1, block_of({0.0, 0.0}));
    CHECK(next.x[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(next.t == doctest::Approx(0.1));

    const auto diffusion = ModelBuilder(1, 2, 2).sigma(1.0).build();
    const auto moved = step_reference(diffusion, s, 0.1, block_of({0.25, -0.5}));
    CHECK(moved.x == std::vector<double>{1.25, -2.5});

    CHECK_THROWS_AS(step_reference(still, s, 0.0, block_of({0, 0})), InvalidArgument);
    CHECK_THROWS_AS(step_reference(still, s, 0.1, block_of({0})), InvalidArgument);
}

TEST_CASE("non-finite states are reported")
{
    const auto m = ModelBuilder(1, 2, 2).drift(DoubleWellDrift{1.0}).build();
    CHECK_THROWS_AS(step_reference(m, state_of({1e200, 0.0}), 1.0, block_of({0, 0})),
                    NumericDomain);
    CHECK_THROWS_AS(step_reference(m, state_of({NAN, 0.0}), 1.0, block_of({0, 0})),
                    NumericDomain);
}

TEST_CASE("step_rbm with one batch matches consecutive reference steps bitwise")
{
    const auto m = ModelBuilder(2, 6, 6)
                       .kernel(RadialKernel{GaussianEnvelopeFn{1.0, 1.0}})
                       .drift(LinearDrift{0.5, {}})
                       .masses(rbm::test::uniforms(6, 1, 0.5, 1.5))
                       .sigma(0.7)
                       .build();
    const auto s = state_of(rbm::test::normals(12, 2));
    const NoiseSource src(1, 0, 12, 0.025);
    std::vector<NoiseBlock> noise{src.block(0), src.block(1), src.block(2), src.block(3)};
    const BatchPartition all({{0, 1, 2, 3, 4, 5}});
    const auto rbm = step_rbm(m, s, all, 0.1, 4, noise);
    auto ref = s;
    for (const auto& b : noise) ref = step_reference(m, ref, 0.025, b);
    CHECK(rbm.x == ref.x);
}

TEST_CASE("step_rbm with the zero kernel ignores the partition")
{
    const auto m = ModelBuilder(1, 4, 2).drift(DoubleWellDrift{0.5}).sigma(1.0).build();
    const auto s = state_of({0.1, -0.4, 0.9, 1.3});
    const NoiseSource src(3, 0, 4, 0.05);
    const std::vector<NoiseBlock> noise{src.block(7)};
    const auto a = step_rbm(m, s, BatchPartition({{0, 1}, {2, 3}}), 0.05, 1, noise);
    const auto b = step_rbm(m, s, BatchPartition({{0, 3}, {1, 2}}), 0.05, 1, noise);
    CHECK(a.x == b.x);
    CHECK(a.x == step_reference(m, s, 0.05, noise[0]).x);
}

TEST_CASE("step_rbm hand-computed N = 4, p = 2 step")
{
    const auto m = ModelBuilder(1, 4, 2)
                       .kernel(RadialKernel{LinearFn{}})
                       .masses({1.0, 2.0, 1.0, 1.0})
                       .build();
    const auto s = state_of({0.0, 1.0, 2.0, 3.0});
    const std::vector<NoiseBlock> noise{block_of({0, 0, 0, 0})};
    const auto next = step_rbm(m, s, BatchPartition({{0, 1}, {2, 3}}), 0.1, 1, noise);
    // F_0 = 2 (0 - 1), F_1 = 1 (1 - 0), F_2 = 1 (2 - 3), F_3 = 1 (3 - 2)
    const std::vector<double> want{0.0 - 0.2, 1.0 + 0.1, 2.0 - 0.1, 3.0 + 0.1};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(next.x[i] - want[i]) <= 1e-14);

    CHECK_THROWS_AS(step_rbm(m, s, BatchPartition({{0, 1}, {2, 3}}), 0.1, 2, noise),
                    InvalidArgument);
}

TEST_CASE("noise blocks have variance dt")
{
    const double dt = 0.01;
    const NoiseSource src(5, 2, 1001, dt);
    double s1 = 0, s2 = 0;
    std::size_t n = 0;
    for (std::uint64_t step = 0; step < 100; ++step) {
        for (double v : src.block(step).increments) {
            s1 += v;
            s2 += v * v;
            ++n;
        }
    }
    CHECK(std::abs(s1 / n) < 5 * std::sqrt(dt / n));
    CHECK(std::abs(s2 / n / dt - 1.0) < 5 * std::sqrt(2.0 / n));
    CHECK(src.block(3).increments == NoiseSource(5, 2, 1001, dt).block(3).increments);
    CHECK(src.block(3).increments != src.block(4).increments);
}

TEST_CASE("coupled trajectories: initial data and shapes")
{
    const auto m = ModelBuilder(2, 8, 2)
                       .kernel(RadialKernel{GaussianEnvelopeFn{}})
                       .sigma(1.0)
                       .time(1.0, 0.25)
                       .build();
    const auto tr = simulate_coupled(m, 4, 1, 8, 2);
    REQUIRE(tr.times.size() == 5);
    CHECK(tr.times.back() == 1.0);
    CHECK(tr.ref_states.front().x == tr.rbm_states.front().x);
    CHECK(tr.ref_states.front().x == initial_state(m, 4, 1).x);
    CHECK(tr.rbm_states.back().t == 1.0);
    CHECK(max_deviation(tr) > 0.0);
    CHECK_THROWS_AS(simulate_coupled(m, 4, 1, 8, 3), InvalidArgument);
    CHECK_THROWS_AS(simulate_coupled(m, 4, 1, 0, 1), InvalidArgument);
}

TEST_CASE("coupling: zero kernel and single batch give identical paths")
{
    auto base = ModelBuilder(1, 6, 2).drift(LinearDrift{}).sigma(1.0).time(1.0, 0.125);
    const auto zero = simulate_coupled(base.build(), 1, 0, 4, 4);
    CHECK(max_deviation(zero) == 0.0);

    base.p.batch_size = 6;
    base.kernel(RadialKernel{GaussianEnvelopeFn{}});
    const auto single = simulate_coupled(base.build(), 1, 0, 4, 4);
    CHECK(max_deviation(single) <= 1e-13);
}

TEST_CASE("coupling: constant kernel with equal weights gives Z = 0")
{
    const auto m = ModelBuilder(1, 8, 2)
                       .kernel(RadialKernel{ConstantFn{0.5}})
                       .masses(std::vector(8, 2.0))
                       .sigma(0.8)
                       .time(1.0, 0.1)
                       .build();
    const auto tr = simulate_coupled(m, 12, 3, 5, 5);
    CHECK(max_deviation(tr) <= 1e-12);
}

TEST_CASE("RBM sub-step noise is the sum of the reference increments")
{
    // zero forces: both solvers are x0 + sigma * (sum of increments)
    const auto m = ModelBuilder(1, 4, 2).sigma(1.0).time(0.5, 0.25).positions({0, 0, 0, 0}).build();
    const auto tr = simulate_coupled(m, 8, 0, 6, 2);
    const double fine = 0.25 / 6;
    const NoiseSource src(8, 0, 4, fine);
    std::vector<double> x(4, 0.0);
    for (std::size_t sub = 0; sub < 4; ++sub) {
        std::vector<double> sum(4, 0.0);
        for (std::size_t f = 0; f < 3; ++f) {
            const auto b = src.block(sub * 3 + f).increments;
            for (int a = 0; a < 4; ++a) sum[a] += b[a];
        }
        for (int a = 0; a < 4; ++a) x[a] += sum[a];
    }
    for (int a = 0; a < 4; ++a) {
        CHECK(std::abs(tr.rbm_states.back().x[a] - x[a]) <= 1e-14);
        CHECK(std::abs(tr.ref_states.back().x[a] - x[a]) <= 1e-14);
    }
}

TEST_CASE("fresh partition at every macro-step")
{
    const auto m = ModelBuilder(1, 100, 2).build();
    CHECK_FALSE(macro_step_partition(m, 1, 0, 1) == macro_step_partition(m, 1, 0, 2));
    CHECK_FALSE(macro_step_partition(m, 1, 0, 1) == macro_step_partition(m, 1, 1, 1));
    CHECK(macro_step_partition(m, 1, 0, 5) == macro_step_partition(m, 1, 0, 5));
}

TEST_CASE("simulate_coupled is deterministic")
{
    const auto m = ModelBuilder(2, 10, 2)
                       .kernel(RadialKernel{CosineEnvelopeFn{1.0, 2.0}})
                       .drift(DoubleWellDrift{1.0})
                       .sigma(0.5)
                       .time(1.0, 0.2)
                       .second_order(0.5)
                       .build();
    const auto a = simulate_coupled(m, 77, 5);
    const auto b = simulate_coupled(m, 77, 5);
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        CHECK(a.ref_states[k].x == b.ref_states[k].x);
        CHECK(a.rbm_states[k].x == b.rbm_states[k].x);
        CHECK(a.rbm_states[k].v == b.rbm_states[k].v);
    }
    const auto c = simulate_coupled(m, 78, 5);
    CHECK(c.rbm_states.back().x != a.rbm_states.back().x);
}

TEST_CASE("lockstep runner reproduces each level's own coupled run")
{
    const auto m = ModelBuilder(1, 12, 3)
                       .kernel(RadialKernel{GaussianEnvelopeFn{1.0, 1.0}})
                       .drift(LinearDrift{})
                       .sigma(1.0)
                       .time(1.0, 0.25)
                       .build();
    const double fine = 1.0 / 64;
    const CoupledRunner runner(m, fine, {{0.25, 16, 1}, {0.125, 8, 2}, {0.0625, 4, 4}});
    std::vector<std::vector<ParticleState>> seen(3);
    runner.run(9, 2, [&](std::size_t l, std::size_t k, const ParticleState&,
                         const ParticleState& rbm) {
        CHECK(k == seen[l].size());
        seen[l].push_back(rbm);
    });
    const std::vector<std::pair<double, std::size_t>> specs{{0.25, 1}, {0.125, 2}, {0.0625, 4}};
    for (std::size_t l = 0; l < 3; ++l) {
        const double tau = specs[l].first;
        const auto own = simulate_coupled(m.with_tau(tau), 9, 2,
                                          static_cast<std::size_t>(tau / fine), specs[l].second);
        REQUIRE(own.rbm_states.size() == seen[l].size());
        for (std::size_t k = 0; k < own.rbm_states.size(); ++k) {
            CHECK(own.rbm_states[k].x == seen[l][k].x);
        }
    }
    CHECK_THROWS_AS(CoupledRunner(m, fine, {{0.25, 15, 1}}), InvalidArgument);
    CHECK_THROWS_AS(CoupledRunner(m, fine, {{0.25, 16, 3}}), InvalidArgument);
}

TEST_CASE("second-order Euler: energy drift is first order in dt")
{
    // conservative pair force F = -grad U with U(r) = (a s^2 / 2) exp(-|r|^2 / s^2)
    const double a = 1.0, s2 = 1.0;
    const std::size_t n = 8, d = 2;
    const auto x0 = rbm::test::normals(n * d, 31);
    auto energy = [&](const ParticleState& st) {
        double kinetic = 0.0, potential = 0.0;
        for (double v : st.v) kinetic += 0.5 * v * v;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double r2 = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double r = st.x[i * d + c] - st.x[j * d + c];
                    r2 += r * r;
                }
                potential += 0.5 * a * s2 * std::exp(-r2 / s2);
            }
        return kinetic + potential / double(n - 1);
    };
    auto drift_over_unit_time = [&](double dt) {
        const auto m = ModelBuilder(d, n, n)
                           .kernel(RadialKernel{GaussianEnvelopeFn{a, std::sqrt(s2)}})
                           .second_order(0.0)
                           .build();
        ParticleState st = state_of(x0, std::vector<double>(n * d, 0.0));
        const double e0 = energy(st);
        const NoiseBlock zero{std::vector<double>(n * d, 0.0)};
        const auto steps = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 0; k < steps; ++k) st = step_reference(m, st, dt, zero);
        return std::abs(energy(st) - e0);
    };
    const double coarse = drift_over_unit_time(0.01);
    const double fine = drift_over_unit_time(0.005);
    CHECK(coarse > 0.0);
    CHECK(coarse / fine > 1.6);
    CHECK(coarse / fine < 2.4);
}
