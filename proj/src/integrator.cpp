#include "rbm/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "rbm/errors.hpp"

namespace rbm {

//---------------------------------------------------------------------------//
// NoiseSource
//---------------------------------------------------------------------------//
NoiseSource::NoiseSource(std::uint64_t seed, std::uint32_t realization,
                         std::size_t n_values, double dt)
    : seed_(seed), realization_(realization), n_values_(n_values), dt_(dt),
      scale_(std::sqrt(dt))
{
    if (!(dt > 0.0)) throw InvalidArgument("noise: dt must be > 0");
}

void NoiseSource::fill(std::uint64_t step, std::span<double> out) const
{
    if (out.size() != n_values_) throw InvalidArgument("noise: wrong block size");
    if (step > 0xffffffffull) throw InvalidArgument("noise: step index exceeds 2^32");
    const RngStream stream(seed_, {StreamPurpose::Noise, realization_,
                                   static_cast<std::uint32_t>(step)});
    for (std::size_t m = 0; 2 * m < n_values_; ++m) {
        const auto c = stream.block(static_cast<std::uint32_t>(m));
        const auto z = RngStream::box_muller(
            std::uint64_t{c[0]} | (std::uint64_t{c[1]} << 32),
            std::uint64_t{c[2]} | (std::uint64_t{c[3]} << 32));
        out[2 * m] = scale_ * z[0];
        if (2 * m + 1 < n_values_) out[2 * m + 1] = scale_ * z[1];
    }
}

NoiseBlock NoiseSource::block(std::uint64_t step) const
{
    NoiseBlock b;
    b.increments.resize(n_values_);
    fill(step, b.increments);
    return b;
}

//---------------------------------------------------------------------------//
// Euler-Maruyama updates
//---------------------------------------------------------------------------//
namespace {

struct Workspace {
    std::vector<double> interaction;
    std::vector<double> drift;

    explicit Workspace(std::size_t n) : interaction(n), drift(n) {}
};

// x <- x + F dt + sigma dW (first order)
// x <- x + v dt, v <- v + (F - gamma v) dt + sigma dW (second order)
void apply_update(const SystemModel& model, ParticleState& state, double dt,
                  std::span<const double> noise, const Workspace& w)
{
    const double sigma = model.sigma();
    const std::size_t n = state.x.size();
    if (!model.second_order()) {
        for (std::size_t a = 0; a < n; ++a) {
            state.x[a] += (w.drift[a] + w.interaction[a]) * dt + sigma * noise[a];
        }
        return;
    }
    const double gamma = model.gamma();
    for (std::size_t a = 0; a < n; ++a) {
        const double v = state.v[a];
        state.x[a] += v * dt;
        state.v[a] += (w.drift[a] + w.interaction[a] - gamma * v) * dt + sigma * noise[a];
    }
}

void advance_full(const SystemModel& model, ParticleState& state, double dt,
                  std::span<const double> noise, Workspace& w)
{
    interaction_full(model, state.x, w.interaction);
    drift_all(model, state.x, w.drift);
    apply_update(model, state, dt, noise, w);
    state.t += dt;
}

void advance_batch(const SystemModel& model, ParticleState& state,
                   const BatchPartition& partition, double dt,
                   std::span<const double> noise, Workspace& w)
{
    interaction_batch(model, state.x, partition, w.interaction);
    drift_all(model, state.x, w.drift);
    apply_update(model, state, dt, noise, w);
    state.t += dt;
}

void check_noise(const SystemModel& model, const NoiseBlock& noise)
{
    if (noise.increments.size() != model.size() * model.dim()) {
        throw InvalidArgument("noise block must be N x d");
    }
}

void require_finite_state(const ParticleState& s, int level)
{
    if (!all_finite(s.x) || !all_finite(s.v)) {
        std::ostringstream msg;
        msg << (level < 0 ? "reference" : "RBM") << " state became non-finite at t="
            << s.t;
        throw Divergence(msg.str(), level, s.t);
    }
}

}  // namespace

ParticleState step_reference(const SystemModel& model, const ParticleState& state,
                             double dt, const NoiseBlock& noise)
{
    if (!(dt > 0.0)) throw InvalidArgument("step_reference: dt must be > 0");
    validate_state(model, state);
    check_noise(model, noise);
    ParticleState next = state;
    Workspace w(state.x.size());
    advance_full(model, next, dt, noise.increments, w);
    require_finite_state(next, -1);
    return next;
}

ParticleState step_rbm(const SystemModel& model, const ParticleState& state,
                       const BatchPartition& partition, double tau,
                       std::size_t substeps, std::span<const NoiseBlock> noise)
{
    if (!(tau > 0.0)) throw InvalidArgument("step_rbm: tau must be > 0");
    if (substeps == 0) throw InvalidArgument("step_rbm: substeps must be >= 1");
    if (noise.size() != substeps) {
        throw InvalidArgument("step_rbm: need one noise block per sub-step");
    }
    validate_state(model, state);
    ParticleState next = state;
    Workspace w(state.x.size());
    const double dt = tau / static_cast<double>(substeps);
    for (const auto& block : noise) {
        check_noise(model, block);
        advance_batch(model, next, partition, dt, block.increments, w);
    }
    require_finite_state(next, 0);
    return next;
}

ParticleState initial_state(const SystemModel& model, std::uint64_t seed,
                            std::uint32_t realization)
{
    const std::size_t n = model.size() * model.dim();
    auto draw = [&](const InitialField& field, std::uint32_t which) {
        std::vector<double> out(n, 0.0);
        if (const auto* g = std::get_if<NormalInit>(&field)) {
            RngStream rng(seed, {StreamPurpose::Initial, realization, which});
            for (double& v : out) v = g->mean + g->stddev * rng.normal();
        }
        else if (const auto* e = std::get_if<ExplicitInit>(&field)) {
            out = e->values;
        }
        return out;
    };
    ParticleState s;
    s.x = draw(model.initial().positions, 0);
    if (model.second_order()) s.v = draw(model.initial().velocities, 1);
    return s;
}

BatchPartition macro_step_partition(const SystemModel& model, std::uint64_t seed,
                                    std::uint32_t realization, std::size_t k)
{
    RngStream rng(seed, {StreamPurpose::Partition, realization,
                         static_cast<std::uint32_t>(k)});
    return random_partition(model.size(), model.batch_size(), rng);
}

//---------------------------------------------------------------------------//
// CoupledRunner
//---------------------------------------------------------------------------//
CoupledRunner::CoupledRunner(const SystemModel& model, double fine_dt,
                             std::vector<Level> levels)
    : model_(model), fine_dt_(fine_dt), levels_(std::move(levels))
{
    if (!(fine_dt > 0.0)) throw InvalidArgument("runner: fine dt must be > 0");
    if (levels_.empty()) throw InvalidArgument("runner: need at least one level");
    if (model.batch_size() < 2) throw InvalidModel("RBM needs p >= 2");
    for (const auto& lv : levels_) {
        if (lv.fine_per_macro == 0 || lv.rbm_substeps == 0 ||
            lv.fine_per_macro % lv.rbm_substeps != 0) {
            throw InvalidArgument(
                "runner: reference sub-steps must be a positive multiple of RBM sub-steps");
        }
        const double implied = static_cast<double>(lv.fine_per_macro) * fine_dt;
        if (std::abs(implied - lv.tau) > 1e-12 * lv.tau) {
            throw InvalidArgument("runner: tau is not a multiple of the reference step");
        }
        fine_steps_ = std::max(fine_steps_, model.num_steps(lv.tau) * lv.fine_per_macro);
    }
}

std::size_t CoupledRunner::macro_steps(std::size_t level) const
{
    return model_.num_steps(levels_.at(level).tau);
}

void CoupledRunner::run(std::uint64_t seed, std::uint32_t realization,
                        const Observer& observe) const
{
    const SystemModel& model = model_;
    const std::size_t n = model.size() * model.dim();

    struct LevelState {
        ParticleState state;
        std::vector<double> noise;
        std::optional<BatchPartition> partition;
        std::size_t k = 0;
        std::size_t end = 0;      // last fine step (exclusive) of this level
        std::size_t sub_len = 1;  // fine steps per RBM sub-step
        double sub_dt = 0.0;
    };

    ParticleState ref = initial_state(model, seed, realization);
    std::vector<LevelState> lv(levels_.size());
    for (std::size_t l = 0; l < levels_.size(); ++l) {
        lv[l].state = ref;
        lv[l].noise.assign(n, 0.0);
        lv[l].end = macro_steps(l) * levels_[l].fine_per_macro;
        lv[l].sub_len = levels_[l].fine_per_macro / levels_[l].rbm_substeps;
        lv[l].sub_dt = levels_[l].tau / static_cast<double>(levels_[l].rbm_substeps);
        observe(l, 0, ref, lv[l].state);
    }

    const NoiseSource source(seed, realization, n, fine_dt_);
    std::vector<double> increment(n);
    Workspace w(n);

    for (std::size_t s = 0; s < fine_steps_; ++s) {
        source.fill(s, increment);
        advance_full(model, ref, fine_dt_, increment, w);
        ref.t = static_cast<double>(s + 1) * fine_dt_;
        require_finite_state(ref, -1);

        for (std::size_t l = 0; l < levels_.size(); ++l) {
            LevelState& L = lv[l];
            if (s >= L.end) continue;
            const Level& spec = levels_[l];
            const std::size_t in_macro = s % spec.fine_per_macro;
            if (in_macro == 0) {
                L.partition = macro_step_partition(model, seed, realization, L.k + 1);
            }
            if (s % L.sub_len == 0) {
                std::copy(increment.begin(), increment.end(), L.noise.begin());
            }
            else {
                for (std::size_t a = 0; a < n; ++a) L.noise[a] += increment[a];
            }
            if (s % L.sub_len == L.sub_len - 1) {
                advance_batch(model, L.state, *L.partition, L.sub_dt, L.noise, w);
            }
            if (in_macro == spec.fine_per_macro - 1) {
                ++L.k;
                L.state.t = static_cast<double>(L.k) * spec.tau;
                require_finite_state(L.state, static_cast<int>(l));
                observe(l, L.k, ref, L.state);
            }
        }
    }
}

CoupledTrajectory simulate_coupled(const SystemModel& model, std::uint64_t seed,
                                   std::uint32_t realization,
                                   std::size_t ref_substeps_per_tau,
                                   std::size_t rbm_substeps_per_tau)
{
    if (ref_substeps_per_tau == 0 || rbm_substeps_per_tau == 0 ||
        ref_substeps_per_tau % rbm_substeps_per_tau != 0) {
        throw InvalidArgument(
            "simulate_coupled: ref_substeps_per_tau must be a multiple of "
            "rbm_substeps_per_tau");
    }
    const double tau = model.tau();
    const double fine_dt = tau / static_cast<double>(ref_substeps_per_tau);
    CoupledRunner runner(model, fine_dt,
                         {{tau, ref_substeps_per_tau, rbm_substeps_per_tau}});

    CoupledTrajectory traj;
    traj.seed = seed;
    traj.realization = realization;
    traj.ref_substeps = ref_substeps_per_tau;
    traj.rbm_substeps = rbm_substeps_per_tau;
    const std::size_t steps = runner.macro_steps(0);
    traj.times.reserve(steps + 1);
    traj.ref_states.reserve(steps + 1);
    traj.rbm_states.reserve(steps + 1);
    runner.run(seed, realization,
               [&](std::size_t, std::size_t k, const ParticleState& ref,
                   const ParticleState& rbm) {
                   const double t = static_cast<double>(k) * tau;
                   traj.times.push_back(t);
                   traj.ref_states.push_back(ref);
                   traj.ref_states.back().t = t;
                   traj.rbm_states.push_back(rbm);
                   traj.rbm_states.back().t = t;
               });
    return traj;
}

}  // namespace rbm
