// rbm: command-line front end for simulation, order sweeps, consistency
// reports and step-cost benchmarks.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbm/batching.hpp"
#include "rbm/config.hpp"
#include "rbm/errors.hpp"
#include "rbm/harness.hpp"
#include "rbm/integrator.hpp"
#include "rbm/io.hpp"
#include "rbm/metrics.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitRefused = 2;

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t workers = 1;
    bool json = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true)
{
    auto* opt = cmd->add_option("--config", c.config, "JSON model configuration");
    if (config_required) opt->required();
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--out", c.out, "output path prefix");
    cmd->add_option("--workers", c.workers, "worker threads (0 = auto)");
    cmd->add_flag("--json", c.json, "machine-readable summary on stdout");
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw rbm::InvalidArgument("cannot write " + path);
    f << text;
}

json number(double v)
{
    // JSON has no NaN; such rows carry null
    return std::isfinite(v) ? json(v) : json(nullptr);
}

//---------------------------------------------------------------------------//
int run_simulate(const Common& c, std::size_t realizations, std::size_t refine,
                 std::size_t rbm_substeps)
{
    if (c.out.empty()) throw rbm::InvalidArgument("simulate needs --out");
    const rbm::SystemModel model = rbm::load_model(c.config);
    std::vector<std::string> files(2 * realizations);
    rbm::parallel_for(realizations, c.workers, [&](std::size_t r) {
        const auto traj = rbm::simulate_coupled(model, c.seed, static_cast<std::uint32_t>(r),
                                                refine, rbm_substeps);
        const std::string stem = c.out + "_r" + std::to_string(r);
        for (int which = 0; which < 2; ++which) {
            const auto& states = which == 0 ? traj.ref_states : traj.rbm_states;
            const std::string path = stem + (which == 0 ? "_ref.csv" : "_rbm.csv");
            std::ofstream f(path, std::ios::binary);
            if (!f) throw rbm::InvalidArgument("cannot write " + path);
            rbm::write_trajectory_csv(f, states, model.size(), model.dim());
            files[2 * r + which] = path;
        }
    });
    if (c.json) {
        json j = {{"seed", c.seed},
                  {"realizations", realizations},
                  {"steps", model.num_steps()},
                  {"ref_substeps", refine},
                  {"rbm_substeps", rbm_substeps},
                  {"files", files}};
        std::cout << j.dump(2) << '\n';
    }
    return kExitOk;
}

//---------------------------------------------------------------------------//
json summary(const rbm::SweepPlan& plan, const rbm::SweepResult& res)
{
    json rows = json::array();
    for (const auto& r : res.table.rows) {
        json row = {{"tau", r.tau},
                    {"error", number(r.error)},
                    {"stderr", number(r.std_error)},
                    {"realizations", r.realizations},
                    {"diverged", r.diverged},
                    {"argmax_time", r.argmax_time}};
        if (plan.metric == rbm::Metric::Weak) row["argmax_phi"] = r.argmax_phi;
        rows.push_back(row);
    }
    json battery = json::array();
    if (plan.metric == rbm::Metric::Weak) {
        const auto b = plan.battery.empty() ? rbm::default_battery(plan.model.dim()) : plan.battery;
        for (const auto& phi : b) battery.push_back(rbm::name(phi));
    }
    const auto& f = res.fit;
    json j = {
        {"metric", plan.metric == rbm::Metric::Strong ? "strong" : "weak"},
        {"seed", plan.seed},
        {"refinement", plan.refinement},
        {"rbm_substeps", plan.rbm_substeps},
        {"reference", plan.reference == rbm::ReferenceGrid::Shared ? "shared" : "per-tau"},
        {"rows", rows},
        {"fit",
         {{"status", rbm::to_string(f.status)},
          {"slope", f.slope},
          {"intercept", f.intercept},
          {"r_squared", f.r_squared},
          {"used_rows", f.used},
          {"excluded_rows", f.excluded},
          {"residuals", f.residuals},
          {"diagnostic", f.diagnostic}}},
        {"warnings", res.warnings},
    };
    if (plan.metric == rbm::Metric::Weak) j["battery"] = battery;
    return j;
}

int run_order(const Common& c, rbm::Metric metric, std::vector<double> taus,
              std::optional<std::size_t> realizations, std::size_t refine,
              std::size_t rbm_substeps, bool shared)
{
    const rbm::SystemModel model = rbm::load_model(c.config);
    if (taus.empty()) {
        double tau = model.tau();
        for (int l = 0; l < 5; ++l, tau /= 2.0) taus.push_back(tau);
    }
    rbm::SweepPlan plan{model};
    plan.taus = std::move(taus);
    plan.realizations = realizations.value_or(metric == rbm::Metric::Strong ? 200 : 1000);
    plan.refinement = refine;
    plan.rbm_substeps = rbm_substeps;
    plan.reference = shared ? rbm::ReferenceGrid::Shared : rbm::ReferenceGrid::PerTau;
    plan.metric = metric;
    plan.seed = c.seed;
    plan.workers = c.workers;

    const rbm::SweepResult res = rbm::run_sweep(plan);
    const std::string csv = rbm::table_csv(res.table);
    const json j = summary(plan, res);
    if (!c.out.empty()) {
        write_file(c.out + ".csv", csv);
        write_file(c.out + ".json", j.dump(2) + "\n");
    }
    if (c.json) std::cout << j.dump(2) << '\n';
    else if (c.out.empty()) std::cout << csv;
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    if (!res.fit.ok()) {
        std::cerr << "fit refused (" << rbm::to_string(res.fit.status)
                  << "): " << res.fit.diagnostic << '\n';
        return kExitRefused;
    }
    return kExitOk;
}

//---------------------------------------------------------------------------//
int run_consistency(const Common& c, std::size_t samples, std::size_t particle,
                    std::uint32_t realization)
{
    const rbm::SystemModel model = rbm::load_model(c.config);
    const std::size_t n = model.size();
    const std::size_t p = model.batch_size();

    rbm::RngStream ind_rng(c.seed, {rbm::StreamPurpose::Sampling, realization, 0});
    const auto ind = rbm::indicator_moment_check(n, p, samples, ind_rng);
    json j;
    j["indicator"] = {{"N", ind.n_particles},
                      {"p", ind.batch_size},
                      {"exhaustive", ind.exhaustive},
                      {"draws", ind.draws},
                      {"first", ind.first},
                      {"first_stderr", ind.first_stderr},
                      {"predicted_first", ind.predicted_first},
                      {"second", number(ind.second)},
                      {"second_stderr", number(ind.second_stderr)},
                      {"predicted_second", number(ind.predicted_second)}};

    const rbm::ParticleState state = rbm::initial_state(model, c.seed, realization);
    rbm::RngStream chi_rng(c.seed, {rbm::StreamPurpose::Sampling, realization, 1});
    const auto chi = rbm::chi_moment_check(model, state, particle, samples, &chi_rng);
    j["chi"] = {{"particle", chi.particle},
                {"exhaustive", chi.exhaustive},
                {"draws", chi.draws},
                {"mean_norm", chi.mean_norm},
                {"second_moment", chi.second_moment},
                {"lambda", chi.lambda},
                {"predicted", chi.predicted},
                {"second_stderr", chi.second_stderr}};
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) write_file(c.out + ".json", j.dump(2) + "\n");
    return kExitOk;
}

//---------------------------------------------------------------------------//
int run_bench(const Common& c, std::vector<std::size_t> sizes, std::size_t p,
              std::size_t repetitions)
{
    rbm::BenchPlan plan;
    plan.sizes = std::move(sizes);
    plan.batch_size = p;
    plan.repetitions = repetitions;
    plan.seed = c.seed;
    plan.kernel.interaction = rbm::RadialKernel{rbm::GaussianEnvelopeFn{1.0, 1.0}};
    if (!c.config.empty()) {
        const rbm::SystemModel model = rbm::load_model(c.config);
        plan.d = model.dim();
        plan.kernel = model.kernel();
        plan.sigma = model.sigma();
    }
    const auto rows = rbm::bench_step_cost(plan);

    std::string csv = "N,p,full_ns_per_step,rbm_ns_per_step,ratio\n";
    json jrows = json::array();
    for (const auto& r : rows) {
        csv += std::to_string(r.n) + "," + std::to_string(r.batch_size) + "," +
               rbm::format_double(r.full_ns) + "," + rbm::format_double(r.rbm_ns) + "," +
               rbm::format_double(r.ratio()) + "\n";
        jrows.push_back({{"N", r.n},
                         {"p", r.batch_size},
                         {"full_ns_per_step", r.full_ns},
                         {"rbm_ns_per_step", r.rbm_ns},
                         {"ratio", r.ratio()},
                         {"full_inner_repetitions", r.full_inner},
                         {"rbm_inner_repetitions", r.rbm_inner}});
    }
    if (!c.out.empty()) write_file(c.out + ".csv", csv);
    if (c.json) std::cout << json{{"rows", jrows}}.dump(2) << '\n';
    else std::cout << csv;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Random batch simulation of weighted interacting particle systems"};
    app.require_subcommand(1);

    Common sim_c, strong_c, weak_c, cons_c, bench_c;

    auto* sim = app.add_subcommand("simulate", "coupled reference/RBM trajectories to CSV");
    add_common(sim, sim_c);
    std::size_t sim_real = 1, sim_refine = 10, sim_sub = 1;
    sim->add_option("--realizations", sim_real, "number of realizations");
    sim->add_option("--refine", sim_refine, "reference sub-steps per tau");
    sim->add_option("--rbm-substeps", sim_sub, "RBM sub-steps per tau");

    struct OrderOpts {
        std::vector<double> taus;
        std::optional<std::size_t> realizations;
        std::size_t refine = 10;
        std::size_t substeps = 1;
        bool shared = false;
    } strong_o, weak_o;
    auto add_order = [](CLI::App* cmd, OrderOpts& o) {
        cmd->add_option("--taus", o.taus, "decreasing step sizes (default: tau halved 4 times)")
            ->delimiter(',');
        cmd->add_option("--realizations", o.realizations, "coupled realizations per tau");
        cmd->add_option("--refine", o.refine, "reference sub-steps per tau");
        cmd->add_option("--rbm-substeps", o.substeps, "RBM sub-steps per tau");
        cmd->add_flag("--shared-reference", o.shared,
                      "one reference at tau_min / refine for every tau");
    };
    auto* strong = app.add_subcommand("strong-order", "sweep tau and fit the strong order");
    add_common(strong, strong_c);
    add_order(strong, strong_o);
    auto* weak = app.add_subcommand("weak-order", "sweep tau and fit the weak order");
    add_common(weak, weak_c);
    add_order(weak, weak_o);

    auto* cons = app.add_subcommand("consistency", "indicator and chi moment report (JSON)");
    add_common(cons, cons_c);
    std::size_t cons_samples = 100000, cons_particle = 0;
    std::uint32_t cons_real = 0;
    cons->add_option("--samples", cons_samples, "Monte Carlo draws when enumeration is too big");
    cons->add_option("--particle", cons_particle, "particle index for the chi report");
    cons->add_option("--realization", cons_real, "realization whose initial state is used");

    auto* bench = app.add_subcommand("bench", "wall time of full vs RBM steps");
    add_common(bench, bench_c, false);
    std::vector<std::size_t> bench_sizes{64, 256, 1024, 4096, 8192, 16384};
    std::size_t bench_p = 2, bench_reps = 5;
    bench->add_option("--sizes", bench_sizes, "particle counts")->delimiter(',');
    bench->add_option("--p", bench_p, "batch size (0 = N)");
    bench->add_option("--repetitions", bench_reps, "timed samples per size");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*sim) return run_simulate(sim_c, sim_real, sim_refine, sim_sub);
        if (*strong) {
            return run_order(strong_c, rbm::Metric::Strong, strong_o.taus,
                             strong_o.realizations, strong_o.refine, strong_o.substeps,
                             strong_o.shared);
        }
        if (*weak) {
            return run_order(weak_c, rbm::Metric::Weak, weak_o.taus, weak_o.realizations,
                             weak_o.refine, weak_o.substeps, weak_o.shared);
        }
        if (*cons) return run_consistency(cons_c, cons_samples, cons_particle, cons_real);
        if (*bench) return run_bench(bench_c, bench_sizes, bench_p, bench_reps);
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
