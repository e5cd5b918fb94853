#include "rbm/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rbm/errors.hpp"
#include "rbm/rng.hpp"

namespace rbm {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where)
{
    if (!obj.is_object()) throw InvalidArgument(where + ": expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!keys.count(key)) {
            throw InvalidArgument(where + ": unknown field '" + key + "'");
        }
    }
}

double number(const json& obj, const char* key, const std::string& where)
{
    if (!obj.contains(key)) throw InvalidArgument(where + ": missing '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw InvalidArgument(where + "." + key + ": expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback,
                 const std::string& where)
{
    return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::size_t count(const json& obj, const char* key, const std::string& where)
{
    if (!obj.contains(key)) throw InvalidArgument(where + ": missing '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw InvalidArgument(where + "." + key + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<double> number_list(const json& v, const std::string& where)
{
    if (!v.is_array()) throw InvalidArgument(where + ": expected an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw InvalidArgument(where + ": expected numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<int> int_list(const json& v, const std::string& where)
{
    if (!v.is_array()) throw InvalidArgument(where + ": expected an array");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw InvalidArgument(where + ": expected integers");
        out.push_back(e.get<int>());
    }
    return out;
}

// {"name": ..., "params": {...}}
std::pair<std::string, json> named(const json& v, const std::string& where)
{
    reject_unknown(v, {"name", "params"}, where);
    if (!v.contains("name") || !v.at("name").is_string()) {
        throw InvalidArgument(where + ": missing string 'name'");
    }
    json params = v.contains("params") ? v.at("params") : json::object();
    if (!params.is_object()) throw InvalidArgument(where + ".params: expected an object");
    return {v.at("name").get<std::string>(), params};
}

RadialFunction parse_function(const json& v, const std::string& where)
{
    const auto [nm, params] = named(v, where);
    const std::string pw = where + ".params";
    if (nm == "zero") {
        reject_unknown(params, {}, pw);
        return ZeroFn{};
    }
    if (nm == "linear") {
        reject_unknown(params, {"a"}, pw);
        return LinearFn{number_or(params, "a", 1.0, pw)};
    }
    if (nm == "gaussian_envelope") {
        reject_unknown(params, {"a", "s"}, pw);
        return GaussianEnvelopeFn{number_or(params, "a", 1.0, pw),
                                  number_or(params, "s", 1.0, pw)};
    }
    if (nm == "cosine_envelope") {
        reject_unknown(params, {"a", "omega"}, pw);
        return CosineEnvelopeFn{number_or(params, "a", 1.0, pw),
                                number_or(params, "omega", 1.0, pw)};
    }
    if (nm == "constant") {
        reject_unknown(params, {"c"}, pw);
        return ConstantFn{number_or(params, "c", 1.0, pw)};
    }
    throw InvalidArgument(where + ": unknown function '" + nm + "'");
}

Interaction parse_interaction(const json& v)
{
    const std::string where = "kernel";
    const auto [nm, params] = named(v, where);
    const std::string pw = where + ".params";
    if (nm == "zero") {
        reject_unknown(params, {}, pw);
        return ZeroKernel{};
    }
    if (nm == "charged") {
        reject_unknown(params, {"function"}, pw);
        if (!params.contains("function")) throw InvalidArgument(pw + ": missing 'function'");
        return ChargedKernel{parse_function(params.at("function"), pw + ".function")};
    }
    if (nm == "pairwise_table") {
        reject_unknown(params, {"table"}, pw);
        if (!params.contains("table") || !params.at("table").is_array()) {
            throw InvalidArgument(pw + ": missing array 'table'");
        }
        PairwiseTableKernel k;
        for (const auto& row : params.at("table")) {
            if (!row.is_array()) throw InvalidArgument(pw + ".table: rows must be arrays");
            std::vector<RadialFunction> fns;
            for (const auto& f : row) fns.push_back(parse_function(f, pw + ".table"));
            k.table.push_back(std::move(fns));
        }
        return k;
    }
    // any catalog function used directly as K_ij(x, y) = F(x - y)
    return RadialKernel{parse_function(v, where)};
}

Drift parse_drift(const json& v, KernelSpec& spec)
{
    const std::string where = "drift";
    reject_unknown(v, {"name", "params", "beta", "q"}, where);
    json base = {{"name", v.value("name", json())}};
    if (v.contains("params")) base["params"] = v.at("params");
    const auto [nm, params] = named(base, where);
    spec.lipschitz_beta = number_or(v, "beta", 0.0, where);
    if (v.contains("q")) {
        if (!v.at("q").is_number_integer()) throw InvalidArgument("drift.q: expected integer");
        spec.growth_q = v.at("q").get<int>();
    }
    const std::string pw = where + ".params";
    if (nm == "zero") {
        reject_unknown(params, {}, pw);
        return ZeroDrift{};
    }
    if (nm == "linear") {
        reject_unknown(params, {"kappa", "center"}, pw);
        LinearDrift b{number_or(params, "kappa", 1.0, pw), {}};
        if (params.contains("center")) b.center = number_list(params.at("center"), pw + ".center");
        return b;
    }
    if (nm == "double_well") {
        reject_unknown(params, {"alpha"}, pw);
        return DoubleWellDrift{number_or(params, "alpha", 1.0, pw)};
    }
    throw InvalidArgument(where + ": unknown drift '" + nm + "'");
}

void parse_weights(const json& v, std::size_t n, SystemModel::Params& p)
{
    const std::string where = "weights";
    if (v.is_array()) {
        p.masses = number_list(v, where);
        return;
    }
    if (!v.is_object()) throw InvalidArgument(where + ": expected array or object");
    if (v.contains("bound")) p.mass_bound = number(v, "bound", where);
    if (v.contains("uniform")) {
        reject_unknown(v, {"uniform", "bound"}, where);
        p.masses.assign(n, number(v, "uniform", where));
        return;
    }
    if (v.contains("seeded_range")) {
        reject_unknown(v, {"seeded_range", "seed", "bound"}, where);
        const auto range = number_list(v.at("seeded_range"), where + ".seeded_range");
        if (range.size() != 2 || !(range[0] <= range[1])) {
            throw InvalidArgument(where + ".seeded_range: expected [lo, hi] with lo <= hi");
        }
        std::uint64_t seed = 0;
        if (v.contains("seed")) {
            if (!v.at("seed").is_number_unsigned()) {
                throw InvalidArgument(where + ".seed: expected a non-negative integer");
            }
            seed = v.at("seed").get<std::uint64_t>();
        }
        RngStream rng(seed, {StreamPurpose::Weights, 0, 0});
        p.masses.resize(n);
        for (double& m : p.masses) m = range[0] + (range[1] - range[0]) * rng.uniform();
        if (!p.mass_bound) p.mass_bound = range[1];
        return;
    }
    throw InvalidArgument(where + ": expected 'uniform' or 'seeded_range'");
}

InitialField parse_field(const json& v, std::size_t n, std::size_t d,
                         const std::string& where)
{
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "zero") return ZeroInit{};
        if (s == "normal") return NormalInit{};
        throw InvalidArgument(where + ": unknown distribution '" + s + "'");
    }
    if (v.is_array()) {
        ExplicitInit e;
        for (const auto& row : v) {
            if (row.is_array()) {
                const auto r = number_list(row, where);
                if (r.size() != d) throw InvalidArgument(where + ": rows must have d entries");
                e.values.insert(e.values.end(), r.begin(), r.end());
            }
            else if (row.is_number()) {
                e.values.push_back(row.get<double>());
            }
            else {
                throw InvalidArgument(where + ": expected numbers or rows");
            }
        }
        if (e.values.size() != n * d) throw InvalidArgument(where + ": expected N x d values");
        return e;
    }
    reject_unknown(v, {"normal"}, where);
    if (!v.contains("normal")) throw InvalidArgument(where + ": expected 'normal'");
    const auto& g = v.at("normal");
    reject_unknown(g, {"mean", "std"}, where + ".normal");
    return NormalInit{number_or(g, "mean", 0.0, where), number_or(g, "std", 1.0, where)};
}

}  // namespace

SystemModel parse_model(const std::string& json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    }
    catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    reject_unknown(doc, {"d", "N", "p", "weights", "species", "kernel", "drift", "sigma",
                         "dynamics", "T", "tau", "initial"},
                   "config");

    SystemModel::Params p;
    p.d = count(doc, "d", "config");
    p.n_particles = count(doc, "N", "config");
    p.batch_size = count(doc, "p", "config");
    if (doc.contains("weights")) parse_weights(doc.at("weights"), p.n_particles, p);
    if (doc.contains("species")) {
        const auto& s = doc.at("species");
        reject_unknown(s, {"charges", "labels"}, "species");
        if (s.contains("charges")) p.species.charges = int_list(s.at("charges"), "species.charges");
        if (s.contains("labels")) p.species.labels = int_list(s.at("labels"), "species.labels");
        if (p.species.labels.empty() && !p.species.charges.empty()) {
            // one species per sign
            for (int z : p.species.charges) p.species.labels.push_back(z > 0 ? 0 : 1);
        }
    }
    if (doc.contains("kernel")) p.kernel.interaction = parse_interaction(doc.at("kernel"));
    if (doc.contains("drift")) p.kernel.drift = parse_drift(doc.at("drift"), p.kernel);
    p.sigma = number_or(doc, "sigma", 0.0, "config");
    if (doc.contains("dynamics")) {
        const auto& dyn = doc.at("dynamics");
        if (dyn.is_string() && dyn.get<std::string>() == "first") {
            p.dynamics = FirstOrder{};
        }
        else if (dyn.is_object()) {
            reject_unknown(dyn, {"second"}, "dynamics");
            const auto& so = dyn.at("second");
            reject_unknown(so, {"gamma"}, "dynamics.second");
            p.dynamics = SecondOrder{number_or(so, "gamma", 0.0, "dynamics.second")};
        }
        else {
            throw InvalidArgument("dynamics: expected \"first\" or {\"second\": {...}}");
        }
    }
    p.final_time = number(doc, "T", "config");
    p.tau = number(doc, "tau", "config");
    if (doc.contains("initial")) {
        const auto& init = doc.at("initial");
        reject_unknown(init, {"positions", "velocities"}, "initial");
        if (init.contains("positions")) {
            p.initial.positions =
                parse_field(init.at("positions"), p.n_particles, p.d, "initial.positions");
        }
        if (init.contains("velocities")) {
            p.initial.velocities =
                parse_field(init.at("velocities"), p.n_particles, p.d, "initial.velocities");
        }
    }
    return SystemModel(std::move(p));
}

SystemModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_model(text.str());
}

}  // namespace rbm
