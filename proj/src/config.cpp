#include "rse/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace rse {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

double require_number(const json& obj, const std::string& where, const std::string& key,
                      double lo, double hi, std::optional<double> fallback = std::nullopt) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("config: missing required field '" + key + "' in " + where);
    }
    if (!obj[key].is_number()) {
        throw ConfigError("config: field '" + key + "' in " + where + " must be a number");
    }
    const double v = obj[key].get<double>();
    if (!(v >= lo && v <= hi)) {
        throw ConfigError("config: field '" + key + "' in " + where + " out of range [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return v;
}

std::vector<PotentialMode> parse_modes(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw ConfigError("config: '" + where + "' must be an array");
    std::vector<PotentialMode> modes;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& m = arr[i];
        const std::string here = where + "[" + std::to_string(i) + "]";
        reject_unknown_keys(m, here, {"m", "amplitude", "phase", "x_profile", "j"});
        PotentialMode pm;
        pm.m = static_cast<int>(require_number(m, here, "m", 1, 1024));
        pm.amplitude = require_number(m, here, "amplitude", -100.0, 100.0);
        pm.phase = require_number(m, here, "phase", -100.0, 100.0, 0.0);
        if (m.contains("x_profile")) {
            const std::string profile = m["x_profile"].get<std::string>();
            if (profile == "constant") {
                pm.profile = XProfile::Constant;
            } else if (profile == "cosine") {
                pm.profile = XProfile::Cosine;
                pm.profile_j = static_cast<int>(require_number(m, here, "j", 1, 1024));
            } else {
                throw ConfigError("config: x_profile in " + here +
                                  " must be 'constant' or 'cosine'");
            }
        }
        modes.push_back(pm);
    }
    return modes;
}

json mode_to_json(const PotentialMode& pm) {
    json m;
    m["m"] = pm.m;
    m["amplitude"] = pm.amplitude;
    m["phase"] = pm.phase;
    m["x_profile"] = pm.profile == XProfile::Constant ? "constant" : "cosine";
    if (pm.profile == XProfile::Cosine) m["j"] = pm.profile_j;
    return m;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
    reject_unknown_keys(doc, "top level",
                        {"environment", "grid", "dynamics", "ensemble", "analysis", "output"});
    ExperimentConfig cfg;

    // environment
    if (!doc.contains("environment")) throw ConfigError("config: missing 'environment' section");
    {
        const auto& env = doc["environment"];
        reject_unknown_keys(env, "environment",
                            {"kind", "modes", "frequencies", "coords", "divfree"});
        const std::string kind = env.value("kind", "zero");
        if (kind == "zero") {
            cfg.env_kind = EnvKind::Zero;
            if (env.contains("modes") || env.contains("coords")) {
                throw ConfigError("config: zero environment takes no potential modes");
            }
        } else if (kind == "periodic") {
            cfg.env_kind = EnvKind::Periodic;
            cfg.potential.frequencies = {1.0};
            cfg.potential.coord_modes.resize(1);
            if (env.contains("modes")) {
                cfg.potential.coord_modes[0] = parse_modes(env["modes"], "environment.modes");
            }
            if (env.contains("coords") || env.contains("frequencies")) {
                throw ConfigError("config: periodic environment uses 'modes', not 'coords'");
            }
        } else if (kind == "quasiperiodic") {
            cfg.env_kind = EnvKind::QuasiPeriodic;
            if (!env.contains("frequencies") || !env["frequencies"].is_array() ||
                env["frequencies"].size() < 2) {
                throw ConfigError("config: quasiperiodic environment needs >= 2 frequencies");
            }
            for (const auto& f : env["frequencies"]) {
                const double lam = f.get<double>();
                if (!(std::abs(lam) <= 100.0)) {
                    throw ConfigError("config: frequency out of range");
                }
                cfg.potential.frequencies.push_back(lam);
            }
            if (!env.contains("coords") || !env["coords"].is_array() ||
                env["coords"].size() != cfg.potential.frequencies.size()) {
                throw ConfigError("config: quasiperiodic needs one coords entry per frequency");
            }
            for (std::size_t c = 0; c < env["coords"].size(); ++c) {
                const auto& coord = env["coords"][c];
                const std::string here = "environment.coords[" + std::to_string(c) + "]";
                reject_unknown_keys(coord, here, {"modes"});
                cfg.potential.coord_modes.push_back(
                    coord.contains("modes") ? parse_modes(coord["modes"], here + ".modes")
                                            : std::vector<PotentialMode>{});
            }
        } else {
            throw ConfigError("config: environment.kind must be zero|periodic|quasiperiodic");
        }
        if (env.contains("divfree")) {
            const auto& df = env["divfree"];
            reject_unknown_keys(df, "environment.divfree",
                                {"type", "mode1", "mode2", "center", "radius", "amplitude"});
            DivFreeSpec spec;
            const std::string type = df.value("type", "stream");
            if (type == "stream") {
                spec.kind = DriftKind::Stream;
                spec.mode1 = static_cast<int>(require_number(df, "divfree", "mode1", 1, 1e6, 1));
                spec.mode2 = static_cast<int>(require_number(df, "divfree", "mode2", 1, 1e6, 2));
                spec.chi.radius = require_number(df, "divfree", "radius", 1e-6, 1e6, 1.0);
                spec.chi.amplitude = require_number(df, "divfree", "amplitude", -1e6, 1e6, 1.0);
                if (df.contains("center")) {
                    if (!df["center"].is_array() || df["center"].size() != 2) {
                        throw ConfigError("config: divfree.center must be [cx, cy]");
                    }
                    spec.chi.cx = df["center"][0].get<double>();
                    spec.chi.cy = df["center"][1].get<double>();
                }
            } else if (type == "gradient_imposter") {
                spec.kind = DriftKind::GradientImposter;
            } else {
                throw ConfigError("config: divfree.type must be stream|gradient_imposter");
            }
            cfg.divfree = spec;
        }
    }
    if (cfg.env_kind == EnvKind::Zero) {
        cfg.potential.frequencies = {1.0};
        cfg.potential.coord_modes.resize(1);
    }

    // grid
    {
        const auto& grid = doc.contains("grid") ? doc["grid"] : json::object();
        reject_unknown_keys(grid, "grid", {"n_cells"});
        cfg.n_cells = static_cast<std::size_t>(require_number(grid, "grid", "n_cells", 1, 1e6, 64));
    }

    // dynamics
    {
        const auto& dyn = doc.contains("dynamics") ? doc["dynamics"] : json::object();
        reject_unknown_keys(dyn, "dynamics", {"dt", "T", "checkpoints", "scheme"});
        cfg.dt = require_number(dyn, "dynamics", "dt", 1e-9, 1.0, 1e-3);
        cfg.horizon = require_number(dyn, "dynamics", "T", 0.0, 1e6, 20.0);
        if (dyn.contains("checkpoints")) {
            if (!dyn["checkpoints"].is_array()) {
                throw ConfigError("config: dynamics.checkpoints must be an array");
            }
            for (const auto& c : dyn["checkpoints"]) cfg.checkpoints.push_back(c.get<double>());
        }
        const std::string scheme = dyn.value("scheme", "semi_implicit");
        if (scheme == "semi_implicit") {
            cfg.scheme = Scheme::SemiImplicit;
        } else if (scheme == "exact_free") {
            cfg.scheme = Scheme::ExactFree;
        } else {
            throw ConfigError("config: dynamics.scheme must be semi_implicit|exact_free");
        }
    }
    if (cfg.checkpoints.empty()) {
        for (int j = 1; j <= 10; ++j) {
            const double tc = cfg.horizon * j / 10.0;
            cfg.checkpoints.push_back(std::round(tc / cfg.dt) * cfg.dt);
        }
    }
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
        const double tc = cfg.checkpoints[i];
        if (tc < 0.0 || tc > cfg.horizon + 1e-9 * std::max(1.0, cfg.horizon)) {
            throw ConfigError("config: checkpoint outside [0, T]");
        }
        const double snapped = std::round(tc / cfg.dt) * cfg.dt;
        if (std::abs(snapped - tc) > 1e-9 * std::max(1.0, tc)) {
            throw ConfigError("config: checkpoints must be multiples of dt");
        }
        if (i > 0 && tc <= cfg.checkpoints[i - 1]) {
            throw ConfigError("config: checkpoints must be strictly increasing");
        }
    }

    // ensemble
    {
        if (!doc.contains("ensemble")) throw ConfigError("config: missing 'ensemble' section");
        const auto& ens = doc["ensemble"];
        reject_unknown_keys(ens, "ensemble", {"n_env", "n_noise", "master_seed"});
        cfg.n_env = static_cast<int>(require_number(ens, "ensemble", "n_env", 2, 1e7));
        cfg.n_noise = static_cast<int>(require_number(ens, "ensemble", "n_noise", 2, 1e7));
        cfg.master_seed =
            static_cast<std::uint64_t>(require_number(ens, "ensemble", "master_seed", 0, 1e15, 1));
    }

    // analysis
    {
        const auto& ana = doc.contains("analysis") ? doc["analysis"] : json::object();
        reject_unknown_keys(ana, "analysis",
                            {"f_battery", "trial_modes", "burn_in_fraction", "pi_samples"});
        if (ana.contains("f_battery")) {
            if (!ana["f_battery"].is_array()) {
                throw ConfigError("config: analysis.f_battery must be an array of names");
            }
            for (const auto& name : ana["f_battery"]) {
                cfg.f_battery.push_back(name.get<std::string>());
                BoundedFunctional::by_name(cfg.f_battery.back());  // validates
            }
        }
        cfg.trial_modes = static_cast<int>(require_number(ana, "analysis", "trial_modes", 0, 64, 4));
        cfg.burn_in_fraction = require_number(ana, "analysis", "burn_in_fraction", 0.0, 0.99, 0.2);
        cfg.pi_samples =
            static_cast<std::size_t>(require_number(ana, "analysis", "pi_samples", 100, 1e9, 1e5));
    }

    // output
    {
        const auto& out = doc.contains("output") ? doc["output"] : json::object();
        reject_unknown_keys(out, "output", {"directory"});
        cfg.output_directory = out.value("directory", "out");
    }

    if (cfg.scheme == Scheme::ExactFree && cfg.env_kind != EnvKind::Zero) {
        throw ConfigError("config: exact_free scheme requires the zero environment");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config: JSON parse failure in '" + path + "': " + e.what());
    }
    return from_json(doc);
}

nlohmann::json ExperimentConfig::to_json() const {
    json env;
    switch (env_kind) {
        case EnvKind::Zero:
            env["kind"] = "zero";
            break;
        case EnvKind::Periodic: {
            env["kind"] = "periodic";
            json modes = json::array();
            for (const auto& pm : potential.coord_modes[0]) modes.push_back(mode_to_json(pm));
            env["modes"] = modes;
            break;
        }
        case EnvKind::QuasiPeriodic: {
            env["kind"] = "quasiperiodic";
            env["frequencies"] = potential.frequencies;
            json coords = json::array();
            for (const auto& cm : potential.coord_modes) {
                json modes = json::array();
                for (const auto& pm : cm) modes.push_back(mode_to_json(pm));
                coords.push_back(json{{"modes", modes}});
            }
            env["coords"] = coords;
            break;
        }
    }
    if (divfree) {
        json df;
        if (divfree->kind == DriftKind::GradientImposter) {
            df["type"] = "gradient_imposter";
        } else {
            df["type"] = "stream";
            df["mode1"] = divfree->mode1;
            df["mode2"] = divfree->mode2;
            df["center"] = {divfree->chi.cx, divfree->chi.cy};
            df["radius"] = divfree->chi.radius;
            df["amplitude"] = divfree->chi.amplitude;
        }
        env["divfree"] = df;
    }

    json doc;
    doc["environment"] = env;
    doc["grid"] = {{"n_cells", n_cells}};
    doc["dynamics"] = {{"dt", dt},
                       {"T", horizon},
                       {"checkpoints", checkpoints},
                       {"scheme", scheme == Scheme::SemiImplicit ? "semi_implicit" : "exact_free"}};
    doc["ensemble"] = {{"n_env", n_env}, {"n_noise", n_noise}, {"master_seed", master_seed}};
    doc["analysis"] = {{"f_battery", f_battery.empty() ? std::vector<std::string>{"cos_mean",
                                                                                  "exp_mean_sq",
                                                                                  "min_norm",
                                                                                  "inv_fluct"}
                                                       : f_battery},
                       {"trial_modes", trial_modes},
                       {"burn_in_fraction", burn_in_fraction},
                       {"pi_samples", pi_samples}};
    doc["output"] = {{"directory", output_directory}};
    return doc;
}

std::string ExperimentConfig::canonical_dump() const { return to_json().dump(); }

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_dump()); }

EnsembleConfig ExperimentConfig::ensemble_config(int workers) const {
    EnsembleConfig ec;
    ec.n_env = n_env;
    ec.n_noise = n_noise;
    ec.dt = dt;
    ec.checkpoints = checkpoints;
    ec.master_seed = master_seed;
    ec.scheme = scheme;
    ec.workers = workers;
    return ec;
}

std::vector<BoundedFunctional> ExperimentConfig::battery() const {
    if (f_battery.empty()) return BoundedFunctional::default_battery();
    std::vector<BoundedFunctional> fns;
    for (const auto& name : f_battery) fns.push_back(BoundedFunctional::by_name(name));
    return fns;
}

std::shared_ptr<const Grid> make_grid(const ExperimentConfig& config) {
    return std::make_shared<Grid>(config.n_cells);
}

EnvModel make_model(const ExperimentConfig& config, std::shared_ptr<const Grid> grid) {
    switch (config.env_kind) {
        case EnvKind::Zero:
            if (config.divfree) {
                PotentialSpec empty;
                empty.frequencies = {1.0};
                empty.coord_modes.resize(1);
                return EnvModel::periodic(std::move(grid), empty, config.divfree);
            }
            return EnvModel::zero(std::move(grid));
        case EnvKind::Periodic:
            return EnvModel::periodic(std::move(grid), config.potential, config.divfree);
        case EnvKind::QuasiPeriodic:
            return EnvModel::quasi_periodic(std::move(grid), config.potential, config.divfree);
    }
    throw ConfigError("make_model: unreachable environment kind");
}

}  // namespace rse
