#include "rse/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string hash_header(const ExperimentConfig& config) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016" PRIx64 " master_seed=%" PRIu64 "\n",
                  config.hash(), config.master_seed);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

/// First comment line of a stats CSV; throws StaleInputError on mismatch.
void check_hash_line(const fs::path& path, const ExperimentConfig& config) {
    std::ifstream in(path);
    if (!in) throw StaleInputError("stats file missing: " + path.string());
    std::string line;
    std::getline(in, line);
    char expect[80];
    std::snprintf(expect, sizeof(expect), "# config_hash=%016" PRIx64, config.hash());
    if (line.rfind(expect, 0) != 0) {
        throw StaleInputError("stats file " + path.string() +
                              " does not match the configuration hash");
    }
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw StaleInputError("stats file missing: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

struct GateResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

}  // namespace

ValidationOutcome cmd_validate(const ExperimentConfig& config, const std::string& out_dir) {
    auto grid = make_grid(config);
    const EnvModel model = make_model(config, grid);

    ValidationOutcome outcome;
    json report;
    bool pass = true;

    RngStream rng(derive_key(config.master_seed, StreamTag::Validation, 0));

    // Sampled boundedness and Lipschitz envelopes.
    const AssumptionReport assumptions = assumption_report(model, 2000, rng);
    report["assumptions"] = {
        {"sampled_sup_v", assumptions.sampled_sup_v},
        {"declared_sup_v", assumptions.declared_sup_v},
        {"sampled_sup_dv", assumptions.sampled_sup_dv},
        {"declared_sup_dv", assumptions.declared_sup_dv},
        {"sampled_sup_b", assumptions.sampled_sup_b},
        {"declared_sup_b", assumptions.declared_sup_b},
        {"sampled_lipschitz_dv", assumptions.sampled_lipschitz_dv},
        {"declared_lipschitz_dv", assumptions.declared_lipschitz_dv},
        {"pass", assumptions.ok},
    };
    pass = pass && assumptions.ok;

    // Shift covariance on random triples.
    double worst_shift = 0.0;
    for (int i = 0; i < 100; ++i) {
        const EnvPoint sigma = sample_env(model, rng);
        Field u = sample_wiener_shape(*grid, rng);
        const double c = 4.0 * rng.uniform01() - 2.0;
        worst_shift = std::max(worst_shift, verify_shift_covariance(model, sigma, u, c));
    }
    const bool shift_ok = worst_shift <= 1e-10;
    report["shift_covariance"] = {{"max_deviation", worst_shift}, {"pass", shift_ok}};
    pass = pass && shift_ok;

    // Divergence-free battery, 3 SE gate per test function.
    if (model.has_drift()) {
        const EnvPoint sigma = sample_env(model, rng);
        const auto battery = default_exp_battery(*grid, 10);
        const auto estimates = verify_divergence_free(model, sigma, battery, 100000, rng);
        json rows = json::array();
        bool div_ok = true;
        for (const auto& est : estimates) {
            const bool row_ok = std::abs(est.estimate) <= 3.0 * est.standard_error;
            div_ok = div_ok && row_ok;
            rows.push_back({{"test_fn", est.label},
                            {"estimate", est.estimate},
                            {"standard_error", est.standard_error},
                            {"pass", row_ok}});
        }
        report["divergence_free"] = {{"tests", rows}, {"pass", div_ok}};
        pass = pass && div_ok;
    } else {
        report["divergence_free"] = {{"tests", json::array()}, {"pass", true}};
    }

    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, config.hash());
    report["config_hash"] = hex;
    report["master_seed"] = config.master_seed;
    report["pass"] = pass;

    fs::create_directories(out_dir);
    write_json(fs::path(out_dir) / "validation.json", report);

    outcome.pass = pass;
    outcome.report = std::move(report);
    return outcome;
}

EnsembleStats cmd_simulate(const ExperimentConfig& config, const std::string& out_dir,
                           int workers) {
    auto grid = make_grid(config);
    const EnvModel model = make_model(config, grid);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const fs::path checkpoints_path = dir / "checkpoints.csv";
    const fs::path samples_path = dir / "samples.csv";
    const fs::path fluct_path = dir / "fluct_samples.csv";
    const fs::path meta_path = dir / "run_meta.json";

    EnsembleStats stats;
    try {
        stats = run_ensemble(config.ensemble_config(workers), model);
    } catch (...) {
        // no partial outputs on failure
        for (const auto& p : {checkpoints_path, samples_path, fluct_path, meta_path}) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        throw;
    }

    const std::string header = hash_header(config);

    {
        std::string body = header;
        body +=
            "t,var_mean_mode,var_mean_mode_se,fluct_var_cell_01,fluct_var_cell_05,"
            "fluct_var_cell_09,fluct_h_norm_sq,n_env,n_noise\n";
        for (const auto& ckpt : stats.checkpoints) {
            body += fmt_double(ckpt.t) + "," + fmt_double(ckpt.var_mean_mode) + "," +
                    fmt_double(ckpt.var_mean_mode_se) + "," + fmt_double(ckpt.fluct_var_cell[0]) +
                    "," + fmt_double(ckpt.fluct_var_cell[1]) + "," +
                    fmt_double(ckpt.fluct_var_cell[2]) + "," + fmt_double(ckpt.mean_fluct_normsq) +
                    "," + std::to_string(stats.n_env) + "," + std::to_string(stats.n_noise) + "\n";
        }
        write_text(checkpoints_path, body);
    }

    {
        std::string body = header;
        body += "t,env_index,noise_index,mean_mode\n";
        for (const auto& ckpt : stats.checkpoints) {
            for (int e = 0; e < stats.n_env; ++e) {
                for (int w = 0; w < stats.n_noise; ++w) {
                    body += fmt_double(ckpt.t) + "," + std::to_string(e) + "," +
                            std::to_string(w) + "," +
                            fmt_double(ckpt.samples[static_cast<std::size_t>(e) * stats.n_noise + w]
                                           .mean_mode) +
                            "\n";
                }
            }
        }
        write_text(samples_path, body);
    }

    {
        std::string body = header;
        body += "t,env_index,noise_index,fluct_h_norm_sq\n";
        for (const auto& ckpt : stats.checkpoints) {
            for (int e = 0; e < stats.n_env; ++e) {
                for (int w = 0; w < stats.n_noise; ++w) {
                    body += fmt_double(ckpt.t) + "," + std::to_string(e) + "," +
                            std::to_string(w) + "," +
                            fmt_double(ckpt.samples[static_cast<std::size_t>(e) * stats.n_noise + w]
                                           .fluct_normsq) +
                            "\n";
                }
            }
        }
        write_text(fluct_path, body);
    }

    {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016" PRIx64, config.hash());
        json meta;
        meta["config"] = config.to_json();
        meta["config_hash"] = hex;
        meta["master_seed"] = config.master_seed;
        meta["probe_cells"] = stats.probe_cells;
        meta["version"] = "rse_heat 0.1.0";
        write_json(meta_path, meta);
    }

    return stats;
}

AnalyzeOutcome cmd_analyze(const ExperimentConfig& config, const std::string& stats_dir,
                           const std::string& out_dir) {
    const fs::path sdir(stats_dir);
    check_hash_line(sdir / "checkpoints.csv", config);
    check_hash_line(sdir / "samples.csv", config);
    check_hash_line(sdir / "fluct_samples.csv", config);

    // Rebuild the stats object from the files.
    EnsembleStats stats;
    stats.n_env = config.n_env;
    stats.n_noise = config.n_noise;
    stats.master_seed = config.master_seed;

    const auto ckpt_rows = read_csv_rows(sdir / "checkpoints.csv");
    if (ckpt_rows.size() < 2 || ckpt_rows[0].size() < 9) {
        throw StaleInputError("checkpoints.csv: malformed");
    }
    const std::size_t n_checkpoints = ckpt_rows.size() - 1;
    stats.checkpoints.resize(n_checkpoints);
    for (std::size_t c = 0; c < n_checkpoints; ++c) {
        const auto& row = ckpt_rows[c + 1];
        auto& ckpt = stats.checkpoints[c];
        ckpt.t = std::stod(row[0]);
        ckpt.var_mean_mode = std::stod(row[1]);
        ckpt.var_mean_mode_se = std::stod(row[2]);
        ckpt.fluct_var_cell = {std::stod(row[3]), std::stod(row[4]), std::stod(row[5])};
        ckpt.mean_fluct_normsq = std::stod(row[6]);
        if (std::stoi(row[7]) != config.n_env || std::stoi(row[8]) != config.n_noise) {
            throw StaleInputError("checkpoints.csv: replica counts do not match the config");
        }
        ckpt.samples.resize(static_cast<std::size_t>(config.n_env) * config.n_noise);
    }

    auto fill_samples = [&](const fs::path& path, auto&& setter) {
        const auto rows = read_csv_rows(path);
        if (rows.empty()) throw StaleInputError(path.string() + ": malformed");
        std::size_t ckpt_idx = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            if (row.size() < 4) throw StaleInputError(path.string() + ": malformed row");
            const double t = std::stod(row[0]);
            while (ckpt_idx < n_checkpoints &&
                   std::abs(stats.checkpoints[ckpt_idx].t - t) > 1e-12 * std::max(1.0, t)) {
                ++ckpt_idx;
            }
            if (ckpt_idx >= n_checkpoints) {
                throw StaleInputError(path.string() + ": row with unknown checkpoint time");
            }
            const int e = std::stoi(row[1]);
            const int w = std::stoi(row[2]);
            if (e < 0 || e >= config.n_env || w < 0 || w >= config.n_noise) {
                throw StaleInputError(path.string() + ": replica index out of range");
            }
            setter(stats.checkpoints[ckpt_idx]
                       .samples[static_cast<std::size_t>(e) * config.n_noise + w],
                   std::stod(row[3]));
        }
    };
    fill_samples(sdir / "samples.csv", [](ReplicaSample& s, double v) { s.mean_mode = v; });
    fill_samples(sdir / "fluct_samples.csv",
                 [](ReplicaSample& s, double v) { s.fluct_normsq = v; });

    auto grid = make_grid(config);
    const EnvModel model = make_model(config, grid);

    AnalyzeOutcome outcome;

    // Point estimate and bounds.
    const SlopeEstimate slope = estimate_a2_slope(stats, config.burn_in_fraction);
    RngStream pi_rng(derive_key(config.master_seed, StreamTag::Analysis, 0x9a));
    const PiEnsemble pi = sample_pi(model, config.pi_samples, pi_rng);
    const LowerBound lower = lower_bound_C(model, pi);

    DiffusivityReport report;
    report.a2_hat = slope.a2_hat;
    report.se = slope.se;
    report.lower_c = lower.c;
    report.lower_c_se = lower.se;
    report.upper = 1.0;
    report.method = "weighted slope of E[mean_mode^2] vs t, burn-in " +
                    fmt_double(config.burn_in_fraction) + ", environment bootstrap (200)";

    std::optional<VariationalResult> variational;
    if (!model.has_drift() && model.kind() != EnvKind::QuasiPeriodic && config.trial_modes > 0) {
        variational = variational_bound(model, TrialFamily{config.trial_modes}, pi);
        report.variational = variational->bound;
        report.variational_se = variational->se;
    }

    const auto battery = config.battery();
    const double a_for_refs = std::sqrt(std::max(slope.a2_hat, 1e-12));
    const CltMetricSeries metric = clt_l1_metric(stats, battery, a_for_refs);

    // Pooled samples of mean_mode(T)/sqrt(T) at the final checkpoint.
    std::vector<double> pooled;
    {
        const auto& last = stats.checkpoints.back();
        const double inv_sqrt_t = 1.0 / std::sqrt(last.t);
        for (const auto& s : last.samples) pooled.push_back(s.mean_mode * inv_sqrt_t);
    }
    outcome.ks = ks_gaussianity(pooled, a_for_refs);

    // Gates.
    std::vector<GateResult> gates;
    {
        const double combined_lower = std::sqrt(slope.se * slope.se + lower.se * lower.se);
        GateResult g;
        g.name = "sandwich_lower";
        g.pass = slope.a2_hat >= lower.c - 3.0 * combined_lower;
        g.detail = "a2_hat " + fmt_double(slope.a2_hat) + " >= C " + fmt_double(lower.c) +
                   " - 3*SE " + fmt_double(combined_lower);
        gates.push_back(g);
        GateResult u;
        u.name = "sandwich_upper";
        u.pass = slope.a2_hat <= 1.0 + 3.0 * slope.se;
        u.detail = "a2_hat " + fmt_double(slope.a2_hat) + " <= 1 + 3*SE " + fmt_double(slope.se);
        gates.push_back(u);
        GateResult k;
        k.name = "ks_gaussianity";
        k.pass = outcome.ks.pass;
        k.detail = "D_n " + fmt_double(outcome.ks.d_n) + " threshold " +
                   fmt_double(outcome.ks.threshold);
        gates.push_back(k);
        if (variational) {
            const double combined = std::sqrt(slope.se * slope.se + variational->se * variational->se);
            GateResult v;
            v.name = "variational_dominance";
            v.pass = slope.a2_hat <= variational->bound + 3.0 * combined;
            v.detail = "a2_hat " + fmt_double(slope.a2_hat) + " <= bound " +
                       fmt_double(variational->bound) + " + 3*SE " + fmt_double(combined);
            gates.push_back(v);
        }
    }
    bool all_pass = true;
    for (const auto& g : gates) all_pass = all_pass && g.pass;
    outcome.gates_pass = all_pass;
    outcome.report = report;

    // Outputs.
    fs::create_directories(out_dir);
    const fs::path odir(out_dir);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, config.hash());

    {
        json doc;
        doc["a2_hat"] = report.a2_hat;
        doc["se"] = report.se;
        doc["intercept"] = slope.intercept;
        doc["checkpoints_used"] = slope.checkpoints_used;
        doc["lower_C"] = report.lower_c;
        doc["lower_C_se"] = report.lower_c_se;
        doc["upper"] = report.upper;
        doc["z_hat"] = pi.z_hat;
        doc["z_se"] = pi.z_se;
        if (report.variational) {
            doc["variational_bound"] = *report.variational;
            doc["variational_bound_se"] = *report.variational_se;
            doc["trial_modes"] = config.trial_modes;
        }
        doc["method"] = report.method;
        doc["config_hash"] = hex;
        doc["master_seed"] = config.master_seed;
        write_json(odir / "diffusivity.json", doc);
    }

    {
        std::string body = hash_header(config);
        body += "t";
        for (const auto& name : metric.member_names) body += ",metric_" + name;
        body += ",combined";
        for (const auto& name : metric.member_names) body += ",floor_" + name;
        body += "\n";
        for (std::size_t i = 0; i < metric.t.size(); ++i) {
            body += fmt_double(metric.t[i]);
            double combined = 0.0;
            for (double m : metric.metric[i]) combined += m;
            combined /= static_cast<double>(metric.metric[i].size());
            for (double m : metric.metric[i]) body += "," + fmt_double(m);
            body += "," + fmt_double(combined);
            for (double m : metric.noise_floor[i]) body += "," + fmt_double(m);
            body += "\n";
        }
        write_text(odir / "clt_metric.csv", body);
    }

    {
        json doc;
        doc["d_n"] = outcome.ks.d_n;
        doc["threshold_1pct"] = outcome.ks.threshold;
        doc["pass"] = outcome.ks.pass;
        doc["n_samples"] = outcome.ks.n_samples;
        doc["a_used"] = a_for_refs;
        doc["config_hash"] = hex;
        doc["master_seed"] = config.master_seed;
        write_json(odir / "ks.json", doc);
    }

    {
        json doc;
        doc["config_hash"] = hex;
        doc["master_seed"] = config.master_seed;
        json rows = json::array();
        for (const auto& g : gates) {
            rows.push_back({{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
        }
        doc["gates"] = rows;
        doc["all_pass"] = all_pass;
        write_json(odir / "gates.json", doc);
    }

    {
        fs::create_directories(odir / "plotdata");
        std::string var_body = hash_header(config);
        var_body += "t,var_mean_mode,var_mean_mode_se\n";
        std::string fluct_body = hash_header(config);
        fluct_body +=
            "t,fluct_var_cell_01,fluct_var_cell_05,fluct_var_cell_09,fluct_h_norm_sq\n";
        for (const auto& ckpt : stats.checkpoints) {
            var_body += fmt_double(ckpt.t) + "," + fmt_double(ckpt.var_mean_mode) + "," +
                        fmt_double(ckpt.var_mean_mode_se) + "\n";
            fluct_body += fmt_double(ckpt.t) + "," + fmt_double(ckpt.fluct_var_cell[0]) + "," +
                          fmt_double(ckpt.fluct_var_cell[1]) + "," +
                          fmt_double(ckpt.fluct_var_cell[2]) + "," +
                          fmt_double(ckpt.mean_fluct_normsq) + "\n";
        }
        write_text(odir / "plotdata" / "var_mean_vs_t.csv", var_body);
        write_text(odir / "plotdata" / "fluctuation_vs_t.csv", fluct_body);

        std::string metric_body = hash_header(config);
        metric_body += "t";
        for (const auto& name : metric.member_names) metric_body += "," + name;
        metric_body += "\n";
        for (std::size_t i = 0; i < metric.t.size(); ++i) {
            metric_body += fmt_double(metric.t[i]);
            for (double m : metric.metric[i]) metric_body += "," + fmt_double(m);
            metric_body += "\n";
        }
        write_text(odir / "plotdata" / "metric_vs_t.csv", metric_body);
    }

    outcome.gates = json{{"all_pass", all_pass}};
    return outcome;
}

}  // namespace rse
