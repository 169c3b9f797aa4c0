#include "evtpool/analytics.hpp"
#include "evtpool/bootstrap.hpp"
#include "evtpool/data.hpp"
#include "evtpool/errors.hpp"
#include "evtpool/fixture.hpp"
#include "evtpool/model.hpp"
#include "evtpool/model_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace evtpool;

namespace {

bool g_quiet = false;

void log_info(const std::string& msg) {
    if (g_quiet)
        return;
    std::string escaped;
    for (char c : msg) {
        if (c == '"' || c == '\\')
            escaped += '\\';
        escaped += c;
    }
    std::fprintf(stderr, "{\"level\":\"info\",\"msg\":\"%s\"}\n", escaped.c_str());
}

std::string fmt(double v, const char* spec = "%.8g") {
    if (std::isnan(v))
        return "";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

struct CommonArgs {
    std::string input;
    std::string config_path;
    std::string out_dir = ".";
    std::string model_name = "M7b";
    std::string phi_r = "15";
    std::size_t n_exceed = 200;
    std::size_t bootstrap_b = 250;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string nation;
};

AnalysisConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty())
        return AnalysisConfig{};
    return load_analysis_config(args.config_path);
}

fs::path ensure_out_dir(const CommonArgs& args) {
    fs::path out(args.out_dir);
    fs::create_directories(out);
    return out;
}

model::FittedModel load_model_for(const CommonArgs& args, const std::string& override_path) {
    const fs::path path =
        override_path.empty() ? fs::path(args.out_dir) / "model.json" : fs::path(override_path);
    if (!fs::exists(path))
        throw InputError("model file not found: " + path.string() + " (run `evtpool fit` first)");
    return io::load_model(path.string());
}

// The analysis input must be the data the model was fitted to.
void check_model_matches_data(const model::FittedModel& fitted,
                              const std::vector<EventDataset>& datasets) {
    if (fitted.events.size() != datasets.size())
        throw InputError("input data and model cover different event sets");
    for (std::size_t e = 0; e < datasets.size(); ++e) {
        if (datasets[e].event_id != fitted.events[e].event_id)
            throw InputError("input data and model cover different event sets");
        if (std::abs(datasets[e].threshold_u - fitted.events[e].threshold_u) > 1e-9)
            throw InputError("threshold mismatch for " + datasets[e].event_id +
                             "; refit or supply the original data");
    }
}

std::optional<bootstrap::BootstrapEnsemble> maybe_load_ensemble(const CommonArgs& args,
                                                                const model::FittedModel& fitted) {
    const fs::path path = fs::path(args.out_dir) / "ensemble.jsonl";
    if (!fs::exists(path))
        return std::nullopt;
    auto ens = bootstrap::load_ensemble(path.string(), fitted.layout().size());
    log_info("loaded ensemble with " + std::to_string(ens.retained) + "/" +
             std::to_string(ens.requested) + " retained replicates");
    return ens;
}

std::ofstream open_csv(const fs::path& path) {
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    return out;
}

std::pair<double, double> percentile_interval(std::vector<double> vals, double level) {
    std::sort(vals.begin(), vals.end());
    const auto pick = [&](double p) {
        const double idx = p * static_cast<double>(vals.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const double frac = idx - static_cast<double>(lo);
        return vals[lo] * (1 - frac) + vals[std::min(lo + 1, vals.size() - 1)] * frac;
    };
    const double tail = 0.5 * (1.0 - level);
    return {pick(tail), pick(1.0 - tail)};
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

model::FitConfig make_fit_config(const CommonArgs& args, model::ModelId id) {
    model::FitConfig cfg;
    cfg.model_id = id;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    if (args.phi_r == "cv")
        cfg.phi_r_from_cv = true;
    else
        cfg.phi_r = std::stod(args.phi_r);
    return cfg;
}

void write_diagnostics(const model::FittedModel& fitted, const std::vector<EventDataset>& datasets,
                       const fs::path& out) {
    fs::create_directories(out / "diagnostics");
    {
        auto pp = open_csv(out / "diagnostics" / "pp.csv");
        pp << "index,expected_p,observed_p,band_lo,band_hi\n";
        const auto points = model::pooled_pp(fitted, datasets);
        for (std::size_t i = 0; i < points.size(); ++i)
            pp << i + 1 << ',' << fmt(points[i].expected) << ',' << fmt(points[i].observed) << ','
               << fmt(points[i].band_lo) << ',' << fmt(points[i].band_hi) << "\n";
    }
    for (const auto& ds : datasets) {
        auto rc = open_csv(out / "diagnostics" / ("rate_" + ds.event_id + ".csv"));
        rc << "year,expected,observed,ci_lo,ci_hi\n";
        for (const auto& row : model::rate_check(fitted, datasets, ds.event_id))
            rc << fmt(row.year, "%.0f") << ',' << fmt(row.expected) << ',' << row.observed << ','
               << fmt(row.ci_lo, "%.0f") << ',' << fmt(row.ci_hi, "%.0f") << "\n";
    }
}

int cmd_fit(const CommonArgs& args) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    log_info("loading " + args.input);
    LoadedData data = load_datasets(args.input, config, args.n_exceed);

    std::vector<model::ModelId> to_fit;
    const bool full_ladder = args.model_name == "ladder";
    const model::ModelId target =
        full_ladder ? model::ModelId::M7b : model::parse_model_id(args.model_name);
    if (full_ladder) {
        to_fit = {model::ModelId::M1a, model::ModelId::M1b, model::ModelId::M2,
                  model::ModelId::M3,  model::ModelId::M4,  model::ModelId::M5,
                  model::ModelId::M6,  model::ModelId::M7a, model::ModelId::M7b};
    } else {
        if (target != model::ModelId::M1a)
            to_fit.push_back(model::ModelId::M1a); // ladder baseline
        to_fit.push_back(target);
    }

    struct LadderRow {
        std::string model, constraints;
        double aic_ric = 0.0, effective = 0.0;
    };
    std::vector<LadderRow> ladder;
    std::optional<model::FittedModel> final_model;
    std::optional<model::CvResult> cv_result;
    for (model::ModelId id : to_fit) {
        log_info("fitting " + model::to_string(id));
        model::FitConfig cfg = make_fit_config(args, id);
        if (cfg.phi_r_from_cv && model::structure_of(id).uses_spline()) {
            if (!cv_result) {
                model::FitConfig cv_cfg = cfg;
                cv_cfg.model_id = target;
                cv_result =
                    model::cross_validate_phi_r(data.datasets, data.scaler, config.epochs, cv_cfg);
                log_info("cross-validated phi_r = " + fmt(cv_result->chosen_phi_r));
            }
            cfg.phi_r = cv_result->chosen_phi_r;
        }
        cfg.phi_r_from_cv = false;
        model::FittedModel fitted = fit(data.datasets, data.scaler, config.epochs, cfg);
        ladder.push_back(
            {model::to_string(id), model::constraints_label(id), fitted.ric, fitted.effective_dof});
        log_info(model::to_string(id) + ": loglik " + fmt(fitted.loglik) + ", ric " +
                 fmt(fitted.ric) + ", g " + fmt(fitted.effective_dof));
        if (id == target)
            final_model = std::move(fitted);
    }

    {
        auto lc = open_csv(out / "ladder.csv");
        lc << "model,constraints,aic_ric,delta_vs_M1a,effective_params\n";
        const double base = ladder.front().model == "M1a"
                                ? ladder.front().aic_ric
                                : std::numeric_limits<double>::quiet_NaN();
        for (const auto& row : ladder)
            lc << row.model << ',' << row.constraints << ',' << fmt(row.aic_ric) << ','
               << fmt(row.aic_ric - base) << ',' << fmt(row.effective, "%.3f") << "\n";
    }
    if (cv_result) {
        auto cc = open_csv(out / "cv.csv");
        cc << "phi_r,mean_predictive_loglik\n";
        for (std::size_t g = 0; g < cv_result->grid.size(); ++g)
            cc << fmt(cv_result->grid[g]) << ',' << fmt(cv_result->mean_predictive[g]) << "\n";
    }

    io::save_model(*final_model, (out / "model.json").string());
    write_diagnostics(*final_model, data.datasets, out);
    log_info("wrote " + (out / "model.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// bootstrap
// ---------------------------------------------------------------------------

int cmd_bootstrap(const CommonArgs& args, const std::string& model_path) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    const model::FittedModel fitted = load_model_for(args, model_path);
    LoadedData data = load_datasets(args.input, config, args.n_exceed);
    check_model_matches_data(fitted, data.datasets);

    bootstrap::BootstrapConfig bcfg;
    bcfg.B = args.bootstrap_b;
    bcfg.seed = args.seed;
    bcfg.threads = args.threads;
    log_info("bootstrapping B = " + std::to_string(bcfg.B));
    const auto ensemble = bootstrap::bootstrap_ensemble(fitted, data.datasets, bcfg);
    log_info("retained " + std::to_string(ensemble.retained) + "/" +
             std::to_string(ensemble.requested) + " (" +
             std::to_string(ensemble.discarded_infeasible) + " infeasible, " +
             std::to_string(ensemble.discarded_nonconverged) + " non-converged)");
    bootstrap::save_ensemble(ensemble, (out / "ensemble.jsonl").string());

    const model::ParameterLayout layout = fitted.layout();
    std::vector<std::pair<std::string, std::size_t>> named;
    if (layout.xi_offset != model::ParameterLayout::npos)
        named.push_back({"xi", layout.xi_offset});
    if (layout.mu_offset != model::ParameterLayout::npos) {
        named.push_back({"alpha1", layout.mu_offset});
        named.push_back({"theta1", layout.mu_offset + 1});
    }
    if (layout.beta_offset != model::ParameterLayout::npos) {
        named.push_back({"alpha3", layout.beta_offset});
        named.push_back({"theta3", layout.beta_offset + 1});
    }
    if (layout.gamma_offset != model::ParameterLayout::npos) {
        named.push_back({"alpha4", layout.gamma_offset});
        named.push_back({"theta4", layout.gamma_offset + 1});
        if (layout.structure.two_suit)
            named.push_back({"epsilon", layout.gamma_offset + 2});
    }
    auto sc = open_csv(out / "bootstrap_summary.csv");
    sc << "parameter,estimate,ci_lo,ci_hi,retained,requested\n";
    for (const auto& [name, idx] : named) {
        const auto interval = bootstrap::ci(
            [idx = idx](const Eigen::VectorXd& psi) { return psi[static_cast<Eigen::Index>(idx)]; },
            ensemble);
        sc << name << ',' << fmt(fitted.psi[static_cast<Eigen::Index>(idx)]) << ','
           << fmt(interval.first) << ',' << fmt(interval.second) << ',' << ensemble.retained << ','
           << ensemble.requested << "\n";
    }
    log_info("wrote ensemble.jsonl and bootstrap_summary.csv");
    return 0;
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

int cmd_rank(const CommonArgs& args, const std::string& model_path, std::size_t top_n) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    const model::FittedModel fitted = load_model_for(args, model_path);
    LoadedData data = load_datasets(args.input, config, args.n_exceed);
    check_model_matches_data(fitted, data.datasets);
    const auto ensemble = maybe_load_ensemble(args, fitted);

    const std::optional<std::string> nation =
        args.nation.empty() ? std::nullopt : std::make_optional(args.nation);
    auto rows = analytics::rank_table(fitted, data.datasets, top_n, nation);

    if (ensemble && ensemble->retained >= 20) {
        // Re-rank under every retained replicate; per-swim rank percentiles.
        std::map<std::string, std::size_t> row_of;
        for (std::size_t i = 0; i < rows.size(); ++i)
            row_of[rows[i].event_id + "|" + rows[i].swimmer_id] = i;
        std::vector<std::vector<double>> rank_samples(rows.size());
        for (const auto* rep : ensemble->retained_view()) {
            const model::FittedModel view = model::with_parameters(fitted, rep->psi);
            const auto rep_rows = analytics::rank_table(view, data.datasets, 0, nation);
            for (std::size_t i = 0; i < rep_rows.size(); ++i) {
                const auto it = row_of.find(rep_rows[i].event_id + "|" + rep_rows[i].swimmer_id);
                if (it != row_of.end())
                    rank_samples[it->second].push_back(static_cast<double>(i + 1));
            }
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rank_samples[i].size() >= 20)
                rows[i].rank_ci = percentile_interval(rank_samples[i], 0.95);
        }
    }

    auto rc = open_csv(out / "ranks.csv");
    rc << "rank,swimmer_id,event_id,time_s,date,r_value,ci_lo,ci_hi\n";
    for (const auto& r : rows) {
        rc << r.rank << ',' << r.swimmer_id << ',' << r.event_id << ',' << fmt(r.time_s, "%.2f")
           << ',' << format_date(r.date) << ',' << fmt(r.r_value);
        if (r.rank_ci)
            rc << ',' << fmt(r.rank_ci->first, "%.1f") << ',' << fmt(r.rank_ci->second, "%.1f");
        else
            rc << ",,";
        rc << "\n";
    }
    log_info("wrote ranks.csv with " + std::to_string(rows.size()) + " rows");
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const CommonArgs& args, const std::string& model_path) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    const model::FittedModel fitted = load_model_for(args, model_path);
    LoadedData data = load_datasets(args.input, config, args.n_exceed);
    check_model_matches_data(fitted, data.datasets);
    const auto ensemble = maybe_load_ensemble(args, fitted);

    std::vector<analytics::RecordState> records;
    for (const auto& ds : data.datasets)
        records.push_back(analytics::record_state(ds));

    const bool with_ci = ensemble && ensemble->retained >= 20;
    const auto per_replicate_ci =
        [&](const std::function<double(const model::FittedModel&)>& stat)
        -> std::optional<std::pair<double, double>> {
        if (!with_ci)
            return std::nullopt;
        const auto retained = ensemble->retained_view();
        std::vector<double> vals(retained.size());
        optim::parallel_for(retained.size(), args.threads, [&](std::size_t i) {
            vals[i] = stat(model::with_parameters(fitted, retained[i]->psi));
        });
        return percentile_interval(std::move(vals), 0.95);
    };

    {
        auto uc = open_csv(out / "ultimate.csv");
        uc << "event_id,ultimate_s,ci_lo,ci_hi\n";
        for (const auto& ds : data.datasets) {
            const double ult = analytics::ultimate_time(fitted, ds.event_id);
            const auto ci = per_replicate_ci([&](const model::FittedModel& m) {
                return analytics::ultimate_time(m, ds.event_id);
            });
            uc << ds.event_id << ',' << fmt(ult, "%.4f") << ','
               << (ci ? fmt(ci->first, "%.4f") : "") << ',' << (ci ? fmt(ci->second, "%.4f") : "")
               << "\n";
        }
        log_info("wrote ultimate.csv");
    }
    {
        auto nc = open_csv(out / "next_record.csv");
        nc << "event_id,record_s,expected_next_s,ci_lo,ci_hi\n";
        for (const auto& rec : records) {
            const double next = analytics::expected_next_record(fitted, rec.event_id, rec);
            const auto ci = per_replicate_ci([&](const model::FittedModel& m) {
                return analytics::expected_next_record(m, rec.event_id, rec);
            });
            nc << rec.event_id << ',' << fmt(-rec.record_x, "%.2f") << ',' << fmt(next, "%.4f")
               << ',' << (ci ? fmt(ci->first, "%.4f") : "") << ','
               << (ci ? fmt(ci->second, "%.4f") : "") << "\n";
        }
        log_info("wrote next_record.csv");
    }
    {
        auto wc = open_csv(out / "waiting.csv");
        wc << "event_id,expected_wait_years,ci_lo,ci_hi,cdf_1y,cdf_2y,cdf_5y,cdf_10y\n";
        for (const auto& rec : records) {
            const double wait = analytics::expected_waiting_years(fitted, rec.event_id, rec);
            const auto ci = per_replicate_ci([&](const model::FittedModel& m) {
                return analytics::expected_waiting_years(m, rec.event_id, rec);
            });
            wc << rec.event_id << ',' << fmt(wait, "%.4f") << ','
               << (ci ? fmt(ci->first, "%.4f") : "") << ',' << (ci ? fmt(ci->second, "%.4f") : "");
            for (double h : {1.0, 2.0, 5.0, 10.0})
                wc << ','
                   << fmt(analytics::record_waiting_cdf(fitted, rec.event_id, rec, h), "%.6f");
            wc << "\n";
        }
        log_info("wrote waiting.csv");
    }
    {
        const auto probs = analytics::prob_next_record_in_event(fitted, records);
        std::map<std::string, std::pair<double, double>> prob_ci;
        if (with_ci) {
            const auto retained = ensemble->retained_view();
            std::vector<std::map<std::string, double>> reps(retained.size());
            optim::parallel_for(retained.size(), args.threads, [&](std::size_t i) {
                const auto view = model::with_parameters(fitted, retained[i]->psi);
                reps[i] = analytics::prob_next_record_in_event(view, records).normalized;
            });
            for (const auto& rec : records) {
                std::vector<double> vals;
                for (const auto& rep : reps)
                    vals.push_back(rep.at(rec.event_id));
                prob_ci[rec.event_id] = percentile_interval(std::move(vals), 0.95);
            }
        }
        auto pc = open_csv(out / "next_event_prob.csv");
        pc << "event_id,probability,raw_probability,ci_lo,ci_hi\n";
        for (const auto& rec : records) {
            pc << rec.event_id << ',' << fmt(probs.normalized.at(rec.event_id), "%.6f") << ','
               << fmt(probs.raw.at(rec.event_id), "%.6f");
            const auto it = prob_ci.find(rec.event_id);
            if (it != prob_ci.end())
                pc << ',' << fmt(it->second.first, "%.6f") << ','
                   << fmt(it->second.second, "%.6f");
            else
                pc << ",,";
            pc << "\n";
        }
        log_info("wrote next_event_prob.csv");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// adjust / diagnose / simulate / schema-check
// ---------------------------------------------------------------------------

int cmd_adjust(const CommonArgs& args, const std::string& model_path, const std::string& event,
               double time_s, const std::string& date, const std::string& direction) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    const model::FittedModel fitted = load_model_for(args, model_path);

    auto ac = open_csv(out / "adjusted.csv");
    ac << "event_id,wr_holder,wr_date,wr,awr,nswr_holder,nswr_date,nswr,standing_holder\n";

    if (!event.empty()) {
        analytics::SuitDirection dir;
        if (direction == "remove")
            dir = analytics::SuitDirection::Remove;
        else if (direction == "add1")
            dir = analytics::SuitDirection::AddEpoch1;
        else if (direction == "add2")
            dir = analytics::SuitDirection::AddEpoch2;
        else
            throw InputError("--direction must be remove, add1 or add2");
        if (date.empty())
            throw InputError("--date is required for a single-swim adjustment");
        const Date d = parse_date(date);
        const double adjusted = analytics::adjust_suit_time(fitted, event, -time_s, d, dir);
        ac << event << ",-," << format_date(d) << ',' << fmt(time_s, "%.2f") << ','
           << fmt(adjusted, "%.2f") << ",,,,\n";
        std::printf("%.2f\n", adjusted);
        return 0;
    }

    if (args.input.empty())
        throw InputError("adjust needs --input (for the full table) or --event/--time/--date");
    LoadedData data = load_datasets(args.input, config, args.n_exceed);
    check_model_matches_data(fitted, data.datasets);
    for (const auto& row : analytics::would_be_records(fitted, data.datasets)) {
        const std::string standing = row.suit_record_stands
                                         ? row.wr_holder
                                         : (row.has_non_suit ? row.nswr_holder : row.wr_holder);
        ac << row.event_id << ',' << row.wr_holder << ',' << format_date(row.wr_date) << ','
           << fmt(row.wr_seconds, "%.2f") << ',' << fmt(row.adjusted_seconds, "%.2f") << ','
           << (row.has_non_suit ? row.nswr_holder : "") << ','
           << (row.has_non_suit ? format_date(row.nswr_date) : "") << ','
           << (row.has_non_suit ? fmt(row.nswr_seconds, "%.2f") : "") << ',' << standing << "\n";
    }
    log_info("wrote adjusted.csv");
    return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& model_path) {
    const AnalysisConfig config = load_config(args);
    const fs::path out = ensure_out_dir(args);
    const model::FittedModel fitted = load_model_for(args, model_path);
    LoadedData data = load_datasets(args.input, config, args.n_exceed);
    check_model_matches_data(fitted, data.datasets);
    write_diagnostics(fitted, data.datasets, out);
    log_info("wrote diagnostics");
    return 0;
}

int cmd_simulate(const CommonArgs& args, const std::string& model_path, std::size_t n_events,
                 double target_count) {
    const fs::path out = ensure_out_dir(args);
    model::FittedModel source;
    if (!model_path.empty()) {
        source = io::load_model(model_path);
    } else {
        fixture::TruthSpec spec;
        spec.n_events = n_events;
        spec.target_mean_count = target_count;
        source = fixture::make_truth_model(spec, load_config(args));
        io::save_model(source, (out / "truth_model.json").string());
        log_info("wrote truth_model.json");
    }
    const auto datasets = bootstrap::simulate_datasets(source, args.seed);
    fixture::write_csv(datasets, (out / "sim.csv").string());
    std::size_t total = 0;
    for (const auto& ds : datasets)
        total += ds.points.size();
    log_info("wrote sim.csv with " + std::to_string(total) + " swims across " +
             std::to_string(datasets.size()) + " events");
    return 0;
}

int cmd_schema_check(const CommonArgs& args) {
    const auto results = io::check_output_dir(args.out_dir);
    bool all_ok = true;
    for (const auto& r : results) {
        std::printf("%-40s %s %s\n", r.file.c_str(), r.ok ? "OK  " : "FAIL", r.message.c_str());
        all_ok = all_ok && r.ok;
    }
    if (results.empty())
        std::printf("no csv files found under %s\n", args.out_dir.c_str());
    return all_ok ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pooled extreme-value model of elite swim-times"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string model_path;
    std::string adjust_event, adjust_date, adjust_direction = "remove";
    double adjust_time = 0.0;
    std::size_t top_n = 0;
    std::size_t sim_events = 34;
    double sim_target = 260.0;

    const auto add_common = [&](CLI::App* cmd, bool needs_input) {
        auto* in = cmd->add_option("--input", args.input, "input CSV of swims");
        if (needs_input)
            in->required();
        cmd->add_option("--config", args.config_path, "registry/epochs JSON config");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "random seed");
        cmd->add_option("--threads", args.threads, "worker threads (outputs are unaffected)");
        cmd->add_option("--n-exceed", args.n_exceed, "exceedances per event threshold");
        cmd->add_flag("--quiet", g_quiet, "suppress progress logging");
    };

    auto* fit_cmd = app.add_subcommand("fit", "fit the pooled model and emit the ladder report");
    add_common(fit_cmd, true);
    fit_cmd->add_option("--model", args.model_name, "model id (M1a..M7b) or 'ladder'");
    fit_cmd->add_option("--phi-r", args.phi_r, "roughness penalty weight, or 'cv'");

    auto* boot_cmd = app.add_subcommand("bootstrap", "parametric bootstrap ensemble");
    add_common(boot_cmd, true);
    boot_cmd->add_option("--B", args.bootstrap_b, "number of replicates");
    boot_cmd->add_option("--model-file", model_path, "model.json path (default <out>/model.json)");

    auto* rank_cmd = app.add_subcommand("rank", "r-value ranking table");
    add_common(rank_cmd, true);
    rank_cmd->add_option("--model-file", model_path, "model.json path");
    rank_cmd->add_option("--top", top_n, "keep only the best N swims (0 = all)");
    rank_cmd->add_option("--nation", args.nation, "swimmer_id prefix filter, e.g. USA");

    auto* pred_cmd = app.add_subcommand("predict", "ultimate times, records, waiting times");
    add_common(pred_cmd, true);
    pred_cmd->add_option("--model-file", model_path, "model.json path");

    auto* adj_cmd = app.add_subcommand("adjust", "suit-technology time adjustment");
    add_common(adj_cmd, false);
    adj_cmd->add_option("--model-file", model_path, "model.json path");
    adj_cmd->add_option("--event", adjust_event, "event id for a single swim adjustment");
    adj_cmd->add_option("--time", adjust_time, "swim time in seconds");
    adj_cmd->add_option("--date", adjust_date, "swim date (YYYY-MM-DD)");
    adj_cmd->add_option("--direction", adjust_direction, "remove | add1 | add2");

    auto* diag_cmd = app.add_subcommand("diagnose", "PP and yearly-rate diagnostics");
    add_common(diag_cmd, true);
    diag_cmd->add_option("--model-file", model_path, "model.json path");

    auto* sim_cmd = app.add_subcommand("simulate", "simulate a dataset from a model");
    add_common(sim_cmd, false);
    sim_cmd->add_option("--model-file", model_path, "simulate from this model.json");
    sim_cmd->add_option("--events", sim_events, "number of events for the built-in truth model");
    sim_cmd->add_option("--target-count", sim_target, "mean exceedances per event");

    auto* schema_cmd = app.add_subcommand("schema-check", "validate emitted CSV files");
    schema_cmd->add_option("--out", args.out_dir, "directory to validate")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed())
            return cmd_fit(args);
        if (boot_cmd->parsed())
            return cmd_bootstrap(args, model_path);
        if (rank_cmd->parsed())
            return cmd_rank(args, model_path, top_n);
        if (pred_cmd->parsed())
            return cmd_predict(args, model_path);
        if (adj_cmd->parsed())
            return cmd_adjust(args, model_path, adjust_event, adjust_time, adjust_date,
                              adjust_direction);
        if (diag_cmd->parsed())
            return cmd_diagnose(args, model_path);
        if (sim_cmd->parsed())
            return cmd_simulate(args, model_path, sim_events, sim_target);
        if (schema_cmd->parsed())
            return cmd_schema_check(args);
    } catch (const VersionMismatchError& e) {
        std::fprintf(stderr, "{\"level\":\"error\",\"kind\":\"version\",\"msg\":\"%s\"}\n",
                     e.what());
        return 3;
    } catch (const InputError& e) {
        std::fprintf(stderr, "{\"level\":\"error\",\"kind\":\"input\",\"msg\":\"%s\"}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"level\":\"error\",\"kind\":\"internal\",\"msg\":\"%s\"}\n",
                     e.what());
        return 1;
    }
    return 0;
}
