#include "evtpool/model_io.hpp"

#include "evtpool/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace evtpool::io {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json date_json(const Date& d) { return format_date(d); }
Date date_from_json(const json& j) { return parse_date(j.get<std::string>()); }

} // namespace

void save_model(const model::FittedModel& fitted, const std::string& path) {
    ordered_json j;
    j["format"] = "evtpool-model";
    j["version"] = kModelSchemaVersion;
    j["model_id"] = model::to_string(fitted.model_id);
    j["seed"] = fitted.seed;
    j["phi_r"] = fitted.phi_r;
    j["phi_m_final"] = fitted.phi_m_final;
    j["loglik"] = fitted.loglik;
    j["penalized_loglik"] = fitted.penalized_loglik;
    j["ric_available"] = fitted.ric_available;
    j["ric"] = fitted.ric_available ? ordered_json(fitted.ric) : ordered_json();
    j["effective_dof"] =
        fitted.ric_available ? ordered_json(fitted.effective_dof) : ordered_json();
    j["fit_iterations"] = fitted.fit_iterations;

    j["scaler"] = {{"mean", fitted.scaler.mean},
                   {"sd", fitted.scaler.sd},
                   {"year_boundaries", fitted.scaler.year_boundaries}};
    j["suit_epochs"] = {{"epoch1_start", date_json(fitted.epochs.epoch1_start)},
                        {"epoch1_end", date_json(fitted.epochs.epoch1_end)},
                        {"epoch2_start", date_json(fitted.epochs.epoch2_start)},
                        {"epoch2_end", date_json(fitted.epochs.epoch2_end)}};
    if (fitted.basis) {
        j["spline"] = {{"degree", fitted.basis->degree()},
                       {"knots", fitted.basis->knots()},
                       {"coefficients", fitted.pooled.spline_a}};
    } else {
        j["spline"] = nullptr;
    }
    j["pooled"] = {{"xi", fitted.pooled.xi},       {"alpha1", fitted.pooled.alpha1},
                   {"theta1", fitted.pooled.theta1}, {"alpha2", fitted.pooled.alpha2},
                   {"theta2", fitted.pooled.theta2}, {"alpha3", fitted.pooled.alpha3},
                   {"theta3", fitted.pooled.theta3}, {"alpha4", fitted.pooled.alpha4},
                   {"theta4", fitted.pooled.theta4}, {"epsilon", fitted.pooled.epsilon}};
    j["psi"] = std::vector<double>(fitted.psi.data(), fitted.psi.data() + fitted.psi.size());

    j["events"] = ordered_json::array();
    for (const auto& ef : fitted.events) {
        ordered_json je;
        je["event_id"] = ef.event_id;
        je["threshold_u"] = ef.threshold_u;
        je["raw_threshold_u"] = ef.raw_threshold_u;
        je["u_log"] = ef.u_log;
        je["censor_s"] = ef.censor_s;
        je["n_points"] = ef.n_points;
        je["params"] = {{"mu0", ef.params.mu0},     {"sigma0", ef.params.sigma0},
                        {"xi", ef.params.xi},       {"beta", ef.params.beta},
                        {"gamma1", ef.params.gamma1}, {"gamma2", ef.params.gamma2}};
        je["sigma_tilde"] = ef.sigma_tilde;
        je["record"] = {{"x", ef.record_x},
                        {"date", date_json(ef.record_date)},
                        {"holder", ef.record_holder}};
        j["events"].push_back(std::move(je));
    }

    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

model::FittedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("model file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("format") || j.at("format").get<std::string>() != "evtpool-model")
        throw VersionMismatchError("not an evtpool model file: " + path);
    if (j.at("version").get<int>() != kModelSchemaVersion)
        throw VersionMismatchError("model schema version " +
                                   std::to_string(j.at("version").get<int>()) +
                                   " is not supported (expected " +
                                   std::to_string(kModelSchemaVersion) + ")");

    model::FittedModel m;
    m.model_id = model::parse_model_id(j.at("model_id").get<std::string>());
    m.structure = model::structure_of(m.model_id);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.phi_r = j.at("phi_r").get<double>();
    m.phi_m_final = j.at("phi_m_final").get<double>();
    m.loglik = j.at("loglik").get<double>();
    m.penalized_loglik = j.at("penalized_loglik").get<double>();
    m.ric_available = j.at("ric_available").get<bool>();
    if (m.ric_available) {
        m.ric = j.at("ric").get<double>();
        m.effective_dof = j.at("effective_dof").get<double>();
    }
    m.fit_iterations = j.at("fit_iterations").get<int>();

    const auto& js = j.at("scaler");
    m.scaler.mean = js.at("mean").get<double>();
    m.scaler.sd = js.at("sd").get<double>();
    m.scaler.year_boundaries = js.at("year_boundaries").get<std::vector<double>>();

    const auto& jep = j.at("suit_epochs");
    m.epochs.epoch1_start = date_from_json(jep.at("epoch1_start"));
    m.epochs.epoch1_end = date_from_json(jep.at("epoch1_end"));
    m.epochs.epoch2_start = date_from_json(jep.at("epoch2_start"));
    m.epochs.epoch2_end = date_from_json(jep.at("epoch2_end"));

    if (!j.at("spline").is_null()) {
        const auto& jsp = j.at("spline");
        m.basis = splines::SplineBasis::from_knots(jsp.at("knots").get<std::vector<double>>(),
                                                   jsp.at("degree").get<int>());
        m.pooled.spline_a = jsp.at("coefficients").get<std::vector<double>>();
    }
    const auto& jp = j.at("pooled");
    m.pooled.xi = jp.at("xi").get<double>();
    m.pooled.alpha1 = jp.at("alpha1").get<double>();
    m.pooled.theta1 = jp.at("theta1").get<double>();
    m.pooled.alpha2 = jp.at("alpha2").get<double>();
    m.pooled.theta2 = jp.at("theta2").get<double>();
    m.pooled.alpha3 = jp.at("alpha3").get<double>();
    m.pooled.theta3 = jp.at("theta3").get<double>();
    m.pooled.alpha4 = jp.at("alpha4").get<double>();
    m.pooled.theta4 = jp.at("theta4").get<double>();
    m.pooled.epsilon = jp.at("epsilon").get<double>();

    const auto psi = j.at("psi").get<std::vector<double>>();
    m.psi = Eigen::Map<const Eigen::VectorXd>(psi.data(), static_cast<Eigen::Index>(psi.size()));

    for (const auto& je : j.at("events")) {
        model::EventFit ef;
        ef.event_id = je.at("event_id").get<std::string>();
        ef.threshold_u = je.at("threshold_u").get<double>();
        ef.raw_threshold_u = je.at("raw_threshold_u").get<double>();
        ef.u_log = je.at("u_log").get<double>();
        ef.censor_s = je.at("censor_s").get<double>();
        ef.n_points = je.at("n_points").get<std::size_t>();
        const auto& jpar = je.at("params");
        ef.params.mu0 = jpar.at("mu0").get<double>();
        ef.params.sigma0 = jpar.at("sigma0").get<double>();
        ef.params.xi = jpar.at("xi").get<double>();
        ef.params.beta = jpar.at("beta").get<double>();
        ef.params.gamma1 = jpar.at("gamma1").get<double>();
        ef.params.gamma2 = jpar.at("gamma2").get<double>();
        ef.sigma_tilde = je.at("sigma_tilde").get<double>();
        ef.record_x = je.at("record").at("x").get<double>();
        ef.record_date = date_from_json(je.at("record").at("date"));
        ef.record_holder = je.at("record").at("holder").get<std::string>();
        m.events.push_back(std::move(ef));
    }

    const model::ParameterLayout layout = m.layout();
    if (m.psi.size() != static_cast<Eigen::Index>(layout.size()))
        throw VersionMismatchError("model parameter vector has " + std::to_string(m.psi.size()) +
                                   " entries, layout expects " + std::to_string(layout.size()));
    return m;
}

const std::vector<CsvSchema>& csv_schemas() {
    static const std::vector<CsvSchema> schemas = {
        {"ladder.csv", {"model", "constraints", "aic_ric", "delta_vs_M1a", "effective_params"}},
        {"cv.csv", {"phi_r", "mean_predictive_loglik"}},
        {"pp.csv", {"index", "expected_p", "observed_p", "band_lo", "band_hi"}},
        {"rate_<event>.csv", {"year", "expected", "observed", "ci_lo", "ci_hi"}},
        {"ranks.csv",
         {"rank", "swimmer_id", "event_id", "time_s", "date", "r_value", "ci_lo", "ci_hi"}},
        {"ultimate.csv", {"event_id", "ultimate_s", "ci_lo", "ci_hi"}},
        {"next_record.csv", {"event_id", "record_s", "expected_next_s", "ci_lo", "ci_hi"}},
        {"waiting.csv",
         {"event_id", "expected_wait_years", "ci_lo", "ci_hi", "cdf_1y", "cdf_2y", "cdf_5y",
          "cdf_10y"}},
        {"next_event_prob.csv",
         {"event_id", "probability", "raw_probability", "ci_lo", "ci_hi"}},
        {"adjusted.csv",
         {"event_id", "wr_holder", "wr_date", "wr", "awr", "nswr_holder", "nswr_date", "nswr",
          "standing_holder"}},
        {"bootstrap_summary.csv",
         {"parameter", "estimate", "ci_lo", "ci_hi", "retained", "requested"}},
        {"sim.csv", {"swimmer_id", "event_id", "time_s", "date"}},
    };
    return schemas;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.push_back("");
    return out;
}

const CsvSchema* schema_for(const std::string& filename) {
    for (const auto& s : csv_schemas()) {
        if (s.file_pattern == filename)
            return &s;
        const auto marker = s.file_pattern.find("<event>");
        if (marker != std::string::npos) {
            const std::string prefix = s.file_pattern.substr(0, marker);
            const std::string suffix = s.file_pattern.substr(marker + 7);
            if (filename.size() > prefix.size() + suffix.size() &&
                filename.rfind(prefix, 0) == 0 &&
                filename.compare(filename.size() - suffix.size(), suffix.size(), suffix) == 0)
                return &s;
        }
    }
    return nullptr;
}

} // namespace

std::vector<SchemaCheckResult> check_output_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<SchemaCheckResult> results;
    if (!fs::exists(dir))
        throw InputError("schema-check: no such directory: " + dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& path : files) {
        SchemaCheckResult r;
        r.file = fs::relative(path, dir).string();
        const CsvSchema* schema = schema_for(path.filename().string());
        if (schema == nullptr) {
            r.ok = false;
            r.message = "unknown csv file (no schema)";
            results.push_back(std::move(r));
            continue;
        }
        std::ifstream in(path);
        std::string header;
        if (!std::getline(in, header)) {
            r.ok = false;
            r.message = "empty file";
            results.push_back(std::move(r));
            continue;
        }
        std::string expected;
        for (std::size_t i = 0; i < schema->columns.size(); ++i)
            expected += (i ? "," : "") + schema->columns[i];
        if (header != expected) {
            r.ok = false;
            r.message = "header mismatch: expected '" + expected + "'";
            results.push_back(std::move(r));
            continue;
        }
        r.ok = true;
        std::string line;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            if (split_line(line).size() != schema->columns.size()) {
                r.ok = false;
                r.message = "wrong field count at line " + std::to_string(line_no);
                break;
            }
        }
        if (r.ok)
            r.message = "ok";
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace evtpool::io
