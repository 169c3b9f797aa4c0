#include "evtpool/fixture.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/evt.hpp"
#include "evtpool/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace evtpool::fixture {

namespace {

// Plausible 200th-best times (seconds) for men's events; women scaled 1.11x.
const std::map<std::string, double> kMenThresholdTimes = {
    {"50_free", 22.20},    {"100_free", 48.90},  {"200_free", 107.50},
    {"400_free", 228.00},  {"800_free", 474.00}, {"1500_free", 905.00},
    {"50_back", 25.30},    {"100_back", 54.30},  {"200_back", 118.50},
    {"50_breast", 27.60},  {"100_breast", 60.50}, {"200_breast", 131.50},
    {"50_fly", 23.60},     {"100_fly", 52.30},   {"200_fly", 117.00},
    {"200_medley", 119.50}, {"400_medley", 255.00},
};

double threshold_time_for(const EventInfo& e) {
    const std::string key = std::to_string(e.distance_m) + "_" + e.stroke;
    const auto it = kMenThresholdTimes.find(key);
    if (it == kMenThresholdTimes.end())
        throw ValidationError("fixture: no threshold time for event " + e.id);
    const double t = e.gender == 'W' ? it->second * 1.11 : it->second;
    return std::round(t * 100.0) / 100.0;
}

} // namespace

model::FittedModel make_truth_model(const TruthSpec& spec, const AnalysisConfig& config) {
    using model::EventFit;
    using model::FittedModel;

    std::vector<EventInfo> chosen = config.registry.events();
    std::sort(chosen.begin(), chosen.end(),
              [](const EventInfo& a, const EventInfo& b) { return a.id < b.id; });
    if (spec.n_events < chosen.size()) {
        // Evenly spaced over the threshold-time ordering, to keep the
        // covariate range wide even for small subsets.
        std::sort(chosen.begin(), chosen.end(), [](const EventInfo& a, const EventInfo& b) {
            return threshold_time_for(a) < threshold_time_for(b);
        });
        std::vector<EventInfo> subset;
        for (std::size_t i = 0; i < spec.n_events; ++i) {
            const std::size_t idx =
                spec.n_events == 1
                    ? 0
                    : i * (chosen.size() - 1) / (spec.n_events - 1);
            subset.push_back(chosen[idx]);
        }
        chosen = std::move(subset);
        std::sort(chosen.begin(), chosen.end(),
                  [](const EventInfo& a, const EventInfo& b) { return a.id < b.id; });
    }

    FittedModel truth;
    truth.model_id = model::ModelId::M7b;
    truth.structure = model::structure_of(truth.model_id);
    truth.epochs = config.epochs;
    truth.phi_r = 15.0;
    truth.phi_m_final = 10.0;
    truth.fit_iterations = 200;

    TimeScaler scaler;
    for (int y = spec.start_year; y <= spec.end_year; ++y)
        scaler.year_boundaries.push_back(static_cast<double>(y));
    const double span = static_cast<double>(spec.end_year - spec.start_year);
    scaler.mean = spec.start_year + 0.55 * span;
    scaler.sd = 0.24 * span;
    truth.scaler = scaler;

    double ul_min = 1e300, ul_max = -1e300;
    std::vector<double> u_vec, ul_vec;
    for (const auto& e : chosen) {
        const double u_raw = -threshold_time_for(e);
        const double u = u_raw - 0.005;
        const double ul = std::log(-u);
        u_vec.push_back(u);
        ul_vec.push_back(ul);
        ul_min = std::min(ul_min, ul);
        ul_max = std::max(ul_max, ul);
    }
    const double pad = 0.01 * std::max(ul_max - ul_min, 1.0);
    truth.basis = splines::SplineBasis::clamped_uniform(ul_min - pad, ul_max + pad, spec.spline_q,
                                                        spec.spline_degree);

    model::PooledParams pooled;
    pooled.xi = spec.xi;
    pooled.theta1 = spec.theta1;
    pooled.alpha3 = spec.alpha3;
    pooled.theta3 = spec.theta3;
    pooled.alpha4 = spec.alpha4;
    pooled.theta4 = spec.theta4;
    pooled.epsilon = spec.epsilon;
    for (double ul : ul_vec)
        if (pooled.alpha4 + pooled.theta4 * ul < 0.0 ||
            pooled.alpha4 + pooled.epsilon + pooled.theta4 * ul < 0.0)
            throw ValidationError("fixture: gamma_L negative at u_L, adjust alpha4/theta4");

    {
        // Least-squares projection of the affine sigma_L law onto the basis;
        // B-splines reproduce affine functions exactly.
        const std::size_t grid_n = 200;
        const Eigen::Index q = static_cast<Eigen::Index>(spec.spline_q);
        Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(q, q);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
        for (std::size_t i = 0; i < grid_n; ++i) {
            const double x = truth.basis->domain_lo() +
                             (truth.basis->domain_hi() - truth.basis->domain_lo()) *
                                 static_cast<double>(i) / static_cast<double>(grid_n - 1);
            const Eigen::VectorXd row = truth.basis->eval(x);
            normal += row * row.transpose();
            rhs += row * (spec.sigma_c0 + spec.sigma_c1 * x);
        }
        normal += 1e-10 * Eigen::MatrixXd::Identity(q, q);
        const Eigen::VectorXd a = normal.ldlt().solve(rhs);
        pooled.spline_a.assign(a.data(), a.data() + a.size());
    }

    // Calibrate alpha1 by bisection so the mean expected count per event
    // matches the target. Infeasible trial values (sigma(t) <= 0 somewhere)
    // count as infinite rate, which keeps the bisection inside the bracket.
    const auto mean_count = [&](double alpha1) {
        pooled.alpha1 = alpha1;
        double total = 0.0;
        for (std::size_t e = 0; e < chosen.size(); ++e) {
            EventFit ef;
            ef.event_id = chosen[e].id;
            ef.threshold_u = u_vec[e];
            ef.u_log = ul_vec[e];
            try {
                ef.params = model::event_params_from_pooled(pooled, ul_vec[e], u_vec[e],
                                                            truth.model_id, &*truth.basis);
                ef.sigma_tilde = ef.params.sigma_tilde(u_vec[e]);
                const evt::ParamPath path = truth.param_path(ef);
                total += evt::integrated_intensity(scaler.window_start_std(),
                                                   scaler.window_end_std(), u_vec[e], path);
            } catch (const std::exception&) {
                return std::numeric_limits<double>::infinity();
            }
        }
        return total / static_cast<double>(chosen.size());
    };
    double lo = -0.7, hi = -1e-5;
    if (mean_count(lo) < spec.target_mean_count || mean_count(hi) > spec.target_mean_count)
        throw NumericalError("fixture: target count outside the calibration bracket");
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_count(mid) > spec.target_mean_count)
            lo = mid;
        else
            hi = mid;
    }
    pooled.alpha1 = 0.5 * (lo + hi);
    truth.pooled = pooled;

    const model::ParameterLayout layout =
        model::ParameterLayout::create(truth.structure, chosen.size(), spec.spline_q);
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    layout.set_pooled_part(psi, pooled);
    truth.psi = psi;

    truth.events.reserve(chosen.size());
    for (std::size_t e = 0; e < chosen.size(); ++e) {
        EventFit ef;
        ef.event_id = chosen[e].id;
        ef.raw_threshold_u = u_vec[e] + 0.005;
        ef.threshold_u = u_vec[e];
        ef.u_log = ul_vec[e];
        ef.censor_s = 0.01;
        ef.n_points = 0;
        ef.params = model::event_params_from_pooled(pooled, ul_vec[e], u_vec[e], truth.model_id,
                                                    &*truth.basis);
        ef.sigma_tilde = ef.params.sigma_tilde(u_vec[e]);
        // Nominal record: the level a run of target_mean_count draws would
        // typically top out at. Replaced by the observed record after any
        // real fit.
        ef.record_x = evt::gpd_quantile(1.0 - 1.0 / std::max(spec.target_mean_count, 2.0),
                                        {u_vec[e], ef.sigma_tilde, ef.params.xi});
        ef.record_holder = "truth";
        ef.record_date = Date{spec.end_year - 1, 7, 1};
        truth.events.push_back(std::move(ef));
    }
    return truth;
}

void write_csv(const std::vector<EventDataset>& datasets, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write csv: " + path);
    out << "swimmer_id,event_id,time_s,date\n";
    char buf[64];
    for (const auto& ds : datasets) {
        for (const auto& p : ds.points) {
            std::snprintf(buf, sizeof(buf), "%.2f", -p.x);
            out << p.swimmer_id << ',' << ds.event_id << ',' << buf << ','
                << format_date(p.date) << "\n";
        }
    }
}

} // namespace evtpool::fixture
