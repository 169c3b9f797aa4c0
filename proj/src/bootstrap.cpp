#include "evtpool/bootstrap.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/quadrature.hpp"
#include "evtpool/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace evtpool::bootstrap {

namespace {

std::uint64_t replicate_seed(std::uint64_t master, std::size_t index) {
    return Rng::split(master, index).next_u64();
}

Date date_from_decimal_year(double year) {
    const int y = static_cast<int>(std::floor(year));
    const double frac = year - y;
    int doy = static_cast<int>(std::floor(frac * days_in_year(y))) + 1;
    doy = std::clamp(doy, 1, days_in_year(y));
    Date d{y, 1, 1};
    while (doy > days_in_month(d.year, d.month)) {
        doy -= days_in_month(d.year, d.month);
        ++d.month;
    }
    d.day = doy;
    return d;
}

model::FitConfig refit_config(const FittedModel& fitted) {
    model::FitConfig cfg;
    cfg.model_id = fitted.model_id;
    cfg.phi_r = fitted.phi_r;
    if (fitted.basis) {
        cfg.spline_q = fitted.basis->size();
        cfg.spline_degree = fitted.basis->degree();
    }
    cfg.compute_ric = false;
    return cfg;
}

// Feasibility rules from the original data: (a) the replicate's ultimate
// time must not be slower than any observed swim, (b) its expected next
// record must not be slower than the current record.
bool replicate_feasible(const FittedModel& fitted, const Eigen::VectorXd& psi) {
    const model::ParameterLayout layout = fitted.layout();
    for (std::size_t e = 0; e < fitted.events.size(); ++e) {
        const model::EventFit& ef = fitted.events[e];
        std::vector<double> row;
        if (fitted.basis) {
            const Eigen::VectorXd r = fitted.basis->eval(ef.u_log);
            row.assign(r.data(), r.data() + r.size());
        }
        const auto d = model::detail::decode_event_quiet(psi, layout, e, ef.threshold_u,
                                                         ef.u_log, row);
        if (!d.feasible)
            return false;
        const double xi = d.params.xi;
        if (xi < 0.0) {
            const double endpoint = ef.threshold_u - d.sigma_tilde / xi;
            if (endpoint < ef.record_x)
                return false; // ultimate time slower than an observed swim
        }
        const double sigma_r = d.sigma_tilde + xi * (ef.record_x - ef.threshold_u);
        if (xi < 1.0 && sigma_r < 0.0)
            return false; // expected next record slower than the record
    }
    return true;
}

} // namespace

std::vector<const Replicate*> BootstrapEnsemble::retained_view() const {
    std::vector<const Replicate*> out;
    for (const auto& r : replicates)
        if (r.retained())
            out.push_back(&r);
    return out;
}

std::vector<EventDataset> simulate_datasets(const FittedModel& fitted, std::uint64_t seed) {
    std::vector<EventDataset> out;
    out.reserve(fitted.events.size());
    const double t_lo = fitted.scaler.window_start_std();
    const double t_hi = fitted.scaler.window_end_std();
    constexpr std::size_t kGridKnots = 1000;

    for (std::size_t e = 0; e < fitted.events.size(); ++e) {
        const model::EventFit& ef = fitted.events[e];
        Rng rng = Rng::split(seed, e);

        const evt::ParamPath path = fitted.param_path(ef);
        const double lambda = evt::integrated_intensity(t_lo, t_hi, ef.threshold_u, path);
        const std::uint64_t count = rng.poisson(lambda);

        // Monotone cumulative-rate grid for inverse-CDF time sampling.
        std::vector<double> grid_t(kGridKnots + 1), grid_c(kGridKnots + 1, 0.0);
        for (std::size_t k = 0; k <= kGridKnots; ++k)
            grid_t[k] = t_lo + (t_hi - t_lo) * static_cast<double>(k) /
                                   static_cast<double>(kGridKnots);
        for (std::size_t k = 1; k <= kGridKnots; ++k) {
            const double inc = quad::gauss_legendre(
                [&](double t) { return evt::exceedance_rate(ef.threshold_u, path.at(t)); },
                grid_t[k - 1], grid_t[k]);
            grid_c[k] = grid_c[k - 1] + inc;
        }
        const double total = grid_c.back();

        EventDataset ds;
        ds.event_id = ef.event_id;
        ds.threshold_u = ef.threshold_u;
        ds.raw_threshold_u = ef.raw_threshold_u;
        ds.u_log = ef.u_log;
        ds.censor_s = ef.censor_s;
        ds.points.reserve(count);
        const evt::GpdParams gpd{ef.threshold_u, ef.sigma_tilde, ef.params.xi};
        for (std::uint64_t i = 0; i < count; ++i) {
            EventPoint p;
            const double target = rng.uniform() * total;
            const auto it = std::lower_bound(grid_c.begin(), grid_c.end(), target);
            const std::size_t hi = std::max<std::size_t>(
                1, static_cast<std::size_t>(it - grid_c.begin()));
            const double seg = grid_c[hi] - grid_c[hi - 1];
            const double frac = seg > 0.0 ? (target - grid_c[hi - 1]) / seg : 0.5;
            const double t = grid_t[hi - 1] + frac * (grid_t[hi] - grid_t[hi - 1]);
            p.t_std = t;
            p.year = fitted.scaler.unstandardize(t);
            p.date = date_from_decimal_year(p.year);

            const double raw_mark = evt::gpd_quantile(rng.uniform(), gpd);
            p.x = std::round(raw_mark / ds.censor_s) * ds.censor_s; // censor grid
            p.swimmer_id = "sim_" + ef.event_id + "_" + std::to_string(i);
            ds.points.push_back(std::move(p));
        }
        out.push_back(std::move(ds));
    }
    return out;
}

BootstrapEnsemble bootstrap_ensemble(const FittedModel& fitted,
                                     const std::vector<EventDataset>& datasets,
                                     const BootstrapConfig& config) {
    (void)datasets; // feasibility uses the records already carried by `fitted`
    BootstrapEnsemble ens;
    ens.requested = config.B;
    ens.replicates.resize(config.B);

    const model::FitConfig cfg = refit_config(fitted);
    optim::Options opts = cfg.optimizer;
    opts.max_iterations = static_cast<int>(std::clamp(
        config.refit_iteration_factor * std::max(fitted.fit_iterations, 50), 50.0, 5000.0));

    optim::parallel_for(config.B, config.threads, [&](std::size_t i) {
        Replicate& rep = ens.replicates[i];
        rep.seed = replicate_seed(config.seed, i);
        const std::vector<EventDataset> sim = simulate_datasets(fitted, rep.seed);
        const model::FitContext ctx(sim, fitted.scaler, fitted.epochs, cfg,
                                    fitted.basis ? &*fitted.basis : nullptr);
        Eigen::VectorXd psi = fitted.psi;
        bool converged = false;
        const std::vector<double> schedule =
            fitted.structure.uses_spline() ? cfg.phi_m_schedule : std::vector<double>{0.0};
        for (double phi_m : schedule) {
            const auto objective = [&](const Eigen::VectorXd& v) {
                return -model::pooled_penalized_loglik(v, ctx, fitted.phi_r, phi_m)
                            .penalized_loglik;
            };
            const optim::Result res = optim::minimize_bfgs(objective, psi, opts);
            psi = res.x;
            converged = res.converged;
            const auto bd = model::pooled_penalized_loglik(psi, ctx, fitted.phi_r, phi_m);
            if (!fitted.structure.uses_spline() || bd.p_m < 1e-10)
                break;
        }
        rep.psi = psi;
        rep.converged = converged;
        rep.feasible = replicate_feasible(fitted, psi);
    });

    for (const auto& rep : ens.replicates) {
        if (rep.retained())
            ++ens.retained;
        else if (!rep.converged)
            ++ens.discarded_nonconverged;
        else
            ++ens.discarded_infeasible;
    }
    if (static_cast<double>(ens.retained) <
        config.min_retained_fraction * static_cast<double>(config.B))
        throw NumericalError("bootstrap_ensemble: only " + std::to_string(ens.retained) + " of " +
                             std::to_string(config.B) + " replicates retained");
    return ens;
}

std::pair<double, double> ci(const std::function<double(const Eigen::VectorXd&)>& statistic,
                             const BootstrapEnsemble& ensemble, double level) {
    const auto retained = ensemble.retained_view();
    if (retained.size() < 20)
        throw InsufficientDataError("ci: needs at least 20 retained replicates, have " +
                                    std::to_string(retained.size()));
    std::vector<double> values;
    values.reserve(retained.size());
    for (const Replicate* r : retained)
        values.push_back(statistic(r->psi));
    std::sort(values.begin(), values.end());

    // Sorted-index percentile with linear interpolation between order stats.
    const auto pick = [&](double p) {
        const double idx = p * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = idx - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    const double tail = 0.5 * (1.0 - level);
    return {pick(tail), pick(1.0 - tail)};
}

double predictive_record_cdf(const FittedModel& fitted, const BootstrapEnsemble& ensemble,
                             const std::string& event_id, double x) {
    const model::EventFit& ef = fitted.event(event_id);
    if (!(x > ef.record_x))
        throw std::domain_error("predictive_record_cdf: x must beat the current record");
    const auto retained = ensemble.retained_view();
    if (retained.empty())
        throw InsufficientDataError("predictive_record_cdf: empty ensemble");

    const model::ParameterLayout layout = fitted.layout();
    std::vector<double> row;
    if (fitted.basis) {
        const Eigen::VectorXd r = fitted.basis->eval(ef.u_log);
        row.assign(r.data(), r.data() + r.size());
    }
    std::size_t index = 0;
    for (; index < fitted.events.size(); ++index)
        if (fitted.events[index].event_id == event_id)
            break;

    double mean = 0.0;
    for (const Replicate* rep : retained) {
        const auto d = model::detail::decode_event_quiet(rep->psi, layout, index, ef.threshold_u,
                                                         ef.u_log, row);
        if (!d.feasible)
            throw NumericalError("predictive_record_cdf: infeasible retained replicate");
        const double sigma_r = d.sigma_tilde + d.params.xi * (ef.record_x - ef.threshold_u);
        if (sigma_r <= 0.0) {
            mean += 1.0; // record at the endpoint: any improvement is above support
            continue;
        }
        mean += 1.0 - evt::tail_power((x - ef.record_x) / sigma_r, d.params.xi);
    }
    return mean / static_cast<double>(retained.size());
}

double rank_comparison_prob(const FittedModel& fitted, const BootstrapEnsemble& ensemble,
                            const SwimRef& a, const SwimRef& b) {
    const auto retained = ensemble.retained_view();
    if (retained.empty())
        throw InsufficientDataError("rank_comparison_prob: empty ensemble");
    double wins = 0.0;
    for (const Replicate* rep : retained) {
        const FittedModel view = model::with_parameters(fitted, rep->psi);
        const double ra = analytics::r_value(view, a.event_id, a.x, a.date);
        const double rb = analytics::r_value(view, b.event_id, b.x, b.date);
        if (ra < rb)
            wins += 1.0;
        else if (ra == rb)
            wins += 0.5;
    }
    return wins / static_cast<double>(retained.size());
}

void save_ensemble(const BootstrapEnsemble& ensemble, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write ensemble file: " + path);
    for (const auto& rep : ensemble.replicates) {
        nlohmann::ordered_json j;
        j["seed"] = rep.seed;
        j["feasible"] = rep.feasible;
        j["converged"] = rep.converged;
        j["psi"] = std::vector<double>(rep.psi.data(), rep.psi.data() + rep.psi.size());
        out << j.dump() << "\n";
    }
}

BootstrapEnsemble load_ensemble(const std::string& path, std::size_t expected_psi_size) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open ensemble file: " + path);
    BootstrapEnsemble ens;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Replicate rep;
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.feasible = j.at("feasible").get<bool>();
        rep.converged = j.at("converged").get<bool>();
        const auto psi = j.at("psi").get<std::vector<double>>();
        if (psi.size() != expected_psi_size)
            throw VersionMismatchError("ensemble replicate has " + std::to_string(psi.size()) +
                                       " parameters, model expects " +
                                       std::to_string(expected_psi_size));
        rep.psi = Eigen::Map<const Eigen::VectorXd>(psi.data(),
                                                    static_cast<Eigen::Index>(psi.size()));
        ens.replicates.push_back(std::move(rep));
    }
    ens.requested = ens.replicates.size();
    for (const auto& rep : ens.replicates) {
        if (rep.retained())
            ++ens.retained;
        else if (!rep.converged)
            ++ens.discarded_nonconverged;
        else
            ++ens.discarded_infeasible;
    }
    return ens;
}

} // namespace evtpool::bootstrap
