#include "evtpool/model.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evtpool::model {

namespace {

struct LinFit {
    double intercept = 0.0;
    double slope = 0.0;
};

LinFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n == 0)
        return {};
    if (n == 1)
        return {y[0], 0.0};
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0)
        return {my, 0.0};
    LinFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

double median(std::vector<double> v) {
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Moment-based starting point for a single event: GPd moments for the
// scale/shape, then the location solved so the expected count matches the
// observed count over the window.
Eigen::VectorXd independent_start(const FitContext::EventCache& ec, double window_len,
                                  bool two_suit) {
    const std::size_t n = ec.x.size();
    double m = 0.0;
    for (double x : ec.x)
        m += x - ec.u;
    m /= static_cast<double>(n);
    m = std::max(m, 1e-6);
    double v = 0.0;
    for (double x : ec.x)
        v += (x - ec.u - m) * (x - ec.u - m);
    v /= static_cast<double>(n);
    v = std::max(v, 1e-12);

    double xi0 = 0.5 * (1.0 - m * m / v);
    xi0 = std::clamp(xi0, -0.45, 0.3);
    double sigma0 = 0.5 * m * (m * m / v + 1.0);
    sigma0 = std::max(sigma0, 1e-3 * m);
    // The observed maximum must sit inside the starting support, with slack.
    if (xi0 < 0.0) {
        double rec = ec.u;
        for (double x : ec.x)
            rec = std::max(rec, x);
        xi0 = std::max(xi0, -0.9 * sigma0 / (rec + ec.s / 2.0 - ec.u));
    }

    const double mean_rate = static_cast<double>(n) / window_len;
    // Solve [ (sigma - xi c)/sigma ]^(1/xi) = rate for c = u - mu0.
    double c;
    if (std::abs(xi0) < 1e-9)
        c = -sigma0 * std::log(mean_rate);
    else
        c = sigma0 * (1.0 - std::pow(mean_rate, xi0)) / xi0;

    Eigen::VectorXd psi(two_suit ? 6 : 5);
    psi[0] = ec.u - c;            // mu0
    psi[1] = std::log(sigma0);    // log sigma_tilde
    psi[2] = xi0;                 // xi
    psi[3] = 0.0;                 // beta
    psi[4] = 0.0;                 // gamma1
    if (two_suit)
        psi[5] = 0.0; // gamma2
    return psi;
}

optim::Result minimize_loglik(const FitContext& ctx, const Eigen::VectorXd& start, double phi_r,
                              double phi_m, const optim::Options& opts,
                              const std::vector<std::size_t>& pinned = {}) {
    const auto objective = [&ctx, phi_r, phi_m, &start, &pinned](const Eigen::VectorXd& psi) {
        Eigen::VectorXd full = psi;
        for (std::size_t i : pinned)
            full[static_cast<Eigen::Index>(i)] = start[static_cast<Eigen::Index>(i)];
        return -pooled_penalized_loglik(full, ctx, phi_r, phi_m).penalized_loglik;
    };
    optim::Result res = optim::minimize_bfgs(objective, start, opts);
    for (std::size_t i : pinned)
        res.x[static_cast<Eigen::Index>(i)] = start[static_cast<Eigen::Index>(i)];
    return res;
}

FitConfig single_event_config(bool two_suit, const optim::Options& opts) {
    FitConfig cfg;
    cfg.model_id = two_suit ? ModelId::M1b : ModelId::M1a;
    cfg.optimizer = opts;
    cfg.compute_ric = false;
    return cfg;
}

} // namespace

EventParams fit_independent(const EventDataset& dataset, const TimeScaler& scaler,
                            const SuitEpochs& epochs, bool two_suit, const optim::Options& opts,
                            bool pin_gamma2) {
    const FitConfig cfg = single_event_config(two_suit, opts);
    const FitContext ctx({dataset}, scaler, epochs, cfg);
    const auto& ec = ctx.events().front();
    const double window_len = ctx.window_hi() - ctx.window_lo();

    Eigen::VectorXd start = independent_start(ec, window_len, two_suit);
    {
        const auto bd = pooled_penalized_loglik(start, ctx, 0.0, 0.0);
        if (!bd.feasible)
            throw NumericalError("fit_independent: infeasible starting point for " +
                                 dataset.event_id);
    }
    std::vector<std::size_t> pinned;
    if (pin_gamma2) {
        if (!two_suit)
            throw std::invalid_argument("pin_gamma2 requires the two-suit parametrization");
        pinned.push_back(5);
    }
    const optim::Result res = minimize_loglik(ctx, start, 0.0, 0.0, opts, pinned);
    return ctx.decode_event(res.x, 0);
}

namespace {

// Warm-start construction for the pooled models: independent per-event fits,
// then transformed-scale regressions on u_L. psi_alt is a fallback start
// with a flat suit-effect line, used when the primary start strands the
// optimizer on the gamma_L >= 0 boundary.
struct Initialization {
    Eigen::VectorXd psi;
    Eigen::VectorXd psi_alt; // zero-sized when not applicable
    std::vector<EventParams> independent;
};

Initialization initialize_pooled(const FitContext& ctx, const std::vector<EventDataset>& datasets,
                                 const FitConfig& config) {
    const ModelStructure& s = ctx.layout().structure;
    const std::size_t n_events = ctx.events().size();

    optim::Options ind_opts = config.optimizer;
    ind_opts.max_iterations = 300;
    ind_opts.threads = 1;

    std::vector<EventParams> ind(n_events);
    optim::parallel_for(n_events, config.threads, [&](std::size_t e) {
        ind[e] = fit_independent(datasets[e], ctx.scaler(), ctx.epochs(), s.two_suit, ind_opts);
    });

    std::vector<double> u_log(n_events);
    for (std::size_t e = 0; e < n_events; ++e)
        u_log[e] = ctx.events()[e].u_log;

    PooledParams pooled;
    std::vector<double> xis, mu_l, sigma_l, beta_l, g1_l, g2_l;
    for (std::size_t e = 0; e < n_events; ++e) {
        const EventParams& p = ind[e];
        xis.push_back(p.xi);
        mu_l.push_back(std::log(std::max(-p.mu0, 1e-8)));
        sigma_l.push_back(std::log(std::max(p.sigma_tilde(ctx.events()[e].u), 1e-8)));
        beta_l.push_back(std::log(std::clamp(p.beta, 1e-8, 1e8)));
        g1_l.push_back(std::sqrt(std::max(p.gamma1, 0.0)));
        g2_l.push_back(std::sqrt(std::max(p.gamma2, 0.0)));
    }

    pooled.xi = std::clamp(median(xis), -0.6, 0.6);
    const LinFit mu_fit = ols(u_log, mu_l);
    pooled.alpha1 = mu_fit.intercept;
    pooled.theta1 = mu_fit.slope;
    const LinFit beta_fit = ols(u_log, beta_l);
    pooled.alpha3 = beta_fit.intercept;
    pooled.theta3 = beta_fit.slope;
    const LinFit g_fit = ols(u_log, g1_l);
    pooled.alpha4 = g_fit.intercept;
    pooled.theta4 = g_fit.slope;
    if (s.two_suit) {
        double eps = 0.0;
        for (std::size_t e = 0; e < n_events; ++e)
            eps += g2_l[e] - g1_l[e];
        pooled.epsilon = eps / static_cast<double>(n_events);
    }
    // Project the sqrt-link lines into feasibility (gamma_L >= 0 everywhere),
    // with real slack: a start pinned on the boundary strands the optimizer.
    if (s.gamma_linked) {
        double worst = 0.0;
        for (double ul : u_log)
            worst = std::min(worst, pooled.alpha4 + pooled.theta4 * ul);
        if (worst < 0.05)
            pooled.alpha4 += 0.05 - worst;
        if (s.two_suit) {
            double worst2 = 0.0;
            for (double ul : u_log)
                worst2 = std::min(worst2, pooled.alpha4 + pooled.epsilon + pooled.theta4 * ul);
            if (worst2 < 0.05)
                pooled.epsilon += 0.05 - worst2;
        }
    }

    if (s.sigma == SigmaMode::Linear) {
        const LinFit sig_fit = ols(u_log, sigma_l);
        pooled.alpha2 = sig_fit.intercept;
        pooled.theta2 = sig_fit.slope;
    } else if (s.sigma == SigmaMode::Spline) {
        // Lightly penalized least-squares projection of log sigma_tilde onto
        // the basis; the real phi_r applies during the fit itself.
        const Eigen::MatrixXd& rows = ctx.basis_rows();
        const Eigen::Index q = rows.cols();
        Eigen::VectorXd y(static_cast<Eigen::Index>(n_events));
        for (std::size_t e = 0; e < n_events; ++e)
            y[static_cast<Eigen::Index>(e)] = sigma_l[e];
        const Eigen::MatrixXd normal = rows.transpose() * rows + 1.0 * ctx.penalty() +
                                       1e-8 * Eigen::MatrixXd::Identity(q, q);
        const Eigen::VectorXd a = normal.ldlt().solve(rows.transpose() * y);
        pooled.spline_a.assign(a.data(), a.data() + a.size());
    }

    Initialization init;
    init.independent = ind;
    init.psi = ctx.encode(pooled, ind);

    // The smoothed start must keep every observed record well inside its
    // support: a record within roundoff of the GPd endpoint drives the
    // censored terms to underflow and starts the optimizer on a cliff. Grow
    // the scale (and occasionally relax the shape) until there is slack.
    const auto record_slack = [&](const Eigen::VectorXd& psi) {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < n_events; ++e) {
            EventParams p;
            try {
                p = ctx.decode_event(psi, e);
            } catch (const std::exception&) {
                return -std::numeric_limits<double>::infinity();
            }
            const auto& ec = ctx.events()[e];
            const double st = p.sigma_tilde(ec.u);
            worst = std::min(worst, 1.0 + p.xi * (ec.record_x + ec.s / 2.0 - ec.u) / st);
        }
        return worst;
    };
    bool feasible = false;
    for (int attempt = 0; attempt < 80; ++attempt) {
        if (record_slack(init.psi) >= 0.05 &&
            pooled_penalized_loglik(init.psi, ctx, 0.0, 0.0).feasible) {
            feasible = true;
            break;
        }
        const ParameterLayout& l = ctx.layout();
        if (l.sigma_offset != ParameterLayout::npos) {
            const std::size_t count = s.sigma == SigmaMode::Spline ? l.q : 1;
            for (std::size_t k = 0; k < count; ++k)
                init.psi[static_cast<Eigen::Index>(l.sigma_offset + k)] += 0.05;
        }
        if (l.xi_offset != ParameterLayout::npos && attempt % 4 == 3)
            init.psi[static_cast<Eigen::Index>(l.xi_offset)] *= 0.9;
    }
    if (!feasible)
        throw NumericalError("initialize_pooled: could not construct a feasible starting point");

    if (s.gamma_linked) {
        const ParameterLayout& l = ctx.layout();
        init.psi_alt = init.psi;
        double g1_mean = 0.0, diff_mean = 0.0;
        for (std::size_t e = 0; e < n_events; ++e) {
            g1_mean += g1_l[e];
            diff_mean += g2_l[e] - g1_l[e];
        }
        g1_mean /= static_cast<double>(n_events);
        diff_mean /= static_cast<double>(n_events);
        init.psi_alt[static_cast<Eigen::Index>(l.gamma_offset)] = std::max(g1_mean, 0.1);
        init.psi_alt[static_cast<Eigen::Index>(l.gamma_offset + 1)] = 0.0;
        if (s.two_suit)
            init.psi_alt[static_cast<Eigen::Index>(l.gamma_offset + 2)] =
                std::max(diff_mean, 0.1 - std::max(g1_mean, 0.1));
    }
    return init;
}

} // namespace

FittedModel fit(const std::vector<EventDataset>& datasets, const TimeScaler& scaler,
                const SuitEpochs& epochs, const FitConfig& config_in) {
    FitConfig config = config_in;
    config.optimizer.threads = config.threads;

    std::vector<EventDataset> sorted = datasets;
    std::sort(sorted.begin(), sorted.end(),
              [](const EventDataset& a, const EventDataset& b) { return a.event_id < b.event_id; });
    const FitContext ctx(sorted, scaler, epochs, config);
    const ModelStructure structure = structure_of(config.model_id);

    if (config.phi_r_from_cv && structure.uses_spline()) {
        const CvResult cv = cross_validate_phi_r(sorted, scaler, epochs, config);
        config.phi_r = cv.chosen_phi_r;
    }
    const double phi_r = structure.uses_spline() ? config.phi_r : 0.0;

    Eigen::VectorXd psi;
    int iterations = 0;
    double phi_m_final = 0.0;

    if (structure.independent()) {
        std::vector<EventParams> per_event(sorted.size());
        optim::Options ind_opts = config.optimizer;
        ind_opts.threads = 1;
        optim::parallel_for(sorted.size(), config.threads, [&](std::size_t e) {
            per_event[e] = fit_independent(sorted[e], scaler, epochs, structure.two_suit, ind_opts);
        });
        psi = ctx.encode(PooledParams{}, per_event);
    } else {
        Initialization init = initialize_pooled(ctx, sorted, config);

        struct EscalationResult {
            Eigen::VectorXd psi;
            int iterations = 0;
            double phi_m_final = 0.0;
            bool monotone = false;
            double penalized = -std::numeric_limits<double>::infinity();
        };
        const auto escalate = [&](const Eigen::VectorXd& start) {
            EscalationResult out;
            out.psi = start;
            out.monotone = !structure.uses_spline();
            double prev_loglik = std::numeric_limits<double>::quiet_NaN();
            std::vector<double> schedule = config.phi_m_schedule;
            if (!structure.uses_spline())
                schedule = {0.0};
            for (double phi_m : schedule) {
                // A fresh BFGS restart within the round recovers from stalls
                // on the kinked penalty surface at large phi_m.
                LoglikBreakdown bd;
                for (int restart = 0; restart < 3; ++restart) {
                    const optim::Result res =
                        minimize_loglik(ctx, out.psi, phi_r, phi_m, config.optimizer);
                    out.psi = res.x;
                    out.iterations += res.iterations;
                    bd = pooled_penalized_loglik(out.psi, ctx, phi_r, phi_m);
                    if (!structure.uses_spline() || bd.p_m < 1e-10 || res.iterations == 0)
                        break;
                }
                out.phi_m_final = phi_m;
                out.penalized = bd.penalized_loglik;
                if (!structure.uses_spline())
                    break;
                const bool loglik_settled =
                    std::isfinite(prev_loglik) && std::abs(bd.loglik - prev_loglik) < 1e-8;
                if (bd.p_m < 1e-10) {
                    out.monotone = true;
                    if (loglik_settled)
                        break;
                } else {
                    out.monotone = false;
                }
                prev_loglik = bd.loglik;
            }
            return out;
        };

        EscalationResult best = escalate(init.psi);

        // Retry from the flat suit-effect start when the optimum looks
        // stranded: non-monotone, pinned on the gamma_L boundary, or at the
        // shape guard.
        bool suspicious = !best.monotone;
        const ParameterLayout& l = ctx.layout();
        if (!suspicious && l.gamma_offset != ParameterLayout::npos) {
            const double a4 = best.psi[static_cast<Eigen::Index>(l.gamma_offset)];
            const double t4 = best.psi[static_cast<Eigen::Index>(l.gamma_offset + 1)];
            const double eps = structure.two_suit
                                   ? best.psi[static_cast<Eigen::Index>(l.gamma_offset + 2)]
                                   : 0.0;
            for (const auto& ec : ctx.events()) {
                suspicious = suspicious || (a4 + t4 * ec.u_log) < 1e-3 ||
                             (structure.two_suit && (a4 + eps + t4 * ec.u_log) < 1e-3);
            }
        }
        if (!suspicious && l.xi_offset != ParameterLayout::npos)
            suspicious = std::abs(best.psi[static_cast<Eigen::Index>(l.xi_offset)]) > 0.9;
        if (suspicious && init.psi_alt.size() > 0) {
            EscalationResult alt = escalate(init.psi_alt);
            alt.iterations += best.iterations;
            if (alt.monotone && (!best.monotone || alt.penalized > best.penalized))
                best = std::move(alt);
            else
                best.iterations = alt.iterations;
        }
        if (!best.monotone) {
            const LoglikBreakdown bd =
                pooled_penalized_loglik(best.psi, ctx, phi_r, best.phi_m_final);
            throw NumericalError(
                "fit: monotonicity escalation did not converge (p_m = " + std::to_string(bd.p_m) +
                " after phi_m = " + std::to_string(best.phi_m_final) + ")");
        }
        psi = best.psi;
        iterations = best.iterations;
        phi_m_final = best.phi_m_final;
    }

    const LoglikBreakdown final_bd = pooled_penalized_loglik(psi, ctx, phi_r, phi_m_final);
    if (!final_bd.feasible)
        throw NumericalError("fit: final iterate infeasible");

    FittedModel out;
    out.model_id = config.model_id;
    out.structure = structure;
    out.psi = psi;
    out.pooled = ctx.layout().pooled_part(psi);
    out.scaler = scaler;
    out.epochs = epochs;
    out.phi_r = phi_r;
    out.phi_m_final = phi_m_final;
    out.loglik = final_bd.loglik;
    out.penalized_loglik = final_bd.penalized_loglik;
    out.fit_iterations = iterations;
    out.seed = config.seed;
    if (ctx.basis() != nullptr)
        out.basis = *ctx.basis();

    out.events.reserve(sorted.size());
    for (std::size_t e = 0; e < sorted.size(); ++e) {
        const EventDataset& ds = sorted[e];
        EventFit ef;
        ef.event_id = ds.event_id;
        ef.threshold_u = ds.threshold_u;
        ef.raw_threshold_u = ds.raw_threshold_u;
        ef.u_log = ds.u_log;
        ef.censor_s = ds.censor_s;
        ef.n_points = ds.points.size();
        ef.params = ctx.decode_event(psi, e);
        ef.sigma_tilde = ef.params.sigma_tilde(ds.threshold_u);
        const EventPoint* best = nullptr;
        for (const auto& p : ds.points) {
            if (best == nullptr || p.x > best->x || (p.x == best->x && p.date < best->date))
                best = &p;
        }
        if (best != nullptr) {
            ef.record_x = best->x;
            ef.record_holder = best->swimmer_id;
            ef.record_date = best->date;
        }
        out.events.push_back(std::move(ef));
    }

    if (config.compute_ric) {
        const RicResult r = ric(out, sorted);
        out.ric = r.ric;
        out.effective_dof = r.effective_dof;
        out.ric_available = true;
    }
    return out;
}

CvResult cross_validate_phi_r(const std::vector<EventDataset>& datasets, const TimeScaler& scaler,
                              const SuitEpochs& epochs, FitConfig config) {
    if (config.cv.phi_r_grid.empty())
        throw ValidationError("cross_validate_phi_r: empty grid");
    config.optimizer.threads = config.threads;

    std::vector<EventDataset> sorted = datasets;
    std::sort(sorted.begin(), sorted.end(),
              [](const EventDataset& a, const EventDataset& b) { return a.event_id < b.event_id; });
    const FitContext ctx(sorted, scaler, epochs, config);
    const std::size_t folds = config.cv.folds;
    for (const auto& ec : ctx.events())
        if (ec.x.size() < folds)
            throw InsufficientDataError("cross_validate_phi_r: event " + ec.event_id +
                                        " has fewer points than folds");

    std::vector<double> grid = config.cv.phi_r_grid;
    std::sort(grid.begin(), grid.end());

    // Full-data fits per grid value, used only as warm starts for the fold
    // fits; each warm start is the previous grid value's solution.
    std::vector<Eigen::VectorXd> warm(grid.size());
    {
        Initialization init = initialize_pooled(ctx, sorted, config);
        Eigen::VectorXd psi = init.psi;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            for (double phi_m : config.phi_m_schedule) {
                const optim::Result res = minimize_loglik(ctx, psi, grid[g], phi_m,
                                                          config.optimizer);
                psi = res.x;
                const LoglikBreakdown bd = pooled_penalized_loglik(psi, ctx, grid[g], phi_m);
                if (bd.p_m < 1e-10)
                    break;
            }
            warm[g] = psi;
        }
    }

    std::vector<double> score(grid.size(), 0.0);
    std::size_t evaluations = 0;

    for (std::size_t rep = 0; rep < config.cv.repeats; ++rep) {
        Rng rng = Rng::split(config.seed, rep);

        // Stratified fold assignment: shuffle within each event, deal round
        // robin; re-deal if any event leaves a fold empty.
        std::vector<std::vector<std::vector<std::size_t>>> fold_indices; // [fold][event][idx]
        for (int attempt = 0; attempt < 100; ++attempt) {
            fold_indices.assign(folds, std::vector<std::vector<std::size_t>>(ctx.events().size()));
            bool ok = true;
            for (std::size_t e = 0; e < ctx.events().size(); ++e) {
                const std::size_t n = ctx.events()[e].x.size();
                std::vector<std::size_t> perm(n);
                std::iota(perm.begin(), perm.end(), 0);
                for (std::size_t i = n; i > 1; --i)
                    std::swap(perm[i - 1], perm[rng.next_u64() % i]);
                for (std::size_t i = 0; i < n; ++i)
                    fold_indices[i % folds][e].push_back(perm[i]);
            }
            for (std::size_t k = 0; k < folds && ok; ++k)
                for (std::size_t e = 0; e < ctx.events().size() && ok; ++e)
                    ok = !fold_indices[k][e].empty();
            if (ok)
                break;
        }

        for (std::size_t k = 0; k < folds; ++k) {
            const FitContext train = ctx.restricted_to(fold_indices[k], /*complement=*/true);
            const FitContext test = ctx.restricted_to(fold_indices[k], /*complement=*/false);
            // Same partitions across the grid: paired comparison.
            for (std::size_t g = 0; g < grid.size(); ++g) {
                Eigen::VectorXd psi = warm[g];
                for (double phi_m : config.phi_m_schedule) {
                    const optim::Result res =
                        minimize_loglik(train, psi, grid[g], phi_m, config.optimizer);
                    psi = res.x;
                    const LoglikBreakdown bd = pooled_penalized_loglik(psi, train, grid[g], phi_m);
                    if (bd.p_m < 1e-10)
                        break;
                }
                const LoglikBreakdown pred = pooled_penalized_loglik(psi, test, 0.0, 0.0);
                score[g] += pred.feasible ? pred.loglik : -1e12;
                ++evaluations;
            }
        }
    }

    CvResult out;
    out.grid = grid;
    out.mean_predictive.resize(grid.size());
    const double denom = static_cast<double>(config.cv.repeats * folds);
    for (std::size_t g = 0; g < grid.size(); ++g)
        out.mean_predictive[g] = score[g] / denom;
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (out.mean_predictive[g] > out.mean_predictive[best])
            best = g; // strict: ties keep the smaller phi_r
    out.chosen_phi_r = grid[best];
    return out;
}

} // namespace evtpool::model
