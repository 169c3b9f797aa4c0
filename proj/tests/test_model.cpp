#include "evtpool/errors.hpp"
#include "evtpool/model.hpp"
#include "evtpool/rng.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace evtpool;
using namespace evtpool::model;

namespace {

FitConfig desk_config(ModelId id, double phi_r = 15.0) {
    FitConfig cfg;
    cfg.model_id = id;
    cfg.phi_r = phi_r;
    cfg.compute_ric = false;
    cfg.threads = 2;
    return cfg;
}

} // namespace

TEST_CASE("link functions and their inverses") {
    SUBCASE("identity links: alpha1 = theta1 = 0 puts mu0 at -1") {
        const auto basis = splines::SplineBasis::clamped_uniform(2.5, 7.0, 10, 4);
        PooledParams pooled;
        pooled.xi = -0.1;
        pooled.alpha1 = 0.0;
        pooled.theta1 = 0.0;
        pooled.spline_a.assign(basis.size(), 0.5);
        pooled.alpha3 = -3.0;
        pooled.theta3 = 0.0;
        pooled.alpha4 = 0.1;
        pooled.theta4 = 0.0;
        for (double u_log : {3.0, 4.5, 6.0})
            CHECK(event_params_from_pooled(pooled, u_log, -std::exp(u_log), ModelId::M7b, &basis)
                      .mu0 == doctest::Approx(-1.0));
    }
    SUBCASE("transform/untransform round trip") {
        EventParams p;
        p.mu0 = -58.3;
        p.xi = -0.147;
        p.beta = 0.31;
        p.gamma1 = 0.45;
        p.gamma2 = 0.71;
        const double u = -60.2;
        p.sigma0 = 0.9 - p.xi * (u - p.mu0); // sigma_tilde = 0.9
        const TransformedParams t = transform_event_params(p, u);
        const EventParams back = untransform_event_params(t, u);
        CHECK(back.mu0 == doctest::Approx(p.mu0).epsilon(1e-12));
        CHECK(back.sigma0 == doctest::Approx(p.sigma0).epsilon(1e-12));
        CHECK(back.beta == doctest::Approx(p.beta).epsilon(1e-12));
        CHECK(back.gamma1 == doctest::Approx(p.gamma1).epsilon(1e-12));
        CHECK(back.gamma2 == doctest::Approx(p.gamma2).epsilon(1e-12));
    }
    SUBCASE("negative gamma_L is rejected") {
        const auto basis = splines::SplineBasis::clamped_uniform(2.5, 7.0, 10, 4);
        PooledParams pooled;
        pooled.spline_a.assign(basis.size(), 0.5);
        pooled.alpha3 = -3.0;
        pooled.alpha4 = -10.0;
        pooled.theta4 = 0.1;
        CHECK_THROWS_AS(event_params_from_pooled(pooled, 4.0, -54.0, ModelId::M7b, &basis),
                        std::domain_error);
    }
}

TEST_CASE("time-varying parameters and the covariate-free GPd scale") {
    EventParams p;
    p.mu0 = -58.0;
    p.xi = -0.147;
    p.beta = 0.3;
    p.gamma1 = 0.4;
    p.gamma2 = 0.7;
    const double u = -60.0;
    p.sigma0 = 0.8 - p.xi * (u - p.mu0);

    SUBCASE("t = 0 without suit returns the base parameters") {
        const auto g = time_varying_params(p, 0.0, false, false);
        CHECK(g.mu == doctest::Approx(p.mu0));
        CHECK(g.sigma == doctest::Approx(p.sigma0));
        CHECK(g.xi == doctest::Approx(p.xi));
    }
    SUBCASE("sigma_tilde is constant over time and suit status") {
        const double expected = p.sigma_tilde(u);
        for (double t : {-2.0, -0.5, 0.0, 1.3, 2.4}) {
            for (int suit = 0; suit < 3; ++suit) {
                const auto g = time_varying_params(p, t, suit == 1, suit == 2);
                CHECK(g.sigma + g.xi * (u - g.mu) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
    SUBCASE("epoch 2 shifts the location by exactly gamma2") {
        const auto base = time_varying_params(p, 0.7, false, false);
        const auto suited = time_varying_params(p, 0.7, false, true);
        CHECK(suited.mu - base.mu == doctest::Approx(p.gamma2));
    }
}

TEST_CASE("pooled penalized log-likelihood") {
    const auto truth = testutil::desk_truth(6, 90.0);
    const auto datasets = testutil::desk_data(truth, 5);
    const FitConfig cfg = desk_config(ModelId::M7b);
    const FitContext ctx(datasets, truth.scaler, truth.epochs, cfg);

    SUBCASE("matches the per-event reference likelihood at zero penalties") {
        const auto bd = pooled_penalized_loglik(truth.psi, ctx, 0.0, 0.0);
        REQUIRE(bd.feasible);
        CHECK(bd.penalized_loglik == doctest::Approx(bd.loglik));
        double reference = 0.0;
        std::vector<EventDataset> sorted = datasets;
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.event_id < b.event_id; });
        for (std::size_t e = 0; e < sorted.size(); ++e) {
            EventFit ef;
            ef.event_id = sorted[e].event_id;
            ef.threshold_u = sorted[e].threshold_u;
            ef.u_log = sorted[e].u_log;
            ef.params = ctx.decode_event(truth.psi, e);
            ef.sigma_tilde = ef.params.sigma_tilde(ef.threshold_u);
            // re-standardize the points exactly as the context does
            auto path = truth.param_path(ef);
            reference += evt::event_log_likelihood(sorted[e], path, sorted[e].censor_s);
        }
        CHECK(bd.loglik == doctest::Approx(reference).epsilon(1e-9));
    }
    SUBCASE("a monotone spline makes the penalized value independent of phi_m") {
        const auto a = pooled_penalized_loglik(truth.psi, ctx, 5.0, 0.0);
        const auto b = pooled_penalized_loglik(truth.psi, ctx, 5.0, 1e6);
        REQUIRE(a.p_m < 1e-12);
        CHECK(a.penalized_loglik == doctest::Approx(b.penalized_loglik).epsilon(1e-12));
    }
    SUBCASE("roughness penalty subtracts phi_r * a'Pa") {
        const auto a = pooled_penalized_loglik(truth.psi, ctx, 0.0, 0.0);
        const auto b = pooled_penalized_loglik(truth.psi, ctx, 7.0, 0.0);
        CHECK(a.loglik == doctest::Approx(b.loglik));
        CHECK(b.penalized_loglik == doctest::Approx(a.loglik - 7.0 * b.p_r).epsilon(1e-12));
    }
    SUBCASE("finite-difference gradient oracle") {
        // Independent Richardson-extrapolated differences vs the optimizer's
        // central gradient.
        const auto objective = [&](const Eigen::VectorXd& v) {
            return -pooled_penalized_loglik(v, ctx, 15.0, 10.0).penalized_loglik;
        };
        const double f0 = objective(truth.psi);
        const Eigen::VectorXd grad =
            optim::central_gradient(objective, truth.psi, f0, optim::Options{}.fd_step);
        for (Eigen::Index i = 0; i < truth.psi.size(); ++i) {
            const double h = 1e-4 * std::max(std::abs(truth.psi[i]), 1.0);
            Eigen::VectorXd y = truth.psi;
            const auto diff = [&](double step) {
                y[i] = truth.psi[i] + step;
                const double fp = objective(y);
                y[i] = truth.psi[i] - step;
                const double fm = objective(y);
                y[i] = truth.psi[i];
                return (fp - fm) / (2.0 * step);
            };
            const double d_h = diff(h), d_half = diff(h / 2.0);
            const double oracle = (4.0 * d_half - d_h) / 3.0; // Richardson
            CHECK(grad[i] ==
                  doctest::Approx(oracle).epsilon(1e-5).scale(std::max(1.0, std::abs(oracle))));
        }
    }
}

TEST_CASE("fit_independent on simulated single events") {
    const auto truth = testutil::desk_truth(4, 150.0);
    const auto datasets = testutil::desk_data(truth, 9);

    SUBCASE("parameter recovery within loose tolerances") {
        const auto& ds = datasets[1];
        const auto& ef = truth.event(ds.event_id);
        const EventParams fit = fit_independent(ds, truth.scaler, truth.epochs, true);
        CHECK(std::abs(fit.xi - ef.params.xi) < 0.15);
        CHECK(fit.sigma_tilde(ds.threshold_u) ==
              doctest::Approx(ef.sigma_tilde).epsilon(0.25));
        CHECK(std::abs(fit.mu0 - ef.params.mu0) < 2.0 * ef.sigma_tilde);
    }
    SUBCASE("two-suit fit with gamma2 pinned equals the single-suit fit when the "
            "window ends before epoch 2") {
        fixture::TruthSpec spec;
        spec.n_events = 4;
        spec.target_mean_count = 150.0;
        spec.end_year = 2009; // window [2001, 2009): no epoch-2 exposure
        const auto short_truth = fixture::make_truth_model(spec);
        const auto short_data = bootstrap::simulate_datasets(short_truth, 3);
        const auto& ds = short_data[2];
        optim::Options tight;
        tight.grad_tol = 1e-7;
        tight.max_iterations = 1200;
        const EventParams single =
            fit_independent(ds, short_truth.scaler, short_truth.epochs, false, tight);
        const EventParams pinned =
            fit_independent(ds, short_truth.scaler, short_truth.epochs, true, tight, true);
        CHECK(pinned.gamma2 == 0.0);
        CHECK(single.mu0 == doctest::Approx(pinned.mu0).epsilon(5e-3));
        CHECK(single.xi == doctest::Approx(pinned.xi).epsilon(5e-3).scale(1.0));
        CHECK(single.beta == doctest::Approx(pinned.beta).epsilon(5e-3).scale(1.0));
        CHECK(single.gamma1 == doctest::Approx(pinned.gamma1).epsilon(5e-3).scale(1.0));
    }
}

TEST_CASE("fit: determinism, ordering invariance, monotone spline at the optimum") {
    const auto truth = testutil::desk_truth(6, 100.0);
    auto datasets = testutil::desk_data(truth, 2);
    const FitConfig cfg = desk_config(ModelId::M7b);

    const FittedModel a = fit(datasets, truth.scaler, truth.epochs, cfg);
    std::reverse(datasets.begin(), datasets.end());
    const FittedModel b = fit(datasets, truth.scaler, truth.epochs, cfg);
    CHECK(a.loglik == doctest::Approx(b.loglik).epsilon(1e-12));
    CHECK((a.psi - b.psi).cwiseAbs().maxCoeff() == 0.0);

    // hard monotonicity at the optimum
    const FitContext ctx(datasets, truth.scaler, truth.epochs, cfg);
    const auto bd = pooled_penalized_loglik(a.psi, ctx, a.phi_r, a.phi_m_final);
    CHECK(bd.p_m < 1e-10);

    // the sigma_L spline is nondecreasing across the fitted events
    std::vector<double> sig;
    for (const auto& ef : a.events)
        sig.push_back(std::log(ef.sigma_tilde));
    std::vector<std::pair<double, double>> by_ul;
    for (const auto& ef : a.events)
        by_ul.push_back({ef.u_log, std::log(ef.sigma_tilde)});
    std::sort(by_ul.begin(), by_ul.end());
    for (std::size_t i = 1; i < by_ul.size(); ++i)
        CHECK(by_ul[i].second >= by_ul[i - 1].second - 1e-9);

    // derived per-event parameters stay consistent with the links
    for (std::size_t e = 0; e < a.events.size(); ++e) {
        const EventParams via_layout = ctx.decode_event(a.psi, e);
        CHECK(via_layout.mu0 == doctest::Approx(a.events[e].params.mu0).epsilon(1e-12));
        const EventParams via_pooled = event_params_from_pooled(
            a.pooled, a.events[e].u_log, a.events[e].threshold_u, a.model_id, &*a.basis);
        CHECK(via_pooled.mu0 == doctest::Approx(a.events[e].params.mu0).epsilon(1e-12));
        CHECK(via_pooled.gamma2 == doctest::Approx(a.events[e].params.gamma2).epsilon(1e-12));
    }
}

TEST_CASE("nesting across the parametric ladder") {
    const auto truth = testutil::desk_truth(6, 80.0);
    const auto datasets = testutil::desk_data(truth, 4);
    optim::Options tight;
    tight.grad_tol = 1e-7;
    tight.f_tol = 1e-13;
    tight.max_iterations = 2000;

    const auto run = [&](ModelId id) {
        FitConfig cfg = desk_config(id);
        cfg.optimizer = tight;
        return fit(datasets, truth.scaler, truth.epochs, cfg);
    };
    const double l_m1a = run(ModelId::M1a).loglik;
    const double l_m1b = run(ModelId::M1b).loglik;
    const double l_m2 = run(ModelId::M2).loglik;
    const double l_m3 = run(ModelId::M3).loglik;
    const double l_m4 = run(ModelId::M4).loglik;

    CHECK(l_m2 <= l_m1a + 1e-6);
    CHECK(l_m3 <= l_m2 + 1e-6);
    CHECK(l_m4 <= l_m3 + 1e-6);
    CHECK(l_m1a <= l_m1b + 1e-6); // single suit nests in two suits

    // Spline models: the roughness penalty can trade a little raw loglik,
    // so the comparison carries the penalty slack.
    FitConfig m5 = desk_config(ModelId::M5, 1.0);
    m5.optimizer = tight;
    const FittedModel f5 = fit(datasets, truth.scaler, truth.epochs, m5);
    const FitContext ctx(datasets, truth.scaler, truth.epochs, m5);
    const auto bd5 = pooled_penalized_loglik(f5.psi, ctx, 0.0, 0.0);
    CHECK(l_m4 <= bd5.loglik + 1.0 * bd5.p_r + 0.05);
}

TEST_CASE("cross validation of phi_r") {
    const auto truth = testutil::desk_truth(6, 70.0);
    const auto datasets = testutil::desk_data(truth, 6);

    SUBCASE("singleton grid returns its value") {
        FitConfig cfg = desk_config(ModelId::M7b);
        cfg.cv.phi_r_grid = {42.0};
        cfg.cv.repeats = 1;
        cfg.cv.folds = 5;
        const auto cv = cross_validate_phi_r(datasets, truth.scaler, truth.epochs, cfg);
        CHECK(cv.chosen_phi_r == 42.0);
    }
    SUBCASE("deterministic given the seed, and flat for affine truth") {
        FitConfig cfg = desk_config(ModelId::M7b);
        cfg.cv.phi_r_grid = {1.0, 15.0, 150.0};
        cfg.cv.repeats = 2;
        cfg.cv.folds = 5;
        cfg.seed = 77;
        const auto cv1 = cross_validate_phi_r(datasets, truth.scaler, truth.epochs, cfg);
        const auto cv2 = cross_validate_phi_r(datasets, truth.scaler, truth.epochs, cfg);
        REQUIRE(cv1.mean_predictive.size() == cv2.mean_predictive.size());
        for (std::size_t g = 0; g < cv1.mean_predictive.size(); ++g)
            CHECK(cv1.mean_predictive[g] == cv2.mean_predictive[g]);
        // generating sigma_L is affine: predictive performance is flat in phi_r
        const auto [lo, hi] = std::minmax_element(cv1.mean_predictive.begin(),
                                                  cv1.mean_predictive.end());
        CHECK(*hi - *lo < 2.0);
    }
}

TEST_CASE("ric: effective dof identity at zero penalties") {
    const auto truth = testutil::desk_truth(8, 80.0);
    const auto datasets = testutil::desk_data(truth, 8);

    SUBCASE("parametric models report the raw parameter count") {
        FitConfig cfg = desk_config(ModelId::M4);
        const FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);
        const RicResult r = ric(fitted, datasets);
        const double p = static_cast<double>(free_parameter_count(ModelId::M4, 8, 0));
        CHECK(r.effective_dof == doctest::Approx(p).epsilon(1e-3 / p));
        CHECK(r.ric == doctest::Approx(-2.0 * fitted.loglik + 2.0 * r.effective_dof));
        FitConfig icfg = desk_config(ModelId::M1b);
        const FittedModel indep = fit(datasets, truth.scaler, truth.epochs, icfg);
        CHECK(ric(indep, datasets).effective_dof == doctest::Approx(48.0));
    }
    SUBCASE("spline model at zero penalty: tr(I J^-1) equals the raw count") {
        FitConfig cfg = desk_config(ModelId::M7b, 0.0);
        cfg.spline_q = 6;
        const FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);
        const RicResult r = ric(fitted, datasets);
        const double p = static_cast<double>(free_parameter_count(ModelId::M7b, 8, 6));
        CHECK(std::abs(r.effective_dof - p) < 1e-3);
    }
    SUBCASE("penalties shrink the effective dof below the raw count") {
        FitConfig cfg = desk_config(ModelId::M7b, 50.0);
        const FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);
        const RicResult r = ric(fitted, datasets);
        const double raw = static_cast<double>(free_parameter_count(ModelId::M7b, 8, 10));
        CHECK(r.effective_dof < raw);
        CHECK(r.effective_dof > 4.0);
    }
}

TEST_CASE("ric ladder prefers the generating pooled model over independent fits") {
    int pooled_wins = 0;
    const auto truth = testutil::desk_truth(8, 80.0);
    for (int seed = 0; seed < 20; ++seed) {
        const auto datasets = testutil::desk_data(truth, 100 + seed);
        FitConfig pooled_cfg = desk_config(ModelId::M7b);
        pooled_cfg.compute_ric = true;
        FitConfig ind_cfg = desk_config(ModelId::M1b);
        ind_cfg.compute_ric = true;
        const FittedModel pooled = fit(datasets, truth.scaler, truth.epochs, pooled_cfg);
        const FittedModel independent = fit(datasets, truth.scaler, truth.epochs, ind_cfg);
        pooled_wins += pooled.ric < independent.ric ? 1 : 0;
    }
    CHECK(pooled_wins >= 18);
}

TEST_CASE("boxcox_profile transform selection") {
    Rng rng(17);
    std::vector<double> u_log;
    for (int i = 0; i < 34; ++i)
        u_log.push_back(3.0 + 4.0 * i / 33.0);

    SUBCASE("log-law data picks delta near zero") {
        std::vector<double> values;
        double range = 0.0;
        for (double u : u_log)
            range = std::max(range, std::exp(-2.0 + 0.9 * u));
        for (double u : u_log)
            values.push_back(std::exp(-2.0 + 0.9 * u) + 0.01 * range * (rng.uniform() - 0.5));
        const auto r = boxcox_profile(values, u_log);
        CHECK(std::abs(r.delta) < 0.05);
        CHECK(r.ci_lo < r.delta);
        CHECK(r.ci_hi > r.delta);
    }
    SUBCASE("noise-free square law gives delta = 1/2") {
        std::vector<double> values;
        for (double u : u_log)
            values.push_back((0.4 + 0.3 * u) * (0.4 + 0.3 * u));
        const auto r = boxcox_profile(values, u_log);
        CHECK(r.delta == doctest::Approx(0.5).epsilon(1e-3));
    }
    SUBCASE("too few points") {
        CHECK_THROWS_AS(boxcox_profile({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}),
                        InsufficientDataError);
    }
    SUBCASE("nonpositive values") {
        CHECK_THROWS_AS(boxcox_profile({1.0, -2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0}),
                        ValidationError);
    }
}

TEST_CASE("pooled PP diagnostic") {
    const auto truth = testutil::desk_truth(6, 90.0);
    const auto datasets = testutil::desk_data(truth, 12);
    FitConfig cfg = desk_config(ModelId::M7b);
    const FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);

    SUBCASE("plotting positions are i/(n+1)") {
        const std::vector<EventDataset> one = {datasets[0]};
        const auto pts = pooled_pp(fitted, one);
        REQUIRE(pts.size() == datasets[0].points.size());
        const double n = static_cast<double>(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            CHECK(pts[i].expected == doctest::Approx((i + 1) / (n + 1)));
            CHECK(pts[i].band_lo < pts[i].band_hi);
        }
    }
    SUBCASE("window restriction and empty windows") {
        const auto pts = pooled_pp(fitted, datasets, std::make_pair(2001.0, 2003.0));
        std::size_t in_window = 0;
        for (const auto& ds : datasets)
            for (const auto& p : ds.points)
                in_window += (p.year >= 2001.0 && p.year < 2003.0) ? 1 : 0;
        CHECK(pts.size() == in_window);
        CHECK(pooled_pp(fitted, datasets, std::make_pair(1900.0, 1901.0)).empty());
    }
    SUBCASE("simulated data stays inside the tolerance bands") {
        std::size_t inside = 0, total = 0;
        const auto pts = pooled_pp(fitted, datasets);
        for (const auto& pt : pts) {
            inside += (pt.observed >= pt.band_lo && pt.observed <= pt.band_hi) ? 1 : 0;
            ++total;
        }
        CHECK(static_cast<double>(inside) / static_cast<double>(total) >= 0.95);
    }
}

TEST_CASE("rate check per year") {
    const auto truth = testutil::desk_truth(6, 90.0);
    const auto datasets = testutil::desk_data(truth, 13);
    FitConfig cfg = desk_config(ModelId::M7b);
    const FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);

    SUBCASE("observed counts stay inside the 95 percent Poisson bands") {
        std::size_t inside = 0, total = 0;
        for (const auto& ds : datasets) {
            for (const auto& row : rate_check(fitted, datasets, ds.event_id)) {
                inside += (row.observed >= row.ci_lo && row.observed <= row.ci_hi) ? 1 : 0;
                ++total;
            }
        }
        CHECK(static_cast<double>(inside) / static_cast<double>(total) >= 0.90);
    }
    SUBCASE("suit years have elevated expected counts when gamma is positive") {
        const auto rows = rate_check(fitted, datasets, datasets.back().event_id);
        double suit = 0.0, neighbor = 0.0;
        for (const auto& row : rows) {
            if (row.year == 2008.0 || row.year == 2009.0)
                suit += row.expected / 2.0;
            if (row.year == 2007.0 || row.year == 2010.0)
                neighbor += row.expected / 2.0;
        }
        CHECK(suit > neighbor);
    }
    SUBCASE("constant-parameter model expects the same count each year") {
        // strip trend and suit effects from a copy of the fitted model
        FittedModel flat = fitted;
        for (auto& ef : flat.events) {
            ef.params.beta = 0.0;
            ef.params.gamma1 = 0.0;
            ef.params.gamma2 = 0.0;
        }
        const auto rows = rate_check(flat, datasets, datasets[0].event_id);
        for (std::size_t i = 1; i < rows.size(); ++i)
            CHECK(rows[i].expected == doctest::Approx(rows[0].expected).epsilon(1e-9));
    }
}
