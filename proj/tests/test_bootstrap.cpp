#include "evtpool/bootstrap.hpp"
#include "evtpool/errors.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

using namespace evtpool;
using namespace evtpool::bootstrap;

TEST_CASE("simulate_datasets: counts, marks, and epochs") {
    const auto truth = testutil::desk_truth(2, 150.0);

    SUBCASE("mean simulated count matches the integrated intensity") {
        std::vector<double> lambdas;
        for (const auto& ef : truth.events) {
            const auto path = truth.param_path(ef);
            lambdas.push_back(evt::integrated_intensity(truth.scaler.window_start_std(),
                                                        truth.scaler.window_end_std(),
                                                        ef.threshold_u, path));
        }
        std::vector<double> totals(truth.events.size(), 0.0);
        const int seeds = 3000;
        for (int s = 0; s < seeds; ++s) {
            const auto sim = simulate_datasets(truth, 50000 + s);
            for (std::size_t e = 0; e < sim.size(); ++e)
                totals[e] += static_cast<double>(sim[e].points.size());
        }
        for (std::size_t e = 0; e < totals.size(); ++e)
            CHECK(totals[e] / seeds == doctest::Approx(lambdas[e]).epsilon(0.02));
    }
    SUBCASE("marks pass a GPd probability-integral KS test") {
        int passing = 0;
        const int seeds = 400;
        for (int s = 0; s < seeds; ++s) {
            const auto sim = simulate_datasets(truth, 90000 + s);
            const auto& ds = sim[0]; // larger sigma_tilde: negligible rounding
            const auto& ef = truth.event(ds.event_id);
            std::vector<double> pit;
            for (const auto& p : ds.points)
                pit.push_back(
                    1.0 - evt::gpd_survival(std::min(p.x, evt::upper_endpoint({ds.threshold_u,
                                                                               ef.sigma_tilde,
                                                                               ef.params.xi})),
                                            {ds.threshold_u, ef.sigma_tilde, ef.params.xi}));
            const double d = testutil::ks_statistic(std::move(pit));
            const double n = static_cast<double>(ds.points.size());
            // asymptotic 1 percent critical value
            if (d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) <= 1.628)
                ++passing;
        }
        CHECK(static_cast<double>(passing) / 400.0 >= 0.98);
    }
    SUBCASE("suit epochs show elevated simulated counts against neighbor years") {
        // gamma > 0 lifts the rate inside the epochs above the surrounding
        // trend level.
        double suit_years = 0.0, neighbor_years = 0.0;
        REQUIRE(truth.events[0].params.gamma1 > 0.0);
        for (int s = 0; s < 300; ++s) {
            const auto sim = simulate_datasets(truth, 7000 + s);
            for (const auto& p : sim[0].points) {
                const int year = static_cast<int>(std::floor(p.year));
                if (year == 2008 || year == 2009)
                    suit_years += 0.5;
                else if (year == 2007 || year == 2010)
                    neighbor_years += 0.5;
            }
        }
        CHECK(suit_years > neighbor_years);
    }
    SUBCASE("marks are on the censor grid and above the raw threshold") {
        const auto sim = simulate_datasets(truth, 123);
        for (const auto& ds : sim) {
            for (const auto& p : ds.points) {
                const double cents = p.x / ds.censor_s;
                CHECK(std::abs(cents - std::round(cents)) < 1e-9);
                CHECK(p.x >= ds.raw_threshold_u - 1e-12);
            }
        }
    }
}

TEST_CASE("bootstrap ensemble determinism and seed splitting") {
    const auto truth = testutil::desk_truth(6, 100.0);
    const auto datasets = testutil::desk_data(truth, 21);
    model::FitConfig cfg;
    cfg.model_id = model::ModelId::M7b;
    cfg.phi_r = 10.0;
    cfg.compute_ric = false;
    cfg.threads = 2;
    const model::FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);

    BootstrapConfig bc;
    bc.B = 24;
    bc.seed = 99;
    bc.threads = 1;
    const auto e1 = bootstrap_ensemble(fitted, datasets, bc);
    bc.threads = 2;
    const auto e2 = bootstrap_ensemble(fitted, datasets, bc);
    REQUIRE(e1.replicates.size() == e2.replicates.size());
    for (std::size_t i = 0; i < e1.replicates.size(); ++i) {
        CHECK(e1.replicates[i].seed == e2.replicates[i].seed);
        CHECK((e1.replicates[i].psi - e2.replicates[i].psi).cwiseAbs().maxCoeff() == 0.0);
    }

    // counter-based splitting: a longer run extends a shorter one
    bc.B = 12;
    const auto e3 = bootstrap_ensemble(fitted, datasets, bc);
    for (std::size_t i = 0; i < e3.replicates.size(); ++i) {
        CHECK(e3.replicates[i].seed == e1.replicates[i].seed);
        CHECK((e3.replicates[i].psi - e1.replicates[i].psi).cwiseAbs().maxCoeff() == 0.0);
    }

    // feasibility flags are a pure predicate: recomputing never changes them
    for (const auto& rep : e1.replicates)
        if (rep.retained())
            CHECK_NOTHROW(model::with_parameters(fitted, rep.psi));

    SUBCASE("refit on the original data stays at the original optimum") {
        const model::FitContext ctx(datasets, truth.scaler, truth.epochs, cfg,
                                    fitted.basis ? &*fitted.basis : nullptr);
        const auto objective = [&](const Eigen::VectorXd& v) {
            return -model::pooled_penalized_loglik(v, ctx, fitted.phi_r, fitted.phi_m_final)
                        .penalized_loglik;
        };
        optim::Options opts;
        const auto res = optim::minimize_bfgs(objective, fitted.psi, opts);
        CHECK((res.x - fitted.psi).cwiseAbs().maxCoeff() < 1e-3);
    }

    SUBCASE("ensemble persistence round trip") {
        save_ensemble(e1, "test_ensemble.jsonl");
        const auto loaded = load_ensemble("test_ensemble.jsonl", fitted.layout().size());
        REQUIRE(loaded.replicates.size() == e1.replicates.size());
        CHECK(loaded.retained == e1.retained);
        for (std::size_t i = 0; i < e1.replicates.size(); ++i)
            CHECK((loaded.replicates[i].psi - e1.replicates[i].psi).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS_AS(load_ensemble("test_ensemble.jsonl", fitted.layout().size() + 1),
                        VersionMismatchError);
        std::remove("test_ensemble.jsonl");
    }
}

TEST_CASE("percentile confidence intervals") {
    BootstrapEnsemble ens;
    ens.requested = 40;
    for (int i = 0; i < 40; ++i) {
        Replicate r;
        r.seed = static_cast<std::uint64_t>(i);
        r.psi = Eigen::VectorXd::Constant(1, static_cast<double>(i));
        r.feasible = true;
        r.converged = true;
        ens.replicates.push_back(std::move(r));
        ++ens.retained;
    }

    SUBCASE("constant statistic gives a degenerate interval") {
        const auto iv = ci([](const Eigen::VectorXd&) { return 3.25; }, ens);
        CHECK(iv.first == 3.25);
        CHECK(iv.second == 3.25);
    }
    SUBCASE("endpoints match a direct sort-and-index oracle") {
        const auto iv = ci([](const Eigen::VectorXd& p) { return p[0]; }, ens, 0.9);
        // values are 0..39; index = p*(n-1) with linear interpolation
        const double lo_idx = 0.05 * 39.0, hi_idx = 0.95 * 39.0;
        const double lo = std::floor(lo_idx) + (lo_idx - std::floor(lo_idx));
        const double hi = std::floor(hi_idx) + (hi_idx - std::floor(hi_idx));
        CHECK(iv.first == doctest::Approx(lo));
        CHECK(iv.second == doctest::Approx(hi));
    }
    SUBCASE("too few retained replicates") {
        BootstrapEnsemble small;
        small.requested = 5;
        for (int i = 0; i < 5; ++i) {
            Replicate r;
            r.psi = Eigen::VectorXd::Constant(1, 1.0);
            r.feasible = r.converged = true;
            small.replicates.push_back(std::move(r));
            ++small.retained;
        }
        CHECK_THROWS_AS(ci([](const Eigen::VectorXd& p) { return p[0]; }, small),
                        InsufficientDataError);
    }
}

TEST_CASE("predictive record distribution and rank comparisons") {
    const auto truth = testutil::desk_truth(6, 100.0);
    const auto datasets = testutil::desk_data(truth, 31);
    model::FitConfig cfg;
    cfg.model_id = model::ModelId::M7b;
    cfg.phi_r = 10.0;
    cfg.compute_ric = false;
    cfg.threads = 2;
    const model::FittedModel fitted = fit(datasets, truth.scaler, truth.epochs, cfg);
    BootstrapConfig bc;
    bc.B = 24;
    bc.seed = 5;
    bc.threads = 2;
    const auto ens = bootstrap_ensemble(fitted, datasets, bc);
    const std::string event = fitted.events[0].event_id;
    const double record = fitted.events[0].record_x;

    SUBCASE("limits at the record and far beyond every endpoint") {
        CHECK(predictive_record_cdf(fitted, ens, event, record + 1e-9) ==
              doctest::Approx(0.0).epsilon(1e-6));
        CHECK(predictive_record_cdf(fitted, ens, event, record + 1e4) == doctest::Approx(1.0));
        CHECK_THROWS_AS(predictive_record_cdf(fitted, ens, event, record - 0.1),
                        std::domain_error);
    }
    SUBCASE("nondecreasing in x and bounded") {
        double prev = 0.0;
        for (int i = 1; i <= 50; ++i) {
            const double x = record + 0.002 * i * std::abs(record) / 50.0;
            const double v = predictive_record_cdf(fitted, ens, event, x);
            CHECK(v >= prev - 1e-12);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            prev = v;
        }
    }
    SUBCASE("a single-replicate ensemble is that replicate's exceedance law") {
        BootstrapEnsemble single;
        single.requested = 1;
        single.replicates.push_back(ens.replicates[0]);
        single.replicates[0].feasible = true;
        single.replicates[0].converged = true;
        single.retained = 1;
        const auto view = model::with_parameters(fitted, single.replicates[0].psi);
        const auto& ef = view.event(event);
        const double x = record + 0.1;
        const double sigma_r = ef.sigma_tilde + ef.params.xi * (record - ef.threshold_u);
        const double direct = 1.0 - evt::tail_power((x - record) / sigma_r, ef.params.xi);
        CHECK(predictive_record_cdf(fitted, single, event, x) ==
              doctest::Approx(direct).epsilon(1e-12));
    }
    SUBCASE("rank comparison: identical swims tie at one half, dominance gives one") {
        SwimRef a{event, record, fitted.events[0].record_date};
        CHECK(rank_comparison_prob(fitted, ens, a, a) == doctest::Approx(0.5));
        SwimRef slower{event, record - 0.4, fitted.events[0].record_date};
        CHECK(rank_comparison_prob(fitted, ens, a, slower) == doctest::Approx(1.0));
        CHECK(rank_comparison_prob(fitted, ens, slower, a) == doctest::Approx(0.0));
    }
}
