#include "evtpool/model.hpp"

#include "evtpool/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/poisson.hpp>

namespace evtpool::model {

namespace {

// Finite-difference Hessian, step 1e-4 * max(|x_i|, 1). Central differences
// by default; coordinates whose opposite side lands on an infeasible point
// (an active constraint boundary, e.g. gamma_L = 0) fall back to one-sided
// differences away from the boundary.
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, int threads) {
    const Eigen::Index n = x.size();
    const double f0 = f(x);
    constexpr double kBad = -1e29;

    Eigen::VectorXd h(n);
    std::vector<int> side(static_cast<std::size_t>(n), 0); // 0 both, +1/-1 one-sided
    for (Eigen::Index i = 0; i < n; ++i) {
        h[i] = 1e-4 * std::max(std::abs(x[i]), 1.0);
        for (int attempt = 0;; ++attempt) {
            Eigen::VectorXd y = x;
            y[i] = x[i] + h[i];
            const bool plus_ok = f(y) > kBad;
            y[i] = x[i] - h[i];
            const bool minus_ok = f(y) > kBad;
            if (plus_ok && minus_ok) {
                side[static_cast<std::size_t>(i)] = 0;
                break;
            }
            if (attempt >= 6) {
                if (!plus_ok && !minus_ok)
                    throw NumericalError("ric: infeasible in every direction of coordinate " +
                                         std::to_string(i));
                side[static_cast<std::size_t>(i)] = plus_ok ? 1 : -1;
                break;
            }
            h[i] *= 0.25;
        }
    }

    // One-sided coordinates reuse f(x + s_i h_i e_i).
    Eigen::VectorXd f_step(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (side[static_cast<std::size_t>(i)] == 0)
            continue;
        Eigen::VectorXd y = x;
        y[i] = x[i] + side[static_cast<std::size_t>(i)] * h[i];
        f_step[i] = f(y);
    }

    Eigen::MatrixXd hess(n, n);
    struct Entry {
        Eigen::Index i, j;
    };
    std::vector<Entry> entries;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            entries.push_back({i, j});

    optim::parallel_for(entries.size(), threads, [&](std::size_t k) {
        const auto [i, j] = entries[k];
        const int si = side[static_cast<std::size_t>(i)];
        const int sj = side[static_cast<std::size_t>(j)];
        Eigen::VectorXd y = x;
        double value;
        if (i == j) {
            if (si == 0) {
                y[i] = x[i] + h[i];
                const double fp = f(y);
                y[i] = x[i] - h[i];
                const double fm = f(y);
                value = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            } else {
                y[i] = x[i] + 2.0 * si * h[i];
                const double f2 = f(y);
                value = (f2 - 2.0 * f_step[i] + f0) / (h[i] * h[i]);
            }
        } else if (si == 0 && sj == 0) {
            y[i] = x[i] + h[i];
            y[j] = x[j] + h[j];
            const double fpp = f(y);
            y[j] = x[j] - h[j];
            const double fpm = f(y);
            y[i] = x[i] - h[i];
            const double fmm = f(y);
            y[j] = x[j] + h[j];
            const double fmp = f(y);
            value = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
        } else {
            // Work in the feasible quadrant.
            const double di = (si == 0 ? 1 : si) * h[i];
            const double dj = (sj == 0 ? 1 : sj) * h[j];
            Eigen::VectorXd yi = x, yj = x, yij = x;
            yi[i] = x[i] + di;
            yj[j] = x[j] + dj;
            yij[i] = x[i] + di;
            yij[j] = x[j] + dj;
            value = (f(yij) - f(yi) - f(yj) + f0) / (di * dj);
        }
        hess(i, j) = value;
        hess(j, i) = value;
    });
    return hess;
}

double trace_solve(const Eigen::MatrixXd& information, const Eigen::MatrixXd& penalized_info) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(penalized_info);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(cond < 1e12))
        throw NumericalError("ric: penalized information matrix is near-singular "
                             "(condition number " +
                             std::to_string(cond) + ")");
    return penalized_info.partialPivLu().solve(information).trace();
}

FitConfig config_for_refit(const FittedModel& fitted) {
    FitConfig cfg;
    cfg.model_id = fitted.model_id;
    cfg.phi_r = fitted.phi_r;
    if (fitted.basis) {
        cfg.spline_q = fitted.basis->size();
        cfg.spline_degree = fitted.basis->degree();
    }
    cfg.compute_ric = false;
    return cfg;
}

} // namespace

RicResult ric(const FittedModel& fitted, const std::vector<EventDataset>& datasets) {
    std::vector<EventDataset> sorted = datasets;
    std::sort(sorted.begin(), sorted.end(),
              [](const EventDataset& a, const EventDataset& b) { return a.event_id < b.event_id; });
    const FitConfig cfg = config_for_refit(fitted);

    RicResult out;
    if (!fitted.structure.uses_spline()) {
        // Fully parametric models carry no penalty: tr(I J^-1) reduces to the
        // raw parameter count, which is also what the model-comparison table
        // reports for them.
        out.effective_dof = static_cast<double>(fitted.layout().size());
        out.ric = -2.0 * fitted.loglik + 2.0 * out.effective_dof;
        return out;
    }

    const FitContext ctx(sorted, fitted.scaler, fitted.epochs, cfg,
                         fitted.basis ? &*fitted.basis : nullptr);
    const double phi_r = fitted.phi_r;
    const auto unpenalized = [&](const Eigen::VectorXd& p) {
        const auto bd = pooled_penalized_loglik(p, ctx, 0.0, 0.0);
        return bd.feasible ? bd.loglik : -1e30;
    };
    // J differentiates the smooth part of the penalized likelihood. The
    // monotonicity term is identically zero in a neighborhood of an interior
    // monotone optimum; where the constraint binds, its kink has no
    // two-sided Hessian and would only inject noise.
    const auto penalized = [&](const Eigen::VectorXd& p) {
        const auto bd = pooled_penalized_loglik(p, ctx, phi_r, 0.0);
        return bd.feasible ? bd.penalized_loglik : -1e30;
    };
    const int threads = 2;
    const Eigen::MatrixXd info = -fd_hessian(unpenalized, fitted.psi, threads);
    const Eigen::MatrixXd pen_info = -fd_hessian(penalized, fitted.psi, threads);
    out.effective_dof = trace_solve(info, pen_info);
    out.ric = -2.0 * fitted.loglik + 2.0 * out.effective_dof;
    return out;
}

BoxCoxResult boxcox_profile(const std::vector<double>& values,
                            const std::vector<double>& covariate) {
    if (values.size() != covariate.size())
        throw std::invalid_argument("boxcox_profile: size mismatch");
    if (values.size() < 4)
        throw InsufficientDataError("boxcox_profile: need at least 4 points");
    for (double v : values)
        if (!(v > 0.0))
            throw ValidationError("boxcox_profile: values must be positive");

    const std::size_t n = values.size();
    double sum_log = 0.0;
    for (double v : values)
        sum_log += std::log(v);

    const auto profile = [&](double delta) {
        // Transform, regress on the covariate, profile out the variance.
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = std::abs(delta) < 1e-8 ? std::log(values[i])
                                          : (std::pow(values[i], delta) - 1.0) / delta;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += covariate[i];
            my += y[i];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (covariate[i] - mx) * (covariate[i] - mx);
            sxy += (covariate[i] - mx) * (y[i] - my);
        }
        const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - my - slope * (covariate[i] - mx);
            rss += r * r;
        }
        rss = std::max(rss, 1e-300);
        return -0.5 * static_cast<double>(n) * std::log(rss / static_cast<double>(n)) +
               (delta - 1.0) * sum_log;
    };

    // Dense scan, then golden-section refinement around the best cell.
    const double lo = -2.0, hi = 3.0, step = 0.0025;
    double best_delta = lo, best_ll = profile(lo);
    for (double d = lo + step; d <= hi; d += step) {
        const double ll = profile(d);
        if (ll > best_ll) {
            best_ll = ll;
            best_delta = d;
        }
    }
    {
        double a = best_delta - step, b = best_delta + step;
        const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
        double f1 = profile(x1), f2 = profile(x2);
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = profile(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = profile(x1);
            }
        }
        best_delta = 0.5 * (a + b);
        best_ll = profile(best_delta);
    }

    // 95% profile interval: chi2_1(0.95)/2 drop from the maximum.
    const double cutoff = best_ll - 1.9207294103470613;
    const auto cross = [&](double inside, double outside) {
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (profile(mid) >= cutoff)
                inside = mid;
            else
                outside = mid;
        }
        return 0.5 * (inside + outside);
    };
    double ci_lo = lo, ci_hi = hi;
    if (profile(lo) < cutoff)
        ci_lo = cross(best_delta, lo);
    if (profile(hi) < cutoff)
        ci_hi = cross(best_delta, hi);

    BoxCoxResult out;
    out.delta = best_delta;
    out.ci_lo = ci_lo;
    out.ci_hi = ci_hi;
    return out;
}

std::vector<PpPoint> pooled_pp(const FittedModel& fitted, const std::vector<EventDataset>& datasets,
                               std::optional<std::pair<double, double>> year_window, double level) {
    std::vector<double> probs;
    for (const auto& ds : datasets) {
        const EventFit& ef = fitted.event(ds.event_id);
        const evt::GpdParams gpd{ds.threshold_u, ef.sigma_tilde, ef.params.xi};
        for (const auto& p : ds.points) {
            if (year_window && (p.year < year_window->first || p.year >= year_window->second))
                continue;
            probs.push_back(evt::gpd_cdf(p.x, gpd));
        }
    }
    std::sort(probs.begin(), probs.end());

    const std::size_t n = probs.size();
    std::vector<PpPoint> out;
    out.reserve(n);
    const double tail = 0.5 * (1.0 - level);
    for (std::size_t i = 0; i < n; ++i) {
        PpPoint pt;
        pt.expected = static_cast<double>(i + 1) / static_cast<double>(n + 1);
        pt.observed = probs[i];
        // i-th order statistic of n uniforms is Beta(i, n+1-i).
        const boost::math::beta_distribution<double> beta(static_cast<double>(i + 1),
                                                          static_cast<double>(n - i));
        pt.band_lo = boost::math::quantile(beta, tail);
        pt.band_hi = boost::math::quantile(beta, 1.0 - tail);
        out.push_back(pt);
    }
    return out;
}

std::vector<RateCheckRow> rate_check(const FittedModel& fitted,
                                     const std::vector<EventDataset>& datasets,
                                     const std::string& event_id) {
    const EventFit& ef = fitted.event(event_id);
    const EventDataset* ds = nullptr;
    for (const auto& d : datasets)
        if (d.event_id == event_id)
            ds = &d;
    if (ds == nullptr)
        throw std::invalid_argument("rate_check: dataset missing for event " + event_id);

    const evt::ParamPath path = fitted.param_path(ef);
    const TimeScaler& scaler = fitted.scaler;
    std::vector<RateCheckRow> out;
    for (std::size_t i = 0; i + 1 < scaler.year_boundaries.size(); ++i) {
        RateCheckRow row;
        row.year = scaler.year_boundaries[i];
        row.expected = evt::integrated_intensity(scaler.standardize(scaler.year_boundaries[i]),
                                                 scaler.standardize(scaler.year_boundaries[i + 1]),
                                                 ds->threshold_u, path);
        for (const auto& p : ds->points)
            if (p.year >= scaler.year_boundaries[i] && p.year < scaler.year_boundaries[i + 1])
                ++row.observed;
        if (row.expected > 1e-12) {
            const boost::math::poisson_distribution<double> pois(row.expected);
            row.ci_lo = boost::math::quantile(pois, 0.025);
            row.ci_hi = boost::math::quantile(pois, 0.975);
        }
        out.push_back(row);
    }
    return out;
}

} // namespace evtpool::model
