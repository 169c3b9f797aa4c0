#ifndef EVTPOOL_TEST_HELPERS_HPP
#define EVTPOOL_TEST_HELPERS_HPP

#include "evtpool/bootstrap.hpp"
#include "evtpool/fixture.hpp"
#include "evtpool/model.hpp"
#include "evtpool/rng.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

using namespace evtpool;

// Midpoint-Riemann reference integrator (dense, slow, independent of the
// Gauss-Legendre production path).
inline double riemann(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels) {
    const double h = (b - a) / static_cast<double>(panels);
    double sum = 0.0;
    for (std::size_t i = 0; i < panels; ++i)
        sum += f(a + (static_cast<double>(i) + 0.5) * h);
    return sum * h;
}

// Adaptive Simpson, used where the tests need an integral oracle that does
// not share code with quad::.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, tol * 0.5, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, tol * 0.5, depth - 1);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-12) {
    if (a == b)
        return 0.0;
    return simpson_rec(f, a, b, f(a), f(0.5 * (a + b)), f(b), tol, 48);
}

// B-spline from divided differences of truncated powers, for simple
// (non-repeated) knots:  B_{k,d}(x) = (t_{k+d+1}-t_k) [t_k..t_{k+d+1}](t-x)_+^d.
inline double truncated_power_bspline(const std::vector<double>& knots, std::size_t k, int degree,
                                      double x) {
    const std::size_t m = static_cast<std::size_t>(degree) + 1;
    std::vector<double> table(m + 1);
    for (std::size_t i = 0; i <= m; ++i) {
        const double t = knots[k + i];
        table[i] = t > x ? std::pow(t - x, degree) : 0.0;
    }
    for (std::size_t level = 1; level <= m; ++level)
        for (std::size_t i = 0; i + level <= m; ++i)
            table[i] = (table[i + 1] - table[i]) / (knots[k + i + level] - knots[k + i]);
    return (knots[k + m] - knots[k]) * table[0];
}

// GPd density on the negated scale, written out directly.
inline double gpd_pdf(double x, double u, double sigma_tilde, double xi) {
    const double z = 1.0 + xi * (x - u) / sigma_tilde;
    if (z <= 0.0)
        return 0.0;
    return std::pow(z, -1.0 / xi - 1.0) / sigma_tilde;
}

// One-sample Kolmogorov-Smirnov statistic against U(0,1).
inline double ks_statistic(std::vector<double> pit) {
    std::sort(pit.begin(), pit.end());
    const double n = static_cast<double>(pit.size());
    double d = 0.0;
    for (std::size_t i = 0; i < pit.size(); ++i) {
        d = std::max(d, pit[i] - static_cast<double>(i) / n);
        d = std::max(d, static_cast<double>(i + 1) / n - pit[i]);
    }
    return d;
}

// Small desk-scale truth model shared by the heavier tests.
inline model::FittedModel desk_truth(std::size_t n_events = 8, double target = 120.0) {
    fixture::TruthSpec spec;
    spec.n_events = n_events;
    spec.target_mean_count = target;
    return fixture::make_truth_model(spec);
}

inline std::vector<EventDataset> desk_data(const model::FittedModel& truth,
                                           std::uint64_t seed = 1) {
    return bootstrap::simulate_datasets(truth, seed);
}

} // namespace testutil

#endif
