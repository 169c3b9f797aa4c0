#include "evtpool/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace evtpool::splines {

namespace {

// Nonzero basis values on the span containing x (Cox-de Boor, local form).
// knots[span] <= x < knots[span+1]; out has degree+1 entries for basis
// indices span-degree .. span.
void local_basis(const std::vector<double>& knots, int degree, std::size_t span, double x,
                 double* out) {
    std::vector<double> left(static_cast<std::size_t>(degree) + 1);
    std::vector<double> right(static_cast<std::size_t>(degree) + 1);
    out[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[static_cast<std::size_t>(j)] = x - knots[span + 1 - static_cast<std::size_t>(j)];
        right[static_cast<std::size_t>(j)] = knots[span + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[static_cast<std::size_t>(r) + 1] +
                                 left[static_cast<std::size_t>(j - r)];
            const double temp = out[r] / denom;
            out[r] = saved + right[static_cast<std::size_t>(r) + 1] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        out[j] = saved;
    }
}

// Real roots of a polynomial sum_i c[i] x^i inside [lo, hi], via the
// companion matrix, with Newton polishing. Degenerate leading coefficients
// drop the degree.
std::vector<double> real_roots_in_interval(std::vector<double> c, double lo, double hi) {
    double scale = 0.0;
    for (double v : c)
        scale = std::max(scale, std::abs(v));
    if (scale == 0.0)
        return {}; // identically zero: no isolated stationary points
    while (c.size() > 1 && std::abs(c.back()) < 1e-12 * scale)
        c.pop_back();
    const std::size_t deg = c.size() - 1;
    if (deg == 0)
        return {};

    std::vector<double> roots;
    if (deg == 1) {
        roots.push_back(-c[0] / c[1]);
    } else {
        Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg),
                                                          static_cast<Eigen::Index>(deg));
        for (std::size_t i = 0; i < deg; ++i)
            companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(deg - 1)) =
                -c[i] / c[deg];
        for (std::size_t i = 1; i < deg; ++i)
            companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
        const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
        const auto values = solver.eigenvalues();
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const double re = values[i].real();
            if (std::abs(values[i].imag()) > 1e-8 * (1.0 + std::abs(re)))
                continue;
            roots.push_back(re);
        }
    }

    auto poly = [&](double x) {
        double v = 0.0;
        for (std::size_t i = c.size(); i-- > 0;)
            v = v * x + c[i];
        return v;
    };
    auto dpoly = [&](double x) {
        double v = 0.0;
        for (std::size_t i = c.size(); i-- > 1;)
            v = v * x + c[i] * static_cast<double>(i);
        return v;
    };

    std::vector<double> result;
    const double margin = 1e-9 * (hi - lo + 1.0);
    for (double r : roots) {
        for (int it = 0; it < 3; ++it) { // polish
            const double d = dpoly(r);
            if (std::abs(d) < 1e-300)
                break;
            r -= poly(r) / d;
        }
        if (r >= lo - margin && r <= hi + margin)
            result.push_back(std::clamp(r, lo, hi));
    }
    std::sort(result.begin(), result.end());
    return result;
}

} // namespace

SplineBasis SplineBasis::clamped_uniform(double lo, double hi, std::size_t q, int degree) {
    if (!(hi > lo))
        throw std::invalid_argument("spline basis: domain must be nonempty");
    if (degree < 1 || q <= static_cast<std::size_t>(degree))
        throw std::invalid_argument("spline basis: need q > degree >= 1");
    const std::size_t spans = q - static_cast<std::size_t>(degree);
    std::vector<double> knots;
    knots.reserve(q + static_cast<std::size_t>(degree) + 1);
    for (int i = 0; i <= degree; ++i)
        knots.push_back(lo);
    for (std::size_t i = 1; i < spans; ++i)
        knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(spans));
    for (int i = 0; i <= degree; ++i)
        knots.push_back(hi);
    return from_knots(std::move(knots), degree);
}

SplineBasis SplineBasis::from_knots(std::vector<double> knots, int degree) {
    if (degree < 1)
        throw std::invalid_argument("spline basis: degree must be >= 1");
    if (knots.size() < 2 * static_cast<std::size_t>(degree) + 2)
        throw std::invalid_argument("spline basis: too few knots");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (knots[i] < knots[i - 1])
            throw std::invalid_argument("spline basis: knots must be nondecreasing");
    SplineBasis b;
    b.degree_ = degree;
    b.q_ = knots.size() - static_cast<std::size_t>(degree) - 1;
    b.knots_ = std::move(knots);
    if (!(b.domain_hi() > b.domain_lo()))
        throw std::invalid_argument("spline basis: empty evaluation domain");
    return b;
}

std::size_t SplineBasis::find_span(double x) const {
    const std::size_t d = static_cast<std::size_t>(degree_);
    if (x >= domain_hi()) {
        // Last nonempty span; closes the domain at the right endpoint.
        std::size_t span = q_ - 1;
        while (span > d && knots_[span] == knots_[span + 1])
            --span;
        return span;
    }
    const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(d),
                                     knots_.begin() + static_cast<std::ptrdiff_t>(q_ + 1), x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

Eigen::VectorXd SplineBasis::eval(double x) const {
    if (x < domain_lo() || x > domain_hi())
        throw std::domain_error("spline basis: x outside evaluation domain");
    const std::size_t span = find_span(x);
    std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
    local_basis(knots_, degree_, span, x, local.data());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q_));
    for (int r = 0; r <= degree_; ++r)
        out[static_cast<Eigen::Index>(span) - degree_ + r] = local[static_cast<std::size_t>(r)];
    return out;
}

double SplineBasis::spline_value(double x, std::span<const double> coeffs) const {
    if (coeffs.size() != q_)
        throw std::invalid_argument("spline_value: coefficient length mismatch");
    if (x < domain_lo() || x > domain_hi())
        throw std::domain_error("spline_value: x outside evaluation domain");
    const std::size_t span = find_span(x);
    std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
    local_basis(knots_, degree_, span, x, local.data());
    double value = 0.0;
    for (int r = 0; r <= degree_; ++r)
        value += local[static_cast<std::size_t>(r)] *
                 coeffs[span - static_cast<std::size_t>(degree_) + static_cast<std::size_t>(r)];
    return value;
}

double SplineBasis::spline_derivative(double x, std::span<const double> coeffs) const {
    if (coeffs.size() != q_)
        throw std::invalid_argument("spline_derivative: coefficient length mismatch");
    if (x < domain_lo() || x > domain_hi())
        throw std::domain_error("spline_derivative: x outside evaluation domain");
    // Standard degree-(d-1) difference representation of the derivative.
    const std::size_t d = static_cast<std::size_t>(degree_);
    const std::size_t span = find_span(x);
    std::vector<double> local(d);
    // Derivative basis lives on knots_[1 .. q+d-1]; shift span accordingly.
    std::vector<double> dknots(knots_.begin() + 1, knots_.end() - 1);
    local_basis(dknots, degree_ - 1, span - 1, x, local.data());
    double value = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        const std::size_t k = span - d + r; // derivative coefficient index, 0..q-2
        const double denom = knots_[k + d + 1] - knots_[k + 1];
        const double b = static_cast<double>(degree_) * (coeffs[k + 1] - coeffs[k]) / denom;
        value += local[r] * b;
    }
    return value;
}

std::vector<double> SplineBasis::stationary_points(std::span<const double> coeffs) const {
    const std::size_t d = static_cast<std::size_t>(degree_);
    std::vector<double> points;
    for (std::size_t span = d; span < q_; ++span) {
        const double lo = knots_[span];
        const double hi = knots_[span + 1];
        if (!(hi > lo))
            continue;
        // The derivative restricted to a span is a degree-(d-1) polynomial;
        // recover its monomial coefficients by exact interpolation in a
        // centered local coordinate.
        const std::size_t n = d; // number of interpolation nodes
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        Eigen::MatrixXd vand(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double tau =
                n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
            double p = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                vand(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
                p *= tau;
            }
            const double xq = std::clamp(mid + half * tau, domain_lo(), domain_hi());
            rhs[static_cast<Eigen::Index>(i)] = spline_derivative(xq, coeffs);
        }
        const Eigen::VectorXd mono = vand.fullPivLu().solve(rhs);
        std::vector<double> c(mono.data(), mono.data() + mono.size());
        for (double tau : real_roots_in_interval(std::move(c), -1.0, 1.0)) {
            const double x = mid + half * tau;
            if (x > domain_lo() && x < domain_hi())
                points.push_back(x);
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-11; }),
                 points.end());
    return points;
}

Eigen::MatrixXd build_penalty_matrix(std::size_t q) {
    if (q < 3)
        throw std::invalid_argument("penalty matrix requires q >= 3");
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q - 2),
                                               static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i + 2 < q; ++i) {
        d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
        d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = -2.0;
        d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 2)) = 1.0;
    }
    return d2.transpose() * d2;
}

double roughness_penalty(std::span<const double> coeffs, const Eigen::MatrixXd& penalty) {
    if (static_cast<Eigen::Index>(coeffs.size()) != penalty.rows() ||
        penalty.rows() != penalty.cols())
        throw std::invalid_argument("roughness_penalty: dimension mismatch");
    const Eigen::Map<const Eigen::VectorXd> a(coeffs.data(),
                                              static_cast<Eigen::Index>(coeffs.size()));
    return a.dot(penalty * a);
}

double monotonicity_penalty(std::span<const double> coeffs, const SplineBasis& basis) {
    std::vector<double> z;
    z.push_back(basis.domain_lo());
    for (double s : basis.stationary_points(coeffs))
        z.push_back(s);
    z.push_back(basis.domain_hi());

    double penalty = 0.0;
    double prev = basis.spline_value(z.front(), coeffs);
    for (std::size_t i = 1; i < z.size(); ++i) {
        const double cur = basis.spline_value(z[i], coeffs);
        if (cur < prev)
            penalty += prev - cur;
        prev = cur;
    }
    return penalty;
}

} // namespace evtpool::splines
