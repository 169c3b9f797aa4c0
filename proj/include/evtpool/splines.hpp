#ifndef EVTPOOL_SPLINES_HPP
#define EVTPOOL_SPLINES_HPP

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace evtpool::splines {

// Clamped B-spline basis of polynomial degree `degree` with q basis
// functions. End knots are replicated so the spline takes free values at
// the domain boundaries.
class SplineBasis {
public:
    // Equally spaced interior knots over [lo, hi]; requires q > degree.
    static SplineBasis clamped_uniform(double lo, double hi, std::size_t q, int degree = 4);

    // Full knot vector (size q + degree + 1), including replicated ends.
    static SplineBasis from_knots(std::vector<double> knots, int degree);

    int degree() const { return degree_; }
    std::size_t size() const { return q_; }
    const std::vector<double>& knots() const { return knots_; }
    double domain_lo() const { return knots_[static_cast<std::size_t>(degree_)]; }
    double domain_hi() const { return knots_[q_]; }

    // All q basis values at x; at most degree+1 are nonzero. Throws
    // std::domain_error outside [domain_lo, domain_hi].
    Eigen::VectorXd eval(double x) const;

    double spline_value(double x, std::span<const double> coeffs) const;
    double spline_derivative(double x, std::span<const double> coeffs) const;

    // Interior roots of the derivative (stationary points of the spline),
    // found by exact per-piece polynomial root finding.
    std::vector<double> stationary_points(std::span<const double> coeffs) const;

private:
    SplineBasis() = default;
    std::size_t find_span(double x) const;

    int degree_ = 4;
    std::size_t q_ = 0;
    std::vector<double> knots_;
};

// Second-order difference penalty P = D2' * D2; requires q >= 3.
Eigen::MatrixXd build_penalty_matrix(std::size_t q);

// p_r = a' P a.
double roughness_penalty(std::span<const double> coeffs, const Eigen::MatrixXd& penalty);

// Total decrease of the spline between consecutive elements of
// {domain_lo} + {stationary points} + {domain_hi}; zero iff nondecreasing.
double monotonicity_penalty(std::span<const double> coeffs, const SplineBasis& basis);

} // namespace evtpool::splines

#endif
