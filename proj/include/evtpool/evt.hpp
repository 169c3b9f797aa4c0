#ifndef EVTPOOL_EVT_HPP
#define EVTPOOL_EVT_HPP

#include "evtpool/data.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace evtpool::evt {

// Shape branch switchover: |xi| below this uses the exponential/Gumbel limit.
inline constexpr double kXiZeroTol = 1e-9;

// Log-likelihood sentinel for infeasible parameters (never thrown from the
// likelihood path).
inline constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

struct GevParams {
    double mu = 0.0;
    double sigma = 1.0; // > 0
    double xi = 0.0;
};

struct GpdParams {
    double u = 0.0;           // threshold, negated seconds
    double sigma_tilde = 1.0; // > 0
    double xi = 0.0;
};

// [1 + xi*w]_+^(-1/xi), continuous through xi = 0 (exp(-w) branch).
// Returns +inf when the bracket hits zero from above with xi > 0.
inline double tail_power(double w, double xi) {
    if (xi < kXiZeroTol && xi > -kXiZeroTol)
        return std::exp(-w);
    const double z = xi * w;
    // bracket <= 0: [.]_+ gives 0^(-1/xi), which is 0 for xi < 0 (beyond the
    // finite endpoint) and +inf for xi > 0 (below the lower support bound)
    if (z <= -1.0)
        return xi < 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::exp(-std::log1p(z) / xi);
}

double gev_cdf(double x, const GevParams& p);

// Survival 1 - H_u(x); requires x >= u. Zero at/above the finite endpoint.
double gpd_survival(double x, const GpdParams& p);
double gpd_cdf(double x, const GpdParams& p);

// Inverse CDF; requires 0 <= p < 1.
double gpd_quantile(double p, const GpdParams& params);

// Finite upper endpoint u - sigma_tilde/xi; requires xi < 0.
double upper_endpoint(const GpdParams& p);

// Point-process intensity at quality x for parameters theta(t).
double intensity(double t, double x, const GevParams& theta_at_t);

// Rate density w(t) = [1 + xi*(u - mu(t))/sigma(t)]_+^(-1/xi).
double exceedance_rate(double u, const GevParams& theta_at_t);

// Time-varying parameter path over the standardized window, with the
// breakpoints where the path is allowed to jump (suit-epoch edges) plus the
// year grid used for composite quadrature.
struct ParamPath {
    std::function<GevParams(double)> at;
    double window_lo = 0.0;
    double window_hi = 1.0;
    std::vector<double> breakpoints; // ascending, standardized units
};

// Integrated intensity over [t_a, t_b] by composite Gauss-Legendre with
// panels split at the path breakpoints. Throws on non-finite integrand.
double integrated_intensity(double t_a, double t_b, double u, const ParamPath& path);

// Expected exceedance count for calendar year `year_index` of the scaler
// grid. Uses the midpoint approximation unless an epoch boundary falls
// strictly inside the year, in which case the exact integral is used.
struct YearlyRate {
    double rate = 0.0;
    bool used_exact = false;
};
YearlyRate yearly_rate(std::size_t year_index, double u, const ParamPath& path,
                       const TimeScaler& scaler, const SuitEpochs& epochs);
double yearly_rate_midpoint(std::size_t year_index, double u, const ParamPath& path,
                            const TimeScaler& scaler);

// Interval-censored likelihood mass for one observation recorded to
// precision s. Tiny negative cancellation (> -1e-13) clamps to zero;
// anything worse throws.
double censored_term(double x, double s, const GevParams& theta_at_t);

// Censored point-process log-likelihood for one event:
//   l = -Lambda(window) + sum_i log censored_term(x_i).
// Infeasible parameters or a zero term yield kInfeasible, never a throw.
double event_log_likelihood(const EventDataset& data, const ParamPath& path, double s);

} // namespace evtpool::evt

#endif
