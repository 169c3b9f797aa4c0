#include "evtpool/evt.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evtpool::evt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Non-throwing integrated intensity used from the likelihood path.
double integrated_intensity_unchecked(double t_a, double t_b, double u, const ParamPath& path) {
    return quad::composite_gauss_legendre(
        [&](double t) { return exceedance_rate(u, path.at(t)); }, t_a, t_b, path.breakpoints);
}

} // namespace

double gev_cdf(double x, const GevParams& p) {
    if (!(p.sigma > 0.0))
        throw std::invalid_argument("gev_cdf: sigma must be positive");
    return std::exp(-tail_power((x - p.mu) / p.sigma, p.xi));
}

double gpd_survival(double x, const GpdParams& p) {
    if (!(p.sigma_tilde > 0.0))
        throw std::invalid_argument("gpd_survival: sigma_tilde must be positive");
    if (x < p.u)
        throw std::domain_error("gpd_survival: x below threshold");
    return tail_power((x - p.u) / p.sigma_tilde, p.xi);
}

double gpd_cdf(double x, const GpdParams& p) { return 1.0 - gpd_survival(x, p); }

double gpd_quantile(double p, const GpdParams& params) {
    if (!(params.sigma_tilde > 0.0))
        throw std::invalid_argument("gpd_quantile: sigma_tilde must be positive");
    if (!(p >= 0.0 && p < 1.0))
        throw std::domain_error("gpd_quantile: p must be in [0, 1)");
    const double xi = params.xi;
    if (std::abs(xi) < kXiZeroTol)
        return params.u - params.sigma_tilde * std::log1p(-p);
    // (1-p)^(-xi) = exp(-xi*log(1-p)); expm1 keeps accuracy near p = 0.
    return params.u + params.sigma_tilde / xi * std::expm1(-xi * std::log1p(-p));
}

double upper_endpoint(const GpdParams& p) {
    if (!(p.xi < 0.0))
        throw std::domain_error("upper_endpoint: finite endpoint requires xi < 0");
    return p.u - p.sigma_tilde / p.xi;
}

double intensity(double t, double x, const GevParams& theta_at_t) {
    (void)t; // the time dependence is carried by theta_at_t
    if (!(theta_at_t.sigma > 0.0))
        throw std::invalid_argument("intensity: sigma(t) must be positive");
    const double w = (x - theta_at_t.mu) / theta_at_t.sigma;
    const double xi = theta_at_t.xi;
    if (std::abs(xi) < kXiZeroTol)
        return std::exp(-w) / theta_at_t.sigma;
    const double z = xi * w;
    if (z <= -1.0)
        return 0.0; // outside support
    return std::exp(-(1.0 / xi + 1.0) * std::log1p(z)) / theta_at_t.sigma;
}

double exceedance_rate(double u, const GevParams& theta_at_t) {
    if (!(theta_at_t.sigma > 0.0))
        return kInf;
    return tail_power((u - theta_at_t.mu) / theta_at_t.sigma, theta_at_t.xi);
}

double integrated_intensity(double t_a, double t_b, double u, const ParamPath& path) {
    if (!(t_a <= t_b))
        throw std::invalid_argument("integrated_intensity: t_a must be <= t_b");
    const double value = integrated_intensity_unchecked(t_a, t_b, u, path);
    if (!std::isfinite(value))
        throw NumericalError("integrated_intensity: non-finite integrand");
    return value;
}

double yearly_rate_midpoint(std::size_t year_index, double u, const ParamPath& path,
                            const TimeScaler& scaler) {
    if (year_index + 1 >= scaler.year_boundaries.size())
        throw std::out_of_range("yearly_rate: year index outside the scaler grid");
    const double y_lo = scaler.standardize(scaler.year_boundaries[year_index]);
    const double y_hi = scaler.standardize(scaler.year_boundaries[year_index + 1]);
    const double mid = 0.5 * (y_lo + y_hi);
    return exceedance_rate(u, path.at(mid)) * (y_hi - y_lo);
}

YearlyRate yearly_rate(std::size_t year_index, double u, const ParamPath& path,
                       const TimeScaler& scaler, const SuitEpochs& epochs) {
    if (year_index + 1 >= scaler.year_boundaries.size())
        throw std::out_of_range("yearly_rate: year index outside the scaler grid");
    const double lo = scaler.year_boundaries[year_index];
    const double hi = scaler.year_boundaries[year_index + 1];
    const double edges[] = {epochs.epoch1_start_year(), epochs.epoch1_end_year(),
                            epochs.epoch2_start_year(), epochs.epoch2_end_year()};
    YearlyRate out;
    // The midpoint approximation assumes slowly varying parameters; an epoch
    // jump inside the year breaks that, so integrate exactly instead.
    for (double e : edges)
        out.used_exact = out.used_exact || (e > lo && e < hi);
    if (out.used_exact)
        out.rate = integrated_intensity(scaler.standardize(lo), scaler.standardize(hi), u, path);
    else
        out.rate = yearly_rate_midpoint(year_index, u, path, scaler);
    return out;
}

double censored_term(double x, double s, const GevParams& theta_at_t) {
    if (!(theta_at_t.sigma > 0.0))
        throw std::invalid_argument("censored_term: sigma(t) must be positive");
    const double lo = tail_power((x - s / 2.0 - theta_at_t.mu) / theta_at_t.sigma, theta_at_t.xi);
    const double hi = tail_power((x + s / 2.0 - theta_at_t.mu) / theta_at_t.sigma, theta_at_t.xi);
    if (!std::isfinite(lo))
        throw NumericalError("censored_term: interval extends outside the support");
    const double term = lo - hi;
    if (term < 0.0) {
        if (term < -1e-13)
            throw NumericalError("censored_term: negative mass beyond roundoff");
        return 0.0;
    }
    return term;
}

double event_log_likelihood(const EventDataset& data, const ParamPath& path, double s) {
    const double lambda =
        integrated_intensity_unchecked(path.window_lo, path.window_hi, data.threshold_u, path);
    if (!std::isfinite(lambda))
        return kInfeasible;

    double loglik = -lambda;
    for (const auto& pt : data.points) {
        const GevParams theta = path.at(pt.t_std);
        if (!(theta.sigma > 0.0))
            return kInfeasible;
        const double lo = tail_power((pt.x - s / 2.0 - theta.mu) / theta.sigma, theta.xi);
        const double hi = tail_power((pt.x + s / 2.0 - theta.mu) / theta.sigma, theta.xi);
        if (!std::isfinite(lo))
            return kInfeasible;
        const double term = lo - hi;
        if (!(term > 0.0))
            return kInfeasible;
        loglik += std::log(term);
    }
    return loglik;
}

} // namespace evtpool::evt
