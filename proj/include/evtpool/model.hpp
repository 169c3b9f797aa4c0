#ifndef EVTPOOL_MODEL_HPP
#define EVTPOOL_MODEL_HPP

#include "evtpool/data.hpp"
#include "evtpool/evt.hpp"
#include "evtpool/optim.hpp"
#include "evtpool/splines.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evtpool::model {

// ---------------------------------------------------------------------------
// Model ladder
// ---------------------------------------------------------------------------

enum class ModelId { M1a, M1b, M2, M3, M4, M5, M6, M7a, M7b };

ModelId parse_model_id(const std::string& name);
std::string to_string(ModelId id);
std::string constraints_label(ModelId id); // human-readable ladder row label

enum class SigmaMode { PerEvent, Linear, Spline };

// Which parameters are pooled across events, per the incremental ladder.
struct ModelStructure {
    bool two_suit = false;
    bool shared_xi = false;
    bool mu_linked = false;
    SigmaMode sigma = SigmaMode::PerEvent;
    bool beta_linked = false;
    bool gamma_linked = false;

    bool independent() const {
        return !shared_xi && !mu_linked && sigma == SigmaMode::PerEvent && !beta_linked &&
               !gamma_linked;
    }
    bool uses_spline() const { return sigma == SigmaMode::Spline; }
};

ModelStructure structure_of(ModelId id);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Natural-scale point process parameters for one event. gamma2 is zero and
// unused under single-suit parametrizations.
struct EventParams {
    double mu0 = 0.0;
    double sigma0 = 1.0;
    double xi = 0.0;
    double beta = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;

    // GPd scale at threshold u; covariate-free by construction.
    double sigma_tilde(double u) const { return sigma0 + xi * (u - mu0); }
};

// Link-scale view (mu_L = log(-mu0), sigma_L = log(sigma_tilde),
// beta_L = log(beta), gamma_L = sqrt(gamma)).
struct TransformedParams {
    double mu_L = 0.0;
    double sigma_L = 0.0;
    double beta_L = 0.0;
    double gamma_L1 = 0.0;
    double gamma_L2 = 0.0;
    double xi = 0.0;
};

TransformedParams transform_event_params(const EventParams& p, double u);
EventParams untransform_event_params(const TransformedParams& t, double u);

// The pooled parameter vector psi for the across-event models.
struct PooledParams {
    double xi = -0.1;
    double alpha1 = 0.0, theta1 = 1.0;     // mu_L link
    std::vector<double> spline_a;          // sigma_L spline (M5-M7b)
    double alpha2 = 0.0, theta2 = 0.0;     // sigma_L linear link (M4)
    double alpha3 = 0.0, theta3 = 1.0;     // beta_L link
    double alpha4 = 0.0, theta4 = 0.0;     // gamma_L link
    double epsilon = 0.0;                  // second-suit offset (two-suit only)
};

// Derives one event's natural parameters from the pooled vector. Requires
// the spline basis for spline-sigma models. Throws on gamma_L < 0.
EventParams event_params_from_pooled(const PooledParams& psi, double u_log, double u,
                                     ModelId model_id,
                                     const splines::SplineBasis* basis = nullptr);

// Time-varying GEV parameters at standardized time t.
evt::GevParams time_varying_params(const EventParams& p, double t_std, bool in_epoch1,
                                   bool in_epoch2);

// ---------------------------------------------------------------------------
// Raw optimization vector layout
// ---------------------------------------------------------------------------

// Maps the flat optimization vector onto shared and per-event blocks.
// Per-event sigma is carried as log(sigma_tilde) so positivity is built in.
struct ParameterLayout {
    ModelStructure structure;
    std::size_t n_events = 0;
    std::size_t q = 0; // spline dimension when used

    std::size_t xi_offset = npos;
    std::size_t mu_offset = npos;    // alpha1, theta1
    std::size_t sigma_offset = npos; // alpha2, theta2 (Linear) or a[0..q) (Spline)
    std::size_t beta_offset = npos;  // alpha3, theta3
    std::size_t gamma_offset = npos; // alpha4, theta4 [, epsilon]
    std::size_t event_offset = 0;
    std::size_t event_size = 0;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    static ParameterLayout create(const ModelStructure& s, std::size_t n_events, std::size_t q);
    std::size_t size() const { return event_offset + n_events * event_size; }

    PooledParams pooled_part(const Eigen::VectorXd& psi) const;
    void set_pooled_part(Eigen::VectorXd& psi, const PooledParams& p) const;
};

// ---------------------------------------------------------------------------
// Fit configuration and results
// ---------------------------------------------------------------------------

struct CvConfig {
    std::size_t folds = 10;
    std::size_t repeats = 20;
    std::vector<double> phi_r_grid = {0.0, 1.0, 5.0, 15.0, 50.0, 150.0};
};

struct FitConfig {
    ModelId model_id = ModelId::M7b;
    double phi_r = 15.0;
    bool phi_r_from_cv = false;
    CvConfig cv;
    std::vector<double> phi_m_schedule = {0.0,   10.0,  1e2, 1e3, 1e4,
                                          1e5,   1e6,   1e7, 1e8};
    std::size_t spline_q = 10;
    int spline_degree = 4;
    double spline_pad_fraction = 0.01; // domain padding each side
    optim::Options optimizer;
    std::uint64_t seed = 1;
    bool compute_ric = true;
    int threads = 1;
};

// Per-event fitted summary (derived parameters plus data facts used by the
// downstream analytics).
struct EventFit {
    std::string event_id;
    double threshold_u = 0.0;
    double raw_threshold_u = 0.0;
    double u_log = 0.0;
    double censor_s = 0.01;
    std::size_t n_points = 0;
    EventParams params;
    double sigma_tilde = 1.0;
    double record_x = 0.0; // best observed negated time
    std::string record_holder;
    Date record_date;
};

struct FittedModel {
    int schema_version = 1;
    ModelId model_id = ModelId::M7b;
    ModelStructure structure;
    Eigen::VectorXd psi; // raw vector, ParameterLayout order
    PooledParams pooled; // pooled blocks only (meaningful per structure)
    std::vector<EventFit> events; // sorted by event_id
    std::optional<splines::SplineBasis> basis;
    TimeScaler scaler;
    SuitEpochs epochs;
    double phi_r = 0.0;
    double phi_m_final = 0.0;
    double loglik = 0.0;
    double penalized_loglik = 0.0;
    double ric = 0.0;
    double effective_dof = 0.0;
    bool ric_available = false;
    int fit_iterations = 0;
    std::uint64_t seed = 0;

    const EventFit& event(const std::string& event_id) const;
    ParameterLayout layout() const;

    // Time-varying parameter path for one event over the observation window.
    evt::ParamPath param_path(const EventFit& ef) const;
};

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

// Precomputed arrays for fast repeated likelihood evaluation: per-event data
// points and composite quadrature nodes (panels split at year and epoch
// boundaries), with suit flags resolved per node.
class FitContext {
public:
    // fixed_basis, when given, overrides the basis the config would build
    // (refits and information matrices must reuse the original knots).
    FitContext(const std::vector<EventDataset>& datasets, const TimeScaler& scaler,
               const SuitEpochs& epochs, const FitConfig& config,
               const splines::SplineBasis* fixed_basis = nullptr);

    struct EventCache {
        std::string event_id;
        double u = 0.0;
        double u_raw = 0.0;
        double u_log = 0.0;
        double s = 0.01;
        double lambda_scale = 1.0; // CV thinning factor
        std::vector<double> x, t;  // data marks and standardized times
        std::vector<std::uint8_t> suit1, suit2;
        std::vector<double> node_t, node_w; // quadrature nodes over the window
        std::vector<std::uint8_t> node_s1, node_s2;
        std::vector<double> basis_row; // basis values at u_log (spline models)
        double record_x = 0.0;
        std::size_t n_total = 0; // original point count (before CV split)
    };

    const std::vector<EventCache>& events() const { return events_; }
    const TimeScaler& scaler() const { return scaler_; }
    const SuitEpochs& epochs() const { return epochs_; }
    const splines::SplineBasis* basis() const { return basis_ ? &*basis_ : nullptr; }
    const Eigen::MatrixXd& penalty() const { return penalty_; }
    const Eigen::MatrixXd& basis_rows() const { return basis_rows_; }
    double window_lo() const { return window_lo_; }
    double window_hi() const { return window_hi_; }
    const ParameterLayout& layout() const { return layout_; }

    // CV view: same thresholds/quadrature, subset of points, scaled Lambda.
    FitContext restricted_to(const std::vector<std::vector<std::size_t>>& keep_indices,
                             bool complement) const;

    EventParams decode_event(const Eigen::VectorXd& psi, std::size_t event_index) const;
    Eigen::VectorXd encode(const PooledParams& pooled,
                           const std::vector<EventParams>& per_event) const;

private:
    FitContext() = default;
    std::vector<EventCache> events_;
    TimeScaler scaler_;
    SuitEpochs epochs_;
    std::optional<splines::SplineBasis> basis_;
    Eigen::MatrixXd penalty_;    // q x q (zero-size when no spline)
    Eigen::MatrixXd basis_rows_; // n_events x q
    double window_lo_ = 0.0, window_hi_ = 1.0;
    ParameterLayout layout_;
};

struct LoglikBreakdown {
    double loglik = 0.0;           // unpenalized
    double penalized_loglik = 0.0; // loglik - phi_r p_r - phi_m p_m
    double p_r = 0.0;
    double p_m = 0.0;
    bool feasible = false;
};

namespace detail {
struct DecodedEvent {
    EventParams params;
    double sigma_tilde = 0.0;
    bool feasible = false;
};
// Non-throwing decode of one event's block from the raw vector. basis_row
// holds the q basis values at the event's u_log (empty unless spline sigma).
DecodedEvent decode_event_quiet(const Eigen::VectorXd& psi, const ParameterLayout& layout,
                                std::size_t event_index, double u, double u_log,
                                std::span<const double> basis_row);
} // namespace detail

// A fitted-model view with a replacement raw parameter vector: thresholds,
// records, scaler, epochs, and basis are taken from `base`; fit statistics
// are cleared. Used for bootstrap replicates.
FittedModel with_parameters(const FittedModel& base, const Eigen::VectorXd& psi);

// Pooled censored point-process log-likelihood with penalties. Infeasible
// parameter vectors produce -inf loglik with feasible = false.
LoglikBreakdown pooled_penalized_loglik(const Eigen::VectorXd& psi, const FitContext& ctx,
                                        double phi_r, double phi_m);

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

// Independent single-event fit (models M1a/M1b). pin_gamma2 forces the
// second suit effect to zero within the two-suit parametrization.
EventParams fit_independent(const EventDataset& dataset, const TimeScaler& scaler,
                            const SuitEpochs& epochs, bool two_suit,
                            const optim::Options& opts = {}, bool pin_gamma2 = false);

// Penalized maximum likelihood for any ladder model, with the iterative
// monotonicity escalation for spline models. Throws NumericalError carrying
// diagnostics if the schedule ends without a monotone optimum.
FittedModel fit(const std::vector<EventDataset>& datasets, const TimeScaler& scaler,
                const SuitEpochs& epochs, const FitConfig& config);

// 10-fold stratified cross-validation for phi_r. Returns the grid value with
// the best mean held-out predictive log-likelihood (ties -> smaller phi_r).
struct CvResult {
    double chosen_phi_r = 0.0;
    std::vector<double> grid;
    std::vector<double> mean_predictive; // aligned with grid
};
CvResult cross_validate_phi_r(const std::vector<EventDataset>& datasets,
                              const TimeScaler& scaler, const SuitEpochs& epochs,
                              FitConfig config);

// ---------------------------------------------------------------------------
// Criteria and diagnostics
// ---------------------------------------------------------------------------

// RIC = -2 l + 2 tr(I J^-1): I the observed information of the unpenalized
// likelihood, J the negative Hessian of the penalized one, both by central
// finite differences at the optimum.
struct RicResult {
    double ric = 0.0;
    double effective_dof = 0.0;
};
RicResult ric(const FittedModel& fitted, const std::vector<EventDataset>& datasets);

// Box-Cox profile likelihood for transform selection: values^(delta) are
// regressed linearly on the covariate with Gaussian errors.
struct BoxCoxResult {
    double delta = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};
BoxCoxResult boxcox_profile(const std::vector<double>& values,
                            const std::vector<double>& covariate);

// Pooled PP diagnostic with order-statistic tolerance bands.
struct PpPoint {
    double expected = 0.0;
    double observed = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
};
std::vector<PpPoint> pooled_pp(const FittedModel& fitted,
                               const std::vector<EventDataset>& datasets,
                               std::optional<std::pair<double, double>> year_window = {},
                               double level = 0.95);

// Expected vs observed yearly exceedance counts for one event, with central
// Poisson intervals (or bootstrap intervals, supplied by the caller).
struct RateCheckRow {
    double year = 0.0;
    double expected = 0.0;
    std::size_t observed = 0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};
std::vector<RateCheckRow> rate_check(const FittedModel& fitted,
                                     const std::vector<EventDataset>& datasets,
                                     const std::string& event_id);

// Free-parameter count of the raw optimization vector for a model.
std::size_t free_parameter_count(ModelId id, std::size_t n_events, std::size_t spline_q);

} // namespace evtpool::model

#endif
