#include "evtpool/model.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evtpool::model {

namespace {

// Keeps the optimizer inside the regular regime of the point-process
// likelihood; the MLE of interest sits far from these walls.
constexpr double kXiBound = 0.95;

} // namespace

namespace detail {

DecodedEvent decode_event_quiet(const Eigen::VectorXd& psi, const ParameterLayout& l,
                                std::size_t event_index, double u, double u_log,
                                std::span<const double> basis_row) {
    using std::exp;
    DecodedEvent out;
    EventParams& p = out.params;
    std::size_t cursor = l.event_offset + event_index * l.event_size;

    if (l.structure.mu_linked) {
        const double alpha1 = psi[static_cast<Eigen::Index>(l.mu_offset)];
        const double theta1 = psi[static_cast<Eigen::Index>(l.mu_offset + 1)];
        p.mu0 = -exp(alpha1 + theta1 * u_log);
    } else {
        p.mu0 = psi[static_cast<Eigen::Index>(cursor++)];
    }

    if (l.structure.sigma == SigmaMode::PerEvent) {
        out.sigma_tilde = exp(psi[static_cast<Eigen::Index>(cursor++)]);
    } else if (l.structure.sigma == SigmaMode::Linear) {
        const double alpha2 = psi[static_cast<Eigen::Index>(l.sigma_offset)];
        const double theta2 = psi[static_cast<Eigen::Index>(l.sigma_offset + 1)];
        out.sigma_tilde = exp(alpha2 + theta2 * u_log);
    } else {
        if (basis_row.size() != l.q)
            return out;
        double sigma_l = 0.0;
        for (std::size_t k = 0; k < l.q; ++k)
            sigma_l += basis_row[k] * psi[static_cast<Eigen::Index>(l.sigma_offset + k)];
        out.sigma_tilde = exp(sigma_l);
    }

    p.xi = l.structure.shared_xi ? psi[static_cast<Eigen::Index>(l.xi_offset)]
                                 : psi[static_cast<Eigen::Index>(cursor++)];

    if (l.structure.beta_linked) {
        const double alpha3 = psi[static_cast<Eigen::Index>(l.beta_offset)];
        const double theta3 = psi[static_cast<Eigen::Index>(l.beta_offset + 1)];
        p.beta = exp(alpha3 + theta3 * u_log);
    } else {
        p.beta = psi[static_cast<Eigen::Index>(cursor++)];
    }

    if (l.structure.gamma_linked) {
        const double alpha4 = psi[static_cast<Eigen::Index>(l.gamma_offset)];
        const double theta4 = psi[static_cast<Eigen::Index>(l.gamma_offset + 1)];
        const double g1 = alpha4 + theta4 * u_log;
        if (g1 < 0.0)
            return out; // sqrt link requires gamma_L >= 0
        p.gamma1 = g1 * g1;
        if (l.structure.two_suit) {
            const double g2 = g1 + psi[static_cast<Eigen::Index>(l.gamma_offset + 2)];
            if (g2 < 0.0)
                return out;
            p.gamma2 = g2 * g2;
        } else {
            p.gamma2 = p.gamma1; // one effect across both epochs
        }
    } else {
        p.gamma1 = psi[static_cast<Eigen::Index>(cursor++)];
        p.gamma2 = l.structure.two_suit ? psi[static_cast<Eigen::Index>(cursor++)] : p.gamma1;
    }

    if (!std::isfinite(out.sigma_tilde) || !(out.sigma_tilde > 0.0) || !std::isfinite(p.mu0))
        return out;
    p.sigma0 = out.sigma_tilde - p.xi * (u - p.mu0);
    out.feasible = true;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// FitContext
// ---------------------------------------------------------------------------

FitContext::FitContext(const std::vector<EventDataset>& datasets, const TimeScaler& scaler,
                       const SuitEpochs& epochs, const FitConfig& config,
                       const splines::SplineBasis* fixed_basis)
    : scaler_(scaler), epochs_(epochs) {
    if (datasets.empty())
        throw ValidationError("FitContext: no datasets");
    window_lo_ = scaler.window_start_std();
    window_hi_ = scaler.window_end_std();

    // Panel breakpoints: calendar years plus suit-epoch edges, in
    // standardized units, restricted to the open window.
    std::vector<double> break_years(scaler.year_boundaries.begin() + 1,
                                    scaler.year_boundaries.end() - 1);
    for (double y : {epochs.epoch1_start_year(), epochs.epoch1_end_year(),
                     epochs.epoch2_start_year(), epochs.epoch2_end_year()})
        break_years.push_back(y);
    std::sort(break_years.begin(), break_years.end());
    break_years.erase(std::unique(break_years.begin(), break_years.end()), break_years.end());
    std::vector<double> breakpoints;
    for (double y : break_years) {
        const double t = scaler.standardize(y);
        if (t > window_lo_ && t < window_hi_)
            breakpoints.push_back(t);
    }

    // Quadrature nodes shared by every event.
    std::vector<double> node_t, node_w;
    std::vector<std::uint8_t> node_s1, node_s2;
    const auto nodes = quad::gl32_nodes();
    const auto weights = quad::gl32_weights();
    double lo = window_lo_;
    std::vector<double> panel_edges = breakpoints;
    panel_edges.push_back(window_hi_);
    for (double hi : panel_edges) {
        const double center = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double t = center + half * nodes[i];
            node_t.push_back(t);
            node_w.push_back(weights[i] * half);
            const auto flags = epochs.classify_year(scaler.unstandardize(t));
            node_s1.push_back(flags.in_epoch1 ? 1 : 0);
            node_s2.push_back(flags.in_epoch2 ? 1 : 0);
        }
        lo = hi;
    }

    std::vector<const EventDataset*> sorted;
    sorted.reserve(datasets.size());
    for (const auto& ds : datasets)
        sorted.push_back(&ds);
    std::sort(sorted.begin(), sorted.end(), [](const EventDataset* a, const EventDataset* b) {
        return a->event_id < b->event_id;
    });

    events_.reserve(sorted.size());
    for (const EventDataset* ds : sorted) {
        EventCache ec;
        ec.event_id = ds->event_id;
        ec.u = ds->threshold_u;
        ec.u_raw = ds->raw_threshold_u;
        ec.u_log = ds->u_log;
        ec.s = ds->censor_s;
        ec.node_t = node_t;
        ec.node_w = node_w;
        ec.node_s1 = node_s1;
        ec.node_s2 = node_s2;
        ec.n_total = ds->points.size();
        ec.record_x = -std::numeric_limits<double>::infinity();
        for (const auto& p : ds->points) {
            ec.x.push_back(p.x);
            ec.t.push_back(scaler.standardize(p.year));
            const auto flags = epochs.classify_year(p.year);
            ec.suit1.push_back(flags.in_epoch1 ? 1 : 0);
            ec.suit2.push_back(flags.in_epoch2 ? 1 : 0);
            ec.record_x = std::max(ec.record_x, p.x);
        }
        events_.push_back(std::move(ec));
    }

    if (structure_of(config.model_id).uses_spline()) {
        if (fixed_basis != nullptr) {
            basis_ = *fixed_basis;
        } else {
            double ul_min = events_.front().u_log, ul_max = events_.front().u_log;
            for (const auto& ec : events_) {
                ul_min = std::min(ul_min, ec.u_log);
                ul_max = std::max(ul_max, ec.u_log);
            }
            const double pad = config.spline_pad_fraction * std::max(ul_max - ul_min, 1e-6);
            basis_ = splines::SplineBasis::clamped_uniform(ul_min - pad, ul_max + pad,
                                                           config.spline_q, config.spline_degree);
        }
        penalty_ = splines::build_penalty_matrix(basis_->size());
        basis_rows_.resize(static_cast<Eigen::Index>(events_.size()),
                           static_cast<Eigen::Index>(basis_->size()));
        for (std::size_t e = 0; e < events_.size(); ++e) {
            const Eigen::VectorXd row = basis_->eval(events_[e].u_log);
            basis_rows_.row(static_cast<Eigen::Index>(e)) = row;
            events_[e].basis_row.assign(row.data(), row.data() + row.size());
        }
    }

    layout_ = ParameterLayout::create(structure_of(config.model_id), events_.size(),
                                      basis_ ? basis_->size() : 0);
}

FitContext FitContext::restricted_to(const std::vector<std::vector<std::size_t>>& keep_indices,
                                     bool complement) const {
    if (keep_indices.size() != events_.size())
        throw std::invalid_argument("restricted_to: per-event index list size mismatch");
    FitContext out;
    out.scaler_ = scaler_;
    out.epochs_ = epochs_;
    out.basis_ = basis_;
    out.penalty_ = penalty_;
    out.basis_rows_ = basis_rows_;
    out.window_lo_ = window_lo_;
    out.window_hi_ = window_hi_;
    out.layout_ = layout_;
    out.events_.reserve(events_.size());
    for (std::size_t e = 0; e < events_.size(); ++e) {
        const EventCache& src = events_[e];
        std::vector<std::uint8_t> take(src.x.size(), complement ? 1 : 0);
        for (std::size_t idx : keep_indices[e]) {
            if (idx >= src.x.size())
                throw std::out_of_range("restricted_to: point index out of range");
            take[idx] = complement ? 0 : 1;
        }
        EventCache ec;
        ec.event_id = src.event_id;
        ec.u = src.u;
        ec.u_raw = src.u_raw;
        ec.u_log = src.u_log;
        ec.s = src.s;
        ec.node_t = src.node_t;
        ec.node_w = src.node_w;
        ec.node_s1 = src.node_s1;
        ec.node_s2 = src.node_s2;
        ec.basis_row = src.basis_row;
        ec.n_total = src.n_total;
        ec.record_x = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < src.x.size(); ++i) {
            if (!take[i])
                continue;
            ec.x.push_back(src.x[i]);
            ec.t.push_back(src.t[i]);
            ec.suit1.push_back(src.suit1[i]);
            ec.suit2.push_back(src.suit2[i]);
            ec.record_x = std::max(ec.record_x, src.x[i]);
        }
        // Thinned-process likelihood: the window integral scales with the
        // retained fraction.
        ec.lambda_scale = src.n_total == 0 ? 1.0
                                           : static_cast<double>(ec.x.size()) /
                                                 static_cast<double>(src.n_total);
        out.events_.push_back(std::move(ec));
    }
    return out;
}

EventParams FitContext::decode_event(const Eigen::VectorXd& psi, std::size_t event_index) const {
    if (event_index >= events_.size())
        throw std::out_of_range("decode_event: event index");
    const auto& ec = events_[event_index];
    const detail::DecodedEvent d =
        detail::decode_event_quiet(psi, layout_, event_index, ec.u, ec.u_log, ec.basis_row);
    if (!d.feasible)
        throw std::domain_error("decode_event: infeasible parameters for event " + ec.event_id);
    return d.params;
}

Eigen::VectorXd FitContext::encode(const PooledParams& pooled,
                                   const std::vector<EventParams>& per_event) const {
    const ParameterLayout& l = layout_;
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.size()));
    l.set_pooled_part(psi, pooled);
    if (l.event_size > 0 && per_event.size() != events_.size())
        throw std::invalid_argument("encode: per-event parameter list size mismatch");
    for (std::size_t e = 0; e < events_.size() && l.event_size > 0; ++e) {
        const EventParams& p = per_event[e];
        std::size_t cursor = l.event_offset + e * l.event_size;
        if (!l.structure.mu_linked)
            psi[static_cast<Eigen::Index>(cursor++)] = p.mu0;
        if (l.structure.sigma == SigmaMode::PerEvent) {
            const double st = p.sigma_tilde(events_[e].u);
            if (!(st > 0.0))
                throw std::domain_error("encode: sigma_tilde must be positive");
            psi[static_cast<Eigen::Index>(cursor++)] = std::log(st);
        }
        if (!l.structure.shared_xi)
            psi[static_cast<Eigen::Index>(cursor++)] = p.xi;
        if (!l.structure.beta_linked)
            psi[static_cast<Eigen::Index>(cursor++)] = p.beta;
        if (!l.structure.gamma_linked) {
            psi[static_cast<Eigen::Index>(cursor++)] = p.gamma1;
            if (l.structure.two_suit)
                psi[static_cast<Eigen::Index>(cursor++)] = p.gamma2;
        }
    }
    return psi;
}

// ---------------------------------------------------------------------------
// Pooled likelihood
// ---------------------------------------------------------------------------

LoglikBreakdown pooled_penalized_loglik(const Eigen::VectorXd& psi, const FitContext& ctx,
                                        double phi_r, double phi_m) {
    LoglikBreakdown out;
    out.loglik = evt::kInfeasible;
    out.penalized_loglik = evt::kInfeasible;

    const ParameterLayout& l = ctx.layout();
    if (psi.size() != static_cast<Eigen::Index>(l.size()))
        throw std::invalid_argument("pooled_penalized_loglik: psi size mismatch");

    double loglik = 0.0;
    for (std::size_t e = 0; e < ctx.events().size(); ++e) {
        const auto& ec = ctx.events()[e];
        const detail::DecodedEvent d =
            detail::decode_event_quiet(psi, l, e, ec.u, ec.u_log, ec.basis_row);
        if (!d.feasible)
            return out;
        const EventParams& p = d.params;
        if (!(p.xi > -kXiBound && p.xi < kXiBound))
            return out;

        double lambda = 0.0;
        for (std::size_t i = 0; i < ec.node_t.size(); ++i) {
            const double suit = (ec.node_s1[i] ? p.gamma1 : 0.0) + (ec.node_s2[i] ? p.gamma2 : 0.0);
            const double mu = p.mu0 + p.beta * ec.node_t[i] + suit;
            const double sigma = d.sigma_tilde + p.xi * (mu - ec.u);
            if (!(sigma > 0.0))
                return out;
            lambda += ec.node_w[i] * evt::tail_power((ec.u - mu) / sigma, p.xi);
        }
        if (!std::isfinite(lambda))
            return out;
        loglik -= ec.lambda_scale * lambda;

        const double half_s = ec.s / 2.0;
        for (std::size_t i = 0; i < ec.x.size(); ++i) {
            const double suit = (ec.suit1[i] ? p.gamma1 : 0.0) + (ec.suit2[i] ? p.gamma2 : 0.0);
            const double mu = p.mu0 + p.beta * ec.t[i] + suit;
            const double sigma = d.sigma_tilde + p.xi * (mu - ec.u);
            if (!(sigma > 0.0))
                return out;
            const double lo = evt::tail_power((ec.x[i] - half_s - mu) / sigma, p.xi);
            const double hi = evt::tail_power((ec.x[i] + half_s - mu) / sigma, p.xi);
            if (!std::isfinite(lo))
                return out;
            const double term = lo - hi;
            if (!(term > 0.0))
                return out;
            loglik += std::log(term);
        }
    }

    out.loglik = loglik;
    out.feasible = true;
    if (ctx.basis() != nullptr && l.structure.uses_spline()) {
        std::vector<double> a(l.q);
        for (std::size_t k = 0; k < l.q; ++k)
            a[k] = psi[static_cast<Eigen::Index>(l.sigma_offset + k)];
        out.p_r = splines::roughness_penalty(a, ctx.penalty());
        out.p_m = splines::monotonicity_penalty(a, *ctx.basis());
    }
    out.penalized_loglik = out.loglik - phi_r * out.p_r - phi_m * out.p_m;
    return out;
}

FittedModel with_parameters(const FittedModel& base, const Eigen::VectorXd& psi) {
    const ParameterLayout layout = base.layout();
    if (psi.size() != static_cast<Eigen::Index>(layout.size()))
        throw std::invalid_argument("with_parameters: psi size mismatch");
    FittedModel out = base;
    out.psi = psi;
    out.pooled = layout.pooled_part(psi);
    out.loglik = std::numeric_limits<double>::quiet_NaN();
    out.penalized_loglik = std::numeric_limits<double>::quiet_NaN();
    out.ric = std::numeric_limits<double>::quiet_NaN();
    out.effective_dof = std::numeric_limits<double>::quiet_NaN();
    out.ric_available = false;
    for (std::size_t e = 0; e < out.events.size(); ++e) {
        EventFit& ef = out.events[e];
        std::vector<double> row;
        if (base.basis) {
            const Eigen::VectorXd r = base.basis->eval(ef.u_log);
            row.assign(r.data(), r.data() + r.size());
        }
        const detail::DecodedEvent d =
            detail::decode_event_quiet(psi, layout, e, ef.threshold_u, ef.u_log, row);
        if (!d.feasible)
            throw NumericalError("with_parameters: infeasible parameters for " + ef.event_id);
        ef.params = d.params;
        ef.sigma_tilde = d.sigma_tilde;
    }
    return out;
}

// ---------------------------------------------------------------------------
// FittedModel helpers
// ---------------------------------------------------------------------------

const EventFit& FittedModel::event(const std::string& event_id) const {
    const auto it = std::lower_bound(
        events.begin(), events.end(), event_id,
        [](const EventFit& ef, const std::string& id) { return ef.event_id < id; });
    if (it == events.end() || it->event_id != event_id)
        throw std::out_of_range("no such event in fitted model: " + event_id);
    return *it;
}

ParameterLayout FittedModel::layout() const {
    return ParameterLayout::create(structure, events.size(), basis ? basis->size() : 0);
}

evt::ParamPath FittedModel::param_path(const EventFit& ef) const {
    evt::ParamPath path;
    path.window_lo = scaler.window_start_std();
    path.window_hi = scaler.window_end_std();

    std::vector<double> break_years(scaler.year_boundaries.begin() + 1,
                                    scaler.year_boundaries.end() - 1);
    for (double y : {epochs.epoch1_start_year(), epochs.epoch1_end_year(),
                     epochs.epoch2_start_year(), epochs.epoch2_end_year()})
        break_years.push_back(y);
    std::sort(break_years.begin(), break_years.end());
    break_years.erase(std::unique(break_years.begin(), break_years.end()), break_years.end());
    for (double y : break_years) {
        const double t = scaler.standardize(y);
        if (t > path.window_lo && t < path.window_hi)
            path.breakpoints.push_back(t);
    }

    const EventParams params = ef.params;
    const SuitEpochs eps = epochs;
    const TimeScaler sc = scaler;
    path.at = [params, eps, sc](double t_std) {
        const auto flags = eps.classify_year(sc.unstandardize(t_std));
        return time_varying_params(params, t_std, flags.in_epoch1, flags.in_epoch2);
    };
    return path;
}

} // namespace evtpool::model
