#include "evtpool/model.hpp"

#include "evtpool/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace evtpool::model {

ModelId parse_model_id(const std::string& name) {
    if (name == "M1a") return ModelId::M1a;
    if (name == "M1b") return ModelId::M1b;
    if (name == "M2") return ModelId::M2;
    if (name == "M3") return ModelId::M3;
    if (name == "M4") return ModelId::M4;
    if (name == "M5") return ModelId::M5;
    if (name == "M6") return ModelId::M6;
    if (name == "M7a") return ModelId::M7a;
    if (name == "M7b") return ModelId::M7b;
    throw ValidationError("unknown model id: '" + name + "'");
}

std::string to_string(ModelId id) {
    switch (id) {
    case ModelId::M1a: return "M1a";
    case ModelId::M1b: return "M1b";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    case ModelId::M5: return "M5";
    case ModelId::M6: return "M6";
    case ModelId::M7a: return "M7a";
    case ModelId::M7b: return "M7b";
    }
    return "?";
}

std::string constraints_label(ModelId id) {
    switch (id) {
    case ModelId::M1a: return "independent fits (single suit)";
    case ModelId::M1b: return "independent fits (two suits)";
    case ModelId::M2: return "M1a with shared shape";
    case ModelId::M3: return "M2 with linear mu_L link";
    case ModelId::M4: return "M3 with linear sigma_L link";
    case ModelId::M5: return "M3 with sigma_L spline";
    case ModelId::M6: return "M5 with linear beta_L link";
    case ModelId::M7a: return "M6 with linear gamma_L link";
    case ModelId::M7b: return "M7a with two-suit effects";
    }
    return "?";
}

ModelStructure structure_of(ModelId id) {
    ModelStructure s;
    switch (id) {
    case ModelId::M1a:
        break;
    case ModelId::M1b:
        s.two_suit = true;
        break;
    case ModelId::M2:
        s.shared_xi = true;
        break;
    case ModelId::M3:
        s.shared_xi = true;
        s.mu_linked = true;
        break;
    case ModelId::M4:
        s.shared_xi = true;
        s.mu_linked = true;
        s.sigma = SigmaMode::Linear;
        break;
    case ModelId::M5:
        s.shared_xi = true;
        s.mu_linked = true;
        s.sigma = SigmaMode::Spline;
        break;
    case ModelId::M6:
        s.shared_xi = true;
        s.mu_linked = true;
        s.sigma = SigmaMode::Spline;
        s.beta_linked = true;
        break;
    case ModelId::M7a:
        s.shared_xi = true;
        s.mu_linked = true;
        s.sigma = SigmaMode::Spline;
        s.beta_linked = true;
        s.gamma_linked = true;
        break;
    case ModelId::M7b:
        s.shared_xi = true;
        s.mu_linked = true;
        s.sigma = SigmaMode::Spline;
        s.beta_linked = true;
        s.gamma_linked = true;
        s.two_suit = true;
        break;
    }
    return s;
}

TransformedParams transform_event_params(const EventParams& p, double u) {
    TransformedParams t;
    t.xi = p.xi;
    if (!(p.mu0 < 0.0))
        throw std::domain_error("transform: mu0 must be negative on the negated scale");
    t.mu_L = std::log(-p.mu0);
    const double st = p.sigma_tilde(u);
    if (!(st > 0.0))
        throw std::domain_error("transform: sigma_tilde must be positive");
    t.sigma_L = std::log(st);
    if (!(p.beta > 0.0))
        throw std::domain_error("transform: beta must be positive for the log link");
    t.beta_L = std::log(p.beta);
    if (p.gamma1 < 0.0 || p.gamma2 < 0.0)
        throw std::domain_error("transform: gamma must be nonnegative for the sqrt link");
    t.gamma_L1 = std::sqrt(p.gamma1);
    t.gamma_L2 = std::sqrt(p.gamma2);
    return t;
}

EventParams untransform_event_params(const TransformedParams& t, double u) {
    EventParams p;
    p.xi = t.xi;
    p.mu0 = -std::exp(t.mu_L);
    p.beta = std::exp(t.beta_L);
    p.gamma1 = t.gamma_L1 * t.gamma_L1;
    p.gamma2 = t.gamma_L2 * t.gamma_L2;
    const double sigma_tilde = std::exp(t.sigma_L);
    p.sigma0 = sigma_tilde - p.xi * (u - p.mu0);
    return p;
}

EventParams event_params_from_pooled(const PooledParams& psi, double u_log, double u,
                                     ModelId model_id, const splines::SplineBasis* basis) {
    const ModelStructure s = structure_of(model_id);
    if (!(s.mu_linked && s.beta_linked && s.gamma_linked))
        throw std::invalid_argument(
            "event_params_from_pooled requires a fully pooled model (M7a/M7b); "
            "intermediate models carry per-event blocks");

    TransformedParams t;
    t.xi = psi.xi;
    t.mu_L = psi.alpha1 + psi.theta1 * u_log;
    t.beta_L = psi.alpha3 + psi.theta3 * u_log;

    if (s.sigma == SigmaMode::Spline) {
        if (basis == nullptr)
            throw std::invalid_argument("event_params_from_pooled: spline basis required");
        if (psi.spline_a.size() != basis->size())
            throw std::invalid_argument("event_params_from_pooled: spline coefficient size");
        t.sigma_L = basis->spline_value(u_log, psi.spline_a);
    } else {
        t.sigma_L = psi.alpha2 + psi.theta2 * u_log;
    }

    const double gamma_l1 = psi.alpha4 + psi.theta4 * u_log;
    if (gamma_l1 < 0.0)
        throw std::domain_error("event_params_from_pooled: gamma_L < 0 at u_log");
    t.gamma_L1 = gamma_l1;
    if (s.two_suit) {
        const double gamma_l2 = psi.alpha4 + psi.epsilon + psi.theta4 * u_log;
        if (gamma_l2 < 0.0)
            throw std::domain_error("event_params_from_pooled: gamma_L2 < 0 at u_log");
        t.gamma_L2 = gamma_l2;
    } else {
        t.gamma_L2 = t.gamma_L1; // single suit: one effect spans both epochs
    }
    return untransform_event_params(t, u);
}

evt::GevParams time_varying_params(const EventParams& p, double t_std, bool in_epoch1,
                                   bool in_epoch2) {
    const double suit = (in_epoch1 ? p.gamma1 : 0.0) + (in_epoch2 ? p.gamma2 : 0.0);
    evt::GevParams g;
    g.xi = p.xi;
    g.mu = p.mu0 + p.beta * t_std + suit;
    g.sigma = p.sigma0 + p.xi * p.beta * t_std + p.xi * suit;
    return g;
}

ParameterLayout ParameterLayout::create(const ModelStructure& s, std::size_t n_events,
                                        std::size_t q) {
    ParameterLayout l;
    l.structure = s;
    l.n_events = n_events;
    l.q = s.sigma == SigmaMode::Spline ? q : 0;

    std::size_t off = 0;
    if (s.shared_xi) {
        l.xi_offset = off;
        off += 1;
    }
    if (s.mu_linked) {
        l.mu_offset = off;
        off += 2;
    }
    if (s.sigma == SigmaMode::Linear) {
        l.sigma_offset = off;
        off += 2;
    } else if (s.sigma == SigmaMode::Spline) {
        l.sigma_offset = off;
        off += l.q;
    }
    if (s.beta_linked) {
        l.beta_offset = off;
        off += 2;
    }
    if (s.gamma_linked) {
        l.gamma_offset = off;
        off += s.two_suit ? 3 : 2;
    }
    l.event_offset = off;

    std::size_t per_event = 0;
    if (!s.mu_linked)
        per_event += 1; // mu0
    if (s.sigma == SigmaMode::PerEvent)
        per_event += 1; // log sigma_tilde
    if (!s.shared_xi)
        per_event += 1; // xi
    if (!s.beta_linked)
        per_event += 1; // beta
    if (!s.gamma_linked)
        per_event += s.two_suit ? 2 : 1; // gamma(s)
    l.event_size = per_event;
    return l;
}

PooledParams ParameterLayout::pooled_part(const Eigen::VectorXd& psi) const {
    PooledParams p;
    if (xi_offset != npos)
        p.xi = psi[static_cast<Eigen::Index>(xi_offset)];
    if (mu_offset != npos) {
        p.alpha1 = psi[static_cast<Eigen::Index>(mu_offset)];
        p.theta1 = psi[static_cast<Eigen::Index>(mu_offset + 1)];
    }
    if (sigma_offset != npos) {
        if (structure.sigma == SigmaMode::Linear) {
            p.alpha2 = psi[static_cast<Eigen::Index>(sigma_offset)];
            p.theta2 = psi[static_cast<Eigen::Index>(sigma_offset + 1)];
        } else {
            p.spline_a.resize(q);
            for (std::size_t k = 0; k < q; ++k)
                p.spline_a[k] = psi[static_cast<Eigen::Index>(sigma_offset + k)];
        }
    }
    if (beta_offset != npos) {
        p.alpha3 = psi[static_cast<Eigen::Index>(beta_offset)];
        p.theta3 = psi[static_cast<Eigen::Index>(beta_offset + 1)];
    }
    if (gamma_offset != npos) {
        p.alpha4 = psi[static_cast<Eigen::Index>(gamma_offset)];
        p.theta4 = psi[static_cast<Eigen::Index>(gamma_offset + 1)];
        if (structure.two_suit)
            p.epsilon = psi[static_cast<Eigen::Index>(gamma_offset + 2)];
    }
    return p;
}

void ParameterLayout::set_pooled_part(Eigen::VectorXd& psi, const PooledParams& p) const {
    if (xi_offset != npos)
        psi[static_cast<Eigen::Index>(xi_offset)] = p.xi;
    if (mu_offset != npos) {
        psi[static_cast<Eigen::Index>(mu_offset)] = p.alpha1;
        psi[static_cast<Eigen::Index>(mu_offset + 1)] = p.theta1;
    }
    if (sigma_offset != npos) {
        if (structure.sigma == SigmaMode::Linear) {
            psi[static_cast<Eigen::Index>(sigma_offset)] = p.alpha2;
            psi[static_cast<Eigen::Index>(sigma_offset + 1)] = p.theta2;
        } else {
            if (p.spline_a.size() != q)
                throw std::invalid_argument("set_pooled_part: spline coefficient size");
            for (std::size_t k = 0; k < q; ++k)
                psi[static_cast<Eigen::Index>(sigma_offset + k)] = p.spline_a[k];
        }
    }
    if (beta_offset != npos) {
        psi[static_cast<Eigen::Index>(beta_offset)] = p.alpha3;
        psi[static_cast<Eigen::Index>(beta_offset + 1)] = p.theta3;
    }
    if (gamma_offset != npos) {
        psi[static_cast<Eigen::Index>(gamma_offset)] = p.alpha4;
        psi[static_cast<Eigen::Index>(gamma_offset + 1)] = p.theta4;
        if (structure.two_suit)
            psi[static_cast<Eigen::Index>(gamma_offset + 2)] = p.epsilon;
    }
}

std::size_t free_parameter_count(ModelId id, std::size_t n_events, std::size_t spline_q) {
    return ParameterLayout::create(structure_of(id), n_events, spline_q).size();
}

} // namespace evtpool::model
