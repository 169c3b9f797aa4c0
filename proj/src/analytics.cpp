#include "evtpool/analytics.hpp"

#include "evtpool/errors.hpp"
#include "evtpool/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evtpool::analytics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rate with suit indicators forced off: the counterfactual "no suit" world.
evt::GevParams suit_free_params(const model::EventParams& p, double t_std) {
    return model::time_varying_params(p, t_std, false, false);
}

// Cumulative thinned record rate for forecasts. C(tau) is the expected
// number of record-breaking swims within tau years of the origin; the
// waiting-time law is F(tau) = 1 - exp(-C(tau)).
class RecordRate {
public:
    RecordRate(const FittedModel& fitted, const EventFit& ef, double record_x)
        : params_(ef.params), epochs_(fitted.epochs), scaler_(fitted.scaler),
          u_(ef.threshold_u) {
        const double sigma_tilde = ef.sigma_tilde;
        survival_ = evt::tail_power((record_x - u_) / sigma_tilde, params_.xi);
        origin_year_ = fitted.scaler.window_end_year();
    }

    double survival() const { return survival_; }

    // Instantaneous record rate per year at tau years after the origin.
    double density(double tau) const {
        const double year = origin_year_ + tau;
        const double t_std = scaler_.standardize(year);
        const auto flags = epochs_.classify_year(year);
        const evt::GevParams g =
            model::time_varying_params(params_, t_std, flags.in_epoch1, flags.in_epoch2);
        if (!(g.sigma > 0.0))
            return 0.0;
        return survival_ * evt::tail_power((u_ - g.mu) / g.sigma, g.xi) / scaler_.sd;
    }

    // Expected record count in [0, tau] (years), composite quadrature with
    // yearly panels.
    double cumulative(double tau) const {
        if (tau <= 0.0)
            return 0.0;
        double total = 0.0;
        double lo = 0.0;
        while (lo < tau) {
            const double hi = std::min(lo + 1.0, tau);
            total += quad::gauss_legendre([this](double v) { return density(v); }, lo, hi);
            lo = hi;
        }
        return total;
    }

private:
    model::EventParams params_;
    SuitEpochs epochs_;
    TimeScaler scaler_;
    double u_;
    double survival_ = 0.0;
    double origin_year_ = 0.0;
};

// Horizon where the record is essentially certain to have fallen
// (1 - F < 1e-10), or +inf when the cumulative rate saturates first.
double truncation_horizon(const RecordRate& rate) {
    constexpr double kLogTail = 23.03; // -log(1e-10)
    double t = 1.0;
    double last = rate.cumulative(t);
    while (last < kLogTail) {
        if (t > 1048576.0)
            return kInf;
        const double next = rate.cumulative(2.0 * t);
        if (next - last < 1e-14 && next < kLogTail)
            return kInf; // rate has died out; F plateaus below 1
        t *= 2.0;
        last = next;
    }
    return t;
}

} // namespace

RecordState record_state(const EventDataset& dataset) {
    RecordState r;
    r.event_id = dataset.event_id;
    const EventPoint* best = nullptr;
    for (const auto& p : dataset.points)
        if (best == nullptr || p.x > best->x || (p.x == best->x && p.date < best->date))
            best = &p;
    if (best == nullptr)
        throw InsufficientDataError("record_state: empty dataset for " + dataset.event_id);
    r.record_x = best->x;
    r.record_date = best->date;
    r.holder = best->swimmer_id;
    return r;
}

RecordState record_state(const EventFit& ef) {
    RecordState r;
    r.event_id = ef.event_id;
    r.record_x = ef.record_x;
    r.record_date = ef.record_date;
    r.holder = ef.record_holder;
    return r;
}

double yearly_rate_for_year(const FittedModel& fitted, const EventFit& ef, double year_start) {
    const double lo = year_start, hi = year_start + 1.0;
    const SuitEpochs& eps = fitted.epochs;
    bool straddles = false;
    for (double e : {eps.epoch1_start_year(), eps.epoch1_end_year(), eps.epoch2_start_year(),
                     eps.epoch2_end_year()})
        straddles = straddles || (e > lo && e < hi);

    const evt::ParamPath path = fitted.param_path(ef);
    const double t_lo = fitted.scaler.standardize(lo);
    const double t_hi = fitted.scaler.standardize(hi);
    if (straddles)
        return evt::integrated_intensity(t_lo, t_hi, ef.threshold_u, path);
    const evt::GevParams g = path.at(0.5 * (t_lo + t_hi));
    if (!(g.sigma > 0.0))
        throw NumericalError("yearly_rate_for_year: sigma(t) <= 0");
    return evt::tail_power((ef.threshold_u - g.mu) / g.sigma, g.xi) * (t_hi - t_lo);
}

double r_value_at_year(const FittedModel& fitted, const EventFit& ef, double x, double year) {
    const double adjusted = x + ef.censor_s / 2.0;
    if (!(adjusted > ef.threshold_u))
        throw std::domain_error("r_value: swim below the rankable threshold for " + ef.event_id);
    const double survival =
        evt::gpd_survival(adjusted, {ef.threshold_u, ef.sigma_tilde, ef.params.xi});
    return survival * yearly_rate_for_year(fitted, ef, std::floor(year));
}

double r_value(const FittedModel& fitted, const std::string& event_id, double x,
               const Date& date) {
    return r_value_at_year(fitted, fitted.event(event_id), x, decimal_year(date));
}

std::vector<RankedSwim> rank_table(const FittedModel& fitted,
                                   const std::vector<EventDataset>& datasets, std::size_t top_n,
                                   const std::optional<std::string>& nation) {
    std::vector<RankedSwim> rows;
    for (const auto& ds : datasets) {
        const EventFit& ef = fitted.event(ds.event_id);
        for (const auto& p : ds.points) {
            if (nation && p.swimmer_id.rfind(*nation + "_", 0) != 0)
                continue;
            RankedSwim r;
            r.swimmer_id = p.swimmer_id;
            r.event_id = ds.event_id;
            r.time_s = -p.x;
            r.date = p.date;
            r.r_value = r_value_at_year(fitted, ef, p.x, p.year);
            rows.push_back(std::move(r));
        }
    }
    std::sort(rows.begin(), rows.end(), [](const RankedSwim& a, const RankedSwim& b) {
        if (a.r_value != b.r_value)
            return a.r_value < b.r_value;
        if (a.event_id != b.event_id)
            return a.event_id < b.event_id;
        return a.swimmer_id < b.swimmer_id;
    });
    if (top_n > 0 && rows.size() > top_n)
        rows.resize(top_n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].rank = i + 1;
    return rows;
}

double ultimate_time(const FittedModel& fitted, const std::string& event_id) {
    const EventFit& ef = fitted.event(event_id);
    const double endpoint =
        evt::upper_endpoint({ef.threshold_u, ef.sigma_tilde, ef.params.xi});
    return -endpoint;
}

double expected_next_record(const FittedModel& fitted, const std::string& event_id,
                            const RecordState& record) {
    const EventFit& ef = fitted.event(event_id);
    const model::EventParams& p = ef.params;
    if (!(p.xi < 1.0))
        throw std::domain_error("expected_next_record: requires xi < 1");
    const double sigma_r = p.sigma0 + p.xi * (record.record_x - p.mu0);
    if (!(sigma_r > 0.0))
        throw std::domain_error("expected_next_record: record beyond the fitted endpoint for " +
                                event_id);
    const double expected_x = record.record_x + sigma_r / (1.0 - p.xi);
    return -expected_x;
}

double record_waiting_cdf(const FittedModel& fitted, const std::string& event_id,
                          const RecordState& record, double horizon_years) {
    if (horizon_years < 0.0)
        throw std::domain_error("record_waiting_cdf: horizon before the forecast origin");
    const RecordRate rate(fitted, fitted.event(event_id), record.record_x);
    return -std::expm1(-rate.cumulative(horizon_years));
}

double record_waiting_density(const FittedModel& fitted, const std::string& event_id,
                              const RecordState& record, double horizon_years) {
    if (horizon_years < 0.0)
        throw std::domain_error("record_waiting_density: horizon before the forecast origin");
    const RecordRate rate(fitted, fitted.event(event_id), record.record_x);
    return rate.density(horizon_years) * std::exp(-rate.cumulative(horizon_years));
}

double expected_waiting_years(const FittedModel& fitted, const std::string& event_id,
                              const RecordState& record) {
    const RecordRate rate(fitted, fitted.event(event_id), record.record_x);
    const double horizon = truncation_horizon(rate);
    if (!std::isfinite(horizon))
        return kInf;
    // E[T] = int t f(t) dt over [0, horizon], in yearly panels; the
    // cumulative is re-integrated incrementally so each panel is cheap.
    double expected = 0.0;
    double cum_lo = 0.0;
    double lo = 0.0;
    while (lo < horizon) {
        const double hi = std::min(lo + 1.0, horizon);
        const double base = cum_lo;
        expected += quad::adaptive_gauss_kronrod(
            [&](double t) {
                const double inc = quad::gauss_legendre(
                    [&](double v) { return rate.density(v); }, lo, t);
                return t * rate.density(t) * std::exp(-(base + inc));
            },
            lo, hi, 1e-8, 1e-10, 12);
        cum_lo = base + quad::gauss_legendre([&](double v) { return rate.density(v); }, lo, hi);
        lo = hi;
    }
    return expected;
}

NextRecordProbabilities prob_next_record_in_event(const FittedModel& fitted,
                                                  const std::vector<RecordState>& records) {
    if (records.empty())
        throw std::invalid_argument("prob_next_record_in_event: no records");
    std::vector<RecordRate> rates;
    rates.reserve(records.size());
    double horizon = 0.0;
    for (const auto& rec : records) {
        rates.emplace_back(fitted, fitted.event(rec.event_id), rec.record_x);
        if (!(rates.back().survival() > 0.0))
            throw std::domain_error("prob_next_record_in_event: record at the endpoint for " +
                                    rec.event_id);
    }
    {
        // Truncate where the probability that no record has fallen anywhere
        // drops below 1e-10; the pooled rate dominates each single one, so
        // reuse the per-event horizon machinery on the fastest event.
        double total = 0.0;
        double t = 1.0;
        while (t <= 1048576.0) {
            total = 0.0;
            for (const auto& r : rates)
                total += r.cumulative(t);
            if (total > 23.03)
                break;
            t *= 2.0;
        }
        if (total <= 23.03)
            throw NumericalError("prob_next_record_in_event: pooled record rate vanishes");
        horizon = t;
    }

    // March year panels once, accumulating every event's cumulative rate in
    // lockstep, and integrate each event's first-record density.
    const std::size_t n = records.size();
    std::vector<double> probs(n, 0.0);
    std::vector<double> cum(n, 0.0);
    double lo = 0.0;
    while (lo < horizon) {
        const double hi = std::min(lo + 1.0, horizon);
        const auto nodes = quad::gl32_nodes();
        const auto weights = quad::gl32_weights();
        const double center = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        // Total cumulative at panel nodes via incremental quadrature of the
        // pooled density.
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double t = center + half * nodes[i];
            double total_cum = 0.0;
            for (std::size_t e = 0; e < n; ++e)
                total_cum +=
                    cum[e] + quad::gauss_legendre(
                                 [&](double v) { return rates[e].density(v); }, lo, t);
            const double survival_all = std::exp(-total_cum);
            for (std::size_t e = 0; e < n; ++e)
                probs[e] += weights[i] * half * survival_all * rates[e].density(t);
        }
        for (std::size_t e = 0; e < n; ++e)
            cum[e] += quad::gauss_legendre([&](double v) { return rates[e].density(v); }, lo, hi);
        lo = hi;
    }

    double sum = 0.0;
    for (double p : probs)
        sum += p;
    if (std::abs(sum - 1.0) > 2e-3)
        throw NumericalError("prob_next_record_in_event: raw probabilities sum to " +
                             std::to_string(sum) + ", outside 1 +/- 2e-3");

    NextRecordProbabilities out;
    for (std::size_t e = 0; e < n; ++e) {
        out.raw[records[e].event_id] = probs[e];
        out.normalized[records[e].event_id] = probs[e] / sum;
    }
    return out;
}

double adjust_suit_time(const FittedModel& fitted, const std::string& event_id, double x,
                        const Date& date, SuitDirection direction) {
    const EventFit& ef = fitted.event(event_id);
    const model::EventParams& p = ef.params;
    if (!(x > ef.threshold_u))
        throw std::domain_error("adjust_suit_time: swim below threshold");

    const double year = decimal_year(date);
    const double t_std = fitted.scaler.standardize(year);
    const auto flags = fitted.epochs.classify_year(year);

    // Equal-rate correction: solve R{X > x} = R_C{X > z}. On the intensity
    // scale this is an affine map between the two parameter regimes.
    evt::GevParams from, to;
    if (direction == SuitDirection::Remove) {
        if (!flags.in_epoch1 && !flags.in_epoch2)
            throw std::domain_error("adjust_suit_time: date is outside both suit epochs");
        from = model::time_varying_params(p, t_std, flags.in_epoch1, flags.in_epoch2);
        to = suit_free_params(p, t_std);
    } else {
        from = suit_free_params(p, t_std);
        to = model::time_varying_params(p, t_std, direction == SuitDirection::AddEpoch1,
                                        direction == SuitDirection::AddEpoch2);
    }
    if (!(from.sigma > 0.0) || !(to.sigma > 0.0))
        throw NumericalError("adjust_suit_time: nonpositive sigma(t)");

    const double z = to.mu + to.sigma * (x - from.mu) / from.sigma;
    if (p.xi < 0.0) {
        const double endpoint = evt::upper_endpoint({ef.threshold_u, ef.sigma_tilde, p.xi});
        if (z > endpoint + 1e-9)
            throw NumericalError("adjust_suit_time: adjusted time beyond the ultimate time");
    }
    return -z;
}

std::vector<WouldBeRecordRow> would_be_records(const FittedModel& fitted,
                                               const std::vector<EventDataset>& datasets) {
    std::vector<WouldBeRecordRow> rows;
    for (const auto& ds : datasets) {
        const RecordState rec = record_state(ds);
        const auto rec_flags = fitted.epochs.classify(rec.record_date);
        if (!rec_flags.in_epoch1 && !rec_flags.in_epoch2)
            continue; // record not suit-assisted

        WouldBeRecordRow row;
        row.event_id = ds.event_id;
        row.wr_holder = rec.holder;
        row.wr_date = rec.record_date;
        row.wr_seconds = -rec.record_x;
        row.adjusted_seconds = adjust_suit_time(fitted, ds.event_id, rec.record_x,
                                                rec.record_date, SuitDirection::Remove);

        const EventPoint* best_clean = nullptr;
        for (const auto& p : ds.points) {
            const auto f = fitted.epochs.classify_year(p.year);
            if (f.in_epoch1 || f.in_epoch2)
                continue;
            if (best_clean == nullptr || p.x > best_clean->x ||
                (p.x == best_clean->x && p.date < best_clean->date))
                best_clean = &p;
        }
        if (best_clean != nullptr) {
            row.has_non_suit = true;
            row.nswr_holder = best_clean->swimmer_id;
            row.nswr_date = best_clean->date;
            row.nswr_seconds = -best_clean->x;
            row.suit_record_stands = row.adjusted_seconds < row.nswr_seconds;
        } else {
            row.suit_record_stands = true;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace evtpool::analytics
