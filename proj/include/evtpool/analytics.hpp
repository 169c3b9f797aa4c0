#ifndef EVTPOOL_ANALYTICS_HPP
#define EVTPOOL_ANALYTICS_HPP

#include "evtpool/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evtpool::analytics {

using model::EventFit;
using model::FittedModel;

// Current world record of an event: the largest negated time observed.
struct RecordState {
    std::string event_id;
    double record_x = 0.0;
    Date record_date;
    std::string holder;
};

RecordState record_state(const EventDataset& dataset);
RecordState record_state(const EventFit& ef);

// Expected yearly count of exceedances for the calendar year starting at
// year_start (midpoint approximation; exact integral when a suit-epoch edge
// falls inside the year). Works outside the observation window by trend
// extrapolation.
double yearly_rate_for_year(const FittedModel& fitted, const EventFit& ef, double year_start);

// Expected rate per year of swims better than x (censor-adjusted): the
// ranking statistic. Lower is better. Throws if x + s/2 is not above the
// threshold.
double r_value(const FittedModel& fitted, const std::string& event_id, double x,
               const Date& date);
double r_value_at_year(const FittedModel& fitted, const EventFit& ef, double x, double year);

struct RankedSwim {
    std::string swimmer_id;
    std::string event_id;
    double time_s = 0.0;
    Date date;
    double r_value = 0.0;
    std::size_t rank = 0;
    std::optional<std::pair<double, double>> rank_ci;
};

// All exceedances scored and sorted ascending by r-value (ties by event
// then swimmer). top_n = 0 keeps everything. nation, when set, keeps only
// swimmer ids with the "<nation>_" prefix.
std::vector<RankedSwim> rank_table(const FittedModel& fitted,
                                   const std::vector<EventDataset>& datasets, std::size_t top_n,
                                   const std::optional<std::string>& nation = {});

// GPd upper endpoint in positive seconds; requires xi < 0.
double ultimate_time(const FittedModel& fitted, const std::string& event_id);

// Mean of the exceedance law above the current record, in positive seconds.
double expected_next_record(const FittedModel& fitted, const std::string& event_id,
                            const RecordState& record);

// Waiting-time law for the next record of one event. Horizons are in years
// after the forecast origin (the end of the observation window).
double record_waiting_cdf(const FittedModel& fitted, const std::string& event_id,
                          const RecordState& record, double horizon_years);
double record_waiting_density(const FittedModel& fitted, const std::string& event_id,
                              const RecordState& record, double horizon_years);
// May return +inf when the exceedance rate decays fast enough that the
// record has positive probability of standing forever.
double expected_waiting_years(const FittedModel& fitted, const std::string& event_id,
                              const RecordState& record);

// Probability that the next record (over all events) falls in each event.
// `raw` must sum to 1 within quadrature tolerance; `normalized` rescales
// for presentation.
struct NextRecordProbabilities {
    std::map<std::string, double> raw;
    std::map<std::string, double> normalized;
};
NextRecordProbabilities prob_next_record_in_event(const FittedModel& fitted,
                                                  const std::vector<RecordState>& records);

// Swim-time adjustment for suit technology: Remove maps a swim dated inside
// a suit epoch to its suit-free equivalent at the same date; AddEpoch1/2
// dress a suit-free swim with that epoch's suit. Returns positive seconds,
// unrounded (presentation rounds to 0.01).
enum class SuitDirection { Remove, AddEpoch1, AddEpoch2 };
double adjust_suit_time(const FittedModel& fitted, const std::string& event_id, double x,
                        const Date& date, SuitDirection direction);

struct WouldBeRecordRow {
    std::string event_id;
    std::string wr_holder;
    Date wr_date;
    double wr_seconds = 0.0;       // recorded suit-era record
    double adjusted_seconds = 0.0; // suit effect removed (unrounded)
    bool has_non_suit = false;
    std::string nswr_holder;
    Date nswr_date;
    double nswr_seconds = 0.0; // best time swum outside the suit epochs
    bool suit_record_stands = false;
};

// One row per current record that was set during a suit epoch.
std::vector<WouldBeRecordRow> would_be_records(const FittedModel& fitted,
                                               const std::vector<EventDataset>& datasets);

} // namespace evtpool::analytics

#endif
