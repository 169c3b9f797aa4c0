#ifndef EVTPOOL_DATA_HPP
#define EVTPOOL_DATA_HPP

#include "evtpool/calendar.hpp"
#include "evtpool/registry.hpp"

#include <string>
#include <vector>

namespace evtpool {

// One observed swim. time_s is the raw positive clock time in seconds,
// recorded to two decimals.
struct SwimRecord {
    std::string swimmer_id;
    std::string event_id;
    double time_s = 0.0;
    Date date;
};

// A threshold exceedance on the negated scale (x = -time_s, so faster
// swims are larger).
struct EventPoint {
    double x = 0.0;     // negated seconds
    double year = 0.0;  // decimal year of the swim
    double t_std = 0.0; // standardized time covariate, set by apply_time_scaler
    std::string swimmer_id;
    Date date;
};

struct EventDataset {
    std::string event_id;
    double threshold_u = 0.0;     // u_e = u'_e - s/2 (censor-adjusted)
    double raw_threshold_u = 0.0; // u'_e, the n-th largest negated time
    double u_log = 0.0;           // log(-u_e), the pooling covariate
    double censor_s = 0.01;
    std::vector<EventPoint> points; // all points satisfy x >= u'_e
};

// Linear standardization of decimal-year dates, pooled over all events,
// plus the calendar-year grid spanning the observation window.
struct TimeScaler {
    double mean = 0.0;
    double sd = 1.0;
    std::vector<double> year_boundaries; // consecutive integer years, size >= 2

    double standardize(double year) const { return (year - mean) / sd; }
    double unstandardize(double t_std) const { return mean + sd * t_std; }

    double window_start_year() const { return year_boundaries.front(); }
    double window_end_year() const { return year_boundaries.back(); }
    double window_start_std() const { return standardize(window_start_year()); }
    double window_end_std() const { return standardize(window_end_year()); }
    std::size_t n_years() const { return year_boundaries.size() - 1; }
};

// Parses the input CSV (header `swimmer_id,event_id,time_s,date`), drops
// exact duplicates, and keeps the fastest time per (swimmer, event); ties
// on time keep the earlier date. Unknown events and malformed rows throw.
std::vector<SwimRecord> ingest_csv(const std::string& path, const EventRegistry& registry);

// Negates times and keeps exactly the n_exceed fastest swims for the event.
// Ties at the raw threshold are resolved by earlier date, then swimmer_id.
EventDataset build_event_dataset(const std::vector<SwimRecord>& records,
                                 const std::string& event_id, std::size_t n_exceed = 200,
                                 double s = 0.01);

// Zero-mean/unit-variance (population sd) scaler over all exceedance dates
// pooled across events. Throws on a degenerate (constant) date set.
TimeScaler fit_time_scaler(const std::vector<EventDataset>& datasets);

void apply_time_scaler(std::vector<EventDataset>& datasets, const TimeScaler& scaler);

SuitEpochs::Flags suit_indicator(const Date& date, const SuitEpochs& epochs);

// Full ingest pipeline: one dataset per registry event (sorted by id),
// standardized with the pooled scaler.
struct LoadedData {
    std::vector<EventDataset> datasets;
    TimeScaler scaler;
};
LoadedData load_datasets(const std::string& csv_path, const AnalysisConfig& config,
                         std::size_t n_exceed = 200, double s = 0.01);

} // namespace evtpool

#endif
