#include "evtpool/data.hpp"

#include "evtpool/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

namespace evtpool {

namespace {

// time_s must be plain seconds with exactly two decimals, e.g. "51.90".
double parse_time_field(const std::string& field, std::size_t line) {
    const auto dot = field.find('.');
    if (dot == std::string::npos || dot == 0 || field.size() != dot + 3)
        throw ParseError("time_s must have exactly 2 decimals, got '" + field + "'", line);
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (i == dot)
            continue;
        if (!std::isdigit(static_cast<unsigned char>(field[i])))
            throw ParseError("time_s must be numeric, got '" + field + "'", line);
    }
    long long whole = 0, centi = 0;
    std::from_chars(field.data(), field.data() + dot, whole);
    std::from_chars(field.data() + dot + 1, field.data() + field.size(), centi);
    return static_cast<double>(whole * 100 + centi) / 100.0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

} // namespace

std::vector<SwimRecord> ingest_csv(const std::string& path, const EventRegistry& registry) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open input file: " + path);

    std::string line;
    if (!std::getline(in, line))
        throw ParseError("empty file, expected header", 1);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "swimmer_id,event_id,time_s,date")
        throw ParseError("header must be 'swimmer_id,event_id,time_s,date'", 1);

    // Best record per (swimmer, event); ordered map keeps output deterministic.
    std::map<std::pair<std::string, std::string>, SwimRecord> best;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4)
            throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no);

        SwimRecord rec;
        rec.swimmer_id = fields[0];
        rec.event_id = fields[1];
        if (rec.swimmer_id.empty())
            throw ParseError("empty swimmer_id", line_no);
        if (!registry.contains(rec.event_id))
            throw ValidationError("unknown event_id '" + rec.event_id + "' at line " +
                                  std::to_string(line_no));
        rec.time_s = parse_time_field(fields[2], line_no);
        if (!(rec.time_s > 0.0))
            throw ValidationError("non-positive time_s at line " + std::to_string(line_no));
        try {
            rec.date = parse_date(fields[3]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), line_no);
        }

        auto key = std::make_pair(rec.swimmer_id, rec.event_id);
        auto it = best.find(key);
        if (it == best.end()) {
            best.emplace(std::move(key), std::move(rec));
        } else if (rec.time_s < it->second.time_s ||
                   (rec.time_s == it->second.time_s && rec.date < it->second.date)) {
            it->second = std::move(rec);
        }
    }

    std::vector<SwimRecord> out;
    out.reserve(best.size());
    for (auto& [key, rec] : best)
        out.push_back(std::move(rec));
    return out;
}

EventDataset build_event_dataset(const std::vector<SwimRecord>& records,
                                 const std::string& event_id, std::size_t n_exceed, double s) {
    if (n_exceed == 0)
        throw ValidationError("n_exceed must be positive");

    std::vector<const SwimRecord*> candidates;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (r.event_id != event_id)
            continue;
        if (!seen.insert(r.swimmer_id).second)
            throw ValidationError("duplicate swimmer '" + r.swimmer_id + "' in event " + event_id);
        candidates.push_back(&r);
    }
    if (candidates.size() < n_exceed)
        throw InsufficientDataError("event " + event_id + " has " +
                                    std::to_string(candidates.size()) + " records, needs " +
                                    std::to_string(n_exceed));

    // Fastest first; ties at the threshold boundary resolve by earlier
    // date then swimmer_id, so the retained set is a total order.
    std::sort(candidates.begin(), candidates.end(), [](const SwimRecord* a, const SwimRecord* b) {
        if (a->time_s != b->time_s)
            return a->time_s < b->time_s;
        if (a->date != b->date)
            return a->date < b->date;
        return a->swimmer_id < b->swimmer_id;
    });

    EventDataset ds;
    ds.event_id = event_id;
    ds.censor_s = s;
    ds.raw_threshold_u = -candidates[n_exceed - 1]->time_s;
    ds.threshold_u = ds.raw_threshold_u - s / 2.0;
    ds.u_log = std::log(-ds.threshold_u);
    ds.points.reserve(n_exceed);
    for (std::size_t i = 0; i < n_exceed; ++i) {
        const SwimRecord& r = *candidates[i];
        EventPoint p;
        p.x = -r.time_s;
        p.year = decimal_year(r.date);
        p.swimmer_id = r.swimmer_id;
        p.date = r.date;
        ds.points.push_back(std::move(p));
    }
    return ds;
}

TimeScaler fit_time_scaler(const std::vector<EventDataset>& datasets) {
    std::vector<double> years;
    for (const auto& ds : datasets)
        for (const auto& p : ds.points)
            years.push_back(p.year);
    if (years.empty())
        throw InsufficientDataError("no observations to fit the time scaler");

    double mean = 0.0;
    for (double y : years)
        mean += y;
    mean /= static_cast<double>(years.size());
    double var = 0.0;
    for (double y : years)
        var += (y - mean) * (y - mean);
    var /= static_cast<double>(years.size()); // population variance
    if (!(var > 0.0))
        throw ValidationError("degenerate time covariate: all dates identical");

    TimeScaler scaler;
    scaler.mean = mean;
    scaler.sd = std::sqrt(var);
    const auto [lo, hi] = std::minmax_element(years.begin(), years.end());
    const int first = static_cast<int>(std::floor(*lo));
    const int last = static_cast<int>(std::floor(*hi)) + 1;
    for (int y = first; y <= last; ++y)
        scaler.year_boundaries.push_back(static_cast<double>(y));
    return scaler;
}

void apply_time_scaler(std::vector<EventDataset>& datasets, const TimeScaler& scaler) {
    for (auto& ds : datasets)
        for (auto& p : ds.points)
            p.t_std = scaler.standardize(p.year);
}

SuitEpochs::Flags suit_indicator(const Date& date, const SuitEpochs& epochs) {
    return epochs.classify(date);
}

LoadedData load_datasets(const std::string& csv_path, const AnalysisConfig& config,
                         std::size_t n_exceed, double s) {
    const auto records = ingest_csv(csv_path, config.registry);
    // Fit whichever registry events the file actually covers; every present
    // event must clear the exceedance count.
    std::unordered_set<std::string> present;
    for (const auto& r : records)
        present.insert(r.event_id);
    LoadedData out;
    out.datasets.reserve(present.size());
    for (const auto& e : config.registry.events())
        if (present.count(e.id))
            out.datasets.push_back(build_event_dataset(records, e.id, n_exceed, s));
    if (out.datasets.empty())
        throw InsufficientDataError("no events found in " + csv_path);
    std::sort(out.datasets.begin(), out.datasets.end(),
              [](const EventDataset& a, const EventDataset& b) { return a.event_id < b.event_id; });
    out.scaler = fit_time_scaler(out.datasets);
    apply_time_scaler(out.datasets, out.scaler);
    return out;
}

} // namespace evtpool
