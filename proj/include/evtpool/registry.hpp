#ifndef EVTPOOL_REGISTRY_HPP
#define EVTPOOL_REGISTRY_HPP

#include "evtpool/calendar.hpp"

#include <string>
#include <unordered_set>
#include <vector>

namespace evtpool {

// The two periods in which full-body suits were legal, as half-open
// date intervals. Defaults cover calendar years 2008 and 2009; the ban
// took effect at the start of 2010.
struct SuitEpochs {
    Date epoch1_start{2008, 1, 1};
    Date epoch1_end{2009, 1, 1};
    Date epoch2_start{2009, 1, 1};
    Date epoch2_end{2010, 1, 1};

    struct Flags {
        bool in_epoch1 = false;
        bool in_epoch2 = false;
    };

    Flags classify(const Date& d) const;
    Flags classify_year(double year) const; // decimal-year variant

    double epoch1_start_year() const { return decimal_year(epoch1_start); }
    double epoch1_end_year() const { return decimal_year(epoch1_end); }
    double epoch2_start_year() const { return decimal_year(epoch2_start); }
    double epoch2_end_year() const { return decimal_year(epoch2_end); }

    void validate() const; // epoch1 precedes epoch2, intervals disjoint
};

struct EventInfo {
    std::string id;     // e.g. "100_free_M"
    std::string stroke; // free | back | breast | fly | medley
    int distance_m = 0;
    char gender = 'M'; // 'M' or 'W'
};

// Canonical registry of individual long-course events.
class EventRegistry {
public:
    static EventRegistry standard(); // the 34 LC events

    const std::vector<EventInfo>& events() const { return events_; }
    bool contains(const std::string& event_id) const { return ids_.count(event_id) > 0; }
    std::size_t size() const { return events_.size(); }

    explicit EventRegistry(std::vector<EventInfo> events);

private:
    std::vector<EventInfo> events_;
    std::unordered_set<std::string> ids_;
};

struct AnalysisConfig {
    EventRegistry registry = EventRegistry::standard();
    SuitEpochs epochs;
};

// JSON config with the event registry and suit epochs; missing file fields
// fall back to the defaults above.
AnalysisConfig load_analysis_config(const std::string& path);
void write_default_config(const std::string& path);

} // namespace evtpool

#endif
