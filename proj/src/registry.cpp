#include "evtpool/registry.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace evtpool {

SuitEpochs::Flags SuitEpochs::classify(const Date& d) const {
    Flags f;
    f.in_epoch1 = !(d < epoch1_start) && d < epoch1_end;
    f.in_epoch2 = !(d < epoch2_start) && d < epoch2_end;
    return f;
}

SuitEpochs::Flags SuitEpochs::classify_year(double year) const {
    Flags f;
    f.in_epoch1 = year >= epoch1_start_year() && year < epoch1_end_year();
    f.in_epoch2 = year >= epoch2_start_year() && year < epoch2_end_year();
    return f;
}

void SuitEpochs::validate() const {
    if (!(epoch1_start < epoch1_end) || !(epoch2_start < epoch2_end))
        throw std::invalid_argument("suit epochs must be nonempty intervals");
    if (epoch1_end > epoch2_start)
        throw std::invalid_argument("suit epoch 1 must precede epoch 2 and not overlap");
}

EventRegistry::EventRegistry(std::vector<EventInfo> events) : events_(std::move(events)) {
    for (const auto& e : events_) {
        if (!ids_.insert(e.id).second)
            throw std::invalid_argument("duplicate event id in registry: " + e.id);
    }
}

EventRegistry EventRegistry::standard() {
    struct StrokeSpec {
        const char* stroke;
        std::vector<int> distances;
    };
    static const std::vector<StrokeSpec> strokes = {
        {"free", {50, 100, 200, 400, 800, 1500}},
        {"back", {50, 100, 200}},
        {"breast", {50, 100, 200}},
        {"fly", {50, 100, 200}},
        {"medley", {200, 400}},
    };
    std::vector<EventInfo> events;
    for (char gender : {'M', 'W'}) {
        for (const auto& s : strokes) {
            for (int dist : s.distances) {
                EventInfo e;
                e.stroke = s.stroke;
                e.distance_m = dist;
                e.gender = gender;
                e.id = std::to_string(dist) + "_" + s.stroke + "_" + gender;
                events.push_back(std::move(e));
            }
        }
    }
    return EventRegistry(std::move(events));
}

AnalysisConfig load_analysis_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;

    AnalysisConfig cfg;
    if (j.contains("events")) {
        std::vector<EventInfo> events;
        for (const auto& je : j.at("events")) {
            EventInfo e;
            e.id = je.at("id").get<std::string>();
            e.stroke = je.at("stroke").get<std::string>();
            e.distance_m = je.at("distance_m").get<int>();
            e.gender = je.at("gender").get<std::string>().at(0);
            events.push_back(std::move(e));
        }
        cfg.registry = EventRegistry(std::move(events));
    }
    if (j.contains("suit_epochs")) {
        const auto& js = j.at("suit_epochs");
        cfg.epochs.epoch1_start = parse_date(js.at("epoch1_start").get<std::string>());
        cfg.epochs.epoch1_end = parse_date(js.at("epoch1_end").get<std::string>());
        cfg.epochs.epoch2_start = parse_date(js.at("epoch2_start").get<std::string>());
        cfg.epochs.epoch2_end = parse_date(js.at("epoch2_end").get<std::string>());
    }
    cfg.epochs.validate();
    return cfg;
}

void write_default_config(const std::string& path) {
    AnalysisConfig cfg;
    nlohmann::ordered_json j;
    j["suit_epochs"] = {
        {"epoch1_start", format_date(cfg.epochs.epoch1_start)},
        {"epoch1_end", format_date(cfg.epochs.epoch1_end)},
        {"epoch2_start", format_date(cfg.epochs.epoch2_start)},
        {"epoch2_end", format_date(cfg.epochs.epoch2_end)},
    };
    j["events"] = nlohmann::ordered_json::array();
    for (const auto& e : cfg.registry.events()) {
        j["events"].push_back({{"id", e.id},
                               {"stroke", e.stroke},
                               {"distance_m", e.distance_m},
                               {"gender", std::string(1, e.gender)}});
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write config file: " + path);
    out << j.dump(2) << "\n";
}

} // namespace evtpool
