#ifndef EVTPOOL_MODEL_IO_HPP
#define EVTPOOL_MODEL_IO_HPP

#include "evtpool/model.hpp"

#include <string>
#include <vector>

namespace evtpool::io {

inline constexpr int kModelSchemaVersion = 1;

// Versioned JSON document with everything downstream commands need:
// parameters, spline knots, thresholds, scaler, epochs, diagnostics scalars.
void save_model(const model::FittedModel& fitted, const std::string& path);
model::FittedModel load_model(const std::string& path); // VersionMismatchError on version skew

// Documented column sets of every CSV the CLI emits.
struct CsvSchema {
    std::string file_pattern; // e.g. "ranks.csv", "rate_<event>.csv"
    std::vector<std::string> columns;
};
const std::vector<CsvSchema>& csv_schemas();

struct SchemaCheckResult {
    std::string file;
    bool ok = false;
    std::string message;
};
// Validates every known CSV found under dir (header + numeric fields).
std::vector<SchemaCheckResult> check_output_dir(const std::string& dir);

} // namespace evtpool::io

#endif
