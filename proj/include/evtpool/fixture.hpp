#ifndef EVTPOOL_FIXTURE_HPP
#define EVTPOOL_FIXTURE_HPP

#include "evtpool/model.hpp"

#include <string>
#include <vector>

namespace evtpool::fixture {

// A synthetic pooled model with known parameters, used by `simulate` and by
// the recovery/coverage studies. Thresholds come from a plausible table of
// 200th-best times per event; alpha1 is calibrated so the mean expected
// exceedance count per event hits target_mean_count.
struct TruthSpec {
    double xi = -0.147;
    double theta1 = 1.0;
    double theta3 = 0.94;
    double theta4 = 0.46;
    double alpha3 = -5.6;
    double alpha4 = -1.1;
    double epsilon = 0.15;
    // sigma_L(u_L) = c0 + c1 u_L; slope 1 keeps expected counts roughly
    // equal across events, so one alpha1 calibration serves all of them.
    double sigma_c0 = -4.49;
    double sigma_c1 = 1.00;
    double target_mean_count = 200.0;
    std::size_t n_events = 34; // evenly spaced subset of the registry when < 34
    int start_year = 2001;
    int end_year = 2019; // observation window [start, end)
    std::size_t spline_q = 10;
    int spline_degree = 4;
};

model::FittedModel make_truth_model(const TruthSpec& spec,
                                    const AnalysisConfig& config = AnalysisConfig{});

// Writes datasets back to the ingestion CSV schema.
void write_csv(const std::vector<EventDataset>& datasets, const std::string& path);

} // namespace evtpool::fixture

#endif
