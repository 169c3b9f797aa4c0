#ifndef EVTPOOL_BOOTSTRAP_HPP
#define EVTPOOL_BOOTSTRAP_HPP

#include "evtpool/analytics.hpp"
#include "evtpool/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace evtpool::bootstrap {

using model::FittedModel;

struct Replicate {
    std::uint64_t seed = 0;
    Eigen::VectorXd psi;
    bool feasible = false;
    bool converged = false;
    bool retained() const { return feasible && converged; }
};

struct BootstrapEnsemble {
    std::size_t requested = 0;
    std::size_t retained = 0;
    std::size_t discarded_infeasible = 0;
    std::size_t discarded_nonconverged = 0;
    std::vector<Replicate> replicates;

    std::vector<const Replicate*> retained_view() const;
};

// One parametric simulation of all event datasets from the fitted model:
// Poisson counts from the integrated intensity, occurrence times by inverse
// CDF on a 1000-knot cumulative-rate grid, GPd marks rounded to the censor
// grid. Thresholds are carried over unchanged.
std::vector<EventDataset> simulate_datasets(const FittedModel& fitted, std::uint64_t seed);

struct BootstrapConfig {
    std::size_t B = 250;
    std::uint64_t seed = 1;
    int threads = 1;
    double refit_iteration_factor = 5.0; // per-round cap, times the original fit's iterations
    double min_retained_fraction = 0.5;  // below this the ensemble is degenerate
};

// Simulate-and-refit ensemble, warm-started at the original MLE. A replicate
// is discarded when the refit fails to converge, or when it is infeasible:
// some event's ultimate time is slower than an observed swim in the original
// data, or its expected next record is slower than the current record.
BootstrapEnsemble bootstrap_ensemble(const FittedModel& fitted,
                                     const std::vector<EventDataset>& datasets,
                                     const BootstrapConfig& config);

// Percentile confidence interval of a statistic of the raw parameter vector
// over retained replicates. Requires at least 20 retained.
std::pair<double, double> ci(const std::function<double(const Eigen::VectorXd&)>& statistic,
                             const BootstrapEnsemble& ensemble, double level = 0.95);

// Bootstrap-mixture predictive distribution of the next record swim-time:
// Pr{X* < x} as the ensemble average of the per-replicate exceedance laws
// above the current record. Requires x > record.
double predictive_record_cdf(const FittedModel& fitted, const BootstrapEnsemble& ensemble,
                             const std::string& event_id, double x);

struct SwimRef {
    std::string event_id;
    double x = 0.0; // negated seconds
    Date date;
};

// Fraction of retained replicates ranking swim A above swim B (smaller
// r-value); exact ties count 1/2.
double rank_comparison_prob(const FittedModel& fitted, const BootstrapEnsemble& ensemble,
                            const SwimRef& a, const SwimRef& b);

// JSON-lines persistence (one replicate per line).
void save_ensemble(const BootstrapEnsemble& ensemble, const std::string& path);
BootstrapEnsemble load_ensemble(const std::string& path, std::size_t expected_psi_size);

} // namespace evtpool::bootstrap

#endif
