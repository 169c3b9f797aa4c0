#ifndef EVTPOOL_OPTIM_HPP
#define EVTPOOL_OPTIM_HPP

#include <Eigen/Dense>

#include <functional>

namespace evtpool::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Options {
    double grad_tol = 1e-5;  // scaled gradient max-norm
    double f_tol = 1e-11;    // relative objective decrease
    int max_iterations = 600;
    double fd_step = 1.2e-6;   // balances truncation on link-amplified curvature vs roundoff
    int threads = 1;          // gradient components evaluated in parallel
};

struct Result {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

// Central-difference gradient. Sides that land on an infinite objective
// (infeasible region) fall back to a one-sided difference.
Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double f_at_x,
                                 double step_scale, int threads = 1);

// Dense BFGS with backtracking Armijo line search. The objective may return
// +inf to mark infeasible points; the line search treats that as an
// insufficient decrease. The start point must be feasible.
Result minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Options& opts);

// Runs fn(i) for i in [0, n) across up to `threads` workers. Used where
// results are written to per-index slots so the order of execution cannot
// affect the output.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace evtpool::optim

#endif
