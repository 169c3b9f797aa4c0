#include "evtpool/optim.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

namespace evtpool::optim {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, threads);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n)
                    return;
                fn(i);
            }
        });
    }
    for (auto& t : pool)
        t.join();
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double f_at_x,
                                 double step_scale, int threads) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd grad(n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
        const Eigen::Index i = static_cast<Eigen::Index>(idx);
        const double h = step_scale * std::max(std::abs(x[i]), 1.0);
        Eigen::VectorXd xp = x;
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        if (std::isfinite(fp) && std::isfinite(fm))
            grad[i] = (fp - fm) / (2.0 * h);
        else if (std::isfinite(fp))
            grad[i] = (fp - f_at_x) / h;
        else if (std::isfinite(fm))
            grad[i] = (f_at_x - fm) / h;
        else
            grad[i] = 0.0;
    });
    return grad;
}

namespace {

double scaled_grad_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x, double f) {
    const double denom = std::max(std::abs(f), 1.0);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(g[i]) * std::max(std::abs(x[i]), 1.0) / denom);
    return worst;
}

} // namespace

Result minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Options& opts) {
    const Eigen::Index n = x0.size();
    Result res;
    res.x = x0;
    res.f = f(res.x);
    res.evaluations = 1;
    if (!std::isfinite(res.f))
        throw std::invalid_argument("minimize_bfgs: start point is infeasible");

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    res.gradient = central_gradient(f, res.x, res.f, opts.fd_step, opts.threads);
    res.evaluations += 2 * static_cast<int>(n);
    bool hinv_scaled = false;

    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        if (scaled_grad_norm(res.gradient, res.x, res.f) < opts.grad_tol) {
            res.converged = true;
            return res;
        }

        Eigen::VectorXd dir = -(hinv * res.gradient);
        double slope = dir.dot(res.gradient);
        if (!(slope < 0.0)) { // curvature lost; restart from steepest descent
            hinv.setIdentity();
            hinv_scaled = false;
            dir = -res.gradient;
            slope = dir.dot(res.gradient);
            if (!(slope < 0.0)) {
                res.converged = true; // zero gradient
                return res;
            }
        }

        // Backtracking Armijo search; +inf objective values simply fail the
        // decrease test and shrink the step.
        constexpr double c1 = 1e-4;
        double alpha = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = res.x + alpha * dir;
            f_new = f(x_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= res.f + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) // at the finite-difference noise floor
            return res;

        Eigen::VectorXd g_new = central_gradient(f, x_new, f_new, opts.fd_step, opts.threads);
        res.evaluations += 2 * static_cast<int>(n);

        const Eigen::VectorXd step = x_new - res.x;
        const Eigen::VectorXd dg = g_new - res.gradient;
        const double sy = step.dot(dg);
        if (sy > 1e-12 * step.norm() * dg.norm()) {
            if (!hinv_scaled) {
                // Scale the identity to the problem's curvature before the
                // first update; one badly scaled first step otherwise costs
                // dozens of backtracks per iteration on stiff penalties.
                hinv *= sy / dg.squaredNorm();
                hinv_scaled = true;
            }
            const Eigen::VectorXd hdg = hinv * dg;
            const double dgh = dg.dot(hdg);
            // BFGS inverse update (Sherman-Morrison form).
            hinv += ((sy + dgh) / (sy * sy)) * (step * step.transpose());
            hinv -= (hdg * step.transpose() + step * hdg.transpose()) / sy;
        } // else: skip update, keep previous curvature

        const double f_drop = res.f - f_new;
        res.x = std::move(x_new);
        res.f = f_new;
        res.gradient = std::move(g_new);
        if (f_drop <= opts.f_tol * (std::abs(res.f) + 1.0)) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

} // namespace evtpool::optim
