#ifndef EVTPOOL_QUADRATURE_HPP
#define EVTPOOL_QUADRATURE_HPP

#include <functional>
#include <span>
#include <vector>

namespace evtpool::quad {

// 32-node Gauss-Legendre rule on [-1, 1], computed once by Newton iteration.
std::span<const double> gl32_nodes();
std::span<const double> gl32_weights();

// Single-panel 32-node rule on [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a, double b);

// Composite rule: panels split at every breakpoint strictly inside (a, b).
// Breakpoints must be sorted ascending.
double composite_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                std::span<const double> breakpoints);

// Globally adaptive 15-point Gauss-Kronrod with interval bisection.
double adaptive_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                              double abs_tol = 1e-8, double rel_tol = 1e-10,
                              int max_depth = 40);

} // namespace evtpool::quad

#endif
