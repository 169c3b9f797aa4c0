#include "evtpool/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace evtpool::quad {

namespace {

struct Gl32Table {
    std::array<double, 32> nodes{};
    std::array<double, 32> weights{};

    Gl32Table() {
        // Newton iteration on P_32; roots come in +/- pairs.
        constexpr int n = 32;
        for (int i = 0; i < n / 2; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15)
                    break;
            }
            const double w = 2.0 / ((1.0 - x * x) * pp * pp);
            nodes[static_cast<std::size_t>(i)] = -x;
            nodes[static_cast<std::size_t>(n - 1 - i)] = x;
            weights[static_cast<std::size_t>(i)] = w;
            weights[static_cast<std::size_t>(n - 1 - i)] = w;
        }
    }
};

const Gl32Table& gl32() {
    static const Gl32Table table;
    return table;
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK constants).
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
    double integral;
    double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double result_gauss = kWg[3] * fc;
    double result_kronrod = kWgk[7] * fc;
    for (int j = 0; j < 7; ++j) {
        const double abscissa = half * kXgk[static_cast<std::size_t>(j)];
        const double f1 = f(center - abscissa);
        const double f2 = f(center + abscissa);
        result_kronrod += kWgk[static_cast<std::size_t>(j)] * (f1 + f2);
        if (j % 2 == 1)
            result_gauss += kWg[static_cast<std::size_t>(j / 2)] * (f1 + f2);
    }
    GkResult r;
    r.integral = result_kronrod * half;
    r.error = std::abs((result_kronrod - result_gauss) * half);
    return r;
}

double adaptive_recurse(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, double rel_tol, int depth) {
    const GkResult r = gk15(f, a, b);
    if (r.error <= abs_tol || r.error <= rel_tol * std::abs(r.integral) || depth <= 0)
        return r.integral;
    const double mid = 0.5 * (a + b);
    return adaptive_recurse(f, a, mid, abs_tol * 0.5, rel_tol, depth - 1) +
           adaptive_recurse(f, mid, b, abs_tol * 0.5, rel_tol, depth - 1);
}

} // namespace

std::span<const double> gl32_nodes() { return gl32().nodes; }
std::span<const double> gl32_weights() { return gl32().weights; }

double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    const auto nodes = gl32_nodes();
    const auto weights = gl32_weights();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        sum += weights[i] * f(center + half * nodes[i]);
    return sum * half;
}

double composite_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                std::span<const double> breakpoints) {
    if (!(a <= b))
        throw std::invalid_argument("composite_gauss_legendre: a must be <= b");
    if (a == b)
        return 0.0;
    double total = 0.0;
    double lo = a;
    for (double bp : breakpoints) {
        if (bp <= lo)
            continue;
        if (bp >= b)
            break;
        total += gauss_legendre(f, lo, bp);
        lo = bp;
    }
    total += gauss_legendre(f, lo, b);
    return total;
}

double adaptive_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                              double abs_tol, double rel_tol, int max_depth) {
    if (a == b)
        return 0.0;
    return adaptive_recurse(f, a, b, abs_tol, rel_tol, max_depth);
}

} // namespace evtpool::quad
