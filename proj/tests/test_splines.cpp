#include "evtpool/rng.hpp"
#include "evtpool/splines.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <numeric>

using namespace evtpool;
using namespace evtpool::splines;

namespace {

// Greville abscissae: B-splines reproduce affine functions through them.
std::vector<double> greville(const SplineBasis& basis) {
    const auto& t = basis.knots();
    const std::size_t d = static_cast<std::size_t>(basis.degree());
    std::vector<double> g(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        double sum = 0.0;
        for (std::size_t j = 1; j <= d; ++j)
            sum += t[k + j];
        g[k] = sum / static_cast<double>(d);
    }
    return g;
}

} // namespace

TEST_CASE("partition of unity and local support") {
    Rng rng(7);
    for (std::size_t q : {5u, 8u, 10u}) {
        const auto basis = SplineBasis::clamped_uniform(-1.3, 2.9, q, 4);
        for (int i = 0; i < 200; ++i) {
            const double x = rng.uniform(basis.domain_lo(), basis.domain_hi());
            const Eigen::VectorXd values = basis.eval(x);
            CHECK(values.sum() == doctest::Approx(1.0).epsilon(1e-12));
            int nonzero = 0;
            for (Eigen::Index k = 0; k < values.size(); ++k) {
                CHECK(values[k] >= 0.0);
                nonzero += values[k] != 0.0 ? 1 : 0;
            }
            CHECK(nonzero <= basis.degree() + 1);
        }
        CHECK(basis.eval(basis.domain_hi()).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto basis = SplineBasis::clamped_uniform(0.0, 1.0, 8, 4);
    CHECK_THROWS_AS(basis.eval(-0.01), std::domain_error);
    CHECK_THROWS_AS(basis.eval(1.01), std::domain_error);
}

TEST_CASE("degree-1 basis is the hat function") {
    const auto basis = SplineBasis::clamped_uniform(0.0, 4.0, 5, 1);
    // interior knots 1,2,3; at x=2 only the middle hat is active
    const Eigen::VectorXd values = basis.eval(2.0);
    for (Eigen::Index k = 0; k < values.size(); ++k)
        CHECK(values[k] == doctest::Approx(k == 2 ? 1.0 : 0.0).epsilon(1e-14));
}

TEST_CASE("basis matches the truncated-power divided-difference oracle") {
    // Simple (non-repeated) uniform knots so divided differences are exact.
    std::vector<double> knots(15);
    std::iota(knots.begin(), knots.end(), 0.0);
    const auto basis = SplineBasis::from_knots(knots, 4);
    REQUIRE(basis.size() == 10);
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(basis.domain_lo(), basis.domain_hi() - 1e-9);
        const Eigen::VectorXd values = basis.eval(x);
        for (std::size_t k = 0; k < basis.size(); ++k) {
            const double oracle = testutil::truncated_power_bspline(knots, k, 4, x);
            CHECK(values[static_cast<Eigen::Index>(k)] ==
                  doctest::Approx(oracle).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("spline evaluation: constants, affine reproduction, derivative") {
    const auto basis = SplineBasis::clamped_uniform(-2.0, 3.0, 10, 4);

    SUBCASE("all-ones coefficients give the constant 1") {
        std::vector<double> ones(basis.size(), 1.0);
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            const double x = rng.uniform(-2.0, 3.0);
            CHECK(basis.spline_value(x, ones) == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    SUBCASE("linear-in-k coefficients on uniform simple knots give an affine spline") {
        std::vector<double> knots(15);
        std::iota(knots.begin(), knots.end(), 0.0);
        const auto uniform = SplineBasis::from_knots(knots, 4);
        std::vector<double> coeffs(uniform.size());
        for (std::size_t k = 0; k < coeffs.size(); ++k)
            coeffs[k] = 0.7 + 0.35 * static_cast<double>(k);
        // least-squares affine fit over 100 interior points; residual ~ 0
        std::vector<double> xs, ys;
        for (int i = 0; i < 100; ++i) {
            const double x = uniform.domain_lo() +
                             (uniform.domain_hi() - uniform.domain_lo()) * i / 99.0;
            xs.push_back(x);
            ys.push_back(uniform.spline_value(x, coeffs));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= 100.0;
        my /= 100.0;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        const double slope = sxy / sxx;
        for (std::size_t i = 0; i < xs.size(); ++i)
            CHECK(std::abs(ys[i] - (my + slope * (xs[i] - mx))) < 1e-10);
    }
    SUBCASE("derivative matches central finite differences") {
        Rng rng(5);
        std::vector<double> coeffs(basis.size());
        for (auto& c : coeffs)
            c = rng.uniform(-2.0, 2.0);
        for (int i = 0; i < 200; ++i) {
            const double x = rng.uniform(-1.99, 2.99);
            const double h = 1e-6;
            const double fd =
                (basis.spline_value(x + h, coeffs) - basis.spline_value(x - h, coeffs)) /
                (2.0 * h);
            CHECK(basis.spline_derivative(x, coeffs) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("penalty matrix: printed pattern and quadratic-form identity") {
    SUBCASE("q = 3") {
        const Eigen::MatrixXd p = build_penalty_matrix(3);
        Eigen::MatrixXd expected(3, 3);
        expected << 1, -2, 1, -2, 4, -2, 1, -2, 1;
        CHECK((p - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
    SUBCASE("q = 9 corner rows match the second-order difference pattern") {
        const Eigen::MatrixXd p = build_penalty_matrix(9);
        const std::vector<std::vector<double>> head = {
            {1, -2, 1, 0, 0, 0, 0, 0, 0},
            {-2, 5, -4, 1, 0, 0, 0, 0, 0},
            {1, -4, 6, -4, 1, 0, 0, 0, 0},
        };
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 9; ++c) {
                CHECK(p(r, c) == doctest::Approx(head[static_cast<std::size_t>(r)]
                                                     [static_cast<std::size_t>(c)]));
                // symmetric mirror at the bottom-right corner
                CHECK(p(8 - r, 8 - c) == doctest::Approx(head[static_cast<std::size_t>(r)]
                                                             [static_cast<std::size_t>(c)]));
            }
    }
    SUBCASE("a'Pa equals the sum of squared second differences") {
        Rng rng(9);
        const Eigen::MatrixXd p = build_penalty_matrix(10);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> a(10);
            for (auto& v : a)
                v = rng.uniform(-3.0, 3.0);
            double direct = 0.0;
            for (std::size_t k = 0; k + 2 < a.size(); ++k) {
                const double d2 = a[k + 2] - 2.0 * a[k + 1] + a[k];
                direct += d2 * d2;
            }
            CHECK(roughness_penalty(a, p) == doctest::Approx(direct).epsilon(1e-12));
        }
    }
    SUBCASE("dimension errors") {
        CHECK_THROWS_AS(build_penalty_matrix(2), std::invalid_argument);
        std::vector<double> a(4, 1.0);
        CHECK_THROWS_AS(roughness_penalty(a, build_penalty_matrix(5)), std::invalid_argument);
    }
}

TEST_CASE("roughness penalty null space") {
    const Eigen::MatrixXd p = build_penalty_matrix(10);
    std::vector<double> constant(10, 3.7);
    CHECK(roughness_penalty(constant, p) < 1e-12);
    std::vector<double> affine(10);
    for (std::size_t k = 0; k < 10; ++k)
        affine[k] = -1.2 + 0.8 * static_cast<double>(k);
    CHECK(roughness_penalty(affine, p) < 1e-12);
    std::vector<double> unit(10, 0.0);
    unit[4] = 1.0;
    CHECK(roughness_penalty(unit, p) == doctest::Approx(p(4, 4)));
}

TEST_CASE("monotonicity penalty: zero for monotone, exact for affine decrease") {
    const auto basis = SplineBasis::clamped_uniform(0.0, 5.0, 10, 4);
    const auto g = greville(basis);

    SUBCASE("nondecreasing coefficients give zero") {
        std::vector<double> inc(basis.size());
        for (std::size_t k = 0; k < inc.size(); ++k)
            inc[k] = 0.2 * static_cast<double>(k * k);
        CHECK(monotonicity_penalty(inc, basis) == 0.0);
    }
    SUBCASE("Y(x) = -x has penalty equal to the domain length") {
        std::vector<double> dec(basis.size());
        for (std::size_t k = 0; k < dec.size(); ++k)
            dec[k] = -g[k];
        CHECK(monotonicity_penalty(dec, basis) == doctest::Approx(5.0).epsilon(1e-10));
    }
    SUBCASE("random coefficients match a dense-grid total-decrease oracle") {
        Rng rng(21);
        for (int rep = 0; rep < 25; ++rep) {
            std::vector<double> a(basis.size());
            for (auto& v : a)
                v = rng.uniform(-1.5, 1.5);
            const double p_m = monotonicity_penalty(a, basis);
            constexpr std::size_t grid_n = 100000;
            double decrease = 0.0;
            double prev = basis.spline_value(0.0, a);
            for (std::size_t i = 1; i <= grid_n; ++i) {
                const double x = 5.0 * static_cast<double>(i) / grid_n;
                const double y = basis.spline_value(x, a);
                if (y < prev)
                    decrease += prev - y;
                prev = y;
            }
            CHECK(p_m == doctest::Approx(decrease).epsilon(1e-6).scale(1.0));
        }
    }
    SUBCASE("penalty is zero iff the derivative is nonnegative on the domain") {
        Rng rng(33);
        for (int rep = 0; rep < 40; ++rep) {
            std::vector<double> a(basis.size());
            for (auto& v : a)
                v = rng.uniform(-1.0, 1.0);
            const double p_m = monotonicity_penalty(a, basis);
            double min_deriv = 1e300;
            for (int i = 0; i <= 2000; ++i) {
                const double x = 5.0 * i / 2000.0;
                min_deriv = std::min(min_deriv, basis.spline_derivative(x, a));
            }
            if (p_m == 0.0)
                CHECK(min_deriv >= -1e-9);
            else
                CHECK(min_deriv < 0.0);
        }
    }
}
