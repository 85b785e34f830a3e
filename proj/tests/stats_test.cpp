#include <catch2/catch.hpp>

#include <cmath>
#include <limits>

#include "abq/stats.hpp"
#include "oracles.hpp"

using namespace abq;

namespace {
constexpr double kTwoLnTwo = 1.3862943611198906;  // median of chi^2_2
}

TEST_CASE("chi_square_cdf endpoints and closed forms") {
    CHECK(stats::chi_square_cdf(0.0, 1) == 0.0);
    CHECK(stats::chi_square_cdf(0.0, 99) == 0.0);
    // df = 2 is Exponential(mean 2): cdf(x) = 1 - exp(-x/2).
    CHECK(stats::chi_square_cdf(kTwoLnTwo, 2) == Approx(0.5).margin(1e-12));
    CHECK(stats::chi_square_cdf(5.0, 2) == Approx(1.0 - std::exp(-2.5)).margin(1e-12));
    CHECK(stats::chi_square_cdf(1e6, 5) == Approx(1.0).margin(1e-12));
}

TEST_CASE("chi_square_cdf rejects out-of-domain input") {
    CHECK_THROWS_AS(stats::chi_square_cdf(-0.5, 3), DomainError);
    CHECK_THROWS_AS(stats::chi_square_cdf(1.0, 0), DomainError);
    CHECK_THROWS_AS(stats::chi_square_cdf(std::nan(""), 3), DomainError);
}

TEST_CASE("chi_square_cdf agrees with quadrature oracle") {
    for (int df : {1, 2, 5, 50, 99}) {
        const double xmax = 5.0 * df;
        for (int i = 1; i <= 15; ++i) {
            const double x = xmax * static_cast<double>(i) / 15.0;
            const double expected = test_oracles::chi_square_cdf_quadrature(x, df);
            INFO("df=" << df << " x=" << x);
            CHECK(stats::chi_square_cdf(x, df) == Approx(expected).margin(1e-8));
        }
    }
}

TEST_CASE("chi_square_cdf is monotone on a fine grid") {
    for (int df : {1, 2, 5, 50, 99}) {
        double prev = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double x = 5.0 * df * static_cast<double>(i) / 1000.0;
            const double p = stats::chi_square_cdf(x, df);
            CHECK(p >= prev);
            CHECK(p <= 1.0);
            CHECK(std::isfinite(p));
            prev = p;
        }
    }
}

TEST_CASE("chi_square_quantile closed form and oracle targets") {
    CHECK(stats::chi_square_quantile(0.5, 2) == Approx(kTwoLnTwo).epsilon(1e-10));
    // Root of the quadrature oracle near cdf = 0.999 at df = 99.
    const double q999 = stats::chi_square_quantile(0.999, 99);
    CHECK(q999 == Approx(148.230).margin(2e-3));
    CHECK(test_oracles::chi_square_cdf_quadrature(q999, 99) == Approx(0.999).margin(1e-8));
    // Frequently used critical value.
    CHECK(stats::chi_square_quantile(0.95, 3) == Approx(7.814727903).margin(1e-6));
}

TEST_CASE("chi_square_quantile domain errors") {
    CHECK_THROWS_AS(stats::chi_square_quantile(0.0, 3), DomainError);
    CHECK_THROWS_AS(stats::chi_square_quantile(1.0, 3), DomainError);
    CHECK_THROWS_AS(stats::chi_square_quantile(-0.2, 3), DomainError);
    CHECK_THROWS_AS(stats::chi_square_quantile(0.5, 0), DomainError);
}

TEST_CASE("chi-square quantile/cdf round-trip") {
    for (int df : {1, 5, 99}) {
        for (double x : {0.1, 1.0, 10.0, 100.0}) {
            const double p = stats::chi_square_cdf(x, df);
            if (p <= 0.0 || p >= 1.0) continue;  // beyond double resolution
            const double back = stats::chi_square_quantile(p, df);
            INFO("df=" << df << " x=" << x << " p=" << p);
            CHECK(back == Approx(x).epsilon(1e-9));
        }
    }
}

TEST_CASE("normal_cdf values and symmetry") {
    CHECK(stats::normal_cdf(0.0) == 0.5);
    CHECK(stats::normal_cdf(1.959964) == Approx(0.975).margin(1e-8));
    CHECK(stats::normal_cdf(1.959964) ==
          Approx(test_oracles::normal_cdf_quadrature(1.959964)).margin(1e-10));
    // Tail: phi(8)/8 bounds the left tail at -8 from above.
    const double tail = stats::normal_cdf(-8.0);
    const double phi8 = std::exp(-32.0) * 0.39894228040143267794;
    CHECK(tail < 1e-15);
    CHECK(tail <= phi8 / 8.0);
    CHECK(tail >= phi8 * (1.0 / 8.0 - 1.0 / 512.0));
    for (int i = 0; i <= 200; ++i) {
        const double z = -10.0 + 0.1 * i;
        CHECK(stats::normal_cdf(z) + stats::normal_cdf(-z) == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("normal_cdf is monotone on a fine grid") {
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double z = -12.0 + 24.0 * static_cast<double>(i) / 1000.0;
        const double p = stats::normal_cdf(z);
        CHECK(p >= prev);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("kolmogorov_sf endpoints, known point, oracle agreement") {
    CHECK(stats::kolmogorov_sf(0.0) == 1.0);
    CHECK(stats::kolmogorov_sf(10.0) < 1e-12);
    // Classical 5% point of the Kolmogorov distribution.
    CHECK(stats::kolmogorov_sf(1.3581) == Approx(0.05).margin(1e-4));
    for (int i = 1; i <= 100; ++i) {
        const double t = 0.2 + 0.04 * i;
        CHECK(stats::kolmogorov_sf(t) ==
              Approx(test_oracles::kolmogorov_sf_partial_sum(t)).margin(1e-10));
    }
    CHECK_THROWS_AS(stats::kolmogorov_sf(-0.1), DomainError);
}

TEST_CASE("kolmogorov_sf is monotone non-increasing and bounded") {
    double prev = 1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double t = 5.0 * static_cast<double>(i) / 1000.0;
        const double p = stats::kolmogorov_sf(t);
        CHECK(p <= prev + 1e-15);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("anderson_darling_sf against Imhof-inversion oracle") {
    // Oracle self-check against published asymptotic critical points first.
    CHECK(test_oracles::anderson_darling_cdf_imhof(2.492) == Approx(0.95).margin(2e-3));
    CHECK(test_oracles::anderson_darling_cdf_imhof(3.857) == Approx(0.99).margin(2e-3));
    CHECK(test_oracles::anderson_darling_cdf_imhof(1.933) == Approx(0.90).margin(2e-3));

    CHECK(stats::anderson_darling_sf(0.0) == 1.0);
    CHECK(stats::anderson_darling_sf(2.492) == Approx(0.05).margin(1e-3));
    CHECK(stats::anderson_darling_sf(3.857) == Approx(0.01).margin(1e-3));
    for (int i = 0; i <= 49; ++i) {
        const double z = 0.2 + 0.2 * i;
        const double oracle = 1.0 - test_oracles::anderson_darling_cdf_imhof(z);
        INFO("z=" << z);
        CHECK(stats::anderson_darling_sf(z) == Approx(oracle).margin(1e-3));
    }
    CHECK_THROWS_AS(stats::anderson_darling_sf(-1.0), DomainError);
}

TEST_CASE("anderson_darling_sf is monotone non-increasing on a fine grid") {
    double prev = 1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double z = 12.0 * static_cast<double>(i) / 1000.0;
        const double p = stats::anderson_darling_sf(z);
        CHECK(p <= prev + 1e-12);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
}
