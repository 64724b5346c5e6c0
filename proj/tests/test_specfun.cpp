#include "doctest.h"

#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <complex>

using namespace caloric;
using cplx = std::complex<double>;

namespace {

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

// K_nu(w) = int_0^inf exp(-w cosh u) cosh(nu u) du, trapezoid rule; exp(-Re w) factored out.
cplx k_oracle_scaled(double nu, cplx w) {
    double h = 0.002;
    cplx s = 0.5 * std::exp(-w * (std::cosh(0.0) - 1.0));
    for (int j = 1;; ++j) {
        double u = j * h;
        cplx term = std::exp(-w * (std::cosh(u) - 1.0) + std::fabs(nu) * u) * 0.5 *
                    (1.0 + std::exp(-2.0 * std::fabs(nu) * u));
        s += term;
        if (std::abs(term) < 1e-20 * std::abs(s) && u > 1.0) break;
        if (j > 4000000) break;
    }
    return s * h;   // = e^{w} K_nu(w)
}

// I_nu(x) from its integral representation, both pieces by tanh-sinh / exp-sinh.
double i_oracle(double nu, double x) {
    boost::math::quadrature::tanh_sinh<double> ts;
    double p1 = ts.integrate([&](double th) { return std::exp(x * (std::cos(th) - 1.0)) * std::cos(nu * th); },
                             0.0, M_PI) / M_PI;
    double p2 = 0.0;
    if (std::fabs(std::sin(nu * M_PI)) > 0) {
        boost::math::quadrature::exp_sinh<double> es;
        p2 = es.integrate([&](double t) { return std::exp(-x * (std::cosh(t) + 1.0) - nu * t); }) *
             std::sin(nu * M_PI) / M_PI;
    }
    return p1 - p2;   // scaled by e^{-x}
}

double gegenbauer_explicit(int n, double lam, double th) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j)
        s += std::exp(std::lgamma(lam + j) + std::lgamma(n + lam - j) - std::lgamma(j + 1.0) -
                      std::lgamma(n - j + 1.0) - 2.0 * std::lgamma(lam)) *
             std::cos((2.0 * j - n) * th);
    return s;
}

} // namespace

TEST_CASE("bessel_k matches the cosh integral") {
    for (double nu : {0.0, 0.5, 1.0, 2.5, 7.0, 20.3})
        for (double x : {0.1, 1.0, 1.99, 2.01, 10.0, 50.0, 300.0}) {
            double oracle = k_oracle_scaled(nu, x).real();
            CHECK(rel(specfun::bessel_k_scaled(nu, x), oracle) < 1e-12);
            CHECK(std::fabs(specfun::log_bessel_k(nu, x) - (std::log(oracle) - x)) < 1e-12);
        }
}

TEST_CASE("bessel_k underflow is flagged") {
    auto c = specfun::bessel_k_checked(0.0, 800.0);
    CHECK(c.underflow);
    CHECK(c.value == 0.0);
    CHECK(std::isfinite(specfun::log_bessel_k(0.0, 800.0)));
    CHECK_THROWS_AS(specfun::bessel_k(1.0, 0.0), std::domain_error);
}

TEST_CASE("bessel_k order symmetry and closed form at order one half") {
    for (double x : {0.3, 2.0, 9.0}) {
        CHECK(rel(specfun::bessel_k(-1.7, x), specfun::bessel_k(1.7, x)) < 1e-14);
        CHECK(rel(specfun::bessel_k(0.5, x), std::sqrt(M_PI / (2 * x)) * std::exp(-x)) < 1e-14);
    }
}

TEST_CASE("bessel_k_ratio agrees with direct evaluation and stays finite for large n") {
    for (double nu : {0.0, 0.5, 1.5})
        for (double x : {0.5, 3.0, 40.0})
            for (int n : {1, 5, 30}) {
                double direct = std::exp(specfun::log_bessel_k(nu, x) - specfun::log_bessel_k(nu + n, x));
                CHECK(rel(specfun::bessel_k_ratio(nu, n, x), direct) < 1e-12);
            }
    double r = specfun::bessel_k_ratio(0.0, 300, 0.5);
    CHECK(r >= 0.0);
    CHECK(std::isfinite(r));
    auto seq = specfun::log_bessel_k_sequence(0.5, 10, 3.0);
    for (int k = 0; k <= 10; ++k) CHECK(std::fabs(seq[k] - specfun::log_bessel_k(0.5 + k, 3.0)) < 1e-12);
}

TEST_CASE("bessel_i matches its integral representation") {
    for (double nu : {0.0, 0.5, 1.0, 2.5, 7.0})
        for (double x : {0.1, 1.0, 10.0, 50.0, 400.0}) {
            // the integral form cancels badly when I is tiny relative to e^x
            if (nu <= 2.0 * x + 1.0) CHECK(rel(specfun::bessel_i_scaled(nu, x), i_oracle(nu, x)) < 1e-11);
            if (x < 600) CHECK(rel(specfun::bessel_i(nu, x), boost::math::cyl_bessel_i(nu, x)) < 1e-12);
        }
}

TEST_CASE("I K Wronskian") {
    for (double nu : {0.0, 0.3, 4.0})
        for (double x : {0.2, 5.0, 80.0}) {
            // I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
            double w = specfun::bessel_i_scaled(nu, x) * specfun::bessel_k_scaled(nu + 1, x) +
                       specfun::bessel_i_scaled(nu + 1, x) * specfun::bessel_k_scaled(nu, x);
            CHECK(rel(w, 1.0 / x) < 1e-13);
        }
}

TEST_CASE("J Y Wronskian") {
    for (double nu : {0.0, 0.5, 3.0})
        for (double x : {0.5, 4.0, 30.0}) {
            double w = specfun::bessel_j(nu + 1, x) * specfun::bessel_y(nu, x) -
                       specfun::bessel_j(nu, x) * specfun::bessel_y(nu + 1, x);
            CHECK(rel(w, 2.0 / (M_PI * x)) < 1e-12);
        }
}

TEST_CASE("complex bessel_k matches the cosh integral off the real axis") {
    for (double nu : {0.0, 0.5, 1.0, 3.25})
        for (double r : {0.3, 1.5, 2.5, 12.0})
            for (double arg : {0.0, -0.7, 0.9, -1.3}) {
                cplx w = std::polar(r, arg);
                cplx got = specfun::bessel_k_scaled(nu, w);
                cplx ref = k_oracle_scaled(nu, w);
                CHECK(std::abs(got - ref) < 1e-11 * std::abs(ref));
            }
}

TEST_CASE("complex bessel_k on the imaginary axis agrees with Hankel functions") {
    for (double nu : {0.0, 0.5, 2.0})
        for (double z : {0.5, 1.9, 2.1, 7.0, 40.0}) {
            cplx w(0.0, -z);   // K_nu(-i z) = (pi i / 2) e^{i nu pi / 2} H1_nu(z)
            cplx k = specfun::bessel_k_scaled(nu, w) * std::exp(-w);
            cplx h1(specfun::bessel_j(nu, z), specfun::bessel_y(nu, z));
            cplx ref = cplx(0.0, 0.5 * M_PI) * std::exp(cplx(0.0, 0.5 * nu * M_PI)) * h1;
            CHECK(std::abs(k - ref) < 1e-12 * std::abs(ref));
        }
}

TEST_CASE("complex K sequence reproduces direct evaluation at each order") {
    cplx w(0.4, -3.0);
    auto s = specfun::bessel_k_sequence(0.5, 6, w);
    cplx kv = s.k0_scaled;
    for (int k = 1; k <= 6; ++k) {
        kv *= s.ratio[k - 1];
        cplx direct = specfun::bessel_k_scaled(0.5 + k, w);
        CHECK(std::abs(kv - direct) < 1e-12 * std::abs(direct));
    }
}

TEST_CASE("complex-order K agrees with the real-line integral") {
    for (double y : {0.5, 2.0, 10.0})
        for (cplx nu : {cplx(0.0, -0.3), cplx(1.5, -0.4 * y), cplx(4.0, -0.9 * y), cplx(0.2, 0.0)}) {
            // trapezoid on the real line; fine for these moderate orders
            double h = 0.001;
            cplx s = 0.5;
            for (int j = 1; j < 2000000; ++j) {
                double u = j * h;
                double mag = std::exp(-y * std::cosh(u) + y + std::fabs(nu.real()) * u);
                if (mag < 1e-22 && u > 1) break;
                s += std::exp(-y * (std::cosh(u) - 1.0)) * std::cosh(nu * u);
            }
            cplx ref = std::log(s * h) - y;
            cplx got = specfun::detail::log_bessel_k_complex_order(nu, y);
            CHECK(std::abs(std::exp(got - ref) - 1.0) < 1e-10);
        }
}

TEST_CASE("integral identity for exp(-eta^2/2s - v^2 s/2) s^{-p-1}") {
    boost::math::quadrature::exp_sinh<double> es;
    for (double p : {0.0, 1.0, 2.0})
        for (double ve : {0.5, 2.0, 10.0}) {
            double v = 1.3, eta = ve / v;
            double lhs = es.integrate([&](double s) {
                if (s <= 0) return 0.0;
                return std::exp(-eta * eta / (2 * s) - v * v * s / 2 - (p + 1) * std::log(s));
            });
            double rhs = 2.0 * std::pow(v / eta, p) * specfun::bessel_k(p, v * eta);
            CHECK(rel(lhs, rhs) < 1e-9);
        }
}

TEST_CASE("gegenbauer recurrence equals the explicit cosine sum") {
    for (double lam : {0.5, 1.0, 2.5})
        for (int n : {0, 1, 2, 7, 15})
            for (double th : {0.0, 0.4, 1.7, 3.0}) {
                double e = gegenbauer_explicit(n, lam, th);
                CHECK(std::fabs(specfun::gegenbauer(n, lam, std::cos(th)) - e) < 1e-11 * std::max(1.0, std::fabs(e)));
            }
}

TEST_CASE("eigenfunctions are orthonormal") {
    CHECK_THROWS_AS(specfun::eigenfunction_h(1, 0.0, 0.3), std::domain_error);
    for (double nu : {0.5, 1.0, 2.5}) {
        double mu = std::sqrt(M_PI) * std::exp(std::lgamma(nu + 0.5) - std::lgamma(nu + 1.0));
        for (int m = 0; m <= 8; ++m)
            for (int n = m; n <= 8; ++n) {
                auto r = quad::integrate(
                    [&](double th) {
                        return specfun::eigenfunction_h(m, nu, th) * specfun::eigenfunction_h(n, nu, th) *
                               std::pow(std::sin(th), 2 * nu) / mu;
                    },
                    0.0, M_PI, 1e-13);
                CHECK(std::fabs(r.value - (m == n ? 1.0 : 0.0)) < 1e-11);
            }
        CHECK(std::fabs(specfun::eigenfunction_h(3, nu, 0.4) * specfun::eigenfunction_h(3, nu, 0.0) -
                        specfun::eigen_product_at_pole(3, nu, 0.4)) < 1e-12);
    }
    // h_1(0) h_1(theta) = 2 (nu + 1) cos theta
    CHECK(std::fabs(specfun::eigen_product_at_pole(1, 1.5, 0.7) - 5.0 * std::cos(0.7)) < 1e-14);
}

TEST_CASE("lambda_nu limits") {
    CHECK(rel(specfun::lambda_nu(1.0, 1e-9), 2.0 * M_PI * M_PI / std::tgamma(1.0)) < 1e-6);
    CHECK(rel(specfun::lambda_nu(1.0, 0.0), 2.0 * M_PI * M_PI) < 1e-14);
    CHECK_THROWS_AS(specfun::lambda_nu(0.0, 0.0), std::domain_error);
    CHECK(rel(specfun::lambda_nu(0.5, 2.0),
              std::pow(2 * M_PI, 1.5) / (2 * std::sqrt(2.0) * std::sqrt(M_PI / 4) * std::exp(-2.0))) < 1e-13);
    CHECK(rel(specfun::lambda_nu(0.5, 50.0) /
                  (std::pow(2 * M_PI, 1.0) * std::exp(50.0)), 1.0) < 0.02);
    // large argument: (2 pi)^{nu+1/2} y^{1/2-nu} e^y (1 + O(1/y))
    double y = 1e4, nu = 0.5;
    double log_lead = (nu + 0.5) * std::log(2 * M_PI) + (0.5 - nu) * std::log(y) + y;
    CHECK(rel(specfun::log_lambda_nu(nu, y), log_lead) < 1e-10);
    // nu = 0: Lambda_0(y) ~ pi / (-log y)
    double y0 = 1e-12;
    CHECK(rel(specfun::lambda_nu(0.0, y0), M_PI / (-std::log(y0))) < 0.03);
}

TEST_CASE("geometry constants") {
    auto g2 = Geometry::make(1.0, 2);
    CHECK(rel(g2.mu_d, M_PI) < 1e-15);
    CHECK(rel(g2.omega_dm2, 2.0) < 1e-15);
    auto g3 = Geometry::make(2.0, 3);
    CHECK(rel(g3.omega_dm1, 4 * M_PI) < 1e-15);
    CHECK(rel(g3.mu_d, 2.0) < 1e-15);
    CHECK_THROWS_AS(Geometry::make(-1.0, 3), std::domain_error);
    CHECK_THROWS_AS(Geometry::make(1.0, 1), std::domain_error);
}

TEST_CASE("gegenbauer generating function") {
    double z = 0.3;
    for (double lam : {0.5, 1.5})
        for (double x : {-0.9, 0.0, 0.9}) {
            // |C_n| <= C_n(1) = Gamma(n+2 lam)/(Gamma(2 lam) n!), so the tail after N is below C_N(1) z^N / (1-z) roughly
            int N = 60;
            auto c = specfun::gegenbauer_all(N, lam, x);
            double s = 0.0, p = 1.0;
            for (int n = 0; n <= N; ++n) {
                s += c[n] * p;
                p *= z;
            }
            CHECK(std::fabs(s - std::pow(z * z - 2 * x * z + 1, -lam)) < 1e-8);
        }
    CHECK(specfun::gegenbauer(0, 2.2, 0.4) == 1.0);
    CHECK(std::fabs(specfun::gegenbauer(1, 0.5, 0.3) - 0.3) < 1e-15);
    // C_n(1) = Gamma(n + 2 lam) / (Gamma(2 lam) n!)
    CHECK(rel(specfun::gegenbauer(6, 1.5, 1.0), std::tgamma(9.0) / (std::tgamma(3.0) * std::tgamma(7.0))) < 1e-13);
}

TEST_CASE("heat kernel values and one-dimensional semigroup") {
    CHECK(rel(specfun::heat_kernel(1, 1, 0), 1 / std::sqrt(2 * M_PI)) < 1e-15);
    CHECK(rel(specfun::heat_kernel(2, 2, 0), 1 / (4 * M_PI)) < 1e-15);
    CHECK(rel(specfun::heat_kernel(3, 0.5, 1.0), std::pow(M_PI, -1.5) * std::exp(-1.0)) < 1e-14);
    double s = 0.3, t = 0.9, z = 0.7;
    auto r = quad::integrate([&](double u) { return specfun::heat_kernel(1, t - s, z - u) * specfun::heat_kernel(1, s, u); },
                             {-15.0, 0.0, 15.0}, 1e-13);
    CHECK(rel(r.value, specfun::heat_kernel(1, t, z)) < 1e-11);
}

TEST_CASE("first zero of J0 and I at zero") {
    CHECK(std::fabs(specfun::bessel_j(0, 2.404825557695773)) < 1e-9);
    CHECK(specfun::bessel_j(0, 0.0) == 1.0);
    CHECK(specfun::bessel_i(0, 0.0) == 1.0);
    CHECK(rel(specfun::bessel_i(0.5, 1.0), std::sqrt(2 / M_PI) * std::sinh(1.0)) < 1e-14);
    CHECK_THROWS(specfun::bessel_y(0, 0.0));
}
