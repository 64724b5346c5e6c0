#include "doctest.h"

#include "caloric/drifted.hpp"
#include "caloric/hitting_site.hpp"
#include "caloric/hitting_time.hpp"
#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <cmath>
#include <vector>

using namespace caloric;
using namespace caloric::drifted;

namespace {

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

// Integral of f(theta) against the uniform law on the sphere, in colatitude.
template <class F>
double sphere_avg(const Geometry& g, F f, double tol = 1e-11) {
    auto w = [&](double th) {
        if (g.d == 2) return f(th) / M_PI;
        return f(th) * std::pow(std::sin(th), g.d - 2) / g.mu_d;
    };
    return quad::integrate(w, {0, 0.25, 0.5, 1, 1.5, 2, 2.5, M_PI}, tol, 0, 4000).value;
}

} // namespace

TEST_CASE("surface Laplace transform matches quadrature") {
    for (int d : {2, 3, 4}) {
        auto g = Geometry::make(1, d);
        CHECK(surface_laplace(g, 0) == doctest::Approx(1.0).epsilon(1e-14));
        for (double z : {0.3, 2.0, 11.0}) {
            double direct = sphere_avg(g, [&](double th) { return std::exp(-z * std::cos(th)); }, 1e-13);
            CHECK(rel(surface_laplace(g, z), direct) < 1e-8);
        }
    }
    auto g3 = Geometry::make(1, 3);
    CHECK(rel(surface_laplace(g3, 2.0), std::sinh(2.0) / 2.0) < 1e-13);
}

TEST_CASE("drifted densities reduce to the driftless ones at v = 0") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        DriftSpec none{0.0};
        double q = hitting_time::q_exact(g, {2.0, 1.5}).value;
        CHECK(rel(drift_time_density(g, 2.0, 1.5, none), q) < 1e-10);
        for (double th : {0.2, 1.3, 2.9}) {
            double gd = hitting_site::g_density(g, 2.0, 1.5, SiteAngle::colatitude(th));
            CHECK(rel(drift_site_density(g, 2.0, 1.5, th, none), gd) < 1e-10);
        }
    }
    CHECK_THROWS(DriftSpec{-1.0}.validate());
}

TEST_CASE("surface integral closed form against direct quadrature of the site law") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        for (auto [x, t, z] : std::vector<std::array<double, 3>>{{2, 1, 1}, {3, 2, 4}, {1.5, 0.5, 0.5}}) {
            double direct = sphere_avg(g, [&](double th) {
                return std::exp(-z * std::cos(th)) * hitting_site::g_density(g, x, t, SiteAngle::colatitude(th));
            });
            CHECK(rel(surface_integral(g, x, t, z), direct) < 1e-8);
        }
    }
}

TEST_CASE("drifted site density is normalized and tends to its limit") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        DriftSpec dr{1.0};
        double mass = sphere_avg(g, [&](double th) { return drift_site_density(g, 3.0, 2.0, th, dr); });
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-7));
        double lim_mass = sphere_avg(g, [&](double th) { return drift_site_limit(g, 1.0, th); });
        CHECK(lim_mass == doctest::Approx(1.0).epsilon(1e-7));
    }
    auto g = Geometry::make(1, 2);
    DriftSpec dr{1.0};
    double lim = drift_site_limit(g, 1.0, 0.5);
    double prev = 1e300;
    for (double t : {2.0, 8.0, 32.0, 128.0}) {
        double dev = std::fabs(drift_site_density(g, t, t, 0.5, dr) - lim);
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev < 0.01 * lim);
}

TEST_CASE("Xi constant: routes, small-av series and direct quadrature") {
    auto g2 = Geometry::make(1, 2);
    // d = 2: Xi = I_0(y) + 2 sum_n (-1)^n Phi(n) I_n(y), Phi(n) = K_0(y)/K_n(y).
    for (double y : {0.1, 0.5, 1.0, 3.0}) {
        double s = specfun::bessel_i(0, y);
        for (int n = 1; n < 200; ++n) {
            double term = 2 * (n % 2 ? -1 : 1) * hitting_site::phi_char(1, n, y) * specfun::bessel_i(n, y);
            s += term;
            if (std::fabs(term) < 1e-18 * std::fabs(s)) break;
        }
        CHECK(rel(xi_const(g2, y), s) < 1e-9);
    }
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        for (double av : {0.7, 5.0, 15.0, 40.0}) {
            // theta-quadrature of e^{av(1 - cos)} g against the exchanged-order routes
            hitting_site::LimitSite ls(g, av);
            double direct = sphere_avg(g, [&](double th) { return ls.rescaled(th); });
            CHECK(rel(xi_const_scaled(g, av), direct) < 1e-7);
            if (av < 20) CHECK(rel(xi_const(g, av), std::exp(-av) * xi_const_scaled(g, av)) < 1e-12);
        }
    }
}

TEST_CASE("Xi constant: large-av form and monotonicity") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        double r = std::exp(-500.0) * xi_const_scaled(g, 500.0) / xi_asym(g, 500.0).value;
        CHECK(std::fabs(r - 1) < 0.1);
        double prev = 1e300;
        for (double av : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
            double xi = xi_const(g, av);
            CHECK(xi > 0);
            CHECK(xi < prev);
            prev = xi;
        }
    }
}

TEST_CASE("drifted site law at large v") {
    // g at small argument is nearly flat, so the weight e^{-av cos theta} moves the mode to theta = pi.
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        int best = 0;
        double bv = -1;
        for (int i = 0; i <= 64; ++i) {
            double th = M_PI * i / 64;
            double v = std::exp(-10.0 * std::cos(th)) * hitting_site::g_limit(g, 0.1, th);
            if (v > bv) { bv = v; best = i; }
        }
        CHECK(best == 64);
        double wl = quad::integrate([&](double th) { return drift_weak_limit(g, th); }, {0, 0.5 * M_PI}, 1e-12,
                                    0, 2000).value;
        CHECK(wl == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(drift_weak_limit(g, 2.0) == 0.0);
    }
    // Interior form: relative error shrinks as av grows.
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        double e50 = std::fabs(drift_site_limit(g, 50, 0.5) / drift_site_large_v(g, 50, 0.5).value - 1);
        double e200 = std::fabs(drift_site_limit(g, 200, 0.5) / drift_site_large_v(g, 200, 0.5).value - 1);
        CHECK(e200 < e50);
        CHECK(e200 < 0.06);
    }
}

TEST_CASE("projected disc density") {
    auto g2 = Geometry::make(1, 2);
    CHECK(projected_disc_density(g2, 0.0, 1e3).value == doctest::Approx(1.0).epsilon(0.01));
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        double av = 1e3;
        auto rho = [&](double r) { return projected_disc_density(g, r, av).value * (d - 1) * std::pow(r, d - 2); };
        double edge = std::cbrt(1.0 / av);
        double m = quad::integrate(rho, {0, 0.5, 0.9, 1 - edge * edge}, 1e-8, 0, 4000).value;
        // rim panel in s with r = 1 - s^2 removes the inverse square root
        m += quad::integrate([&](double s) { return 2 * s * rho(1 - s * s); }, {0, edge}, 1e-8, 0, 4000).value;
        CHECK(std::fabs(m - 1) < 0.05);
        CHECK(projected_disc_density(g, 0.999, av).regime == Regime::DiscRim);
    }
}

TEST_CASE("drifted hitting time: exact against the large-time form") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        DriftSpec dr{2.0};
        double prev = 1e300;
        for (double t : {2.0, 8.0, 32.0, 128.0}) {
            double r = drift_time_density(g, 2 * t, t, dr) / drift_time_asym(g, 2 * t, t, dr).value;
            CHECK(std::fabs(r - 1) < prev);
            prev = std::fabs(r - 1);
        }
        CHECK(prev < 0.05);
    }
}

TEST_CASE("drift transform of the joint law") {
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        DriftSpec dr{0.8};
        double x = 3.0, t = 2.5;
        double q = hitting_time::q_exact(g, {x, t}).value;
        for (double th : {0.1, 1.0, 2.0, 3.0}) {
            double h = q * hitting_site::g_density(g, x, t, SiteAngle::colatitude(th));
            double joint = std::exp(dr.v * x - 0.5 * dr.v * dr.v * t - g.a * dr.v * std::cos(th)) * h;
            double two_step = drift_time_density(g, x, t, dr) * drift_site_density(g, x, t, th, dr);
            CHECK(rel(two_step, joint) < 1e-9);
        }
        CHECK(xi_const(g, 1e-4) == doctest::Approx(1.0).epsilon(1e-3));
    }
}
