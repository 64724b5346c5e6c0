#include "caloric/drifted.hpp"

#include "caloric/hitting_site.hpp"
#include "caloric/hitting_time.hpp"
#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace caloric::drifted {

namespace {

constexpr double EPS = std::numeric_limits<double>::epsilon();

// (1 + n/nu) C_n^nu(1), or 2 for the planar cosine basis
double h_max(int n, double nu) {
    if (n == 0) return 1.0;
    if (nu == 0.0) return 2.0;
    return (nu + n) / nu * std::exp(std::lgamma(n + 2.0 * nu) - std::lgamma(2.0 * nu) - std::lgamma(n + 1.0));
}

// sum_n c_n (-1)^n h_max(n) I_{nu+n}(z) / I_nu(z), the Laplace transform of sum c_n H_n against
// e^{-z cos theta} relative to the uniform law, divided by surface_laplace(z)
double laplace_sum(double nu, const std::vector<double>& c, double z, double* l1_out) {
    if (z == 0.0) {
        if (l1_out) *l1_out = std::fabs(c[0]);
        return c[0];
    }
    double li0 = specfun::log_bessel_i(nu, z);
    double s = 0.0, l1 = 0.0;
    for (std::size_t n = 0; n < c.size(); ++n) {
        double ir = std::exp(specfun::log_bessel_i(nu + n, z) - li0);
        double term = c[n] * h_max(static_cast<int>(n), nu) * ir;
        s += (n % 2 == 0) ? term : -term;
        l1 += std::fabs(term);
        if (ir == 0.0) break;
    }
    if (l1_out) *l1_out = l1;
    return s;
}

void check_cancellation(double s, double l1, const char* what) {
    if (!(std::fabs(s) > 0.0) || l1 * EPS * 64.0 > 1e-8 * std::fabs(s)) {
        std::ostringstream os;
        os << what << ": alternating Laplace sum lost to cancellation (sum " << s << ", l1 " << l1 << ")";
        throw NumericFailure(os.str());
    }
}

double xi_series(const Geometry& g, double av, const SeriesControl& ctrl, double* l1) {
    hitting_site::LimitSite ls(g, av, ctrl);
    if (!ls.series_complete()) throw NumericFailure("xi_const: limit series incomplete");
    return laplace_sum(g.nu, ls.coeff(), av, l1);
}

// e^{y} Xi for d = 2: the unwound density integrated against e^{-y cos theta}
double xi_planar_scaled(const Geometry& g, double y, const SeriesControl& ctrl) {
    hitting_site::LimitSite ls(g, y, ctrl);
    const auto& inv = ls.inverter();
    auto f = [&](double th) { return inv.value(th, hitting_site::InversionRoute::Auto, y * (1.0 - std::cos(th))); };
    // the tail decays at least like e^{-y |theta|} beyond pi (nearest pole of Phi lies past i y)
    double span = M_PI + (2.0 * y + 60.0) / y;
    std::vector<double> br;
    for (double th = 0.0; th < span; th += 0.125 * M_PI) br.push_back(th);
    br.push_back(span);
    auto r = quad::integrate(f, br, std::max(ctrl.rel_tol, 1e-10), 0.0, ctrl.max_intervals);
    if (!r.converged) throw NumericFailure("xi_const: planar quadrature did not converge");
    return 2.0 * r.value;
}

// e^{y} Xi for d = 3 after exchanging the order in the Abel form:
// Xi = (sqrt 2 / 2 pi) sqrt(pi/y) int_0^pi K(phi) e^{-y cos phi} erf(sqrt(y (1 - cos phi))) dphi
double xi_spatial_scaled(const Geometry& g, double y, const SeriesControl& ctrl) {
    hitting_site::LimitSite ls(g, y, ctrl);
    auto f = [&](double phi) {
        double shift = y * (1.0 - std::cos(phi));
        return ls.mehler_kernel(phi, shift) * std::erf(std::sqrt(shift));
    };
    std::vector<double> br;
    double w = std::min(0.125 * M_PI, 4.0 / std::sqrt(y));
    for (double p = 0.0; p < M_PI; p += w) br.push_back(p);
    br.push_back(M_PI);
    double kf;
    ls.mehler_kernel(0.5 * M_PI, 0.5 * y, &kf);
    auto r = quad::integrate(f, br, std::max(ctrl.rel_tol, 1e-10), 10.0 * kf * M_PI, ctrl.max_intervals);
    if (!r.converged) throw NumericFailure("xi_const: Abel-form quadrature did not converge");
    return std::sqrt(2.0) / (2.0 * M_PI) * std::sqrt(M_PI / y) * r.value;
}

} // namespace

void DriftSpec::validate() const {
    require(v >= 0 && std::isfinite(v), "DriftSpec: v must be finite and non-negative");
    require(aligned, "DriftSpec: only a start point on the drift axis is implemented");
}

double surface_laplace(const Geometry& g, double z) {
    require(z >= 0, "surface_laplace: z must be non-negative");
    if (z == 0.0) return 1.0;
    double nu = g.nu;
    double lv = nu * std::log(2.0) + 0.5 * std::log(M_PI) + std::lgamma(nu + 0.5) - std::log(g.mu_d) +
                specfun::log_bessel_i(nu, z) - nu * std::log(z);
    return std::exp(lv);
}

double surface_integral(const Geometry& g, double x, double t, double z, const SeriesControl& ctrl) {
    require(z >= 0, "surface_integral: z must be non-negative");
    hitting_site::SiteSeries s(g, x, t, ctrl);
    double l1;
    double sum = laplace_sum(g.nu, s.ratios(), z, &l1);
    check_cancellation(sum, l1, "surface_integral");
    return surface_laplace(g, z) * sum;
}

double drift_time_density(const Geometry& g, double x, double t, const DriftSpec& drift, const SeriesControl& ctrl) {
    drift.validate();
    double v = drift.v;
    auto q = hitting_time::q_exact_full(g.a, g.nu, x, t, ctrl);
    if (v == 0.0) return q.value;
    double si = surface_integral(g, x, t, g.a * v, ctrl);
    return std::exp(v * x - 0.5 * v * v * t + q.log_value + std::log(si));
}

DensityValue drift_time_asym(const Geometry& g, double x, double t, const DriftSpec& drift, const SeriesControl& ctrl) {
    drift.validate();
    require(drift.v > 0, "drift_time_asym: needs v > 0");
    require(x > g.a && t > 0, "drift_time_asym: need x > a and t > 0");
    double av = g.a * drift.v;
    double lv = std::log(xi_const_scaled(g, av, ctrl)) - av + 2.0 * g.nu * std::log(g.a) +
                specfun::log_lambda_nu(g.nu, av) + specfun::log_heat_kernel(g.d, t, std::fabs(x - t * drift.v));
    DensityValue dv;
    dv.value = std::exp(lv);
    dv.regime = Regime::LargeTimeHighDim;
    if (g.d == 2) dv.regime = x <= std::sqrt(t) ? Regime::LargeTimeInner : Regime::LargeTimeOuter;
    dv.error_order = "(1+o(1)) as t -> inf with x/t -> v";
    return dv;
}

double xi_const_scaled(const Geometry& g, double av, const SeriesControl& ctrl) {
    require(av > 0, "xi_const: av must be positive");
    using Key = std::tuple<int, double, double, double, int>;
    static thread_local std::map<Key, double> cache;
    Key key{g.d, g.a, av, ctrl.rel_tol, ctrl.n_max};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double l1 = 0.0, s = 0.0;
    bool series_ok = false;
    try {
        s = xi_series(g, av, ctrl, &l1);
        series_ok = std::fabs(s) > 0.0 && l1 * EPS * 64.0 <= ctrl.rel_tol * std::fabs(s);
    } catch (const NumericFailure&) {
        series_ok = false;
    }
    double out;
    if (series_ok) {
        out = std::exp(av + std::log(surface_laplace(g, av) * s));
    } else if (g.d == 2) {
        out = xi_planar_scaled(g, av, ctrl);
    } else if (g.d == 3) {
        out = xi_spatial_scaled(g, av, ctrl);
    } else {
        check_cancellation(s, l1, "xi_const");
        out = std::exp(av + std::log(surface_laplace(g, av) * s));
    }
    if (cache.size() > 256) cache.clear();
    cache.emplace(key, out);
    return out;
}

double xi_const(const Geometry& g, double av, const SeriesControl& ctrl) {
    return std::exp(std::log(xi_const_scaled(g, av, ctrl)) - av);
}

DensityValue xi_asym(const Geometry& g, double av) {
    require(av > 0, "xi_asym: av must be positive");
    DensityValue dv;
    dv.value = g.omega_dm2 * av / ((g.d - 1) * specfun::lambda_nu(g.nu, av));
    dv.regime = Regime::LargeVInterior;
    dv.error_order = "(1+o(1)) as av -> inf";
    return dv;
}

double drift_site_density(const Geometry& g, double x, double t, double theta, const DriftSpec& drift,
                          const SeriesControl& ctrl) {
    drift.validate();
    require(theta >= 0 && theta <= M_PI, "drift_site_density: colatitude must lie in [0, pi]");
    hitting_site::SiteSeries s(g, x, t, ctrl);
    double z = g.a * drift.v;
    if (z == 0.0) return s(theta);
    double l1;
    double sum = laplace_sum(g.nu, s.ratios(), z, &l1);
    check_cancellation(sum, l1, "drift_site_density");
    // e^{-z cos theta} / (surface_laplace(z) * sum), with I_nu scaled to keep e^{z} in range
    double lnorm = std::log(surface_laplace(g, z) * sum);
    return std::exp(-z * std::cos(theta) - lnorm) * s(theta);
}

double drift_site_limit(const Geometry& g, double av, double theta, const SeriesControl& ctrl) {
    require(theta >= 0 && theta <= M_PI, "drift_site_limit: colatitude must lie in [0, pi]");
    hitting_site::LimitSite ls(g, av, ctrl);
    // e^{-av cos} g = e^{-av} e^{av(1 - cos)} g; the e^{-av} cancels against Xi
    return ls.rescaled(theta) / xi_const_scaled(g, av, ctrl);
}

DensityValue drift_site_large_v(const Geometry& g, double av, double theta) {
    require(av > 8.0, "drift_site_large_v: regime needs av > 8");
    double c = std::cos(theta);
    require(c >= std::cbrt(1.0 / av), "drift_site_large_v: needs cos theta >= (av)^{-1/3}");
    DensityValue dv;
    dv.value = (g.d - 1) * g.mu_d * c;
    dv.regime = Regime::LargeVInterior;
    dv.error_order = "O(1/(av cos^2 theta)) + o(1)";
    return dv;
}

double drift_weak_limit(const Geometry& g, double theta) {
    if (theta < 0 || theta >= 0.5 * M_PI) return 0.0;
    return (g.d - 1) * std::pow(std::sin(theta), g.d - 2) * std::cos(theta);
}

DensityValue projected_disc_density(const Geometry& g, double w_norm, double av, const SeriesControl& ctrl) {
    require(w_norm >= 0 && w_norm < 1, "projected_disc_density: |w|/a must lie in [0, 1)");
    require(av > 8.0, "projected_disc_density: regime needs av > 8");
    double rim = 1.0 - std::pow(av, -2.0 / 3.0);
    DensityValue dv;
    if (w_norm < rim) {
        // interior large-v site density omega_{d-1} (av/2pi)^{(d-1)/2} e^{-av(1-cos)} cos times
        // e^{-av cos} / Xi, divided by the Jacobian (d-1) mu_d cos theta of the projection relative
        // to the uniform disc law; the exponentials cancel against e^{av} Xi
        double scale = g.omega_dm1 * std::pow(av / (2.0 * M_PI), 0.5 * (g.d - 1));
        dv.value = scale / (xi_const_scaled(g, av, ctrl) * (g.d - 1) * g.mu_d);
        dv.regime = Regime::DiscInterior;
        std::ostringstream os;
        os << "O(1/((1-|w|/a)^{3/2} av)) = O(" << 1.0 / (std::pow(1.0 - w_norm, 1.5) * av) << ")";
        dv.error_order = os.str();
    } else {
        dv.value = std::cbrt(1.0 / av) / std::sqrt(1.0 - w_norm);
        dv.regime = Regime::DiscRim;
        dv.bound_only = true;
        dv.error_order = "comparable to (av)^{-1/3}/sqrt(1-|w|/a) up to constants";
    }
    return dv;
}

} // namespace caloric::drifted
