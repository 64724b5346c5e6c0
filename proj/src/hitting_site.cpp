#include "caloric/hitting_site.hpp"

#include "caloric/hitting_time.hpp"
#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace caloric::hitting_site {

using cplx = std::complex<double>;

namespace {

constexpr double EPS = std::numeric_limits<double>::epsilon();
// saddle height cap: keeps the complex-order K saddle inside its strip
constexpr double ETA_ANGLE_CAP = 1.4;
constexpr int ETA_BANDS = 64;
// phase advance per Gauss-Legendre panel that the fixed rules resolve to roundoff
constexpr double PANEL_PHASE = 8.0;

const std::vector<double>& gl_nodes(int n, const std::vector<double>** w_out) {
    static thread_local std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<double> x, w;
        quad::gauss_legendre(n, x, w);
        it = cache.emplace(n, std::make_pair(x, w)).first;
    }
    *w_out = &it->second.second;
    return it->second.first;
}

// (1 + n/nu) C_n^nu(1) for nu > 0, and the cosine-basis value 2 (1 for n = 0) for nu = 0
double h_max(int n, double nu) {
    if (nu == 0.0) return n == 0 ? 1.0 : 2.0;
    return (nu + n) / nu * std::exp(std::lgamma(n + 2.0 * nu) - std::lgamma(2.0 * nu) - std::lgamma(n + 1.0));
}

// H_n(theta) for n = 0..N at one angle
std::vector<double> h_values(int N, double nu, double theta) {
    std::vector<double> h(N + 1);
    if (nu == 0.0) {
        h[0] = 1.0;
        for (int n = 1; n <= N; ++n) h[n] = 2.0 * std::cos(n * theta);
        return h;
    }
    auto c = specfun::gegenbauer_all(N, nu, std::cos(theta));
    for (int n = 0; n <= N; ++n) h[n] = (nu + n) / nu * c[n];
    return h;
}

} // namespace

double phi_char(double a, double lam, double v) {
    require(a > 0, "phi_char: radius must be positive");
    require(v > 0, "phi_char: v must be positive");
    double y = a * v;
    return std::exp(specfun::log_bessel_k(0.0, y) - specfun::log_bessel_k(std::fabs(lam), y));
}

// ---------------------------------------------------------------------------------------------
// LimitInverter

LimitInverter::LimitInverter(double y, double base_order, const SeriesControl& ctrl)
    : y_(y), base_(base_order), ctrl_(ctrl) {
    require(y > 0, "limit inverter: y must be positive");
    require(base_order >= 0, "limit inverter: base order must be non-negative");
    ctrl.validate();
    log_k_base_ = specfun::log_bessel_k(base_order, y);
    const std::vector<double>* gw;
    const auto& gx = gl_nodes(ctrl.quad_points, &gw);
    double width = std::min(2.0, 0.25 * std::max(1.0, std::sqrt(y)));
    // Phi decreases in lam on [0, inf); stop once it is e^{-60} below its value at 0
    double log_phi0 = log_k_base_ - specfun::log_bessel_k(0.0, y);
    for (int p = 0;; ++p) {
        double lo = p * width, hi = lo + width;
        double last = 0.0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            double lam = 0.5 * (lo + hi) + 0.5 * width * gx[i];
            double lp = log_k_base_ - specfun::log_bessel_k(lam, y);
            double ph = std::exp(lp);
            lam_.push_back(lam);
            wphi_.push_back(0.5 * width * (*gw)[i] * ph);
            l1_ += std::fabs(wphi_.back());
            last = lp;
        }
        lam_max_ = hi;
        if (last < log_phi0 - 60.0 && p >= 2) break;
        if (p > 100000) throw NumericFailure("limit inverter: characteristic function does not decay");
    }
}

double LimitInverter::real_axis(double theta, int deriv, double* floor) const {
    double th = std::fabs(theta);
    double s = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < lam_.size(); ++i) {
        double term = deriv == 0 ? wphi_[i] * std::cos(lam_[i] * th) : -wphi_[i] * lam_[i] * std::sin(lam_[i] * th);
        s += term;
        l1 += std::fabs(deriv == 0 ? wphi_[i] : wphi_[i] * lam_[i]);
    }
    if (floor) *floor = 8.0 * EPS * std::sqrt(static_cast<double>(lam_.size())) * l1 / M_PI;
    double v = s / M_PI;
    return (deriv == 1 && theta < 0) ? -v : v;
}

const LimitInverter::Mesh& LimitInverter::mesh(int band, int level) const {
    auto key = std::make_pair(band, level);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Mesh m;
    m.eta = y_ * std::sin(ETA_ANGLE_CAP * band / ETA_BANDS);
    const std::vector<double>* gw;
    const auto& gx = gl_nodes(ctrl_.quad_points, &gw);
    double width = std::min(2.0, 0.25 * std::max(1.0, std::sqrt(y_))) / std::ldexp(1.0, level);
    double top = -std::numeric_limits<double>::infinity();
    for (int p = 0;; ++p) {
        double lo = p * width, hi = lo + width;
        double panel_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            double xi = 0.5 * (lo + hi) + 0.5 * width * gx[i];
            cplx lk = specfun::detail::log_bessel_k_complex_order(cplx(xi, -m.eta), y_, 1e-14);
            cplx lp = log_k_base_ - lk;
            m.xi.push_back(xi);
            m.w.push_back(0.5 * width * (*gw)[i]);
            m.log_phi.push_back(lp);
            panel_max = std::max(panel_max, lp.real() + std::log1p(xi));
        }
        top = std::max(top, panel_max);
        if (panel_max < top - 60.0 && p >= 2) break;
        if (p > 200000) throw NumericFailure("limit inverter: shifted transform does not decay");
    }
    return cache_.emplace(key, std::move(m)).first->second;
}

double LimitInverter::contour(double theta, int deriv, double shift, double* floor) const {
    double th = std::fabs(theta);
    int band = static_cast<int>(std::lround(std::min(th, ETA_ANGLE_CAP) / ETA_ANGLE_CAP * ETA_BANDS));
    double base_width = std::min(2.0, 0.25 * std::max(1.0, std::sqrt(y_)));
    int level = 0;
    while (base_width / std::ldexp(1.0, level) * std::max(th, 1.0) > PANEL_PHASE) ++level;
    const Mesh& m = mesh(band, level);
    // F = (e^{-eta th} / pi) Re sum w Phi(xi - i eta) e^{-i xi th}; derivative carries -i xi - eta
    double s = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < m.xi.size(); ++i) {
        cplx e = std::exp(m.log_phi[i] - m.eta * th + shift - cplx(0.0, m.xi[i] * th));
        if (deriv == 1) e *= cplx(-m.eta, -m.xi[i]);
        s += m.w[i] * e.real();
        l1 += m.w[i] * std::abs(e);
    }
    if (floor) *floor = 8.0 * EPS * std::sqrt(static_cast<double>(m.xi.size())) * l1 / M_PI;
    double v = s / M_PI;
    return (deriv == 1 && theta < 0) ? -v : v;
}

double LimitInverter::pick(double theta, int deriv, InversionRoute route, double shift, double* floor) const {
    double width = std::min(2.0, 0.25 * std::max(1.0, std::sqrt(y_)));
    bool real_ok = std::fabs(theta) * width <= PANEL_PHASE;
    double fl;
    if (route == InversionRoute::RealAxis) {
        require(real_ok, "limit inverter: angle beyond the real-axis mesh resolution");
        double v = real_axis(theta, deriv, &fl);
        if (floor) *floor = fl * std::exp(shift);
        return v * std::exp(shift);
    }
    if (route == InversionRoute::Auto && real_ok) {
        double v = real_axis(theta, deriv, &fl);
        if (fl <= ctrl_.rel_tol * std::fabs(v)) {
            if (floor) *floor = fl * std::exp(shift);
            return v * std::exp(shift);
        }
    }
    return contour(theta, deriv, shift, floor);
}

double LimitInverter::value(double theta, InversionRoute route, double shift, double* floor) const {
    return pick(theta, 0, route, shift, floor);
}

double LimitInverter::derivative(double theta, InversionRoute route, double shift, double* floor) const {
    return pick(theta, 1, route, shift, floor);
}

double f_limit(double a, double theta, double v, const SeriesControl& ctrl, InversionRoute route) {
    require(a > 0 && v > 0, "f_limit: need a > 0 and v > 0");
    require(std::isfinite(theta), "f_limit: angle must be finite");
    LimitInverter inv(a * v, 0.0, ctrl);
    return inv.value(theta, route);
}

// ---------------------------------------------------------------------------------------------
// Finite (x, t) site law

double alpha_coeff(int n, double a, double x, double t, const SeriesControl& ctrl) {
    require(n >= 0, "alpha_coeff: n must be non-negative");
    if (n == 0) return 1.0;
    auto q = hitting_time::q_exact_orders(a, 0.0, 1, x, t, ctrl)[0];
    auto qn = hitting_time::q_exact_orders(a, static_cast<double>(n), 1, x, t, ctrl)[0];
    return 2.0 * std::exp(n * std::log(x / a) + qn.log_value - q.log_value);
}

SiteSeries::SiteSeries(const Geometry& g, double x, double t, const SeriesControl& ctrl) : g_(g), x_(x), t_(t) {
    require(x > g.a, "site series: start must lie outside the ball");
    require(t > 0, "site series: t must be positive");
    ctrl.validate();
    const double tol = std::max(ctrl.abs_tol, ctrl.rel_tol);
    int count = std::min(24, ctrl.n_max + 1);
    for (;;) {
        auto qs = hitting_time::q_exact_orders(g.a, g.nu, count, x, t, ctrl);
        double j0 = qs[0].contour;
        q_ = qs[0].value;
        std::vector<double> r(count), re(count), env(count), noise(count);
        for (int n = 0; n < count; ++n) {
            r[n] = qs[n].contour / j0;
            re[n] = (qs[n].contour_err + std::fabs(r[n]) * qs[0].contour_err) / std::fabs(j0) +
                    EPS * std::fabs(r[n]);
            env[n] = std::fabs(r[n]) * h_max(n, g.nu);
            noise[n] = re[n] * h_max(n, g.nu);
        }
        // stop at the first n where the envelope has turned down for good and bounds the tail,
        // or where three successive envelopes sit inside the coefficient noise
        int stop = -1;
        for (int n = 3; n < count; ++n) {
            double rho = env[n] / env[n - 1];
            bool falling = env[n] < env[n - 1] && env[n - 1] < env[n - 2] && rho < 0.9;
            if (falling && env[n] * rho / (1.0 - rho) < tol) { stop = n; break; }
            if (env[n] <= noise[n] && env[n - 1] <= noise[n - 1] && env[n - 2] <= noise[n - 2]) {
                stop = n;
                noise_limited_ = true;
                break;
            }
        }
        if (stop >= 0) {
            r.resize(stop + 1);
            re.resize(stop + 1);
            r_ = std::move(r);
            r_err_ = std::move(re);
            return;
        }
        if (count > ctrl.n_max) {
            std::ostringstream os;
            os << "site series: no tail bound within " << ctrl.n_max << " terms (x " << x << ", t " << t << ")";
            throw NumericFailure(os.str());
        }
        count = std::min(2 * count, ctrl.n_max + 1);
    }
}

double SiteSeries::operator()(double theta) const {
    auto h = h_values(terms() - 1, g_.nu, theta);
    double s = 0.0;
    for (int n = 0; n < terms(); ++n) s += r_[n] * h[n];
    return s;
}

double SiteSeries::floor(double theta) const {
    auto h = h_values(terms() - 1, g_.nu, theta);
    double s = 0.0;
    for (int n = 0; n < terms(); ++n) s += (r_err_[n] + 4.0 * EPS * std::fabs(r_[n])) * std::max(std::fabs(h[n]), 1.0);
    return s;
}

double g_density(const Geometry& g, double x, double t, SiteAngle theta, const SeriesControl& ctrl) {
    SiteSeries s(g, x, t, ctrl);
    return s(theta.polar());
}

double h_exact(const Geometry& g, double z, double t, double phi, const SeriesControl& ctrl, double* abs_err) {
    SiteSeries s(g, z, t, ctrl);
    if (abs_err) *abs_err = s.floor(phi) * s.q();
    return s.joint(phi);
}

// ---------------------------------------------------------------------------------------------
// Limit site law

LimitSite::LimitSite(const Geometry& g, double av, const SeriesControl& ctrl) : g_(g), av_(av), ctrl_(ctrl) {
    require(av > 0, "g_limit: av must be positive");
    ctrl.validate();
    const double nu = g.nu;
    const double tol = 1e-3 * std::max(ctrl.rel_tol, ctrl.abs_tol);
    std::vector<double> lk = specfun::log_bessel_k_sequence(nu, ctrl.n_max, av);
    c_.push_back(1.0);
    for (int n = 1; n <= ctrl.n_max; ++n) {
        double c = std::exp(lk[0] - lk[n]);
        c_.push_back(c);
        // c_{m+1}/c_m <= av / (2 (nu + m)); combined with the growth of max|H_m| it bounds the tail
        double hr = nu == 0.0 ? 1.0 : (nu + n + 1.0) / (nu + n) * (n + 2.0 * nu) / (n + 1.0);
        double rho = av / (2.0 * (nu + n)) * hr;
        double env = c * h_max(n, nu);
        if (rho < 1.0 && env * rho / (1.0 - rho) < tol) return;
        if (c == 0.0) return;
    }
    // no tail bound within n_max terms: only the relative routes are usable
    series_complete_ = false;
}

const LimitInverter& LimitSite::inverter() const {
    if (!inv_) inv_ = std::make_unique<LimitInverter>(av_, g_.d == 3 ? 0.5 : 0.0, ctrl_);
    return *inv_;
}

double LimitSite::series(double theta, double* floor) const {
    if (!series_complete_) {
        std::ostringstream os;
        os << "g_limit: series needs more than " << ctrl_.n_max << " terms at av " << av_;
        throw NumericFailure(os.str());
    }
    auto h = h_values(terms() - 1, g_.nu, theta);
    double s = 0.0, l1 = 0.0;
    for (int n = 0; n < terms(); ++n) {
        s += c_[n] * h[n];
        l1 += c_[n] * std::max(std::fabs(h[n]), 1.0);
    }
    if (floor) *floor = 64.0 * EPS * l1;
    return s;
}

double LimitSite::fold(double theta, double shift) const {
    require(g_.d == 2, "g_limit: the folded route is planar");
    const auto& inv = inverter();
    const auto A = InversionRoute::Auto;
    double s = inv.value(theta, A, shift);
    for (int k = 1; k < 100000; ++k) {
        double p = inv.value(theta + 2.0 * M_PI * k, A, shift), m = inv.value(theta - 2.0 * M_PI * k, A, shift);
        s += p + m;
        if (std::fabs(p) + std::fabs(m) <= 1e-17 * std::fabs(s)) break;
    }
    return 2.0 * M_PI * s;
}

double LimitSite::mehler_kernel(double phi, double shift, double* floor) const {
    require(g_.d == 3, "g_limit: the Mehler route is three-dimensional");
    const auto& inv = inverter();
    const auto A = InversionRoute::Auto;
    double fl, fsum = 0.0;
    double s = -inv.derivative(phi, A, shift, &fl);
    fsum += fl;
    for (int k = 1; k < 100000; ++k) {
        double sg = (k % 2 == 0) ? -1.0 : 1.0;   // -(-1)^k
        double fp, fm;
        double p = sg * inv.derivative(phi - 2.0 * M_PI * k, A, shift, &fp);
        double m = sg * inv.derivative(phi + 2.0 * M_PI * k, A, shift, &fm);
        s += p + m;
        fsum += fp + fm;
        if (std::fabs(p) + std::fabs(m) <= 1e-17 * std::fabs(s)) break;
    }
    if (floor) *floor = 2.0 * M_PI * fsum;
    return 2.0 * M_PI * s;
}

double LimitSite::mehler(double theta, double shift) const {
    require(g_.d == 3, "g_limit: the Mehler route is three-dimensional");
    double d = M_PI - theta;
    if (d < 1e-9) return mehler_kernel(M_PI, shift);
    // phi = pi - d sin(al): the endpoint singularity of (cos theta - cos phi)^{-1/2} is removed
    auto f = [&](double al) {
        double u = d * std::sin(al);
        double s1 = std::sin(0.25 * M_PI - 0.5 * al);
        double gap = 2.0 * std::sin(0.5 * (d + u)) * std::sin(d * s1 * s1);   // cos u - cos d
        if (gap <= 0.0) return 0.0;
        return mehler_kernel(M_PI - u, shift) * d * std::cos(al) / std::sqrt(gap);
    };
    std::vector<double> br;
    for (int i = 0; i <= 8; ++i) br.push_back(0.5 * M_PI * i / 8);
    // the kernel carries ~1e-13 relative noise from the oscillatory contour sum; where the value
    // sinks below the kernel's own roundoff floor only that floor is attainable
    double kf = 0.0;
    for (int i = 0; i <= 4; ++i) {
        double fl;
        mehler_kernel(theta + d * i / 4, shift, &fl);
        kf = std::max(kf, fl);
    }
    double abs_tol = 10.0 * kf * M_PI;
    auto r = quad::integrate(f, br, std::max(ctrl_.rel_tol, 1e-10), abs_tol, ctrl_.max_intervals);
    if (!r.converged) throw NumericFailure("g_limit: Mehler quadrature did not converge");
    return std::sqrt(2.0) / M_PI * r.value;
}

double LimitSite::evaluate(double theta, GRoute route, double shift) const {
    switch (route) {
    case GRoute::Series: return series(theta) * std::exp(shift);
    case GRoute::Fold: return fold(theta, shift);
    case GRoute::Mehler: return mehler(theta, shift);
    case GRoute::Auto: break;
    }
    if (!series_complete_ && (g_.d == 2 || g_.d == 3)) return g_.d == 2 ? fold(theta, shift) : mehler(theta, shift);
    double fl;
    double s = series(theta, &fl);
    if (fl <= 1e3 * ctrl_.rel_tol * std::fabs(s)) return s * std::exp(shift);
    if (g_.d == 2) return fold(theta, shift);
    if (g_.d == 3) return mehler(theta, shift);
    return s * std::exp(shift);
}

double LimitSite::operator()(double theta, GRoute route) const { return evaluate(theta, route, 0.0); }

double LimitSite::rescaled(double theta, GRoute route) const {
    return evaluate(theta, route, av_ * (1.0 - std::cos(theta)));
}

double g_limit(const Geometry& g, double av, double theta, const SeriesControl& ctrl, GRoute route) {
    LimitSite ls(g, av, ctrl);
    return ls(theta, route);
}

// ---------------------------------------------------------------------------------------------
// Large-v forms, bounds, small-time forms

double psi_tangent(double a, double x, double t, double theta) {
    require(x > a && a > 0, "psi_tangent: need x > a > 0");
    require(t > 0, "psi_tangent: t must be positive");
    require(std::fabs(theta) < 0.5 * M_PI, "psi_tangent: needs |theta| < pi/2");
    double av = a * x / t;
    return 2.0 * M_PI * av * std::exp(-av * (1.0 - std::cos(theta))) * specfun::heat_kernel(2, t, x - a) *
           (std::cos(theta) - a / x);
}

DensityValue large_v_site_density(const Geometry& g, double v, double theta, double t) {
    double av = g.a * v;
    require(av > 8.0, "large_v_site_density: regime needs av > 8");
    require(theta >= 0 && theta <= M_PI, "large_v_site_density: colatitude must lie in [0, pi]");
    require(t > 0, "large_v_site_density: t must be positive");
    double c = std::cos(theta), s = std::cbrt(1.0 / av);
    double scale = g.omega_dm1 * std::pow(av / (2.0 * M_PI), 0.5 * (g.d - 1)) * std::exp(-av * (1.0 - c));
    DensityValue dv;
    if (c >= s) {
        dv.value = scale * c;
        dv.regime = Regime::LargeVInterior;
        dv.error_order = "O(1/(av cos^3 theta))";
    } else if (c > -s) {
        dv.value = scale * s;
        dv.regime = Regime::LargeVEquatorial;
        dv.bound_only = true;
        dv.error_order = "order of magnitude only (ratio bounded above and below)";
    } else {
        double x = v * t;
        double gap = std::fabs(theta - 0.5 * M_PI);
        dv.value = scale * (g.a / x - c) / (gap * gap * gap * av);
        dv.regime = Regime::LargeVFarSide;
        dv.bound_only = true;
        dv.error_order = "upper bound up to an unspecified constant";
    }
    return dv;
}

DensityValue large_v_joint(const Geometry& g, double x, double t, double theta) {
    require(x > g.a && t > 0, "large_v_joint: need x > a and t > 0");
    double av = g.a * x / t;
    double c = std::cos(theta);
    require(c > std::cbrt(1.0 / av), "large_v_joint: needs cos theta > (av)^{-1/3}");
    double r = std::sqrt(x * x + g.a * g.a - 2.0 * g.a * x * c);
    DensityValue dv;
    dv.value = g.omega_dm1 * std::pow(g.a, 2.0 * g.nu) * g.a * x * c / t * specfun::heat_kernel(g.d, t, r);
    dv.regime = Regime::LargeVInterior;
    dv.error_order = "O(1/(av cos^3 theta))";
    return dv;
}

double large_v_weak_limit(const Geometry& g, double theta) {
    if (theta < 0 || theta > 0.5 * M_PI) return 0.0;
    return g.omega_dm2 * std::cos(theta) * std::pow(std::sin(theta), g.d - 2);
}

DensityValue h_small_t(const Geometry& g, double y, double t, double phi) {
    require(y > 0 && t > 0, "h_small_t: need y > 0 and t > 0");
    double a = g.a;
    DensityValue dv;
    dv.value = g.omega_dm1 * std::pow(a, 2.0 * g.nu + 1.0) * y / t * specfun::heat_kernel(1, t, y) *
               specfun::heat_kernel(g.d - 1, t, a * phi);
    dv.regime = Regime::SmallTime;
    std::ostringstream os;
    os << "(1+o(1)) as (y^3+|a phi|^3)/t -> 0; here " << (y * y * y + std::pow(std::fabs(a * phi), 3)) / t;
    dv.error_order = os.str();
    return dv;
}

// ---------------------------------------------------------------------------------------------
// Envelope suite

const char* to_string(Envelope e) {
    switch (e) {
    case Envelope::Lemma43: return "small_t_upper";
    case Envelope::Lemma45_small: return "global_upper_q";
    case Envelope::Lemma45_large: return "global_upper_kernel";
    case Envelope::Prop41_upper: return "two_sided_upper";
    case Envelope::Prop41_lower: return "two_sided_lower";
    case Envelope::Cor41: return "tangent_plane_upper";
    case Envelope::Lemma46_crucial: return "refined_upper";
    }
    return "?";
}

namespace {

double chord(double a, double z, double phi) {
    return std::sqrt(std::max(0.0, z * z + a * a - 2.0 * a * z * std::cos(phi)));
}

// start radius and colatitude of the grid point
std::pair<double, double> envelope_start(const Geometry& g, const EnvelopePoint& p, Envelope which) {
    if (which == Envelope::Cor41) return {g.a / std::cos(p.phi), p.phi};
    return {g.a + p.y, p.phi};
}

} // namespace

bool envelope_domain(const Geometry& g, const EnvelopePoint& p, Envelope which) {
    double a = g.a;
    if (!(p.t > 0) || !(p.phi >= 0 && p.phi <= M_PI)) return false;
    if (which != Envelope::Cor41 && !(p.y > 0)) return false;
    double z = a + p.y;
    switch (which) {
    case Envelope::Lemma43: return p.y < a && p.t < a * a && p.phi < M_PI;
    case Envelope::Lemma45_small: return p.t > std::max(a * a, a * chord(a, z, p.phi));
    case Envelope::Lemma45_large: return p.t <= std::max(a * a, a * chord(a, z, p.phi));
    case Envelope::Prop41_upper:
    case Envelope::Prop41_lower:
    case Envelope::Lemma46_crucial: return p.t < a * a && p.y < a && p.phi < 1.0;
    case Envelope::Cor41: return p.t < a * a && p.phi > 0 && p.phi < 1.0;
    }
    return false;
}

double envelope_shape(const Geometry& g, const EnvelopePoint& p, Envelope which) {
    double a = g.a, t = p.t, phi = p.phi, y = p.y;
    double d = g.d, pre = std::pow(a, 2.0 * g.nu + 1.0);
    double z = a + y, r = chord(a, z, phi);
    switch (which) {
    case Envelope::Lemma43:   // lambda = 1
        return pre * y / t *
               (specfun::heat_kernel(1, t, y) * specfun::heat_kernel(d - 1, t, a * phi) +
                a * a / t * specfun::heat_kernel(d, t, a));
    case Envelope::Lemma45_small: return hitting_time::q_exact(a, g.nu, z, t);
    case Envelope::Lemma45_large: return std::pow(a, 2.0 * g.nu) * a * r / t * specfun::heat_kernel(d, t, r);
    case Envelope::Prop41_upper:
        return pre * y / t * specfun::heat_kernel(d, t, r) *
               std::exp(std::pow(phi, 4) * (a * y + a * a * phi * phi) / t);
    case Envelope::Prop41_lower:
        return pre * y / t * specfun::heat_kernel(d, t, r) *
               std::exp(-std::pow(a * phi, 2) * (phi * phi + std::sqrt(t) / a) / t);
    case Envelope::Cor41: {
        double yy = a / std::cos(phi) - a, eta = a * std::tan(phi);
        return pre * yy / t * specfun::heat_kernel(d, t, eta) * std::exp(std::pow(eta, 6) / (std::pow(a, 4) * t));
    }
    case Envelope::Lemma46_crucial: {
        double ex = (a * a + a * y) * phi * phi + y * y - a * a * std::pow(phi, 4) / 12.0 - 12.0 * a * y * std::pow(phi, 4);
        return pre * y / std::pow(t, 1.0 + 0.5 * d) * std::exp(-ex / (2.0 * t));
    }
    }
    return NAN;
}

EnvelopeReport envelope_check(const Geometry& g, const std::vector<EnvelopePoint>& grid, Envelope which,
                              const SeriesControl& ctrl) {
    EnvelopeReport rep;
    rep.which = which;
    rep.grid_max_ratio = -std::numeric_limits<double>::infinity();
    rep.grid_min_ratio = std::numeric_limits<double>::infinity();
    std::map<std::pair<double, double>, std::unique_ptr<SiteSeries>> series;
    for (const auto& p : grid) {
        if (!envelope_domain(g, p, which)) { ++rep.excluded; continue; }
        auto [z, phi] = envelope_start(g, p, which);
        auto key = std::make_pair(z, p.t);
        auto it = series.find(key);
        if (it == series.end()) it = series.emplace(key, std::make_unique<SiteSeries>(g, z, p.t, ctrl)).first;
        const SiteSeries& s = *it->second;
        double h = s.joint(phi), err = s.floor(phi) * s.q();
        if (!(err <= 0.3 * std::fabs(h))) { ++rep.excluded; continue; }
        double ratio = h / envelope_shape(g, p, which);
        ++rep.evaluated;
        if (!std::isfinite(ratio) || ratio <= 0.0) { ++rep.violations; continue; }
        rep.grid_max_ratio = std::max(rep.grid_max_ratio, ratio);
        rep.grid_min_ratio = std::min(rep.grid_min_ratio, ratio);
    }
    rep.fitted_constant = which == Envelope::Prop41_lower ? rep.grid_min_ratio : rep.grid_max_ratio;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Legendre process, Poisson kernel, change-of-measure functionals

double legendre_density(double nu, double t, double theta0, double theta, const SeriesControl& ctrl) {
    require(nu > 0, "legendre_density: needs nu > 0 (d >= 3)");
    require(t > 0, "legendre_density: t must be positive");
    ctrl.validate();
    double x0 = std::cos(theta0), x = std::cos(theta);
    auto c0 = specfun::gegenbauer_all(ctrl.n_max, nu, x0);
    auto c = specfun::gegenbauer_all(ctrl.n_max, nu, x);
    double s = 0.0;
    double prev_env = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= ctrl.n_max; ++n) {
        double lc1 = std::lgamma(n + 2.0 * nu) - std::lgamma(2.0 * nu) - std::lgamma(n + 1.0);
        double decay = -0.5 * n * (n + 2.0 * nu) * t;
        // h_n(theta0) h_n(theta) = ((nu+n)/nu) C_n(x0) C_n(x) / C_n(1); |C_n| <= C_n(1)
        s += (nu + n) / nu * std::exp(decay - lc1) * c0[n] * c[n];
        double env = (nu + n) / nu * std::exp(decay + lc1);
        double rho = env / prev_env;
        if (n >= 2 && rho < 1.0 && env * rho / (1.0 - rho) < 1e-3 * ctrl.rel_tol * std::max(1.0, std::fabs(s)))
            return s;
        prev_env = env;
    }
    throw NumericFailure("legendre_density: spectral series not converged within n_max terms");
}

double legendre_small_t(double nu, double t, double theta) {
    require(nu > 0 && t > 0, "legendre_small_t: need nu > 0 and t > 0");
    double d = 2.0 * nu + 2.0;
    return sphere_area(d) * specfun::heat_kernel(d - 1.0, t, theta);
}

double poisson_kernel(double z, const Geometry& g, double phi) {
    require(z > g.a, "poisson_kernel: needs z > a");
    double r = chord(g.a, z, phi);
    return std::pow(g.a, 2.0 * g.nu) * (z * z - g.a * g.a) / std::pow(r, g.d);
}

double cm_functional(CMIdentity which, double nu, double lam, double a, double x, double t,
                     const SeriesControl& ctrl) {
    require(nu >= 0 && lam >= 0, "cm_functional: need nu >= 0 and lam >= 0");
    require(x > a && a > 0 && t > 0, "cm_functional: need x > a > 0 and t > 0");
    if (which == CMIdentity::Lemma31) {
        if (nu == 0.5) return 1.0;
        auto q = hitting_time::q_exact_full(a, nu, x, t, ctrl);
        return std::exp(q.log_value - std::log(hitting_time::q1(a, x, t)) - (nu + 0.5) * std::log(a / x));
    }
    if (lam == 0.0) return 1.0;
    auto q0 = hitting_time::q_exact_full(a, nu, x, t, ctrl);
    auto ql = hitting_time::q_exact_full(a, nu + lam, x, t, ctrl);
    return std::exp(lam * std::log(x / a) + ql.log_value - q0.log_value);
}

} // namespace caloric::hitting_site
