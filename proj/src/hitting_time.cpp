#include "caloric/hitting_time.hpp"

#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace caloric::hitting_time {

using cplx = std::complex<double>;

namespace {

void check_point(double a, double x, double t) {
    require(a > 0, "hitting time: radius must be positive");
    require(x > a, "hitting time: start must lie outside the ball (x > a)");
    require(t > 0 && std::isfinite(t), "hitting time: t must be positive");
}

// exp(-46) ~ 1e-20: beyond this the Gaussian factor is negligible at double precision
constexpr double GAUSS_CUT = 46.0;

ExactQ finish(double a, double order, double x, double t, double J, double err, double l1) {
    double y = x - a;
    ExactQ r;
    r.contour = J;
    r.contour_err = err;
    r.contour_l1 = l1;
    double lpre = order * std::log(a / x) - y * y / (2.0 * t) - std::log(M_PI);
    r.log_value = std::log(std::fabs(J)) + lpre;
    r.value = std::copysign(std::exp(r.log_value), J);
    r.abs_err = err * std::exp(lpre);
    r.uniform_ratio = J * std::sqrt(2.0 / M_PI) * std::sqrt(x / a) * std::pow(t, 1.5) / y;
    return r;
}

// Eigenfunction integral on the real spectral axis for orders order0 + k on one mesh.
// Non-oscillatory and free of cancellation when x sqrt(2 GAUSS_CUT / t) is moderate, i.e. at large t.
quad::VecResult real_axis_integral(double a, double order0, int count, double x, double t,
                                   const SeriesControl& ctrl) {
    double y = x - a;
    double lam_max = std::sqrt(2.0 * GAUSS_CUT / t);
    double lam1 = std::min(1.0 / a, lam_max);
    std::vector<double> br = quad::geometric_breaks(0.0, 1e-4 * std::min(1.0 / x, lam1), lam1, 2.0);
    double h = 0.5 * M_PI / std::max(y, a);
    int panels = static_cast<int>(std::ceil((lam_max - lam1) / h));
    panels = std::min(std::max(panels, 1), 4000);
    for (int i = 1; i <= panels; ++i) br.push_back(lam1 + (lam_max - lam1) * i / panels);
    auto f = [&](double lam, double* out) {
        double g = lam * std::exp(-0.5 * lam * lam * t);
        for (int k = 0; k < count; ++k) {
            double n = order0 + k;
            double ja = specfun::bessel_j(n, a * lam), ya = specfun::bessel_y(n, a * lam);
            double jx = specfun::bessel_j(n, x * lam), yx = specfun::bessel_y(n, x * lam);
            out[k] = -(ya * jx - ja * yx) * g / (ja * ja + ya * ya);
        }
    };
    return quad::integrate_vec(f, count, br, ctrl.rel_tol, 0.0, ctrl.max_intervals);
}

ExactQ from_real_axis(double a, double order, double x, double t, double I, double err, double l1) {
    double y = x - a;
    ExactQ r;
    double lpre = order * std::log(a / x) - std::log(M_PI);
    r.log_value = std::log(std::fabs(I)) + lpre;
    r.value = std::copysign(std::exp(r.log_value), I);
    r.abs_err = err * std::exp(lpre);
    r.uniform_ratio = std::exp(r.log_value - log_q_uniform(a, order, x, t));
    // express in the contour normalization so ratios across orders stay comparable
    double back = std::exp(y * y / (2.0 * t));
    r.contour = I * back;
    r.contour_err = err * back;
    r.contour_l1 = l1 * back;
    return r;
}

bool acceptable(const quad::VecResult& res) {
    return res.converged && res.value[0] > 0 && res.error[0] <= 1e-6 * std::fabs(res.value[0]);
}

} // namespace

double q1(double a, double x, double t) {
    check_point(a, x, t);
    double y = x - a;
    return y / std::sqrt(2.0 * M_PI * t * t * t) * std::exp(-y * y / (2.0 * t));
}

double log_q_uniform(double a, double order, double x, double t) {
    check_point(a, x, t);
    double y = x - a;
    return std::log(y) - 0.5 * std::log(2.0 * M_PI) - 1.5 * std::log(t) - y * y / (2.0 * t) +
           (order + 0.5) * std::log(a / x);
}

std::vector<ExactQ> q_exact_orders(double a, double order0, int count, double x, double t,
                                   const SeriesControl& ctrl) {
    check_point(a, x, t);
    ctrl.validate();
    require(order0 >= 0, "q_exact: order must be non-negative");
    require(count >= 1, "q_exact: need at least one order");
    double y = x - a;
    double c = y / t;
    double s_max = std::sqrt(2.0 * GAUSS_CUT / t);
    double s_lo = std::min({c, 0.5 / x, s_max / 16.0});
    std::vector<double> br = quad::geometric_breaks(0.0, s_lo, s_max, 2.0);
    auto f = [&](double s, double* out) {
        cplx w(c, -s);
        auto ka = specfun::bessel_k_sequence(order0, count - 1, a * w);
        auto kx = specfun::bessel_k_sequence(order0, count - 1, x * w);
        cplx ratio = kx.k0_scaled / ka.k0_scaled;
        cplx lam(s, c);
        double gauss = std::exp(-0.5 * s * s * t);
        out[0] = gauss * (ratio * lam).imag();
        for (int k = 1; k < count; ++k) {
            ratio *= kx.ratio[k - 1] / ka.ratio[k - 1];
            out[k] = gauss * (ratio * lam).imag();
        }
    };
    auto res = quad::integrate_vec(f, count, br, ctrl.rel_tol, 0.0, ctrl.max_intervals);
    // At large t the contour integral is a small difference of O(1) pieces (the uniform term
    // cancels against the correction); the real-axis integrand then has neither cancellation
    // nor oscillation, so it takes over.
    bool cancels = !acceptable(res) || res.l1[0] > 1e3 * std::fabs(res.value[0]);
    if (cancels && x * s_max < 60.0) {
        auto ra = real_axis_integral(a, order0, count, x, t, ctrl);
        if (acceptable(ra)) {
            std::vector<ExactQ> out;
            for (int k = 0; k < count; ++k)
                out.push_back(from_real_axis(a, order0 + k, x, t, ra.value[k], ra.error[k], ra.l1[k]));
            return out;
        }
    }
    if (!acceptable(res)) {
        std::ostringstream os;
        os << "q_exact: contour quadrature failed (order " << order0 << ", x " << x << ", t " << t << ")";
        throw NumericFailure(os.str());
    }
    std::vector<ExactQ> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k)
        out.push_back(finish(a, order0 + k, x, t, res.value[k], res.error[k], res.l1[k]));
    return out;
}

ExactQ q_exact_full(double a, double order, double x, double t, const SeriesControl& ctrl, QMethod method) {
    if (method == QMethod::RealAxis) {
        check_point(a, x, t);
        auto ra = real_axis_integral(a, order, 1, x, t, ctrl);
        if (!ra.converged) throw NumericFailure("q_exact: real-axis quadrature did not converge");
        return from_real_axis(a, order, x, t, ra.value[0], ra.error[0], ra.l1[0]);
    }
    return q_exact_orders(a, order, 1, x, t, ctrl)[0];
}

double q_exact(double a, double order, double x, double t, const SeriesControl& ctrl) {
    return q_exact_full(a, order, x, t, ctrl).value;
}

DensityValue q_exact(const Geometry& g, const EvalPoint& p, const SeriesControl& ctrl) {
    auto r = q_exact_full(g.a, g.nu, p.x, p.t, ctrl);
    DensityValue dv;
    dv.value = r.value;
    dv.regime = Regime::Exact;
    dv.abs_err = r.abs_err;
    std::ostringstream os;
    os << "abs_err<=" << r.abs_err;
    dv.error_order = os.str();
    return dv;
}

double ell(double a, double x, double t) {
    check_point(a, x, t);
    if (x < std::sqrt(t)) return std::pow(std::log(t), 2) / std::log(x + 2.0 * a);
    return std::log(t / x);
}

double ell0(double a, double x, double t) {
    check_point(a, x, t);
    if (x < std::sqrt(t)) return (1.0 - a * a / (x * x)) * std::pow(std::log(t), 2) / (2.0 * std::log(x / a));
    return 2.0 * std::log(t / x);
}

DensityValue q_asym_large_t(const Geometry& g, const EvalPoint& p) {
    double a = g.a, x = p.x, t = p.t;
    check_point(a, x, t);
    require(t > a * a, "q_asym_large_t: needs t > a^2");
    DensityValue dv;
    dv.error_order = "(1+o(1)) as t -> inf, uniform in x > a";
    if (g.d >= 3) {
        double nu = g.nu;
        double lv = 2.0 * nu * std::log(a) + specfun::log_lambda_nu(nu, a * x / t) +
                    specfun::log_heat_kernel(g.d, t, x) + std::log1p(-std::pow(a / x, 2.0 * nu));
        dv.value = std::exp(lv);
        dv.regime = Regime::LargeTimeHighDim;
        return dv;
    }
    dv.ell = ell(a, x, t);
    dv.ell0 = ell0(a, x, t);
    double p2 = specfun::heat_kernel(2, t, x);
    if (x <= std::sqrt(t)) {
        double lt = std::log(t / (a * a));
        dv.value = p2 * 4.0 * M_PI * std::log(x / a) / (lt * lt);
        dv.regime = Regime::LargeTimeInner;
    } else {
        dv.value = p2 * specfun::lambda_nu(0.0, a * x / t);
        dv.regime = Regime::LargeTimeOuter;
    }
    return dv;
}

DensityValue q_uniform(const Geometry& g, const EvalPoint& p) {
    DensityValue dv;
    dv.value = std::exp(log_q_uniform(g.a, g.nu, p.x, p.t));
    dv.regime = Regime::LargeDistance;
    dv.error_order = "O(t/(a x))";
    return dv;
}

std::pair<double, double> first_passage_two_sided(double y, double b, double t, int n_terms) {
    require(b > 0 && y > 0 && y < b, "first_passage_two_sided: need 0 < y < b");
    require(t > 0, "first_passage_two_sided: t must be positive");
    auto q0 = [&](double z) { return z / std::sqrt(2.0 * M_PI * t * t * t) * std::exp(-z * z / (2.0 * t)); };
    int n_auto = static_cast<int>(std::ceil((y + std::sqrt(2.0 * 60.0 * t)) / (2.0 * b))) + 1;
    int n = std::max(n_terms, n_auto);
    double before = q0(y), after = 0.0;
    for (int k = 1; k <= n; ++k) {
        double zp = 2.0 * k * b + y, zm = 2.0 * k * b - y;
        before += q0(zp) - q0(zm);
        after += q0(zm) - q0(zp);
    }
    return {before, after};
}

} // namespace caloric::hitting_time
