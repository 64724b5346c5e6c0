#include "caloric/specfun.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace caloric {

double sphere_area(double n) {
    return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

Geometry Geometry::make(double a, int d) {
    require(a > 0 && std::isfinite(a), "Geometry: radius must be positive");
    require(d >= 2, "Geometry: dimension must be at least 2");
    Geometry g;
    g.a = a;
    g.d = d;
    g.nu = 0.5 * d - 1.0;
    g.omega_dm1 = sphere_area(d);
    g.omega_dm2 = sphere_area(d - 1);
    g.mu_d = g.omega_dm1 / g.omega_dm2;
    return g;
}

void SeriesControl::validate() const {
    require(rel_tol > 0, "SeriesControl: rel_tol must be positive");
    require(abs_tol >= 0, "SeriesControl: abs_tol must be non-negative");
    require(n_max >= 1, "SeriesControl: n_max must be at least 1");
    require(quad_points >= 8, "SeriesControl: quad_points must be at least 8");
}

SiteAngle SiteAngle::colatitude(double th) {
    require(th >= 0 && th <= M_PI, "SiteAngle: colatitude must lie in [0, pi]");
    return {th, AngleKind::Colatitude};
}

SiteAngle SiteAngle::principal(double th) {
    require(th > -M_PI && th <= M_PI, "SiteAngle: principal argument must lie in (-pi, pi]");
    return {th, AngleKind::PrincipalArg};
}

double SiteAngle::polar() const {
    if (kind == AngleKind::Colatitude) return theta;
    double r = std::remainder(theta, 2.0 * M_PI);
    return std::fabs(r);
}

const char* to_string(Regime r) {
    switch (r) {
    case Regime::Exact: return "exact";
    case Regime::SeriesExact: return "series";
    case Regime::LargeTimeInner: return "large_t_inner";
    case Regime::LargeTimeOuter: return "large_t_outer";
    case Regime::LargeTimeHighDim: return "large_t";
    case Regime::LargeDistance: return "uniform";
    case Regime::LargeVInterior: return "large_v_interior";
    case Regime::LargeVEquatorial: return "large_v_equatorial";
    case Regime::LargeVFarSide: return "large_v_far_side";
    case Regime::DiscInterior: return "disc_interior";
    case Regime::DiscRim: return "disc_rim";
    case Regime::SmallTime: return "small_t";
    case Regime::MonteCarlo: return "monte_carlo";
    }
    return "unknown";
}

} // namespace caloric

namespace caloric::specfun {

namespace {

constexpr double EPS = 1e-16;
constexpr double XMIN = 2.0;
constexpr int MAXIT = 1000000;
constexpr double BIG = 1e280;
const double LOG_BIG = std::log(BIG);

using cplx = std::complex<double>;

// Temme's series for K_mu, K_{mu+1}, |mu| <= 1/2, |x| <= 2 (unscaled).
template <class T>
void k_temme(double mu, T x, T& k0, T& k1) {
    double gam1, gam2, gampl, gammi;
    detail::temme_gammas(mu, gam1, gam2, gampl, gammi);
    T x2 = 0.5 * x;
    double pimu = M_PI * mu;
    double fact = std::fabs(pimu) < EPS ? 1.0 : pimu / std::sin(pimu);
    T d = -std::log(x2);
    T e = mu * d;
    T fact2 = std::abs(e) < EPS ? T(1.0) : T(std::sinh(e) / e);
    T ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    T sum = ff;
    T ee = std::exp(e);
    T p = 0.5 * ee / gampl;
    T q = 0.5 / (ee * gammi);
    T c = 1.0;
    d = x2 * x2;
    T sum1 = p;
    int i = 1;
    for (; i <= MAXIT; ++i) {
        double di = i;
        ff = (di * ff + p + q) / (di * di - mu * mu);
        c *= d / di;
        p /= (di - mu);
        q /= (di + mu);
        T del = c * ff;
        sum += del;
        T del1 = c * (p - di * ff);
        sum1 += del1;
        if (std::abs(del) < std::abs(sum) * EPS) break;
    }
    if (i > MAXIT) throw NumericFailure("bessel K: Temme series did not converge");
    k0 = sum;
    k1 = sum1 * (2.0 / x);
}

// Steed's continued fraction for e^x K_mu, e^x K_{mu+1}, |x| >= 2, Re x >= 0.
template <class T>
void k_steed(double mu, T x, T& k0, T& k1) {
    T b = 2.0 * (1.0 + x);
    T d = 1.0 / b;
    T h = d, delh = d;
    T q1 = 0.0, q2 = 1.0;
    double a1 = 0.25 - mu * mu;
    T q = a1, c = a1;
    double a = -a1;
    T s = 1.0 + q * delh;
    int i = 2;
    for (; i <= MAXIT; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / double(i);
        T qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        T dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < EPS) break;
    }
    if (i > MAXIT) throw NumericFailure("bessel K: continued fraction did not converge");
    h = a1 * h;
    k0 = std::sqrt(M_PI / (2.0 * x)) / s;
    k1 = k0 * (mu + x + 0.5 - h) / x;
}

// e^x K_mu(x), e^x K_{mu+1}(x) at the reduced order mu in [-1/2, 1/2).
template <class T>
void k_reduced_scaled(double mu, T x, T& k0, T& k1) {
    if (std::abs(x) < XMIN) {
        k_temme(mu, x, k0, k1);
        T ex = std::exp(x);
        k0 *= ex;
        k1 *= ex;
    } else {
        k_steed(mu, x, k0, k1);
    }
}

void split_order(double nu, int& nl, double& mu) {
    nl = static_cast<int>(std::floor(nu + 0.5));
    mu = nu - nl;
}

} // namespace

namespace detail {

void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
    gampl = 1.0 / std::tgamma(1.0 + mu);
    gammi = 1.0 / std::tgamma(1.0 - mu);
    gam2 = 0.5 * (gammi + gampl);
    if (std::fabs(mu) >= 0.1) {
        gam1 = (gammi - gampl) / (2.0 * mu);
    } else {
        // odd Taylor coefficients of 1/Gamma(1+z)
        static const double b[] = {0.57721566490153286061, -0.042002635034095235529,
                                   -0.042197734555544336748, 0.0072189432466630995424,
                                   -0.00021524167411495097282, -0.000020134854780788238656,
                                   1.1330272319816958824e-6, 6.1160951044814158179e-9};
        double m2 = mu * mu, acc = 0.0, p = 1.0;
        for (double bk : b) {
            acc += bk * p;
            p *= m2;
        }
        gam1 = -acc;
    }
}

std::complex<double> log_bessel_k_complex_order(std::complex<double> nu, double y, double rel_tol) {
    require(y > 0, "log_bessel_k_complex_order: argument must be positive");
    cplx us = std::asinh(nu / y);
    double beta = us.imag();
    if (std::fabs(beta) > 0.5 * M_PI - 0.02)
        throw NumericFailure("complex-order K: saddle too close to the edge of the strip");
    double cb = std::cos(beta);
    double rp = std::asinh(nu.real() / (y * cb));
    auto expo = [&](double r) {
        cplx u(r, beta);
        return -y * std::cosh(u) + nu * u;
    };
    double e0 = expo(rp).real();
    double curv = y * cb * std::cosh(rp);
    double h = std::min(0.5, 0.6 / std::sqrt(curv));
    // trapezoid nodes rp + offset + j*step for all integers j, cut where the integrand is negligible
    auto sweep = [&](double step, double offset) {
        cplx acc = 0.0;
        for (int dir = 1; dir >= -1; dir -= 2) {
            for (int j = (dir == 1 ? 0 : 1);; ++j) {
                cplx ex = expo(rp + offset + dir * j * step) - e0;
                if (ex.real() < -46.0 && j > 2) break;
                acc += std::exp(ex);
                if (j > 200000) throw NumericFailure("complex-order K: integrand does not decay");
            }
        }
        return acc;
    };
    cplx sum = sweep(h, 0.0);
    cplx t_old = sum * h;
    for (int iter = 0; iter < 12; ++iter) {
        cplx mids = sweep(h, 0.5 * h);
        sum += mids;
        h *= 0.5;
        cplx t_new = sum * h;
        if (std::abs(t_new - t_old) <= rel_tol * std::abs(t_new)) {
            return std::log(0.5 * t_new) + e0;
        }
        t_old = t_new;
    }
    throw NumericFailure("complex-order K: trapezoid rule did not settle");
}

} // namespace detail

Checked bessel_k_checked(double nu, double x) {
    require(x > 0, "bessel_k: argument must be positive");
    double lk = log_bessel_k(nu, x);
    Checked c;
    if (lk < std::log(std::numeric_limits<double>::min())) {
        c.value = 0.0;
        c.underflow = true;
    } else if (lk > std::log(std::numeric_limits<double>::max())) {
        c.value = std::numeric_limits<double>::infinity();
        c.overflow = true;
    } else {
        c.value = std::exp(lk);
    }
    return c;
}

double bessel_k(double nu, double x) { return bessel_k_checked(nu, x).value; }

double bessel_k_scaled(double nu, double x) { return std::exp(log_bessel_k(nu, x) + x); }

double log_bessel_k(double nu, double x) {
    require(x > 0 && std::isfinite(x), "bessel_k: argument must be positive");
    nu = std::fabs(nu);
    int nl;
    double mu;
    split_order(nu, nl, mu);
    double k0, k1;
    k_reduced_scaled(mu, x, k0, k1);
    if (nl == 0) return std::log(k0) - x;
    double lscale = 0.0;
    for (int j = 1; j < nl; ++j) {
        double k2 = k0 + 2.0 * (mu + j) / x * k1;
        k0 = k1;
        k1 = k2;
        if (k1 > BIG) {
            k0 /= BIG;
            k1 /= BIG;
            lscale += LOG_BIG;
        }
    }
    return std::log(k1) + lscale - x;
}

std::vector<double> log_bessel_k_sequence(double nu, int n, double x) {
    require(x > 0, "bessel_k: argument must be positive");
    require(nu >= 0, "log_bessel_k_sequence: order must be non-negative");
    std::vector<double> out(n + 1);
    out[0] = log_bessel_k(nu, x);
    double nuk = nu;
    // ratio r = K_{nu+k}/K_{nu+k-1}; start from K_{nu+1}/K_nu computed directly
    if (n == 0) return out;
    double r = std::exp(log_bessel_k(nu + 1.0, x) - out[0]);
    out[1] = out[0] + std::log(r);
    for (int k = 2; k <= n; ++k) {
        nuk = nu + (k - 1);
        r = 1.0 / r + 2.0 * nuk / x;
        out[k] = out[k - 1] + std::log(r);
    }
    return out;
}

double bessel_k_ratio(double nu, int n, double x) {
    require(n >= 0, "bessel_k_ratio: n must be non-negative");
    require(x > 0, "bessel_k_ratio: argument must be positive");
    nu = std::fabs(nu);
    if (n == 0) return 1.0;
    int nl;
    double mu;
    split_order(nu, nl, mu);
    double k0, k1;
    k_reduced_scaled(mu, x, k0, k1);
    double r = k1 / k0;   // K_{mu+1}/K_mu
    for (int j = 1; j <= nl; ++j) r = 1.0 / r + 2.0 * (mu + j) / x;
    // r = K_{nu+1}/K_nu
    double lsum = std::log(r);
    for (int k = 2; k <= n; ++k) {
        r = 1.0 / r + 2.0 * (nu + k - 1) / x;
        lsum += std::log(r);
    }
    return std::exp(-lsum);
}

double log_bessel_i(double nu, double x) {
    require(x >= 0, "bessel_i: argument must be non-negative");
    require(nu >= 0, "bessel_i: order must be non-negative");
    if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    int nl;
    double mu;
    split_order(nu, nl, mu);
    double xi = 1.0 / x, xi2 = 2.0 * xi;
    // I'_nu / I_nu by Lentz
    double h = nu * xi;
    if (h < 1e-300) h = 1e-300;
    double b = xi2 * nu, d = 0.0, c = h;
    int i = 1;
    for (; i <= MAXIT; ++i) {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        double del = c * d;
        h = del * h;
        if (std::fabs(del - 1.0) < EPS) break;
    }
    if (i > MAXIT) throw NumericFailure("bessel I: continued fraction did not converge");
    double ril = 1.0, ripl = h, lscale = 0.0;
    double fact = nu * xi;
    for (int l = nl; l >= 1; --l) {
        double ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
        if (std::fabs(ril) > BIG) {
            ril /= BIG;
            ripl /= BIG;
            lscale += LOG_BIG;
        }
    }
    double f = ripl / ril;
    double k0, k1;
    k_reduced_scaled(mu, x, k0, k1);
    double kp = mu * xi * k0 - k1;
    double rimu = xi / (f * k0 - kp);   // e^{-x} I_mu
    return std::log(rimu) + x - (std::log(std::fabs(ril)) + lscale);
}

double bessel_i(double nu, double x) { return std::exp(log_bessel_i(nu, x)); }

double bessel_i_scaled(double nu, double x) { return std::exp(log_bessel_i(nu, x) - x); }

double bessel_j(double nu, double x) { return boost::math::cyl_bessel_j(nu, x); }

double bessel_y(double nu, double x) { return boost::math::cyl_neumann(nu, x); }

KSequence bessel_k_sequence(double nu, int n, std::complex<double> w) {
    require(w.real() >= 0 && std::abs(w) > 0, "bessel_k: need Re w >= 0 and w != 0");
    require(nu >= 0, "bessel_k_sequence: order must be non-negative");
    int nl;
    double mu;
    split_order(nu, nl, mu);
    cplx k0, k1;
    k_reduced_scaled(mu, w, k0, k1);
    cplx r = k1 / k0;
    cplx kv = k0;
    for (int j = 1; j <= nl; ++j) {
        kv *= r;
        r = 1.0 / r + 2.0 * (mu + j) / w;
    }
    KSequence s;
    s.k0_scaled = kv;
    s.ratio.resize(n);
    for (int k = 1; k <= n; ++k) {
        s.ratio[k - 1] = r;
        r = 1.0 / r + 2.0 * (nu + k) / w;
    }
    return s;
}

std::complex<double> bessel_k_scaled(double nu, std::complex<double> w) {
    return bessel_k_sequence(std::fabs(nu), 0, w).k0_scaled;
}

double heat_kernel(double dim, double t, double r) { return std::exp(log_heat_kernel(dim, t, r)); }

double log_heat_kernel(double dim, double t, double r) {
    require(t > 0, "heat_kernel: time must be positive");
    return -0.5 * dim * std::log(2.0 * M_PI * t) - r * r / (2.0 * t);
}

double log_lambda_nu(double nu, double y) {
    require(y >= 0, "lambda_nu: argument must be non-negative");
    if (y == 0.0) {
        require(nu > 0, "lambda_nu: y = 0 needs nu > 0");
        return std::log(2.0) + (nu + 1.0) * std::log(M_PI) - std::lgamma(nu);
    }
    return (nu + 1.0) * std::log(2.0 * M_PI) - std::log(2.0) - nu * std::log(y) - log_bessel_k(nu, y);
}

double lambda_nu(double nu, double y) { return std::exp(log_lambda_nu(nu, y)); }

std::vector<double> gegenbauer_all(int n, double lambda, double x) {
    require(n >= 0, "gegenbauer: degree must be non-negative");
    require(lambda > 0, "gegenbauer: parameter must be positive");
    std::vector<double> c(n + 1);
    c[0] = 1.0;
    if (n >= 1) c[1] = 2.0 * lambda * x;
    for (int k = 2; k <= n; ++k)
        c[k] = (2.0 * x * (k + lambda - 1.0) * c[k - 1] - (k + 2.0 * lambda - 2.0) * c[k - 2]) / k;
    return c;
}

double gegenbauer(int n, double lambda, double x) { return gegenbauer_all(n, lambda, x)[n]; }

double eigenfunction_h(int n, double nu, double theta) {
    require(n >= 0, "eigenfunction_h: degree must be non-negative");
    require(nu > 0, "eigenfunction_h: needs d >= 3; the planar case uses the cosine basis");
    double mu_d = std::sqrt(M_PI) * std::exp(std::lgamma(nu + 0.5) - std::lgamma(nu + 1.0));
    double lg2 = std::log(M_PI) + std::lgamma(n + 2.0 * nu) - (2.0 * nu - 1.0) * std::log(2.0) -
                 2.0 * std::lgamma(nu) - std::log(n + nu) - std::lgamma(n + 1.0);
    return std::sqrt(mu_d) * std::exp(-0.5 * lg2) * gegenbauer(n, nu, std::cos(theta));
}

double eigen_product_at_pole(int n, double nu, double theta) {
    require(n >= 0 && nu >= 0, "eigen_product_at_pole: need n >= 0 and nu >= 0");
    if (nu == 0.0) return n == 0 ? 1.0 : 2.0 * std::cos(n * theta);
    return (nu + n) / nu * gegenbauer(n, nu, std::cos(theta));
}

} // namespace caloric::specfun
