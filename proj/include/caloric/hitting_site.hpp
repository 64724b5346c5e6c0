#pragma once

#include <complex>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "caloric/types.hpp"

namespace caloric::hitting_site {

// K_0(av) / K_|lam|(av): characteristic function of the limit argument law.
double phi_char(double a, double lam, double v);

enum class InversionRoute {
    Auto,            // real axis unless its roundoff floor exceeds the tolerance
    RealAxis,        // (1/pi) int_0^inf Phi(lam) cos(lam theta) dlam
    ShiftedContour   // same integral along Im(lam) = -eta, eta ~ y sin(theta)
};

// F(theta) = (1/2pi) int_R K_base(y) / K_lam(y) e^{-i lam theta} dlam and its derivative.
// base = 0 gives the limit argument density at y = av; base = 1/2 feeds the d = 3 site law.
// Caches spectral meshes; one instance per thread.
class LimitInverter {
public:
    LimitInverter(double y, double base_order, const SeriesControl& ctrl = {});

    // shift: the result is multiplied by e^{shift}, applied before exponentiation where possible
    // floor, when given, receives the absolute roundoff floor of the returned value
    double value(double theta, InversionRoute route = InversionRoute::Auto, double shift = 0.0,
                 double* floor = nullptr) const;
    double derivative(double theta, InversionRoute route = InversionRoute::Auto, double shift = 0.0,
                      double* floor = nullptr) const;
    // Real-axis value together with its absolute roundoff floor.
    double real_axis(double theta, int deriv, double* floor) const;
    double contour(double theta, int deriv, double shift = 0.0, double* floor = nullptr) const;

    double y() const { return y_; }
    double base() const { return base_; }
    double lambda_max() const { return lam_max_; }

private:
    double pick(double theta, int deriv, InversionRoute route, double shift, double* floor) const;
    struct Mesh {
        double eta = 0.0;
        std::vector<double> xi, w;
        std::vector<std::complex<double>> log_phi;
    };
    const Mesh& mesh(int band, int level) const;

    double y_, base_, log_k_base_;
    SeriesControl ctrl_;
    double lam_max_ = 0.0;
    std::vector<double> lam_, wphi_;   // real-axis nodes and weight * Phi
    double l1_ = 0.0;
    mutable std::map<std::pair<int, int>, Mesh> cache_;
};

// Limit density of the unwound argument arg B(sigma_a) given sigma_a = t, x/t -> v (d = 2).
double f_limit(double a, double theta, double v, const SeriesControl& ctrl = {},
               InversionRoute route = InversionRoute::Auto);

// Fourier coefficient of the planar conditional site law: 1 for n = 0, otherwise
// 2 (x/a)^n q^{(2n+2)}(x,t) / q^{(2)}(x,t).
double alpha_coeff(int n, double a, double x, double t, const SeriesControl& ctrl = {});

// Conditional site density g(theta; x, t) relative to the uniform law on the sphere,
// from the eigenfunction series with coefficients (x/a)^n q^{n+nu} / q^nu.
class SiteSeries {
public:
    SiteSeries(const Geometry& g, double x, double t, const SeriesControl& ctrl = {});

    double operator()(double theta) const;      // colatitude in [0, pi]
    double floor(double theta) const;           // absolute error estimate at theta
    double q() const { return q_; }             // hitting-time density at order nu
    double joint(double theta) const { return (*this)(theta) * q_; }
    const std::vector<double>& ratios() const { return r_; }
    int terms() const { return static_cast<int>(r_.size()); }
    bool noise_limited() const { return noise_limited_; }

private:
    Geometry g_;
    double x_, t_, q_ = 0.0;
    std::vector<double> r_, r_err_;
    bool noise_limited_ = false;
};

double g_density(const Geometry& g, double x, double t, SiteAngle theta, const SeriesControl& ctrl = {});

enum class GRoute {
    Auto,     // series while its roundoff floor is below tolerance, then the relative route
    Series,   // sum of K_nu / K_{nu+n} H_n
    Fold,     // d = 2: 2 pi sum_k f(theta + 2 pi k)
    Mehler    // d = 3: Abel transform of the half-order folded inverse
};

// Limit site density as x/t -> v, t -> inf, relative to the uniform law on the sphere.
class LimitSite {
public:
    LimitSite(const Geometry& g, double av, const SeriesControl& ctrl = {});

    double operator()(double theta, GRoute route = GRoute::Auto) const;
    // e^{av(1 - cos theta)} g(theta), finite where g itself underflows
    double rescaled(double theta, GRoute route = GRoute::Auto) const;
    double series(double theta, double* floor = nullptr) const;
    double fold(double theta, double shift = 0.0) const;
    double mehler(double theta, double shift = 0.0) const;
    // -S'(phi) of the Mehler form (d = 3); S is the alternating 2 pi-fold of the half-order inverse.
    double mehler_kernel(double phi, double shift = 0.0, double* floor = nullptr) const;

    // false when n_max terms do not reach the tail bound; series() then throws
    bool series_complete() const { return series_complete_; }
    const std::vector<double>& coeff() const { return c_; }
    int terms() const { return static_cast<int>(c_.size()); }
    const Geometry& geometry() const { return g_; }
    double av() const { return av_; }
    const LimitInverter& inverter() const;

private:
    double evaluate(double theta, GRoute route, double shift) const;

    Geometry g_;
    double av_;
    SeriesControl ctrl_;
    std::vector<double> c_;
    bool series_complete_ = true;
    mutable std::unique_ptr<LimitInverter> inv_;
};

double g_limit(const Geometry& g, double av, double theta, const SeriesControl& ctrl = {},
               GRoute route = GRoute::Auto);

// Lower-bound function for the planar joint density of (arg, time), |theta| < pi/2.
double psi_tangent(double a, double x, double t, double theta);

// Large-v conditional site density relative to m_a (as g); hard regime switch at
// |cos theta| = (av)^{-1/3}. Equatorial: comparison scale only. Far side: upper bound.
DensityValue large_v_site_density(const Geometry& g, double v, double theta, double t);

// Joint density h relative to m_a(dxi) dt for large v:
// omega_{d-1} a^{2nu} (a x cos theta / t) p_t(|x - xi|).
DensityValue large_v_joint(const Geometry& g, double x, double t, double theta);

// Weak limit of the rescaled colatitude law: omega_{d-2} 1(theta <= pi/2) cos theta sin^{d-2} theta.
double large_v_weak_limit(const Geometry& g, double theta);

// Small-time joint density near the sphere, h_a(a + y, t, phi).
DensityValue h_small_t(const Geometry& g, double y, double t, double phi);

// Joint density h_a(z, t, phi) = g(phi; z, t) q(z, t) relative to mu_d^{-1} sin^{d-2} dphi dt.
double h_exact(const Geometry& g, double z, double t, double phi, const SeriesControl& ctrl = {},
               double* abs_err = nullptr);

enum class Envelope { Lemma43, Lemma45_small, Lemma45_large, Prop41_upper, Prop41_lower, Cor41, Lemma46_crucial };
const char* to_string(Envelope e);

struct EnvelopePoint {
    double y = 0.0;    // z - a (ignored by Cor41, which sits on the tangent plane)
    double t = 0.0;
    double phi = 0.0;
};

struct EnvelopeReport {
    Envelope which = Envelope::Lemma43;
    double grid_max_ratio = 0.0;
    double grid_min_ratio = 0.0;
    double fitted_constant = 0.0;   // max ratio for upper bounds, min ratio for lower bounds
    int evaluated = 0;
    int excluded = 0;               // outside the bound's domain or below the noise floor
    int violations = 0;             // non-finite or non-positive ratio inside the domain
};

// Evaluates h exactly on the grid and divides by the bound shape (unknown constants set to 1).
EnvelopeReport envelope_check(const Geometry& g, const std::vector<EnvelopePoint>& grid, Envelope which,
                              const SeriesControl& ctrl = {});
double envelope_shape(const Geometry& g, const EnvelopePoint& p, Envelope which);
bool envelope_domain(const Geometry& g, const EnvelopePoint& p, Envelope which);

// Transition density of the colatitude of spherical Brownian motion (d = 2 nu + 2 >= 3),
// relative to sin^{2nu} theta dtheta / mu_d.
double legendre_density(double nu, double t, double theta0, double theta, const SeriesControl& ctrl = {});
// Small-time form omega_{d-1} p_t^{(d-1)}(theta).
double legendre_small_t(double nu, double t, double theta);

// Poisson kernel of the exterior of the ball relative to m_a.
double poisson_kernel(double z, const Geometry& g, double phi);

enum class CMIdentity { Lemma31, Lemma32 };
// Conditional expectation implied by the identity, from exact hitting-time densities:
// Lemma31: E[exp(beta_nu int ds / X^2) | T_a = t] = q^nu / (q1 (a/x)^{nu+1/2}), beta_nu = (1 - 4 nu^2)/8.
// Lemma32: E[exp(-lam(lam+2nu)/2 int ds / X^2) | T_a = t] = (x/a)^lam q^{lam+nu} / q^nu.
double cm_functional(CMIdentity which, double nu, double lam, double a, double x, double t,
                     const SeriesControl& ctrl = {});

} // namespace caloric::hitting_site
