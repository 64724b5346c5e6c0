#pragma once

#include "caloric/types.hpp"

namespace caloric::drifted {

// Constant drift -v e; only the start x e on the drift axis is implemented.
struct DriftSpec {
    double v = 0.0;
    bool aligned = true;
    void validate() const;
};

// int e^{-z cos theta} m_a(d xi) = 2^nu sqrt(pi) Gamma(nu+1/2) I_nu(z) / (mu_d z^nu), z = a v.
double surface_laplace(const Geometry& g, double z);

// int e^{-z cos theta} g(theta; x, t) m_a(d xi) from the site series in closed form.
// Throws NumericFailure once the alternating sum loses more than half the digits.
double surface_integral(const Geometry& g, double x, double t, double z, const SeriesControl& ctrl = {});

// Hitting-time density of the drifted motion: e^{vx - v^2 t/2} q(x,t) times the surface integral.
double drift_time_density(const Geometry& g, double x, double t, const DriftSpec& drift,
                          const SeriesControl& ctrl = {});
// Xi a^{2nu} Lambda_nu(av) p_t(|x - t v|) for t -> inf with x/t -> v.
DensityValue drift_time_asym(const Geometry& g, double x, double t, const DriftSpec& drift,
                             const SeriesControl& ctrl = {});

// Xi_{av} = int e^{-av cos theta} g(theta; av) sin^{d-2} theta dtheta / mu_d.
double xi_const(const Geometry& g, double av, const SeriesControl& ctrl = {});
// e^{av} Xi_{av}; finite where Xi underflows.
double xi_const_scaled(const Geometry& g, double av, const SeriesControl& ctrl = {});
// Large-av form omega_{d-2} av / ((d-1) Lambda_nu(av)).
DensityValue xi_asym(const Geometry& g, double av);

// Conditional site density of the drifted motion relative to m_a (aligned start).
double drift_site_density(const Geometry& g, double x, double t, double theta, const DriftSpec& drift,
                          const SeriesControl& ctrl = {});
// Limit e^{-av cos theta} g(theta; av) / Xi_{av}.
double drift_site_limit(const Geometry& g, double av, double theta, const SeriesControl& ctrl = {});
// Large-v form (d-1) mu_d cos theta, for cos theta >= (av)^{-1/3}.
DensityValue drift_site_large_v(const Geometry& g, double av, double theta);
// Weak limit of the colatitude law: (d-1) 1(theta < pi/2) sin^{d-2} theta cos theta.
double drift_weak_limit(const Geometry& g, double theta);

// Density of the projection of the hitting site on the equatorial disc relative to the uniform
// law on the disc, at |w|/a = w_norm.
DensityValue projected_disc_density(const Geometry& g, double w_norm, double av, const SeriesControl& ctrl = {});

} // namespace caloric::drifted
