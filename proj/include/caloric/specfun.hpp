#pragma once

#include <complex>
#include <vector>

#include "caloric/types.hpp"

namespace caloric::specfun {

// (2 pi t)^{-dim/2} exp(-r^2 / 2t)
double heat_kernel(double dim, double t, double r);
double log_heat_kernel(double dim, double t, double r);

// (2 pi)^{nu+1} / (2 y^nu K_nu(y)); y = 0 gives the limit 2 pi^{nu+1} / Gamma(nu) (nu > 0).
double lambda_nu(double nu, double y);
double log_lambda_nu(double nu, double y);

// Modified Bessel functions of real order and positive argument.
// bessel_k returns 0 when K underflows; use bessel_k_checked or log_bessel_k to see that.
struct Checked {
    double value = 0.0;
    bool underflow = false;
    bool overflow = false;
};
Checked bessel_k_checked(double nu, double x);
double bessel_k(double nu, double x);
double bessel_k_scaled(double nu, double x);   // e^x K_nu(x)
double log_bessel_k(double nu, double x);
double bessel_i(double nu, double x);
double bessel_i_scaled(double nu, double x);   // e^{-x} I_nu(x)
double log_bessel_i(double nu, double x);

// K_nu(x) / K_{nu+n}(x), via the ratio form of the forward recurrence.
double bessel_k_ratio(double nu, int n, double x);
// log K_{nu+k}(x) for k = 0..n, in one pass.
std::vector<double> log_bessel_k_sequence(double nu, int n, double x);

// Ordinary Bessel functions (backed by Boost.Math).
double bessel_j(double nu, double x);
double bessel_y(double nu, double x);

// e^w K_nu(w) for real nu and Re w >= 0, w != 0.
std::complex<double> bessel_k_scaled(double nu, std::complex<double> w);

// Ratios K_{nu+k}(w) / K_{nu+k-1}(w) for k = 1..n, together with e^w K_nu(w).
struct KSequence {
    std::complex<double> k0_scaled;
    std::vector<std::complex<double>> ratio;   // ratio[k-1] = K_{nu+k} / K_{nu+k-1}
};
KSequence bessel_k_sequence(double nu, int n, std::complex<double> w);

// Gegenbauer polynomial C_n^lambda(x), lambda > 0, by three-term recurrence.
double gegenbauer(int n, double lambda, double x);
// C_0 .. C_n at x.
std::vector<double> gegenbauer_all(int n, double lambda, double x);

// Normalized zonal eigenfunction on S^{d-1}, d = 2 nu + 2, measure sin^{2nu} / mu_d.
// Requires nu > 0; the planar case uses the cosine basis instead.
double eigenfunction_h(int n, double nu, double theta);
// h_n(0) h_n(theta) without forming either factor; for nu = 0 the cosine-basis analogue
// (1 for n = 0, 2 cos(n theta) otherwise).
double eigen_product_at_pole(int n, double nu, double theta);

namespace detail {
// log K_nu(y) for complex order nu and real y > 0 (value may be complex).
std::complex<double> log_bessel_k_complex_order(std::complex<double> nu, double y, double rel_tol = 1e-13);
// (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi);
}

} // namespace caloric::specfun
