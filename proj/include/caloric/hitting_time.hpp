#pragma once

#include <utility>
#include <vector>

#include "caloric/types.hpp"

namespace caloric::hitting_time {

// One-dimensional first-passage density of level a from x > a.
double q1(double a, double x, double t);

// Hitting-time density of the ball of radius a for the Bessel process of the given order
// (d = 2 order + 2 for Brownian motion in R^d).
struct ExactQ {
    double value = 0.0;          // underflows to 0 far in the tail; log_value stays finite
    double log_value = 0.0;
    double uniform_ratio = 1.0;  // value / uniform form, computed without forming either
    double abs_err = 0.0;
    // contour integral J with value = (a/x)^order exp(-(x-a)^2/2t) J / pi; ratios of J across
    // orders are what the site series need
    double contour = 0.0;
    double contour_err = 0.0;
    double contour_l1 = 0.0;
};

enum class QMethod {
    SaddleContour,  // integral along Im(lambda) = (x-a)/t in the Hankel representation
    RealAxis        // eigenfunction integral on the real spectral axis
};

ExactQ q_exact_full(double a, double order, double x, double t, const SeriesControl& ctrl = {},
                    QMethod method = QMethod::SaddleContour);

double q_exact(double a, double order, double x, double t, const SeriesControl& ctrl = {});

// Orders order0 + k for k = 0..count-1 evaluated on one shared quadrature mesh.
std::vector<ExactQ> q_exact_orders(double a, double order0, int count, double x, double t,
                                   const SeriesControl& ctrl = {});

// Brownian motion in R^d.
DensityValue q_exact(const Geometry& g, const EvalPoint& p, const SeriesControl& ctrl = {});

// Large-time asymptotic form; d = 2 switches branch at x = sqrt(t) without blending.
DensityValue q_asym_large_t(const Geometry& g, const EvalPoint& p);

// Uniform form (x-a)/(sqrt(2 pi) t^{3/2}) e^{-(x-a)^2/2t} (a/x)^{(d-1)/2}.
DensityValue q_uniform(const Geometry& g, const EvalPoint& p);
double log_q_uniform(double a, double order, double x, double t);

// Log-correction factors of the planar site law (natural logarithms).
double ell(double a, double x, double t);
double ell0(double a, double x, double t);

// One-dimensional motion from y in (0, b): density of exiting at 0 before reaching b, and of
// exiting at 0 after having touched b. Their sum is the free first-passage density at 0.
std::pair<double, double> first_passage_two_sided(double y, double b, double t, int n_terms = 0);

} // namespace caloric::hitting_time
