#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace caloric {

// Raised when an evaluation cannot reach its requested tolerance.
class NumericFailure : public std::runtime_error {
public:
    explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

// Ball radius a and dimension d, with the derived constants used everywhere.
struct Geometry {
    double a = 1.0;
    int d = 2;
    double nu = 0.0;          // d/2 - 1
    double omega_dm1 = 0.0;   // area of the unit sphere S^{d-1}
    double omega_dm2 = 0.0;   // area of S^{d-2}; equals 2 for d = 2
    double mu_d = 0.0;        // omega_dm1 / omega_dm2

    static Geometry make(double a, int d);
};

// Area of the unit sphere in R^n, i.e. 2 pi^{n/2} / Gamma(n/2).
double sphere_area(double n);

struct SeriesControl {
    double rel_tol = 1e-12;
    double abs_tol = 1e-15;
    int n_max = 400;
    int quad_points = 16;          // Gauss-Legendre points per panel in fixed-panel rules
    int max_intervals = 4000;      // adaptive quadrature budget

    void validate() const;
};

struct EvalPoint {
    double x = 0.0;
    double t = 0.0;
    double v() const { return x / t; }
    double y(double a) const { return x - a; }
};

enum class AngleKind { Colatitude, PrincipalArg, WoundArg };

struct SiteAngle {
    double theta = 0.0;
    AngleKind kind = AngleKind::Colatitude;

    static SiteAngle colatitude(double th);
    static SiteAngle principal(double th);
    static SiteAngle wound(double th) { return {th, AngleKind::WoundArg}; }
    // colatitude in [0, pi] seen from the axis through the start point
    double polar() const;
};

enum class Regime {
    Exact,
    SeriesExact,
    LargeTimeInner,    // d = 2, x <= sqrt(t)
    LargeTimeOuter,    // d = 2, x > sqrt(t)
    LargeTimeHighDim,  // d >= 3
    LargeDistance,     // uniform small-t / large-v form
    LargeVInterior,
    LargeVEquatorial,
    LargeVFarSide,
    DiscInterior,
    DiscRim,
    SmallTime,
    MonteCarlo
};

const char* to_string(Regime r);

struct DensityValue {
    double value = 0.0;
    Regime regime = Regime::Exact;
    std::string error_order;   // e.g. "O(t/(a x))", "abs<=1e-12"
    double abs_err = 0.0;      // estimate when known, 0 otherwise
    bool bound_only = false;   // value is a comparison scale, not an estimate
    double ell = NAN;          // log-correction metadata of the site law, when defined
    double ell0 = NAN;         // log-correction metadata of the first cosine coefficient
};

// Number stored as m * exp(e); lets densities far below DBL_MIN keep their mantissa.
struct Scaled {
    double m = 0.0;
    double e = 0.0;
    double value() const { return m * std::exp(e); }
    double log_abs() const { return std::log(std::fabs(m)) + e; }
};

inline void require(bool ok, const char* msg) {
    if (!ok) throw std::domain_error(msg);
}

} // namespace caloric
