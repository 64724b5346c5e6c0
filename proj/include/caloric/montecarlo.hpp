#pragma once

#include "caloric/hitting_site.hpp"
#include "caloric/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace caloric::mc {

// Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Stream of one path: key from the seed, counter (path, draw).
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path);
    double uniform();  // in (0, 1)
    double normal();

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t path_;
    std::uint64_t draw_ = 0;
    double ubuf_[2] = {0, 0};
    int un_ = 0;
    double nbuf_ = 0;
    bool has_n_ = false;
};

struct MCConfig {
    long n_paths = 100000;
    double dt = 1e-4;          // step near the sphere; steps shrink to dt/16 on approach
    double dt_far = 0.0;       // far-step cap at r <= 2a, growing like r^2; 0 means 100 dt
    std::uint64_t seed = 1;
    bool bridge_correction = true;
    double t_max = 10.0;
    std::vector<double> bins_t;
    std::vector<double> bins_theta;
    double drift_v = 0.0;      // drift -v e, e the start axis
    int workers = 1;
    void validate() const;
};

struct HitSample {
    bool hit = false;          // false: censored at t_max
    double sigma = 0.0;
    double theta = 0.0;        // colatitude from the start axis
    double winding = 0.0;      // continuous argument for d = 2
    long steps = 0;
};

// One path from x0 e, with the stream of path index `path`.
HitSample sample_first_hit(const Geometry& g, double x0, const MCConfig& cfg, std::uint64_t path);

struct MCEstimate {
    int t_bin = 0;
    int theta_bin = 0;
    double t_lo = 0, t_hi = 0, th_lo = 0, th_hi = 0;
    double measure = 0.0;      // dt times the mass of the theta bin under sin^{d-2} dtheta / mu_d
    double density = 0.0;
    double std_err = 0.0;      // NaN for empty cells
    long count = 0;
    long n_total = 0;
    bool empty() const { return count == 0; }
};

struct JointEstimate {
    std::vector<MCEstimate> cells;  // t-major
    long n_paths = 0;
    long censored = 0;              // no hit before t_max
    long outside = 0;               // hit before t_max but outside the binned window
    long steps = 0;
    double censored_fraction() const { return double(censored) / n_paths; }
    double in_window_mass() const;
};

// Histogram of (sigma, theta) against mu_d^{-1} sin^{d-2} theta dtheta dt; d = 2 uses |arg|.
JointEstimate estimate_joint(const Geometry& g, double x0, const MCConfig& cfg);

// Binary-reproducible columnar dump.
void write_histogram(std::ostream& os, const JointEstimate& est);

struct BridgeEstimate {
    double value = 0.0;
    double std_err = 0.0;
    long accepted = 0;
    long attempted = 0;
    double eps = 0.0;          // window T_a in [t(1-eps), t(1+eps)]
    double q_estimate = 0.0;   // accepted fraction over the window width
    bool insufficient = false;
};

// E[exp(c int_0^T ds / X_s^2) | T_a ~ t] for the radial part of d = 2 nu + 2 dimensional motion
// (integer d). c = (1 - 4 nu^2)/8 for Lemma31, -lam(lam + 2 nu)/2 for Lemma32.
BridgeEstimate bessel_bridge_functional(double nu, double a, double x, double t, hitting_site::CMIdentity which,
                                        double lam, const MCConfig& cfg, double eps = 0.02,
                                        long min_accepted = 10000);

struct CompareOptions {
    double z_max = 4.0;
    double min_fraction = 0.95;
    double min_p = 0.001;
    double min_expected = 5.0;  // cells enter the chi-square when the expected count reaches this
};

struct CellZ {
    int t_bin = 0, theta_bin = 0;
    double estimate = 0, analytic = 0, z = 0;
    bool flagged = false;
};

struct CompareReport {
    std::vector<CellZ> cells;
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 1.0;
    int populated = 0;
    int within = 0;
    double fraction_within = 1.0;
    bool pass = false;
};

// evaluator(cell) returns the analytic cell-average density.
CompareReport compare(const JointEstimate& est, const std::function<double(const MCEstimate&)>& evaluator,
                      const CompareOptions& opt = {});
// Analytic cell densities in the order of est.cells; throws std::invalid_argument on a size mismatch.
CompareReport compare(const JointEstimate& est, const std::vector<double>& analytic, const CompareOptions& opt = {});

// Named joint-law verification runs: "d2-v2" and "d3-v2" start at x = 3, a = 1 with the hitting
// time binned on [1.4, 1.6] (v about 2), 10 time bins by 16 colatitude bins, 1e6 paths, dt = 1e-4.
struct VerifyRun {
    std::string preset;
    Geometry geom;
    double x0 = 0.0;
    MCConfig cfg;
    JointEstimate estimate;
    CompareReport report;
};
std::vector<std::string> verify_presets();
// n_paths = 0 and dt = 0 keep the preset values.
VerifyRun mc_verify(const std::string& preset, std::uint64_t seed, int workers, long n_paths = 0, double dt = 0.0,
                    const CompareOptions& opt = {});

} // namespace caloric::mc
