#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace caloric::quad {

// 15-point Gauss-Kronrod rule on [-1,1] with the embedded 7-point Gauss rule.
struct GK15 {
    std::array<double, 15> x;
    std::array<double, 15> wk;
    std::array<double, 15> wg;   // zero where the node is Kronrod-only
    static const GK15& get();
};

struct VecResult {
    std::vector<double> value;
    std::vector<double> error;
    std::vector<double> l1;   // integral of |f_k|, the scale the tolerance is measured against
    bool converged = true;
    int evaluations = 0;
};

// Globally adaptive Gauss-Kronrod for a vector-valued integrand sharing one mesh.
// f(x, out) fills out[0..ncomp). Refines until every component satisfies
// err_k <= max(rel_tol * l1_k, abs_tol). breaks must be sorted and cover [a,b].
VecResult integrate_vec(const std::function<void(double, double*)>& f, int ncomp,
                        const std::vector<double>& breaks, double rel_tol, double abs_tol = 0.0,
                        int max_intervals = 4000);

struct Result {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    bool converged = true;
};

Result integrate(const std::function<double(double)>& f, const std::vector<double>& breaks,
                 double rel_tol, double abs_tol = 0.0, int max_intervals = 4000);

inline Result integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double abs_tol = 0.0) {
    return integrate(f, std::vector<double>{a, b}, rel_tol, abs_tol);
}

// Gauss-Legendre nodes and weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// Geometric breakpoints lo, lo*r, ... capped at hi, with 0 prepended when lo > 0 = start.
std::vector<double> geometric_breaks(double start, double lo, double hi, double ratio);

} // namespace caloric::quad
