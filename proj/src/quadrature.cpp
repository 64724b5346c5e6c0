#include "caloric/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <limits>
#include <queue>
#include <stdexcept>

namespace caloric::quad {

const GK15& GK15::get() {
    static const GK15 rule = [] {
        GK15 r{};
        const auto& xk = boost::math::quadrature::gauss_kronrod<double, 15>::abscissa();
        const auto& wk = boost::math::quadrature::gauss_kronrod<double, 15>::weights();
        const auto& xg = boost::math::quadrature::gauss<double, 7>::abscissa();
        const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
        auto gauss_weight = [&](double x) {
            for (std::size_t j = 0; j < xg.size(); ++j)
                if (std::fabs(xg[j] - x) < 1e-14) return wg[j];
            return 0.0;
        };
        int k = 0;
        for (std::size_t i = 0; i < xk.size(); ++i) {
            r.x[k] = xk[i];
            r.wk[k] = wk[i];
            r.wg[k] = gauss_weight(xk[i]);
            ++k;
            if (xk[i] != 0.0) {
                r.x[k] = -xk[i];
                r.wk[k] = wk[i];
                r.wg[k] = gauss_weight(xk[i]);
                ++k;
            }
        }
        return r;
    }();
    return rule;
}

namespace {

struct Interval {
    double a, b;
    std::vector<double> val, err, l1;
    double priority;
};

void apply_rule(const std::function<void(double, double*)>& f, int ncomp, Interval& iv,
                std::vector<double>& buf) {
    const GK15& g = GK15::get();
    double c = 0.5 * (iv.a + iv.b), h = 0.5 * (iv.b - iv.a);
    std::vector<double> gs(ncomp, 0.0);
    iv.val.assign(ncomp, 0.0);
    iv.l1.assign(ncomp, 0.0);
    iv.err.assign(ncomp, 0.0);
    for (int i = 0; i < 15; ++i) {
        f(c + h * g.x[i], buf.data());
        for (int k = 0; k < ncomp; ++k) {
            iv.val[k] += g.wk[i] * buf[k];
            iv.l1[k] += g.wk[i] * std::fabs(buf[k]);
            gs[k] += g.wg[i] * buf[k];
        }
    }
    for (int k = 0; k < ncomp; ++k) {
        iv.val[k] *= h;
        iv.l1[k] *= std::fabs(h);
        iv.err[k] = std::fabs(iv.val[k] - h * gs[k]);
        // GK15 error is pessimistic for smooth integrands; use the usual (200 e)^1.5 scaling.
        if (iv.l1[k] > 0) {
            double rel = iv.err[k] / iv.l1[k];
            iv.err[k] = iv.l1[k] * std::min(1.0, std::pow(200.0 * rel, 1.5));
            iv.err[k] = std::max(iv.err[k], 50.0 * std::numeric_limits<double>::epsilon() * iv.l1[k]);
        }
    }
}

} // namespace

VecResult integrate_vec(const std::function<void(double, double*)>& f, int ncomp,
                        const std::vector<double>& breaks, double rel_tol, double abs_tol,
                        int max_intervals) {
    if (breaks.size() < 2) throw std::invalid_argument("integrate_vec: need at least two breakpoints");
    std::vector<double> buf(ncomp);
    std::vector<Interval> ivs;
    VecResult out;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Interval iv{breaks[i], breaks[i + 1], {}, {}, {}, 0.0};
        apply_rule(f, ncomp, iv, buf);
        out.evaluations += 15;
        ivs.push_back(std::move(iv));
    }
    std::vector<double> tot(ncomp), err(ncomp), l1(ncomp);
    auto totals = [&] {
        std::fill(tot.begin(), tot.end(), 0.0);
        std::fill(err.begin(), err.end(), 0.0);
        std::fill(l1.begin(), l1.end(), 0.0);
        for (auto& iv : ivs)
            for (int k = 0; k < ncomp; ++k) {
                tot[k] += iv.val[k];
                err[k] += iv.err[k];
                l1[k] += iv.l1[k];
            }
    };
    totals();
    auto target = [&](int k) { return std::max(rel_tol * l1[k], abs_tol); };
    while (true) {
        bool done = true;
        for (int k = 0; k < ncomp; ++k)
            if (err[k] > target(k)) done = false;
        if (done) break;
        if (static_cast<int>(ivs.size()) >= max_intervals) {
            out.converged = false;
            break;
        }
        // pick the interval contributing most to the worst normalized error
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t i = 0; i < ivs.size(); ++i) {
            double s = 0.0;
            for (int k = 0; k < ncomp; ++k) {
                double tk = target(k);
                if (tk > 0) s = std::max(s, ivs[i].err[k] / tk);
            }
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        Interval left = ivs[best];
        double mid = 0.5 * (left.a + left.b);
        if (!(mid > left.a && mid < left.b)) {
            out.converged = false;
            break;
        }
        Interval right = left;
        left.b = mid;
        right.a = mid;
        apply_rule(f, ncomp, left, buf);
        apply_rule(f, ncomp, right, buf);
        out.evaluations += 30;
        for (int k = 0; k < ncomp; ++k) {
            tot[k] += left.val[k] + right.val[k] - ivs[best].val[k];
            err[k] += left.err[k] + right.err[k] - ivs[best].err[k];
            l1[k] += left.l1[k] + right.l1[k] - ivs[best].l1[k];
        }
        ivs[best] = std::move(left);
        ivs.push_back(std::move(right));
        if (ivs.size() % 64 == 0) totals();   // keep running sums from drifting
    }
    totals();
    out.value = tot;
    out.error = err;
    out.l1 = l1;
    return out;
}

Result integrate(const std::function<double(double)>& f, const std::vector<double>& breaks,
                 double rel_tol, double abs_tol, int max_intervals) {
    auto vr = integrate_vec([&](double x, double* o) { o[0] = f(x); }, 1, breaks, rel_tol, abs_tol,
                            max_intervals);
    return Result{vr.value[0], vr.error[0], vr.l1[0], vr.converged};
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

std::vector<double> geometric_breaks(double start, double lo, double hi, double ratio) {
    std::vector<double> b{start};
    double p = std::max(lo, start);
    if (p > start && p < hi) b.push_back(p);
    while (p * ratio < hi) {
        p *= ratio;
        if (p > b.back()) b.push_back(p);
    }
    if (hi > b.back()) b.push_back(hi);
    return b;
}

} // namespace caloric::quad
