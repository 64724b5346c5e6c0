// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include "caloric/drifted.hpp"
#include "caloric/hitting_site.hpp"
#include "caloric/hitting_time.hpp"
#include "caloric/montecarlo.hpp"
#include "caloric/quadrature.hpp"
#include "caloric/specfun.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef CALORIC_CLI_PATH
#define CALORIC_CLI_PATH "caloric"
#endif

using namespace caloric;
namespace hs = caloric::hitting_site;
namespace ht = caloric::hitting_time;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// e^y K_nu(y) = int_0^inf exp(-y (cosh u - 1)) cosh(nu u) du by the trapezoid rule.
double k_oracle_scaled(double nu, double y) {
    double h = 0.002, s = 0.5;
    for (int j = 1; j < 4000000; ++j) {
        double u = j * h;
        double term = std::exp(-y * (std::cosh(u) - 1.0) + nu * u) * 0.5 * (1.0 + std::exp(-2.0 * nu * u));
        s += term;
        if (term < 1e-20 * s && u > 1.0) break;
    }
    return s * h;
}

// Mass of a colatitude density relative to the uniform law on the sphere.
double sphere_mass(const Geometry& g, const std::function<double(double)>& dens) {
    auto w = [&](double th) {
        if (g.d == 2) return dens(th) / M_PI;
        return dens(th) * std::pow(std::sin(th), g.d - 2) / g.mu_d;
    };
    return quad::integrate(w, {0, 0.25, 0.5, 1, 1.5, 2, 2.5, M_PI}, 1e-11, 0, 4000).value;
}

Outcome c1() {
    double worst = 0;
    for (double nu : {0.0, 0.5, 1.0, 2.5, 7.0})
        for (double y : {0.1, 1.0, 10.0, 50.0})
            worst = std::max(worst, rel(specfun::bessel_k(nu, y), k_oracle_scaled(nu, y) * std::exp(-y)));
    boost::math::quadrature::exp_sinh<double> es;
    double worst_id = 0;
    for (double p : {0.0, 1.0, 2.0})
        for (double ve : {0.5, 2.0, 10.0}) {
            double v = 1.3, eta = ve / v;
            double lhs = es.integrate([&](double s) {
                if (s <= 0) return 0.0;
                return std::exp(-eta * eta / (2 * s) - v * v * s / 2 - (p + 1) * std::log(s));
            });
            worst_id = std::max(worst_id, rel(lhs, 2.0 * std::pow(v / eta, p) * specfun::bessel_k(p, v * eta)));
        }
    return {worst <= 1e-9 && worst_id <= 1e-7, fmt("K_nu max rel %.2e, integral identity max rel %.2e", worst, worst_id)};
}

Outcome c2() {
    double worst = 0;
    for (double x : {1.5, 2.0, 5.0})
        for (double t : {0.1, 1.0, 10.0}) worst = std::max(worst, rel(ht::q_exact(1, 0.5, x, t), ht::q1(1, x, t) / x));
    return {worst <= 1e-7, fmt("max rel %.2e", worst)};
}

// Mass of q over (0, T] by adaptive quadrature in ln t.
double mass_to(double order, double x, double T) {
    SeriesControl ctrl;
    ctrl.rel_tol = 1e-10;
    auto f = [&](double u) {
        double t = std::exp(u);
        return ht::q_exact(1.0, order, x, t, ctrl) * t;
    };
    std::vector<double> br;
    for (double u = std::log(1e-3 * (x - 1) * (x - 1)); u < std::log(T); u += 2.0) br.push_back(u);
    br.push_back(std::log(T));
    return quad::integrate(f, br, 1e-9, 0.0, 4000).value;
}

Outcome c3() {
    double worst = 0;
    for (int d : {3, 5})
        for (double x : {1.5, 3.0}) {
            auto g = Geometry::make(1, d);
            double T = 1e12;
            // beyond T the density is C t^{-1-nu}
            double tail = ht::q_asym_large_t(g, {x, T}).value * T / g.nu;
            worst = std::max(worst, std::fabs(mass_to(g.nu, x, T) + tail - std::pow(1 / x, 2 * g.nu)));
        }
    double worst_p = 0;
    for (int d : {2, 3, 5}) {
        auto g = Geometry::make(1, d);
        for (double z : {1.2, 1.7, 4.0})
            worst_p = std::max(worst_p, std::fabs(sphere_mass(g, [&](double p) { return hs::poisson_kernel(z, g, p); }) -
                                                  std::pow(1 / z, 2 * g.nu)));
    }
    return {worst <= 1e-5 && worst_p <= 1e-8, fmt("time mass max err %.2e, Poisson mass max err %.2e", worst, worst_p)};
}

Outcome c4() {
    double ef = 0, eg = 0, el = 0, eleg = 0, ed = 0;
    for (double v : {0.5, 2.0, 10.0}) {
        auto m = quad::integrate([&](double th) { return hs::f_limit(1, th, v); },
                                 {-40, -20, -10, -5, -2, 0, 2, 5, 10, 20, 40}, 1e-11, 0, 4000);
        ef = std::max(ef, std::fabs(m.value - 1));
    }
    for (int d : {2, 3, 5})
        for (double x : {1.5, 3.0})
            for (double t : {0.3, 1.5, 20.0}) {
                auto g = Geometry::make(1, d);
                hs::SiteSeries s(g, x, t);
                eg = std::max(eg, std::fabs(sphere_mass(g, [&](double th) { return s(th); }) - 1));
            }
    for (int d : {2, 3})
        for (double av : {0.3, 2.0, 10.0, 40.0}) {
            auto g = Geometry::make(1, d);
            hs::LimitSite s(g, av);
            el = std::max(el, std::fabs(sphere_mass(g, [&](double th) { return s(th); }) - 1));
        }
    for (double nu : {0.5, 1.0})
        for (double t : {0.01, 0.2, 2.0}) {
            auto g = Geometry::make(1, int(2 * nu + 2));
            eleg = std::max(eleg, std::fabs(sphere_mass(g, [&](double th) { return hs::legendre_density(nu, t, 0.4, th); }) - 1));
        }
    for (int d : {2, 3})
        for (double v : {0.5, 1.0, 2.0}) {
            auto g = Geometry::make(1, d);
            drifted::DriftSpec dr{v};
            ed = std::max(ed, std::fabs(sphere_mass(g, [&](double th) { return drifted::drift_site_density(g, 3, 2, th, dr); }) - 1));
        }
    double worst = std::max({ef, eg, el, eleg, ed});
    return {worst <= 1e-5, fmt("max |mass-1|: f %.1e, g %.1e, g_limit %.1e, legendre %.1e", ef, eg, el, eleg) +
                               fmt(", drift site %.1e", ed)};
}

Outcome c5() {
    auto g2 = Geometry::make(1, 2);
    double worst = 0;
    for (double av : {0.5, 2.0, 10.0}) {
        hs::LimitInverter inv(av, 0.0);
        hs::LimitSite ls(g2, av);
        for (int i = 0; i < 64; ++i) {
            double th = M_PI * i / 63;
            double s = inv.value(th);
            for (int k = 1; k < 400; ++k) {
                double term = inv.value(th + 2 * M_PI * k) + inv.value(th - 2 * M_PI * k);
                s += term;
                if (term < 1e-18 * s) break;
            }
            worst = std::max(worst, std::fabs(2 * M_PI * s - ls.series(th)));
        }
    }
    return {worst <= 1e-6, fmt("max abs diff %.2e", worst)};
}

Outcome c6() {
    double fitted = 0;
    for (double x : {20.0, 50.0})
        for (double t : {0.1, 0.5}) {
            auto e = ht::q_exact_full(1.0, 0.0, x, t);
            fitted = std::max(fitted, std::fabs(1.0 / e.uniform_ratio - 1.0) / (t / x));
        }
    return {fitted <= 5.0, fmt("max |q_uniform/q_exact - 1| / (t/ax) = %.3f", fitted)};
}

Outcome c7() {
    auto run = mc::mc_verify("d2-v2", 20261016, 1);
    const auto& r = run.report;
    return {r.pass, fmt("populated %.0f, within |z|<=4 %.4f, chi2 %.1f, p %.3g", r.populated, r.fraction_within, r.chi2,
                        r.p_value)};
}

Outcome c8() {
    int bad = 0, n = 0;
    for (double v : {0.5, 1.0, 4.0})
        for (int i = 0; i <= 256; ++i, ++n) {
            double th = -0.5 * M_PI + M_PI * i / 256;
            double lb = v * specfun::bessel_k(0, v) * std::exp(v * std::cos(th)) * std::cos(th) / M_PI;
            if (!(hs::f_limit(1, th, v) >= lb)) ++bad;
        }
    return {bad == 0, fmt("%.0f violations on %.0f points", bad, n)};
}

Outcome c9() {
    auto g = Geometry::make(1, 2);
    mc::MCConfig cfg;
    cfg.n_paths = 1000000;
    cfg.seed = 9;
    cfg.t_max = 1.05;
    cfg.bins_t = {0.95, 1.05};
    cfg.bins_theta = {0, 0.05, 0.45, 0.55, 0.95, 1.05};
    auto est = mc::estimate_joint(g, 4.0, cfg);
    bool ok = true;
    std::string det;
    for (const auto& c : est.cells) {
        if (c.theta_bin % 2) continue;   // gaps between the target cells
        double psi = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                psi += hs::psi_tangent(1, 4, c.t_lo + (i + 0.5) * (c.t_hi - c.t_lo) / 4,
                                       c.th_lo + (j + 0.5) * (c.th_hi - c.th_lo) / 4);
        psi /= 16;
        bool cell_ok = !c.empty() && c.density + 3 * c.std_err >= psi;
        ok = ok && cell_ok;
        det += fmt("theta %.1f: h %.4f +- %.4f vs psi %.4f; ", 0.5 * (c.th_lo + c.th_hi), c.density, c.std_err, psi);
    }
    return {ok, det};
}

Outcome c10() {
    auto g2 = Geometry::make(1, 2);
    double av = 200;
    hs::LimitSite s(g2, av);
    double s3 = std::cbrt(1 / av), worst = 0, lo = 1e300, hi = 0;
    bool ok = true;
    for (int i = 0; i <= 180; ++i) {
        double th = M_PI * i / 180, c = std::cos(th);
        auto lv = hs::large_v_site_density(g2, av, th, 1.0);
        if (c >= 2 * s3) {
            double scaled = std::fabs(s(th) / lv.value - 1) * av * c * c * c;
            worst = std::max(worst, scaled);
            ok = ok && scaled <= 10;
        } else if (std::fabs(c) < s3) {
            double r = s(th) / lv.value;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            ok = ok && r >= 0.05 && r <= 20;
        }
    }
    return {ok, fmt("interior max |ratio-1| av cos^3 = %.3f; equatorial ratio in [%.3f, %.3f]", worst, lo, hi)};
}

Outcome c11() {
    const double av = 1000;
    SeriesControl c;
    c.n_max = 3000;
    std::vector<double> br{0, 0.5, 1, 1.4, 1.5, 1.55, M_PI / 2, 1.6, 1.7, 2, 2.5, M_PI};
    bool ok = true;
    std::string det;
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        hs::LimitSite ls(g, av, c);
        double xs = drifted::xi_const_scaled(g, av, c);
        auto w = [&](double th) { return std::pow(std::sin(th), d - 2) / g.mu_d; };
        double tv_lv = 0.5 * quad::integrate([&](double th) {
                                 double r = std::pow(2 * M_PI / av, 0.5 * (d - 1)) * ls.rescaled(th) * w(th);
                                 return std::fabs(r - hs::large_v_weak_limit(g, th));
                             }, br, 1e-6, 1e-10, 2000).value;
        double tv_dr = 0.5 * quad::integrate([&](double th) {
                                 return std::fabs(ls.rescaled(th) / xs * w(th) - drifted::drift_weak_limit(g, th));
                             }, br, 1e-6, 1e-10, 2000).value;
        ok = ok && tv_lv <= 0.05 && tv_dr <= 0.05;
        det += fmt("d=%.0f: rescaled site TV %.4f, drifted site TV %.4f; ", d, tv_lv, tv_dr);
    }
    return {ok, det};
}

Outcome c12() {
    bool ok = true;
    std::string det;
    struct Case { double nu, lam; };
    for (Case k : {Case{0, 1}, Case{0, 2}, Case{0.5, 1}}) {
        mc::MCConfig cfg;
        cfg.seed = 12;
        // about q(x, t) 2 eps t of the paths land in the window
        double q = ht::q_exact(1, k.nu, 2, 1);
        cfg.n_paths = long(std::ceil(12500 / (q * 0.04)));
        auto b = mc::bessel_bridge_functional(k.nu, 1, 2, 1, hs::CMIdentity::Lemma32, k.lam, cfg);
        double ana = hs::cm_functional(hs::CMIdentity::Lemma32, k.nu, k.lam, 1, 2, 1);
        double z = (b.value - ana) / b.std_err;
        ok = ok && !b.insufficient && b.accepted >= 10000 && std::fabs(z) <= 3;
        det += fmt("(nu %.1f, lam %.0f): z %.2f, accepted %.0f; ", k.nu, k.lam, z, b.accepted);
    }
    return {ok, det};
}

Outcome c13() {
    std::vector<hs::EnvelopePoint> grid;
    for (double y : {0.02, 0.05, 0.1, 0.2, 0.5, 0.9})
        for (double t : {0.01, 0.03, 0.1, 0.3, 0.9, 2.0, 5.0})
            for (double phi : {0.0, 0.1, 0.3, 0.6, 0.9, 1.5, 2.5}) grid.push_back({y, t, phi});
    bool ok = true;
    int viol = 0;
    double lower[2] = {0, 0};
    for (int d : {2, 3}) {
        auto g = Geometry::make(1, d);
        for (auto e : {hs::Envelope::Lemma43, hs::Envelope::Lemma45_small, hs::Envelope::Lemma45_large,
                       hs::Envelope::Prop41_upper, hs::Envelope::Prop41_lower, hs::Envelope::Cor41,
                       hs::Envelope::Lemma46_crucial}) {
            auto r = hs::envelope_check(g, grid, e);
            viol += r.violations;
            ok = ok && r.violations == 0 && r.evaluated > 0 && std::isfinite(r.fitted_constant) && r.fitted_constant > 0;
            if (e == hs::Envelope::Prop41_lower) lower[d - 2] = r.fitted_constant;
        }
    }
    return {ok, fmt("%.0f violations; two-sided lower constant d=2 %.3g, d=3 %.3g", viol, lower[0], lower[1])};
}

Outcome c14() {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / ("caloric_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::string out[2];
    for (int i = 0; i < 2; ++i) {
        auto file = dir / ("run" + std::to_string(i) + ".csv");
        std::string cmd = std::string("\"") + CALORIC_CLI_PATH + "\" mc-verify --preset d2-v2 --seed 14 --workers 2 --out \"" +
                          file.string() + "\" 2>/dev/null";
        int rc = std::system(cmd.c_str());
        if (rc != 0) {
            fs::remove_all(dir);
            return {false, "mc-verify exited with status " + std::to_string(rc)};
        }
        std::ifstream in(file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[i] = ss.str();
    }
    fs::remove_all(dir);
    bool same = !out[0].empty() && out[0] == out[1];
    return {same, fmt("two reports of %.0f bytes, identical: ", double(out[0].size())) + (same ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::function<Outcome()>> all{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14};
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (int n = 1; n <= int(all.size()); ++n) {
        if (!pick.empty() && !pick.count(n)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[n - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d: %s  %s [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d criteria failed\n", failed);
    return failed ? 1 : 0;
}
