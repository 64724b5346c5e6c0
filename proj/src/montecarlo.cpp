#include "caloric/montecarlo.hpp"

#include "caloric/hitting_time.hpp"
#include "caloric/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

namespace caloric::mc {

namespace {

constexpr int DMAX = 16;
constexpr long BLOCK = 4096;

// Paths split into fixed blocks so that merged sums do not depend on the worker count.
template <class Acc, class Fn>
std::vector<Acc> run_blocks(long n_paths, int workers, Fn&& fn) {
    long nblocks = (n_paths + BLOCK - 1) / BLOCK;
    std::vector<Acc> out(nblocks);
    std::atomic<long> next{0};
    auto work = [&] {
        for (long b; (b = next.fetch_add(1)) < nblocks;) {
            long lo = b * BLOCK, hi = std::min(n_paths, lo + BLOCK);
            for (long p = lo; p < hi; ++p) fn(out[b], static_cast<std::uint64_t>(p));
        }
    };
    int nw = int(std::max<long>(1, std::min<long>(workers, nblocks)));
    std::vector<std::thread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

struct Walk {
    bool hit = false;
    double sigma = 0.0;
    double point[DMAX] = {};
    double winding = 0.0;
    double inv_r2 = 0.0;  // int ds / |B_s|^2
    long steps = 0;
};

// Discretized path from x0 e with drift -v e until it enters the ball or reaches t_max.
Walk walk(double a, int d, double x0, const MCConfig& cfg, std::uint64_t path, bool want_integral) {
    PathStream rng(cfg.seed, path);
    Walk w;
    double pos[DMAX] = {}, nxt[DMAX];
    pos[0] = x0;
    double s = 0.0, r = x0;
    double dt_min = cfg.dt / 16.0;
    double dt_far = std::max(cfg.dt_far > 0 ? cfg.dt_far : 100.0 * cfg.dt, dt_min);
    double v = cfg.drift_v;
    while (s < cfg.t_max) {
        double del = r - a;
        double left = cfg.t_max - s;
        // no hit before t_max is possible beyond seven standard deviations
        if (del - v * left > 7.0 * std::sqrt(left)) break;
        // far cap grows with the Brownian scale r^2 so escaping paths stay cheap
        double cap = dt_far * std::max(1.0, 0.25 * r * r / (a * a));
        double step = std::clamp(0.0625 * del * del, dt_min, cap);
        if (v > 0) step = std::min(step, std::max(0.25 * del / v, dt_min));
        step = std::min(step, left);
        double sq = std::sqrt(step);
        for (int k = 0; k < d; ++k) nxt[k] = pos[k] + sq * rng.normal();
        nxt[0] -= v * step;
        double r2sum = 0.0;
        for (int k = 0; k < d; ++k) r2sum += nxt[k] * nxt[k];
        double r_new = std::sqrt(r2sum);
        double del2 = r_new - a;
        ++w.steps;
        double frac = -1.0;
        if (del2 <= 0.0) {
            frac = del / (del - del2);
        } else if (cfg.bridge_correction) {
            double expo = 2.0 * del * del2 / step;
            if (expo < 700.0 && rng.uniform() < std::exp(-expo)) frac = del / (del + del2);
        }
        double f = frac >= 0.0 ? frac : 1.0;
        double end[DMAX];
        for (int k = 0; k < d; ++k) end[k] = pos[k] + f * (nxt[k] - pos[k]);
        if (d == 2) w.winding += std::atan2(pos[0] * end[1] - pos[1] * end[0], pos[0] * end[0] + pos[1] * end[1]);
        if (want_integral) {
            double re2 = 0.0;
            for (int k = 0; k < d; ++k) re2 += end[k] * end[k];
            w.inv_r2 += 0.5 * f * step * (1.0 / (r * r) + 1.0 / re2);
        }
        if (frac >= 0.0) {
            w.hit = true;
            w.sigma = s + f * step;
            double re = 0.0;
            for (int k = 0; k < d; ++k) re += end[k] * end[k];
            re = std::sqrt(re);
            for (int k = 0; k < d; ++k) w.point[k] = a * end[k] / re;
            return w;
        }
        std::copy(nxt, nxt + d, pos);
        r = r_new;
        s += step;
    }
    return w;
}

double theta_mass(const Geometry& g, double lo, double hi) {
    if (g.d == 1) return lo <= 0.0 && 0.0 < hi ? 1.0 : 0.0;
    if (g.d == 2) return (hi - lo) / M_PI;
    if (g.d == 3) return 0.5 * (std::cos(lo) - std::cos(hi));
    return quad::integrate([&](double th) { return std::pow(std::sin(th), g.d - 2) / g.mu_d; }, lo, hi, 1e-13)
        .value;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = M0 * c[0], p1 = M1 * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        k[0] += W0;
        k[1] += W1;
    }
    return c;
}

PathStream::PathStream(std::uint64_t seed, std::uint64_t path)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, path_(path) {}

double PathStream::uniform() {
    if (un_ == 0) {
        auto o = philox4x32({static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32),
                             static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32)},
                            key_);
        ++draw_;
        for (int i = 0; i < 2; ++i) {
            std::uint64_t bits = (std::uint64_t(o[2 * i]) << 32 | o[2 * i + 1]) >> 11;
            ubuf_[i] = (double(bits) + 0.5) * 0x1p-53;
        }
        un_ = 2;
    }
    return ubuf_[--un_];
}

double PathStream::normal() {
    if (has_n_) {
        has_n_ = false;
        return nbuf_;
    }
    double u1 = uniform(), u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    nbuf_ = rad * std::sin(2.0 * M_PI * u2);
    has_n_ = true;
    return rad * std::cos(2.0 * M_PI * u2);
}

void MCConfig::validate() const {
    require(n_paths >= 1, "MCConfig: n_paths must be at least 1");
    require(dt > 0 && t_max > 0 && dt_far >= 0, "MCConfig: dt and t_max must be positive");
    require(drift_v >= 0, "MCConfig: drift_v must be non-negative");
    require(workers >= 1, "MCConfig: workers must be at least 1");
    for (auto* e : {&bins_t, &bins_theta})
        for (std::size_t i = 1; i < e->size(); ++i) require((*e)[i] > (*e)[i - 1], "MCConfig: bin edges must increase");
}

HitSample sample_first_hit(const Geometry& g, double x0, const MCConfig& cfg, std::uint64_t path) {
    require(x0 > g.a, "sample_first_hit: start must lie outside the ball");
    require(g.d >= 1 && g.d <= DMAX, "sample_first_hit: dimension out of range");
    Walk w = walk(g.a, g.d, x0, cfg, path, false);
    HitSample h;
    h.hit = w.hit;
    h.steps = w.steps;
    if (!w.hit) return h;
    h.sigma = w.sigma;
    h.theta = std::acos(std::clamp(w.point[0] / g.a, -1.0, 1.0));
    h.winding = w.winding;
    return h;
}

double JointEstimate::in_window_mass() const {
    long c = 0;
    for (const auto& e : cells) c += e.count;
    return double(c) / n_paths;
}

JointEstimate estimate_joint(const Geometry& g, double x0, const MCConfig& cfg_in) {
    MCConfig cfg = cfg_in;
    cfg.validate();
    if (cfg.bins_t.size() < 2) cfg.bins_t = {0.0, cfg.t_max};
    if (cfg.bins_theta.size() < 2) cfg.bins_theta = {0.0, M_PI};
    int nt = int(cfg.bins_t.size()) - 1, nth = int(cfg.bins_theta.size()) - 1;
    struct Acc {
        std::vector<long> counts;
        long censored = 0, outside = 0, steps = 0;
    };
    auto blocks = run_blocks<Acc>(cfg.n_paths, cfg.workers, [&](Acc& acc, std::uint64_t p) {
        if (acc.counts.empty()) acc.counts.assign(std::size_t(nt) * nth, 0);
        HitSample h = sample_first_hit(g, x0, cfg, p);
        acc.steps += h.steps;
        if (!h.hit) {
            ++acc.censored;
            return;
        }
        auto it = std::upper_bound(cfg.bins_t.begin(), cfg.bins_t.end(), h.sigma);
        auto jt = std::upper_bound(cfg.bins_theta.begin(), cfg.bins_theta.end(), h.theta);
        if (it == cfg.bins_t.begin() || it == cfg.bins_t.end() || jt == cfg.bins_theta.begin() ||
            jt == cfg.bins_theta.end()) {
            ++acc.outside;
            return;
        }
        int i = int(it - cfg.bins_t.begin()) - 1, j = int(jt - cfg.bins_theta.begin()) - 1;
        ++acc.counts[std::size_t(i) * nth + j];
    });
    JointEstimate est;
    est.n_paths = cfg.n_paths;
    std::vector<long> counts(std::size_t(nt) * nth, 0);
    for (const auto& b : blocks) {
        est.censored += b.censored;
        est.outside += b.outside;
        est.steps += b.steps;
        for (std::size_t k = 0; k < b.counts.size(); ++k) counts[k] += b.counts[k];
    }
    double n = double(cfg.n_paths);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nth; ++j) {
            MCEstimate c;
            c.t_bin = i;
            c.theta_bin = j;
            c.t_lo = cfg.bins_t[i];
            c.t_hi = cfg.bins_t[i + 1];
            c.th_lo = cfg.bins_theta[j];
            c.th_hi = cfg.bins_theta[j + 1];
            c.measure = (c.t_hi - c.t_lo) * theta_mass(g, c.th_lo, c.th_hi);
            c.count = counts[std::size_t(i) * nth + j];
            c.n_total = cfg.n_paths;
            double p = c.count / n;
            c.density = c.measure > 0 ? p / c.measure : 0.0;
            c.std_err = c.count > 0 && c.measure > 0 ? std::sqrt(p * (1 - p) / n) / c.measure : NAN;
            est.cells.push_back(c);
        }
    return est;
}

void write_histogram(std::ostream& os, const JointEstimate& est) {
    os << "# caloric-mc-histogram v1\n";
    os << "# n_paths " << est.n_paths << " censored " << est.censored << " outside " << est.outside << "\n";
    os << "t_lo,t_hi,theta_lo,theta_hi,count,density,std_err\n";
    os << std::setprecision(17);
    for (const auto& c : est.cells)
        os << c.t_lo << ',' << c.t_hi << ',' << c.th_lo << ',' << c.th_hi << ',' << c.count << ',' << c.density << ','
           << c.std_err << '\n';
}

BridgeEstimate bessel_bridge_functional(double nu, double a, double x, double t, hitting_site::CMIdentity which,
                                        double lam, const MCConfig& cfg_in, double eps, long min_accepted) {
    double dd = 2.0 * nu + 2.0;
    require(nu >= 0 && std::fabs(dd - std::round(dd)) < 1e-12 && dd <= DMAX,
            "bessel_bridge_functional: needs integer dimension 2 nu + 2");
    require(x > a && a > 0 && t > 0 && eps > 0 && eps < 1, "bessel_bridge_functional: bad arguments");
    MCConfig cfg = cfg_in;
    cfg.drift_v = 0.0;
    cfg.t_max = t * (1.0 + eps);
    cfg.validate();
    int d = int(std::round(dd));
    double c = which == hitting_site::CMIdentity::Lemma31 ? (1.0 - 4.0 * nu * nu) / 8.0 : -0.5 * lam * (lam + 2 * nu);
    struct Acc {
        long n = 0;
        double s = 0, s2 = 0;
    };
    auto blocks = run_blocks<Acc>(cfg.n_paths, cfg.workers, [&](Acc& acc, std::uint64_t p) {
        Walk w = walk(a, d, x, cfg, p, true);
        if (!w.hit || w.sigma < t * (1.0 - eps)) return;
        double e = std::exp(c * w.inv_r2);
        ++acc.n;
        acc.s += e;
        acc.s2 += e * e;
    });
    Acc tot;
    for (const auto& b : blocks) {
        tot.n += b.n;
        tot.s += b.s;
        tot.s2 += b.s2;
    }
    BridgeEstimate be;
    be.attempted = cfg.n_paths;
    be.accepted = tot.n;
    be.eps = eps;
    be.q_estimate = double(tot.n) / (double(cfg.n_paths) * 2.0 * eps * t);
    be.insufficient = tot.n < min_accepted;
    if (tot.n > 0) {
        be.value = tot.s / tot.n;
        double var = tot.n > 1 ? (tot.s2 - tot.s * tot.s / tot.n) / (tot.n - 1) : 0.0;
        be.std_err = std::sqrt(std::max(var, 0.0) / tot.n);
    } else {
        be.value = NAN;
        be.std_err = NAN;
    }
    return be;
}

CompareReport compare(const JointEstimate& est, const std::function<double(const MCEstimate&)>& evaluator,
                      const CompareOptions& opt) {
    CompareReport rep;
    double n = double(est.n_paths);
    for (const auto& c : est.cells) {
        CellZ z;
        z.t_bin = c.t_bin;
        z.theta_bin = c.theta_bin;
        z.estimate = c.density;
        z.analytic = evaluator(c);
        double pa = z.analytic * c.measure;
        double se = pa > 0 && pa < 1 ? std::sqrt(pa * (1 - pa) / n) / c.measure : c.std_err;
        z.z = z.estimate == z.analytic ? 0.0 : (z.estimate - z.analytic) / se;
        if (!c.empty()) {
            ++rep.populated;
            z.flagged = !(std::fabs(z.z) <= opt.z_max);
            if (!z.flagged) ++rep.within;
        }
        double expected = pa * n;
        if (expected >= opt.min_expected) {
            double diff = c.count - expected;
            rep.chi2 += diff * diff / expected;
            ++rep.dof;
        }
        rep.cells.push_back(z);
    }
    rep.fraction_within = rep.populated ? double(rep.within) / rep.populated : 1.0;
    rep.p_value = rep.dof > 0 ? boost::math::gamma_q(0.5 * rep.dof, 0.5 * rep.chi2) : 1.0;
    rep.pass = rep.fraction_within >= opt.min_fraction && rep.p_value > opt.min_p;
    return rep;
}

CompareReport compare(const JointEstimate& est, const std::vector<double>& analytic, const CompareOptions& opt) {
    if (analytic.size() != est.cells.size()) throw std::invalid_argument("compare: cell grids differ");
    std::size_t k = 0;
    return compare(est, [&](const MCEstimate&) { return analytic[k++]; }, opt);
}

std::vector<std::string> verify_presets() { return {"d2-v2", "d3-v2"}; }

VerifyRun mc_verify(const std::string& preset, std::uint64_t seed, int workers, long n_paths, double dt,
                    const CompareOptions& opt) {
    int d = preset == "d2-v2" ? 2 : preset == "d3-v2" ? 3 : 0;
    require(d != 0, "mc_verify: unknown preset");
    VerifyRun run;
    run.preset = preset;
    run.geom = Geometry::make(1.0, d);
    run.x0 = 3.0;
    MCConfig& cfg = run.cfg;
    cfg.n_paths = n_paths > 0 ? n_paths : 1000000;
    cfg.dt = dt > 0 ? dt : 1e-4;
    cfg.seed = seed;
    cfg.workers = workers;
    cfg.t_max = 1.6;
    for (int i = 0; i <= 10; ++i) cfg.bins_t.push_back(1.4 + 0.02 * i);
    for (int j = 0; j <= 16; ++j) cfg.bins_theta.push_back(M_PI * j / 16);
    run.estimate = estimate_joint(run.geom, run.x0, cfg);
    // cell averages of q g by 3 x 3 Gauss-Legendre against dt sin^{d-2} dtheta
    static const double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const Geometry& g = run.geom;
    auto cell_mean = [&](const MCEstimate& c) {
        double acc = 0.0, wt = 0.0;
        for (int i = 0; i < 3; ++i) {
            double t = 0.5 * (c.t_lo + c.t_hi) + 0.5 * (c.t_hi - c.t_lo) * gx[i];
            double q = hitting_time::q_exact(g, {run.x0, t}).value;
            for (int j = 0; j < 3; ++j) {
                double th = 0.5 * (c.th_lo + c.th_hi) + 0.5 * (c.th_hi - c.th_lo) * gx[j];
                double jw = gw[i] * gw[j] * std::pow(std::sin(th), g.d - 2);
                acc += jw * q * hitting_site::g_density(g, run.x0, t, SiteAngle::colatitude(th));
                wt += jw;
            }
        }
        return acc / wt;
    };
    run.report = compare(run.estimate, cell_mean, opt);
    return run;
}

} // namespace caloric::mc
