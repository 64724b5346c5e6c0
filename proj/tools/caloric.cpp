// caloric: density tables and Monte-Carlo verification runs as CSV or JSON.

#include "caloric/drifted.hpp"
#include "caloric/hitting_site.hpp"
#include "caloric/hitting_time.hpp"
#include "caloric/montecarlo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace caloric;
using hitting_site::Envelope;

namespace {

enum Exit { Ok = 0, InvalidSpec = 1, NumericError = 2, AcceptanceFailure = 3 };

struct Row {
    std::vector<double> inputs;
    double value = 0.0;
    std::string regime;
    std::string error_order;
    std::optional<double> std_err;
};

struct Table {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<Row> rows;
    std::vector<std::pair<std::string, std::string>> summary;

    void add(std::vector<double> in, const DensityValue& dv) {
        rows.push_back({std::move(in), dv.value, to_string(dv.regime), dv.error_order, std::nullopt});
    }
    void add(std::vector<double> in, double v, const std::string& regime, const std::string& err = "") {
        rows.push_back({std::move(in), v, regime, err, std::nullopt});
    }
};

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(16) << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

void write_csv(std::ostream& os, const Table& t) {
    os << "# caloric-table v1\n# command " << t.command << "\n";
    for (const auto& n : t.inputs) os << n << ',';
    os << "value,regime,error_order,std_err\n";
    for (const auto& r : t.rows) {
        for (double v : r.inputs) os << num(v) << ',';
        os << num(r.value) << ',' << csv_field(r.regime) << ',' << csv_field(r.error_order) << ','
           << (r.std_err && std::isfinite(*r.std_err) ? num(*r.std_err) : "") << '\n';
    }
    for (const auto& [k, v] : t.summary) os << "# " << k << ' ' << v << '\n';
}

void write_json(std::ostream& os, const Table& t) {
    nlohmann::ordered_json j;
    j["schema"] = "caloric-table v1";
    j["command"] = t.command;
    auto cols = t.inputs;
    for (const char* c : {"value", "regime", "error_order", "std_err"}) cols.push_back(c);
    j["columns"] = cols;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::ordered_json o;
        for (std::size_t i = 0; i < t.inputs.size(); ++i) o[t.inputs[i]] = r.inputs[i];
        o["value"] = r.value;
        o["regime"] = r.regime;
        o["error_order"] = r.error_order;
        o["std_err"] = r.std_err && std::isfinite(*r.std_err) ? nlohmann::json(*r.std_err) : nlohmann::json(nullptr);
        j["rows"].push_back(o);
    }
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.summary) s[k] = v;
    j["summary"] = s;
    os << j.dump(1) << '\n';
}

// "lo:hi:step" (inclusive of hi up to rounding) or a comma list.
std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        char c1, c2;
        std::istringstream is(spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || hi < lo)
            throw std::domain_error("bad grid '" + spec + "' (expected lo:hi:step)");
        long n = std::lround(std::floor((hi - lo) / step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(lo + i * step);
    } else {
        std::istringstream is(spec);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::domain_error("empty grid '" + spec + "'");
    return out;
}

struct Common {
    int d = 2;
    double a = 1.0;
    std::string format = "csv";
    std::string out;
    double rel_tol = 1e-12;
    int n_max = 400;
    SeriesControl ctrl() const {
        SeriesControl c;
        c.rel_tol = rel_tol;
        c.n_max = n_max;
        return c;
    }
};

void add_common(CLI::App* sc, Common& c, bool with_d = true) {
    if (with_d) sc->add_option("--d", c.d, "space dimension")->check(CLI::Range(2, 64));
    sc->add_option("--a", c.a, "ball radius")->check(CLI::PositiveNumber);
    sc->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sc->add_option("--out", c.out, "output file (default: stdout, or $CALORIC_OUT_DIR/<command>.<format>)");
    sc->add_option("--rel-tol", c.rel_tol, "series and quadrature tolerance")->check(CLI::PositiveNumber);
    sc->add_option("--n-max", c.n_max, "series truncation cap")->check(CLI::PositiveNumber);
}

void emit(const Table& t, const Common& c) {
    std::string path = c.out;
    if (path.empty()) {
        if (const char* dir = std::getenv("CALORIC_OUT_DIR"); dir && *dir) {
            std::filesystem::create_directories(dir);
            path = (std::filesystem::path(dir) / (t.command + "." + c.format)).string();
        }
    }
    std::ofstream file;
    if (!path.empty()) {
        file.open(path);
        if (!file) throw std::domain_error("cannot open output file " + path);
    }
    std::ostream& os = path.empty() ? std::cout : file;
    if (c.format == "json")
        write_json(os, t);
    else
        write_csv(os, t);
}

Envelope parse_envelope(const std::string& name) {
    for (auto e : {Envelope::Lemma43, Envelope::Lemma45_small, Envelope::Lemma45_large, Envelope::Prop41_upper,
                   Envelope::Prop41_lower, Envelope::Cor41, Envelope::Lemma46_crucial})
        if (name == hitting_site::to_string(e)) return e;
    throw std::domain_error("unknown envelope '" + name + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hitting time and site of a ball for Brownian motion"};
    app.require_subcommand(1);
    Common c;

    // hitq
    auto* hitq = app.add_subcommand("hitq", "hitting-time density q(x, t)");
    add_common(hitq, c);
    std::string x_grid, t_grid;
    bool exact = false, large_t = false, uniform = false;
    hitq->add_option("--x,--x-grid", x_grid, "start radius or grid")->required();
    hitq->add_option("--t,--t-grid", t_grid, "time or grid")->required();
    hitq->add_flag("--exact", exact, "exact density (default)");
    hitq->add_flag("--large-t", large_t, "large-time form");
    hitq->add_flag("--uniform", uniform, "uniform small-time / large-distance form");

    // hitsite
    auto* hitsite = app.add_subcommand("hitsite", "conditional site density g(theta; x, t)");
    add_common(hitsite, c);
    double x = 0, t = 0;
    std::string theta_grid = "0:3.14:0.1";
    bool joint = false;
    hitsite->add_option("--x", x, "start radius")->required();
    hitsite->add_option("--t", t, "time")->required();
    hitsite->add_option("--theta-grid", theta_grid, "colatitude grid");
    hitsite->add_flag("--joint", joint, "joint density q g instead of g");

    // limitf
    auto* limitf = app.add_subcommand("limitf", "planar limit density of the unwound argument");
    add_common(limitf, c, false);
    double v = 0;
    limitf->add_option("--v", v, "limit ratio x/t")->required()->check(CLI::PositiveNumber);
    limitf->add_option("--theta-grid", theta_grid, "argument grid");

    // glimit
    auto* glimit = app.add_subcommand("glimit", "limit site density as x/t -> v");
    add_common(glimit, c);
    glimit->add_option("--v", v, "limit ratio x/t")->required()->check(CLI::PositiveNumber);
    glimit->add_option("--theta-grid", theta_grid, "colatitude grid");

    // drift
    auto* drift = app.add_subcommand("drift", "laws for motion with constant drift -v e");
    add_common(drift, c);
    std::string mode = "time", av_grid = "1,10,100", w_grid = "0:0.9:0.1";
    drift->add_option("--mode", mode, "time, site, limit, xi or disc")
        ->check(CLI::IsMember({"time", "site", "limit", "xi", "disc"}));
    drift->add_option("--v", v, "drift speed")->check(CLI::NonNegativeNumber);
    drift->add_option("--x", x, "start radius");
    drift->add_option("--t", t, "time");
    drift->add_option("--theta-grid", theta_grid, "colatitude grid");
    drift->add_option("--av-grid", av_grid, "grid of a v (xi mode)");
    drift->add_option("--w-grid", w_grid, "grid of |w|/a (disc mode)");

    // legendre
    auto* legendre = app.add_subcommand("legendre", "colatitude density of spherical Brownian motion");
    add_common(legendre, c);
    double theta0 = 0.0;
    legendre->add_option("--t", t, "time")->required()->check(CLI::PositiveNumber);
    legendre->add_option("--theta0", theta0, "start colatitude");
    legendre->add_option("--theta-grid", theta_grid, "colatitude grid");

    // mc-verify
    auto* mcv = app.add_subcommand("mc-verify", "Monte-Carlo check of q g on a preset grid");
    add_common(mcv, c, false);
    std::string preset = "d2-v2";
    std::uint64_t seed = 1;
    int workers = 1;
    long paths = 0;
    double dt = 0;
    mc::CompareOptions copt;
    mcv->add_option("--preset", preset, "preset name")->check(CLI::IsMember(mc::verify_presets()));
    mcv->add_option("--seed", seed, "random seed");
    mcv->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    mcv->add_option("--paths", paths, "number of paths (default from preset)");
    mcv->add_option("--dt", dt, "base step (default from preset)");
    mcv->add_option("--z-max", copt.z_max, "cell z-score threshold");
    mcv->add_option("--min-fraction", copt.min_fraction, "required fraction of cells within z-max");
    mcv->add_option("--min-p", copt.min_p, "required chi-square p-value");

    // envelope
    auto* env = app.add_subcommand("envelope", "fitted constants of the joint-density envelopes");
    add_common(env, c);
    std::string which = "small_t_upper", y_grid = "0.02,0.05,0.1,0.2,0.5,0.9", et_grid = "0.01,0.03,0.1,0.3,0.9,2,5",
                phi_grid = "0,0.1,0.3,0.6,0.9,1.5,2.5";
    env->add_option("--which", which, "envelope name, or 'all'");
    env->add_option("--y-grid", y_grid, "distance-to-sphere grid");
    env->add_option("--t-grid", et_grid, "time grid");
    env->add_option("--phi-grid", phi_grid, "angle grid");

    // table
    auto* table = app.add_subcommand("table", "exact and asymptotic hitting-time forms side by side");
    add_common(table, c);
    table->add_option("--x-grid", x_grid, "start radii")->required();
    table->add_option("--t-grid", t_grid, "times")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? Ok : InvalidSpec;
    }

    try {
        Geometry g = Geometry::make(c.a, c.d);
        SeriesControl ctrl = c.ctrl();
        Table tab;
        int rc = Ok;
        if (*hitq) {
            tab.command = "hitq";
            tab.inputs = {"d", "a", "x", "t"};
            int modes = int(exact) + int(large_t) + int(uniform);
            if (modes > 1) throw std::domain_error("choose one of --exact, --large-t, --uniform");
            for (double xv : parse_grid(x_grid))
                for (double tv : parse_grid(t_grid)) {
                    require(xv > c.a && tv > 0, "hitq: need x > a and t > 0");
                    EvalPoint p{xv, tv};
                    DensityValue dv = large_t   ? hitting_time::q_asym_large_t(g, p)
                                      : uniform ? hitting_time::q_uniform(g, p)
                                                : hitting_time::q_exact(g, p, ctrl);
                    tab.add({double(c.d), c.a, xv, tv}, dv);
                }
        } else if (*hitsite) {
            tab.command = "hitsite";
            tab.inputs = {"d", "a", "x", "t", "theta"};
            require(x > c.a && t > 0, "hitsite: need x > a and t > 0");
            double q = joint ? hitting_time::q_exact(g, {x, t}, ctrl).value : 1.0;
            for (double th : parse_grid(theta_grid)) {
                require(th >= 0 && th <= M_PI, "hitsite: colatitude must lie in [0, pi]");
                double gv = hitting_site::g_density(g, x, t, SiteAngle::colatitude(th), ctrl);
                tab.add({double(c.d), c.a, x, t, th}, q * gv, to_string(Regime::SeriesExact));
            }
        } else if (*limitf) {
            tab.command = "limitf";
            tab.inputs = {"a", "v", "theta"};
            for (double th : parse_grid(theta_grid))
                tab.add({c.a, v, th}, hitting_site::f_limit(c.a, th, v, ctrl), to_string(Regime::Exact));
        } else if (*glimit) {
            tab.command = "glimit";
            tab.inputs = {"d", "a", "v", "theta"};
            hitting_site::LimitSite ls(g, c.a * v, ctrl);
            for (double th : parse_grid(theta_grid)) {
                require(th >= 0 && th <= M_PI, "glimit: colatitude must lie in [0, pi]");
                tab.add({double(c.d), c.a, v, th}, ls(th), to_string(Regime::Exact));
            }
        } else if (*drift) {
            tab.command = "drift";
            drifted::DriftSpec ds{v};
            ds.validate();
            if (mode == "time") {
                tab.inputs = {"d", "a", "v", "x", "t"};
                require(x > c.a && t > 0, "drift: need x > a and t > 0");
                tab.add({double(c.d), c.a, v, x, t}, drifted::drift_time_density(g, x, t, ds, ctrl),
                        to_string(Regime::Exact));
                if (v > 0) tab.add({double(c.d), c.a, v, x, t}, drifted::drift_time_asym(g, x, t, ds, ctrl));
            } else if (mode == "site") {
                tab.inputs = {"d", "a", "v", "x", "t", "theta"};
                require(x > c.a && t > 0, "drift: need x > a and t > 0");
                for (double th : parse_grid(theta_grid))
                    tab.add({double(c.d), c.a, v, x, t, th}, drifted::drift_site_density(g, x, t, th, ds, ctrl),
                            to_string(Regime::SeriesExact));
            } else if (mode == "limit") {
                tab.inputs = {"d", "a", "v", "theta"};
                require(v > 0, "drift: limit mode needs v > 0");
                for (double th : parse_grid(theta_grid))
                    tab.add({double(c.d), c.a, v, th}, drifted::drift_site_limit(g, c.a * v, th, ctrl),
                            to_string(Regime::Exact));
            } else if (mode == "xi") {
                tab.inputs = {"d", "a", "av"};
                for (double av : parse_grid(av_grid)) {
                    tab.add({double(c.d), c.a, av}, drifted::xi_const(g, av, ctrl), to_string(Regime::Exact));
                    tab.add({double(c.d), c.a, av}, drifted::xi_asym(g, av));
                }
            } else {
                tab.inputs = {"d", "a", "av", "w"};
                require(v > 0, "drift: disc mode needs v > 0");
                for (double w : parse_grid(w_grid))
                    tab.add({double(c.d), c.a, c.a * v, w}, drifted::projected_disc_density(g, w, c.a * v, ctrl));
            }
        } else if (*legendre) {
            tab.command = "legendre";
            tab.inputs = {"d", "t", "theta0", "theta"};
            for (double th : parse_grid(theta_grid)) {
                tab.add({double(c.d), t, theta0, th}, hitting_site::legendre_density(g.nu, t, theta0, th, ctrl),
                        to_string(Regime::SeriesExact));
                tab.add({double(c.d), t, theta0, th}, hitting_site::legendre_small_t(g.nu, t, th),
                        to_string(Regime::SmallTime));
            }
        } else if (*mcv) {
            tab.command = "mc-verify";
            tab.inputs = {"t_lo", "t_hi", "theta_lo", "theta_hi", "count", "analytic", "z"};
            auto run = mc::mc_verify(preset, seed, workers, paths, dt, copt);
            for (std::size_t k = 0; k < run.estimate.cells.size(); ++k) {
                const auto& e = run.estimate.cells[k];
                const auto& z = run.report.cells[k];
                Row r{{e.t_lo, e.t_hi, e.th_lo, e.th_hi, double(e.count), z.analytic, z.z},
                      e.density,
                      to_string(Regime::MonteCarlo),
                      z.flagged ? "flagged" : "",
                      e.std_err};
                tab.rows.push_back(std::move(r));
            }
            const auto& rep = run.report;
            tab.summary = {{"preset", preset},
                           {"seed", std::to_string(seed)},
                           {"workers", std::to_string(workers)},
                           {"n_paths", std::to_string(run.cfg.n_paths)},
                           {"dt", num(run.cfg.dt)},
                           {"censored", std::to_string(run.estimate.censored)},
                           {"populated", std::to_string(rep.populated)},
                           {"within", std::to_string(rep.within)},
                           {"fraction_within", num(rep.fraction_within)},
                           {"chi2", num(rep.chi2)},
                           {"dof", std::to_string(rep.dof)},
                           {"p_value", num(rep.p_value)},
                           {"result", rep.pass ? "pass" : "fail"}};
            std::cerr << "mc-verify " << preset << ": " << rep.within << "/" << rep.populated
                      << " cells within |z| <= " << copt.z_max << ", chi2 p = " << rep.p_value << " -> "
                      << (rep.pass ? "pass" : "fail") << '\n';
            if (!rep.pass) rc = AcceptanceFailure;
        } else if (*env) {
            tab.command = "envelope";
            tab.inputs = {"d", "evaluated", "excluded", "violations", "min_ratio", "max_ratio"};
            std::vector<hitting_site::EnvelopePoint> grid;
            for (double y : parse_grid(y_grid))
                for (double tv : parse_grid(et_grid))
                    for (double phi : parse_grid(phi_grid)) grid.push_back({y, tv, phi});
            std::vector<Envelope> list;
            if (which == "all")
                list = {Envelope::Lemma43,      Envelope::Lemma45_small, Envelope::Lemma45_large,
                        Envelope::Prop41_upper, Envelope::Prop41_lower,  Envelope::Cor41,
                        Envelope::Lemma46_crucial};
            else
                list = {parse_envelope(which)};
            for (auto e : list) {
                auto r = hitting_site::envelope_check(g, grid, e, ctrl);
                tab.add({double(c.d), double(r.evaluated), double(r.excluded), double(r.violations),
                         r.grid_min_ratio, r.grid_max_ratio},
                        r.fitted_constant, hitting_site::to_string(e), "fitted constant");
            }
        } else if (*table) {
            tab.command = "table";
            tab.inputs = {"d", "a", "x", "t"};
            for (double xv : parse_grid(x_grid))
                for (double tv : parse_grid(t_grid)) {
                    require(xv > c.a && tv > 0, "table: need x > a and t > 0");
                    EvalPoint p{xv, tv};
                    tab.add({double(c.d), c.a, xv, tv}, hitting_time::q_exact(g, p, ctrl));
                    // asymptotic forms are listed only inside their domains
                    try {
                        tab.add({double(c.d), c.a, xv, tv}, hitting_time::q_asym_large_t(g, p));
                    } catch (const std::domain_error&) {
                    }
                    try {
                        tab.add({double(c.d), c.a, xv, tv}, hitting_time::q_uniform(g, p));
                    } catch (const std::domain_error&) {
                    }
                }
        }
        emit(tab, c);
        return rc;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return NumericError;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid spec: " << e.what() << '\n';
        return InvalidSpec;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid spec: " << e.what() << '\n';
        return InvalidSpec;
    }
}
