// kolmo_cli - command-line front end for the numerical experiments
#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "kolmo/carleman.hpp"
#include "kolmo/config.hpp"
#include "kolmo/evolve.hpp"
#include "kolmo/observability.hpp"
#include "kolmo/semigroup.hpp"

using namespace kolmo;
using json = nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 1;
constexpr int exit_numerical = 2;
constexpr int exit_usage = 64;

struct Subcommand {
    const char* name;
    const char* verifies;
    const char* help;
};

const std::vector<Subcommand> subcommands{
    {"spectrum", "eigenvalue asymptotics: lambda_n = e^{i pi/4} q'(0) sqrt(n) (1 + o(1))",
     "leading eigenpairs of K_n, H_n, the Airy operators or the Laplacian"},
    {"agmon", "Agmon decay of psi_n' at the walls: |psi_n'(y)| <= C max(1, sqrt n) e^{-sqrt(n) kappa_eps(y)}",
     "boundary flux decay of the first eigenfunction over an n-sweep"},
    {"decay", "semigroup bound: ||e^{-t K_n}|| <= C e^{-t gamma sqrt n} for gamma < q'(0)/sqrt2",
     "propagator norms and fitted decay rates"},
    {"resolvent", "resolvent bound: sqrt(n) ||(K_n - z)^{-1}|| <= C on Re z <= gamma sqrt n",
     "resolvent norms over a half-plane sample"},
    {"pseudospectrum", "resolvent bound: sqrt(n) ||(K_n - z)^{-1}|| <= C on Re z <= gamma sqrt n",
     "smallest singular value of M - z on a grid"},
    {"evolve", "Fourier decoupling: u = sum_n u_n(t, y) e^{inx} with ||u||^2 = 2 pi sum ||u_n||^2",
     "time integration of Fourier modes and 2D synthesis"},
    {"carleman", "Carleman estimate for K_n with weight e^{-sqrt(n) theta(t) psi(y)}",
     "Carleman weights, coefficient positivity and numerical verification"},
    {"observability", "observability for large n with cost C e^{2 kappa sqrt n}",
     "per-mode observability constants and cost-law fit"},
    {"critical-time", "critical time: observable for T > T_c, not observable for T < T_c, T_min <= T_c <= T_max",
     "eigenfunction-ratio scan over observation times"},
};

const Subcommand* find_subcommand(const std::string& name) {
    for (const auto& s : subcommands)
        if (name == s.name) return &s;
    return nullptr;
}

std::string usage() {
    std::string u = "usage: kolmo_cli <subcommand> [--config PATH] [--out DIR] [--threads N] [--seed K]\n\nsubcommands:\n";
    for (const auto& s : subcommands) u += "  " + std::string(s.name) + std::string(16 - std::strlen(s.name), ' ') + s.help + "\n";
    return u;
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

class Run {
public:
    Run(Config cfg, std::string out, int threads, std::uint64_t seed)
        : cfg_(std::move(cfg)), out_(std::move(out)), threads_(threads), seed_(seed) {
        std::filesystem::create_directories(out_);
    }

    const Config& cfg() const { return cfg_; }
    int threads() const { return threads_; }
    std::uint64_t seed() const { return seed_; }

    const QProfile& profile() {
        if (!profile_) profile_ = profile_from_config(cfg_);
        return *profile_;
    }

    std::string path(const std::string& name) {
        outputs_.push_back(name);
        return (std::filesystem::path(out_) / name).string();
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream f(path(name), std::ios::binary);
        f << j.dump(2) << '\n';
    }

    json& checks() { return checks_; }

    void manifest(const Subcommand& sc, const std::string& status, const std::string& message, double wall) {
        json m;
        m["subcommand"] = sc.name;
        m["verifies"] = sc.verifies;
        m["status"] = status;
        if (!message.empty()) m["message"] = message;
        m["version"] = KOLMO_VERSION;
        m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                             std::to_string(EIGEN_MINOR_VERSION);
        m["seed"] = seed_;
        m["threads"] = threads_;
        m["config_origin"] = cfg_.origin();
        m["config"] = cfg_.echo();
        m["outputs"] = outputs_;
        m["checks"] = checks_;
        m["wall_time_seconds"] = wall;
        std::ofstream f((std::filesystem::path(out_) / "manifest.json").string(), std::ios::binary);
        f << m.dump(2) << '\n';
    }

private:
    Config cfg_;
    std::string out_;
    int threads_;
    std::uint64_t seed_;
    std::optional<QProfile> profile_;
    std::vector<std::string> outputs_;
    json checks_ = json::object();
};

// ---- subcommands ----

DiscreteOperator model_operator(Run& r, const std::string& section, long n, int count) {
    const auto& c = r.cfg();
    const std::string model = c.text_or(section, "model", "kolmogorov");
    if (model == "kolmogorov") {
        const auto& p = r.profile();
        const long cells = c.integer_or(section, "cells", 0);
        return assemble_kn(p, n, cells > 0 ? Grid1D::uniform(p.lo(), p.hi(), int(cells))
                                           : kn_grid(p, n, c.number_or(section, "per_scale", 20.0)));
    }
    if (model == "harmonic") {
        const double qp = c.has(section, "qprime0") ? c.number(section, "qprime0") : r.profile().qprime0();
        const double bw = c.number_or(section, "box_half_width", harmonic_box_half_width(qp, n, count));
        return assemble_hn(qp, n, bw, Grid1D::uniform(-bw, bw, int(c.integer_or(section, "cells", 2000))), count);
    }
    if (model == "airy_plus" || model == "airy_minus") {
        const double alpha = c.number_or(section, "alpha", 1.0);
        const double box = c.number_or(section, "box", std::max(25.0, airy_min_box_length(alpha, count)));
        const bool plus = model == "airy_plus";
        return assemble_airy(alpha, plus ? AirySide::plus : AirySide::minus, box,
                             Grid1D::uniform(plus ? 0.0 : -box, plus ? box : 0.0, int(c.integer_or(section, "cells", 10000))),
                             count);
    }
    if (model == "airy_line") {
        const double alpha = c.number_or(section, "alpha", 1.0);
        const double hw = c.number_or(section, "half_width", 16.0);
        return assemble_airy_line(alpha, hw, Grid1D::uniform(-hw, hw, int(c.integer_or(section, "cells", 1600))));
    }
    if (model == "laplacian") {
        const auto& p = r.profile();
        return assemble_dirichlet_laplacian(Grid1D::uniform(p.lo(), p.hi(), int(c.integer_or(section, "cells", 400))));
    }
    throw ValidationError("config: " + section + ".model '" + model +
                          "' is not one of kolmogorov, harmonic, airy_plus, airy_minus, airy_line, laplacian");
}

void run_spectrum(Run& r) {
    const auto& c = r.cfg();
    const long n = c.integer_or("spectrum", "n", 400);
    const int count = int(c.integer_or("spectrum", "count", 3));
    if (count < 1) throw ValidationError("config: spectrum.count must be at least 1");
    const auto op = model_operator(r, "spectrum", n, count);
    EigenOptions eo{c.number_or("spectrum", "tol", 1e-10), int(c.integer_or("spectrum", "max_iter", 2000)), r.seed()};
    RayConfirmation ray;
    const auto leading = smallest_real_eigenpair(op, eo.tol, eo.max_iter, &ray, r.seed());
    auto pairs = eigenpairs_near(op, c.number_or("spectrum", "shift", 0.0), count, eo);
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.lambda.real() < b.lambda.real(); });
    json j;
    j["model"] = to_string(op.tag.kind);
    j["n"] = n;
    j["operator"] = to_json(op);
    j["leading"] = to_json(leading);
    j["leading"]["ray_confirmed"] = ray.confirmed;
    const double rn = std::sqrt(std::max(1.0, std::abs(double(n))));
    j["leading"]["re_lambda_over_sqrt_n"] = leading.lambda.real() / rn;
    j["eigenpairs"] = json::array();
    for (const auto& p : pairs) j["eigenpairs"].push_back(to_json(p));
    r.write_json("spectrum.json", j);
    CsvWriter w(r.path("eigenfunctions.csv"));
    std::vector<std::string> head{"y"};
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        head.push_back("re_" + std::to_string(k + 1));
        head.push_back("im_" + std::to_string(k + 1));
    }
    w.header(head);
    for (std::size_t i = 0; i < op.dim(); ++i) {
        rvec row{op.grid.interior_node(i)};
        for (const auto& p : pairs) {
            row.push_back(p.vector[i].real());
            row.push_back(p.vector[i].imag());
        }
        w.row(row);
    }
    r.checks()["re_lambda_over_sqrt_n"] = leading.lambda.real() / rn;
}

void run_agmon(Run& r) {
    const auto& c = r.cfg();
    const auto& p = r.profile();
    const auto ns = c.integers_or("agmon", "ns", {100, 400, 900, 1600});
    const double eps = c.number_or("agmon", "eps", 0.1);
    const double per_scale = c.number_or("agmon", "per_scale", 20.0);
    std::vector<EigenPair> pairs(ns.size());
    std::vector<AgmonReport> reports(ns.size());
    parallel_for(ns.size(), unsigned(r.threads()), [&](std::size_t i) {
        pairs[i] = smallest_real_eigenpair(assemble_kn(p, ns[i], kn_grid(p, ns[i], per_scale)), 1e-10, 2000, nullptr, r.seed());
        reports[i] = agmon_profile_check(pairs[i], p, eps);
    });
    CsvWriter w(r.path("agmon.csv"));
    w.header({"n", "re_lambda", "im_lambda", "abs_flux_lo", "abs_flux_hi", "max_weighted", "ratio", "argmax_y"});
    rvec x, ylo, yhi;
    json rows = json::array();
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const auto& e = pairs[i];
        const auto& a = reports[i];
        w.row({double(ns[i]), e.lambda.real(), e.lambda.imag(), std::abs(e.deriv_lo), std::abs(e.deriv_hi),
               a.max_weighted, a.ratio, a.argmax_y});
        x.push_back(std::sqrt(std::abs(double(ns[i]))));
        ylo.push_back(std::log(std::abs(e.deriv_lo)));
        yhi.push_back(std::log(std::abs(e.deriv_hi)));
        rows.push_back({{"n", ns[i]}, {"lambda", cjson(e.lambda)}, {"ratio", a.ratio}, {"max_weighted", a.max_weighted}});
    }
    json j{{"eps", eps}, {"modes", rows}};
    if (ns.size() >= 2) {
        j["slope_log_flux_hi_vs_sqrt_n"] = fit_line(x, yhi).slope;
        j["slope_log_flux_lo_vs_sqrt_n"] = fit_line(x, ylo).slope;
        r.checks()["slope_log_flux_hi_vs_sqrt_n"] = j["slope_log_flux_hi_vs_sqrt_n"];
    }
    r.write_json("agmon.json", j);
}

void run_decay(Run& r) {
    const auto& c = r.cfg();
    DecayOptions o;
    o.per_scale = int(c.integer_or("decay", "per_scale", 10));
    o.scale_times = c.flag_or("decay", "scale_times", true);
    o.threads = r.threads();
    o.seed = r.seed();
    const auto ns = c.integers_or("decay", "ns", {100, 400, 900});
    const auto times = c.numbers_or("decay", "times", {0.5, 1.5, 3.0, 4.5, 6.0});
    auto traces = decay_sweep(r.profile(), ns, times, o);
    write_decay_csv(r.path("decay.csv"), traces);
    json rows = json::array();
    for (const auto& t : traces)
        rows.push_back({{"n", t.n},
                        {"gamma_fit", t.gamma_fit},
                        {"rate_over_sqrt_n", t.gamma_fit / std::max(1.0, std::sqrt(std::abs(double(t.n))))},
                        {"constant", t.constant},
                        {"fit_from", t.fit_from},
                        {"steps_per_unit_time", t.steps_per_unit_time}});
    const double mn = min_normalized_rate(traces);
    r.write_json("decay.json", {{"modes", rows}, {"min_rate_over_sqrt_n", mn}, {"target", r.profile().qprime0() / sqrt2}});
    r.checks()["min_rate_over_sqrt_n"] = mn;
}

void run_resolvent(Run& r) {
    const auto& c = r.cfg();
    const long n = c.integer_or("resolvent", "n", 400);
    const auto& p = r.profile();
    const auto op = assemble_kn(p, n, kn_grid(p, n, c.number_or("resolvent", "per_scale", 10.0)));
    const double s = std::sqrt(std::max(1.0, std::abs(double(n))));
    const auto re_f = c.numbers_or("resolvent", "re_factors", {-1.0, -0.5, 0.0, 0.25, 0.5});
    const double im_max = c.number_or("resolvent", "im_max", double(std::abs(n)));
    const auto ims = linspace(-im_max, im_max, int(c.integer_or("resolvent", "im_points", 41)));
    std::vector<cplx> zs;
    for (double f : re_f)
        for (double im : ims) zs.push_back(cplx(f * s * p.qprime0() / sqrt2, im));
    PowerOptions po;
    po.seed = r.seed();
    auto samples = resolvent_sweep(op, zs, r.threads(), po);
    CsvWriter w(r.path("resolvent.csv"));
    w.header({"re", "im", "norm", "sqrt_n_norm", "smin", "flagged"});
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    for (const auto& x : samples) {
        w.row({x.z.real(), x.z.imag(), x.norm, s * x.norm, x.smin, x.flagged ? 1.0 : 0.0});
        if (!x.flagged) {
            mx = std::max(mx, s * x.norm);
            mn = std::min(mn, s * x.norm);
        }
    }
    r.write_json("resolvent.json", {{"n", n}, {"samples", samples.size()}, {"max_sqrt_n_norm", mx}, {"min_sqrt_n_norm", mn}});
    r.checks()["max_sqrt_n_norm"] = mx;
}

void run_pseudospectrum(Run& r) {
    const auto& c = r.cfg();
    const long n = c.integer_or("pseudospectrum", "n", 100);
    const auto op = model_operator(r, "pseudospectrum", n, 1);
    const double rn = std::sqrt(std::max(1.0, std::abs(double(n))));
    auto g = pseudospectrum_grid(op, {c.number_or("pseudospectrum", "re_min", -rn), c.number_or("pseudospectrum", "re_max", 3 * rn)},
                                 {c.number_or("pseudospectrum", "im_min", -3 * rn), c.number_or("pseudospectrum", "im_max", 3 * rn)},
                                 int(c.integer_or("pseudospectrum", "re_points", 41)),
                                 int(c.integer_or("pseudospectrum", "im_points", 41)), r.threads());
    write_pseudospectrum_csv(r.path("pseudospectrum.csv"), g);
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& row : g.smin)
        for (double v : row) mn = std::min(mn, v);
    r.write_json("pseudospectrum.json", {{"model", to_string(op.tag.kind)}, {"n", n}, {"min_smin", mn}});
    r.checks()["min_smin"] = mn;
}

void run_evolve(Run& r) {
    const auto& c = r.cfg();
    const auto& p = r.profile();
    const auto modes = c.integers_or("evolve", "modes", {-2, 0, 3});
    long nmax = 0;
    for (long n : modes) nmax = std::max(nmax, std::abs(n));
    const long cells = c.integer_or("evolve", "cells", 0);
    const Grid1D g = cells > 0 ? Grid1D::uniform(p.lo(), p.hi(), int(cells)) : kn_grid(p, nmax, 10.0);
    const double t_final = c.number_or("evolve", "t_final", 0.1);
    const double dt = c.number_or("evolve", "dt", 1e-3);
    const std::string initial = c.text_or("evolve", "initial", "gaussian");
    Rng rng(r.seed());
    FourierField field;
    for (long n : modes) {
        if (field.modes.count(n)) throw ValidationError("config: evolve.modes lists mode " + std::to_string(n) + " twice");
        ModeState s;
        if (initial == "gaussian") {
            s = gaussian_mode(n, g, c.number_or("evolve", "center", 0.0), c.number_or("evolve", "width", 0.25));
        } else if (initial == "laplacian") {
            s = laplacian_mode(n, g, int(c.integer_or("evolve", "k", 1)));
        } else if (initial == "eigen") {
            s = eigenfunction_mode(assemble_kn(p, n, g), r.seed());
        } else if (initial == "random") {
            s = ModeState{n, 0.0, rng.complex_vector(g.interior()), g};
        } else if (initial == "file") {
            s = mode_from_csv(n, g, c.resolve(c.text("evolve", "file")));
        } else {
            throw ValidationError("config: evolve.initial '" + initial + "' is not one of gaussian, laplacian, eigen, random, file");
        }
        field.modes[n] = s;
    }
    const int x_points = int(c.integer_or("evolve", "x_points", 4 * nmax + 4));
    const auto start = synthesize_2d(field, x_points, g);
    // per-mode traces need the flux history, so modes are evolved here rather than through evolve_field
    std::vector<std::pair<long, ModeState>> items(field.modes.begin(), field.modes.end());
    std::vector<std::pair<ModeState, BoundaryTrace>> res(items.size());
    parallel_for(items.size(), unsigned(r.threads()), [&](std::size_t i) {
        res[i] = evolve_mode(assemble_kn(p, items[i].first, g), items[i].second, t_final, dt);
    });
    FourierField final_field;
    json rows = json::array();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const long n = items[i].first;
        final_field.modes[n] = res[i].first;
        write_trace_csv(r.path("trace_n" + std::to_string(n) + ".csv"), res[i].second);
        rows.push_back({{"n", n},
                        {"initial_norm", l2_norm(items[i].second.values, g.h)},
                        {"final_norm", l2_norm(res[i].first.values, g.h)},
                        {"flux_energy", flux_energy(res[i].second, 0.0, t_final)}});
    }
    const auto end = synthesize_2d(final_field, x_points, g);
    CsvWriter w(r.path("field.csv"));
    w.header({"x", "y", "re", "im"});
    for (std::size_t k = 0; k < end.x.size(); ++k)
        for (std::size_t i = 0; i < end.y.size(); ++i) w.row({end.x[k], end.y[i], end.values[k][i].real(), end.values[k][i].imag()});
    const double mismatch = std::abs(end.energy - end.mode_energy) / std::max(end.mode_energy, 1e-300);
    r.write_json("evolve.json", {{"modes", rows},
                                 {"t_final", t_final},
                                 {"dt", dt},
                                 {"x_points", x_points},
                                 {"initial_energy", start.energy},
                                 {"final_energy", end.energy},
                                 {"final_mode_energy", end.mode_energy},
                                 {"parseval_relative_mismatch", mismatch}});
    r.checks()["parseval_relative_mismatch"] = mismatch;
}

void run_carleman(Run& r) {
    const auto& c = r.cfg();
    const auto& p = r.profile();
    const double floor_kappa = std::max(p.primitive(p.ell_plus()), p.primitive(-p.ell_minus())) / sqrt2;
    const double kappa = c.number_or("carleman", "kappa", 1.05 * floor_kappa);
    const double tau1 = c.number_or("carleman", "tau1", 0.05), tau2 = c.number_or("carleman", "tau2", 0.25);
    const long n = c.integer_or("carleman", "n", 400);
    const auto wp = build_weight_pair(p, kappa, tau1, tau2);
    write_weight_csv(r.path("weights.csv"), wp, n, int(c.integer_or("carleman", "weight_t_points", 50)),
                     int(c.integer_or("carleman", "weight_y_points", 201)));
    json j;
    j["weights"] = to_json(wp);
    const int ys = int(c.integer_or("carleman", "positivity_y_points", 401));
    auto pp = positivity_threshold(wp, wp.plus, ys), pm = positivity_threshold(wp, wp.minus, ys);
    const double threshold = std::max(pp.threshold, pm.threshold);
    j["positivity"] = {{"threshold_plus", pp.threshold},
                       {"threshold_minus", pm.threshold},
                       {"threshold", threshold},
                       {"phi1_holds", pp.phi1_holds && pm.phi1_holds},
                       {"scan_consistent", pp.scan_consistent && pm.scan_consistent}};
    r.checks()["positivity_threshold"] = threshold;
    if (c.flag_or("carleman", "verify", true)) {
        const double cpd = c.number_or("carleman", "cells_per_delta", 4.0);
        const int tn = int(c.integer_or("carleman", "time_nodes", 100));
        auto run_at = [&](double cells_per_delta, int nodes) {
            const int cells = int(std::ceil(p.length() / (wp.delta / cells_per_delta)));
            auto pair = smallest_real_eigenpair(assemble_kn(p, n, Grid1D::uniform(p.lo(), p.hi(), cells)), 1e-10, 2000,
                                                nullptr, r.seed());
            return verify_eigenfunction_carleman(wp, pair, nodes);
        };
        const auto coarse = run_at(cpd, tn);
        json v{{"coarse", {{"plus", to_json(coarse.plus)}, {"minus", to_json(coarse.minus)}, {"constant", coarse.constant}}}};
        r.checks()["carleman_constant"] = coarse.constant;
        if (c.flag_or("carleman", "refine", true)) {
            const auto fine = run_at(2 * cpd, 2 * tn);
            const double change = std::abs(fine.constant / coarse.constant - 1.0);
            v["fine"] = {{"plus", to_json(fine.plus)}, {"minus", to_json(fine.minus)}, {"constant", fine.constant}};
            v["relative_change"] = change;
            r.checks()["carleman_relative_change"] = change;
        }
        j["verification"] = v;
    }
    r.write_json("carleman.json", j);
}

void run_observability(Run& r) {
    const auto& c = r.cfg();
    const auto& p = r.profile();
    ObservationSetup s;
    s.profile = p;
    s.T = c.number_or("observability", "T", 0.05);
    s.tau1 = c.number_or("observability", "tau1", 0.01);
    s.tau2 = c.number_or("observability", "tau2", s.T);
    s.dt = c.number_or("observability", "dt", 5e-5);
    const double rel = c.number_or("observability", "regularization", 1e-12);
    const auto ns = c.integers_or("observability", "ns", {25, 100, 225, 400});
    CsvWriter w(r.path("observability.csv"));
    w.header({"n", "C_n", "log_C_n", "regularization", "log_eigen_ratio"});
    json rows = json::array();
    rvec x, y;
    for (long n : ns) {
        s.grid = observability_grid(p, n);
        const auto maps = observation_maps(s, n, r.threads());
        const auto oc = observability_constant(maps, rel, 1e-10, 20000, r.seed());
        const double lr = eigenfunction_ratio(p, n, s.T).log_ratio;
        w.row({double(n), oc.constant, std::log(oc.constant), oc.regularization, lr});
        rows.push_back({{"n", n}, {"constant", oc.constant}, {"regularization", oc.regularization},
                        {"iterations", oc.iterations}, {"cells", s.grid.n_cells}, {"log_eigen_ratio", lr}});
        x.push_back(2.0 * std::sqrt(std::abs(double(n))));
        y.push_back(std::log(oc.constant));
    }
    json j{{"T", s.T}, {"tau1", s.tau1}, {"tau2", s.tau2}, {"dt", s.dt}, {"relative_regularization", rel}, {"modes", rows}};
    if (ns.size() >= 4) {
        auto lf = fit_line(x, y);
        const double bound = 1.5 * p.qprime0() / sqrt2 * time_bounds(p).t_max;
        j["cost_law"] = {{"kappa_hat", lf.slope}, {"residual", lf.rms}, {"flagged", lf.rms > 0.5},
                         {"kappa_bound", bound}, {"within_bound", lf.slope <= bound}};
        r.checks()["kappa_hat"] = lf.slope;
    }
    r.write_json("observability.json", j);
}

void run_critical_time(Run& r) {
    const auto& c = r.cfg();
    const auto& p = r.profile();
    const auto times = c.numbers_or("critical-time", "times", {0.3, 0.4, 0.45, 0.55, 0.6, 0.7});
    const auto ns = c.integers_or("critical-time", "ns", {100, 400, 900, 1600});
    auto rep = critical_time_scan(p, times, ns, r.threads(), c.number_or("critical-time", "per_scale", 20.0),
                                  c.number_or("critical-time", "threshold", 0.05));
    r.write_json("critical_time.json", to_json(rep));
    write_scan_csv(r.path("critical_time.csv"), rep);
    auto& ch = r.checks();
    ch["has_transition"] = rep.has_transition;
    ch["monotone"] = rep.monotone;
    ch["intersects_bracket"] = rep.intersects_bracket;
    if (rep.has_transition) ch["transition"] = {rep.transition_lo, rep.transition_hi};
    // equal side integrals pin the critical time to T_min = T_max
    if (std::abs(rep.bracket.t_max - rep.bracket.t_min) <= 1e-12 * rep.bracket.t_max) {
        const double tc = rep.bracket.t_min;
        ch["critical_time"] = tc;
        ch["transition_contains_critical_time"] = rep.has_transition && rep.transition_lo <= tc && tc <= rep.transition_hi;
    }
}

int dispatch(const std::string& name, Run& r) {
    if (name == "spectrum") run_spectrum(r);
    else if (name == "agmon") run_agmon(r);
    else if (name == "decay") run_decay(r);
    else if (name == "resolvent") run_resolvent(r);
    else if (name == "pseudospectrum") run_pseudospectrum(r);
    else if (name == "evolve") run_evolve(r);
    else if (name == "carleman") run_carleman(r);
    else if (name == "observability") run_observability(r);
    else if (name == "critical-time") run_critical_time(r);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    // the subcommand is the first bare token; option values are skipped
    std::string sub;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" || a == "--out" || a == "--threads" || a == "--seed") {
            ++i;
            continue;
        }
        if (!a.empty() && a[0] == '-') continue;
        sub = a;
        break;
    }
    const bool help = std::any_of(argv + 1, argv + argc, [](const char* a) {
        return std::string(a) == "--help" || std::string(a) == "-h";
    });
    if (sub.empty() && help) {
        std::cout << usage();
        return exit_ok;
    }
    const Subcommand* sc = find_subcommand(sub);
    if (!sc) {
        if (!sub.empty()) std::cerr << "kolmo_cli: unknown subcommand '" << sub << "'\n";
        std::cerr << usage();
        return exit_usage;
    }

    CLI::App app{"numerical laboratory for the Kolmogorov-type equation u_t + q(y)^2 u_x - u_yy = 0", "kolmo_cli"};
    std::string config_path, out_dir = "out";
    int threads = 1;
    std::uint64_t seed = default_seed;
    app.add_option("--config", config_path, "run configuration (sectioned key = value file)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config's top-level seed)");
    app.fallthrough();  // inherited by subcommands, so global flags may follow the subcommand
    for (const auto& s : subcommands) app.add_subcommand(s.name, s.help);
    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Run> run;
    try {
        Config cfg = config_path.empty() ? Config::from_string("[profile]\nkind = linear\nell_minus = 1\nell_plus = 1\n", "<default>")
                                         : Config::from_file(config_path);
        if (!*seed_opt && cfg.has("", "seed")) seed = static_cast<std::uint64_t>(cfg.integer("", "seed"));
        run.emplace(std::move(cfg), out_dir, threads, seed);
        dispatch(sc->name, *run);
    } catch (const ValidationError& e) {
        std::cerr << "kolmo_cli " << sc->name << ": " << e.what() << '\n';
        if (run) run->manifest(*sc, "validation_error", e.what(), 0.0);
        return exit_validation;
    } catch (const NumericalError& e) {
        std::cerr << "kolmo_cli " << sc->name << ": numerical failure: " << e.what() << '\n';
        if (run) run->manifest(*sc, "numerical_failure", e.what(), 0.0);
        return exit_numerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "kolmo_cli " << sc->name << ": " << e.what() << '\n';
        return exit_validation;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run->manifest(*sc, "ok", "", wall);
    std::cout << "kolmo_cli " << sc->name << ": wrote " << out_dir << "/manifest.json\n";
    return exit_ok;
}
