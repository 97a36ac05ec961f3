// acceptance - one PASS/FAIL line per criterion
//
// Usage: acceptance [N ...]   runs the listed criteria (all when none are given).
// Exit status is nonzero when any listed criterion fails. Every line reports the
// measured quantities and the runtime against its limit; the limit is part of the check.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "kolmo/carleman.hpp"
#include "kolmo/evolve.hpp"
#include "kolmo/observability.hpp"
#include "kolmo/semigroup.hpp"
#include "oracles.hpp"

using namespace kolmo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string title;
    double limit_seconds;
    std::function<Outcome()> run;
};

int threads() { return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency()))); }

std::string g(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

const cplx diag = std::polar(1.0, pi / 4.0);
const std::vector<long> sweep{100, 400, 900, 1600};

std::vector<EigenPair> symmetric_pairs() {
    const auto p = QProfile::linear(1.0, 1.0);
    std::vector<EigenPair> out(sweep.size());
    parallel_for(sweep.size(), unsigned(threads()), [&](std::size_t i) {
        out[i] = smallest_real_eigenpair(assemble_kn(p, sweep[i], kn_grid(p, sweep[i])));
    });
    return out;
}

Outcome laplacian_oracle() {
    const double L = pi;
    auto first = [&](int cells) {
        return smallest_real_eigenpair(assemble_dirichlet_laplacian(Grid1D::uniform(0.0, L, cells))).lambda.real();
    };
    const double err400 = std::abs(first(401) - 1.0);
    rvec errs;
    for (int cells : {50, 100, 200, 400}) errs.push_back(std::abs(first(cells) - 1.0));
    bool eoc_ok = true;
    std::ostringstream eocs;
    for (std::size_t k = 1; k < errs.size(); ++k) {
        const double eoc = std::log2(errs[k - 1] / errs[k]);
        eoc_ok = eoc_ok && std::abs(eoc - 2.0) <= 0.2;
        eocs << (k > 1 ? "," : "") << g(eoc);
    }
    return {err400 <= 1e-4 && eoc_ok, "|lambda1-1|=" + g(err400) + " (m=400) EOC=" + eocs.str()};
}

Outcome harmonic_oracle() {
    const double bw = harmonic_box_half_width(1.0, 1, 3);
    const int cells = int(std::ceil(2.0 * bw / 2.5e-4));
    auto op = assemble_hn(1.0, 1, bw, Grid1D::uniform(-bw, bw, cells), 3);
    auto pairs = eigenpairs_near(op, 0.0, 3);
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return std::abs(a.lambda) < std::abs(b.lambda); });
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k) {
        const cplx expect = oracle::harmonic_eigenvalue(k, 1, 1.0);
        worst = std::max(worst, std::abs(pairs[k - 1].lambda - expect) / std::abs(expect));
    }
    return {worst <= 1e-6, "max rel err=" + g(worst) + " (h=" + g(2.0 * bw / cells) + ", box=" + g(bw) + ")"};
}

Outcome airy_oracle() {
    const double L = 25.0;
    const int cells = 20000;
    auto op = assemble_airy(1.0, AirySide::plus, L, Grid1D::uniform(0.0, L, cells));
    auto pair = eigenpairs_near(op, 0.0, 1).front();
    const cplx expect = std::polar(std::abs(oracle::airy_first_zero()), pi / 3.0);
    const double rel = std::abs(pair.lambda - expect) / std::abs(expect);
    return {rel <= 1e-5, "lambda=" + g(pair.lambda.real()) + "+" + g(pair.lambda.imag()) + "i rel err=" + g(rel) +
                             " (h=" + g(L / cells) + ")"};
}

Outcome eigen_asymptotics() {
    const auto pairs = symmetric_pairs();
    rvec dev;
    std::ostringstream s;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        dev.push_back(std::abs(pairs[i].lambda / std::sqrt(double(sweep[i])) - diag));
        s << (i ? "," : "") << g(dev.back());
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < dev.size(); ++i) decreasing = decreasing && dev[i] < dev[i - 1];
    return {decreasing && dev.back() < 0.1, "|lambda/sqrt n - e^{i pi/4}|=" + s.str()};
}

Outcome agmon_slope() {
    const auto pairs = symmetric_pairs();
    rvec x, y;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        x.push_back(std::sqrt(double(sweep[i])));
        y.push_back(std::log(std::abs(pairs[i].deriv_hi)));
    }
    const double slope = fit_line(x, y).slope, target = -1.0 / (2.0 * sqrt2);
    const double rel = std::abs(slope / target - 1.0);
    return {rel <= 0.15, "slope=" + g(slope) + " target=" + g(target) + " rel dev=" + g(rel)};
}

Outcome semigroup_decay() {
    DecayOptions o;
    o.per_scale = 10;
    o.scale_times = true;
    o.threads = threads();
    auto traces = decay_sweep(QProfile::linear(1.0, 1.0), {100, 400, 900}, {0.5, 1.5, 3.0, 4.5, 6.0}, o);
    std::ostringstream s;
    for (const auto& t : traces) s << (t.n == 100 ? "" : ",") << g(t.gamma_fit / std::sqrt(double(t.n)));
    const double m = min_normalized_rate(traces);
    return {m >= 0.6, "rate/sqrt n=" + s.str() + " min=" + g(m)};
}

// The bound is a ceiling on sqrt n ||R|| uniform in n: the per-n supremum over the
// sampled half-plane must not drift across n by more than the factor 5.
Outcome resolvent_bound() {
    const auto p = QProfile::linear(1.0, 1.0);
    rvec sups;
    double lit_max = 0.0, lit_min = std::numeric_limits<double>::infinity();
    int flagged = 0;
    for (long n : {400L, 1600L}) {
        const double rn = std::sqrt(double(n));
        auto op = assemble_kn(p, n, kn_grid(p, n, 10.0));
        rvec ims = linspace(-double(n), double(n), 41);
        for (double im : linspace(0.5 * rn, 2.0 * rn, 16)) ims.push_back(im);
        std::vector<cplx> zs;
        for (double f : {-1.0, -0.5, 0.0, 0.25, 0.5})
            for (double im : ims) zs.push_back(cplx(f * rn / sqrt2, im));
        double sup = 0.0;
        for (const auto& x : resolvent_sweep(op, zs, threads())) {
            if (x.flagged) {
                ++flagged;
                continue;
            }
            sup = std::max(sup, rn * x.norm);
            lit_max = std::max(lit_max, rn * x.norm);
            lit_min = std::min(lit_min, rn * x.norm);
        }
        sups.push_back(sup);
    }
    const double ratio = std::max(sups[0], sups[1]) / std::min(sups[0], sups[1]);
    return {ratio < 5.0 && flagged == 0, "sup sqrt n||R||: n=400 " + g(sups[0]) + ", n=1600 " + g(sups[1]) +
                                             " ratio=" + g(ratio) + " (all-sample max/min=" + g(lit_max / lit_min) +
                                             ", flagged=" + std::to_string(flagged) + ")"};
}

Outcome carleman_check() {
    const auto p = QProfile::linear(1.0, 1.0);
    const double kappa = 1.05 * std::max(p.primitive(p.ell_plus()), p.primitive(-p.ell_minus())) / sqrt2;
    const auto wp = build_weight_pair(p, kappa, 0.05, 0.25);
    const long n = 400;
    auto run_at = [&](double cells_per_delta, int nodes) {
        const int cells = int(std::ceil(p.length() / (wp.delta / cells_per_delta)));
        auto pair = smallest_real_eigenpair(assemble_kn(p, n, Grid1D::uniform(p.lo(), p.hi(), cells)));
        return verify_eigenfunction_carleman(wp, pair, nodes);
    };
    const auto coarse = run_at(4.0, 100), fine = run_at(8.0, 200);
    const double change = std::abs(fine.constant / coarse.constant - 1.0);
    const auto pp = positivity_threshold(wp, wp.plus), pm = positivity_threshold(wp, wp.minus);
    const double threshold = std::max(pp.threshold, pm.threshold);
    const bool positivity = std::isfinite(threshold) && pp.phi1_holds && pm.phi1_holds && pp.scan_consistent &&
                            pm.scan_consistent;
    const bool finite = std::isfinite(coarse.constant) && std::isfinite(fine.constant) && coarse.constant > 0.0;
    return {finite && change < 0.2 && positivity, "C=" + g(coarse.constant) + " -> " + g(fine.constant) +
                                                      " change=" + g(change) + " positivity threshold n>=" + g(threshold)};
}

Outcome negative_direction() {
    const auto pairs = symmetric_pairs();
    auto slope_at = [&](double T) {
        rvec x, y;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            x.push_back(std::sqrt(double(sweep[i])));
            y.push_back(eigen_ratio_from_pair(pairs[i], T).log_ratio);
        }
        return fit_line(x, y).slope;
    };
    const double short_slope = slope_at(0.25), long_slope = slope_at(0.75);
    const double target = 2.0 * sqrt2 * (0.5 - 0.25);
    const double rel = std::abs(short_slope / target - 1.0);
    return {rel <= 0.2 && long_slope < 0.1, "T=0.25 slope=" + g(short_slope) + " target=" + g(target) +
                                                " rel dev=" + g(rel) + "; T=0.75 slope=" + g(long_slope)};
}

Outcome critical_time() {
    auto sym = critical_time_scan(QProfile::linear(1.0, 1.0), {0.3, 0.4, 0.45, 0.55, 0.6, 0.7}, sweep, threads());
    const bool contains = sym.has_transition && sym.transition_lo <= 0.5 && sym.transition_hi >= 0.5;
    auto asym = critical_time_scan(QProfile::linear(1.0, 2.0), {0.3, 0.4, 1.0, 2.25, 2.5}, sweep, threads());
    bool sides = true;
    std::ostringstream s;
    for (const auto& v : asym.verdicts) {
        if (v.T < 0.5) sides = sides && v.verdict == Verdict::blow_up;
        if (v.T > 2.0) sides = sides && v.verdict == Verdict::bounded;
        s << " " << g(v.T) << ":" << to_string(v.verdict);
    }
    std::string sym_text = sym.has_transition ? "[" + g(sym.transition_lo) + ", " + g(sym.transition_hi) + "]" : "none";
    return {contains && sides, "symmetric transition " + sym_text + "; asymmetric" + s.str()};
}

Outcome parseval() {
    const auto p = QProfile::linear(1.0, 1.0);
    const Grid1D grid = Grid1D::uniform(-1.0, 1.0, 200);
    Rng rng(default_seed);
    FourierField f;
    for (long n : {-4L, -1L, 0L, 2L, 7L}) {
        ModeState s;
        s.n = n;
        s.grid = grid;
        s.values = rng.complex_vector(grid.interior());
        f.modes[n] = std::move(s);
    }
    // independent mode sum: 2 pi sum_n h sum_j |u_n(y_j)|^2
    double sum = 0.0;
    for (const auto& [n, s] : f.modes)
        for (const auto& v : s.values) sum += std::norm(v) * grid.h;
    sum *= 2.0 * pi;
    double rel = 0.0;
    try {
        const auto field = synthesize_2d(f, 32, grid);
        rel = std::abs(field.energy - sum) / sum;
    } catch (const NumericalError& e) {
        return {false, e.what()};
    }
    return {rel <= 1e-10, "|E2d - 2 pi sum|/E=" + g(rel)};
}

const std::map<int, Criterion>& criteria() {
    static const std::map<int, Criterion> c{
        {1, {"Dirichlet Laplacian oracle", 1.0, laplacian_oracle}},
        {2, {"complex harmonic oscillator", 5.0, harmonic_oracle}},
        {3, {"complex Airy half-line", 5.0, airy_oracle}},
        {4, {"eigenvalue asymptotics", 60.0, eigen_asymptotics}},
        {5, {"boundary decay of psi_n'", 60.0, agmon_slope}},
        {6, {"semigroup decay rate", 120.0, semigroup_decay}},
        {7, {"resolvent bound", 120.0, resolvent_bound}},
        {8, {"Carleman verification", 180.0, carleman_check}},
        {9, {"negative direction", 60.0, negative_direction}},
        {10, {"critical-time bracket", 600.0, critical_time}},
        {11, {"Parseval mode synthesis", 1.0, parseval}},
    };
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (!criteria().count(k)) {
            std::fprintf(stderr, "acceptance: unknown criterion '%s' (1-%zu)\n", argv[i], criteria().size());
            return 64;
        }
        which.push_back(k);
    }
    if (which.empty())
        for (const auto& [k, c] : criteria()) which.push_back(k);
    int failed = 0;
    for (int k : which) {
        const auto& c = criteria().at(k);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && secs < c.limit_seconds;
        failed += !pass;
        std::printf("%s C%d %s: %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", k, c.title.c_str(),
                    o.detail.c_str(), secs, c.limit_seconds);
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
