// semigroup.hpp - propagator norms, decay sweeps, resolvent norms and pseudospectra
#pragma once

#include <algorithm>

#include "kolmo/eigen.hpp"
#include "kolmo/io.hpp"
#include "kolmo/stepper.hpp"

namespace kolmo {

struct PowerOptions {
    double tol = 1e-10;  // relative change of the Rayleigh quotient
    int max_iter = 10000;
    std::uint64_t seed = default_seed;
};

// Local CN error per step is about (dt s)^3 / 12 for a mode of size s; the step
// keeps that below 1e-8 for s = 2|lambda_1|, the modes that carry the norm.
inline std::size_t default_steps(const DiscreteOperator& op, double t) {
    if (t <= 0.0) return 0;
    const double s = 2.0 * std::abs(eigenpairs_near(op, 0.0, 1).front().lambda);
    const double dt = std::cbrt(12.0 * 1e-8) / std::max(s, 1e-300);
    return std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(t / dt)));
}

// Largest singular value of the discrete propagator over [0, t], by power
// iteration on P^H P. P^H is CN stepping with M^H, which commutes with the
// Rannacher start because every factor is a function of the same matrix.
inline double propagator_norm(const DiscreteOperator& op, double t, std::size_t steps = 0,
                              const PowerOptions& o = {}) {
    if (!(t >= 0.0)) throw ValidationError("propagator norm: t must be nonnegative");
    if (t == 0.0) return 1.0;
    if (steps == 0) steps = default_steps(op, t);
    const double dt = t / static_cast<double>(steps);
    CrankNicolson fwd(op, dt), bwd(op.adjoint(), dt);
    Rng rng(o.seed);
    cvec x = rng.complex_vector(op.dim());
    scale(x, 1.0 / norm2(x));
    double prev = -1.0;
    for (int it = 1; it <= o.max_iter; ++it) {
        fwd.advance(x, steps);
        const double sig2 = std::pow(norm2(x), 2);
        if (!(sig2 > 0.0) || !std::isfinite(sig2)) throw NumericalError("propagator norm: degenerate iterate");
        if (std::abs(sig2 - prev) <= o.tol * sig2) return std::sqrt(sig2);
        prev = sig2;
        bwd.advance(x, steps);
        scale(x, 1.0 / norm2(x));
    }
    throw NumericalError("propagator norm: power iteration did not converge", std::sqrt(std::max(prev, 0.0)));
}

// Relative change of the propagator norm when the step count doubles.
inline double step_halving_change(const DiscreteOperator& op, double t, std::size_t steps = 0) {
    if (steps == 0) steps = default_steps(op, t);
    const double a = propagator_norm(op, t, steps);
    const double b = propagator_norm(op, t, 2 * steps);
    return std::abs(a - b) / b;
}

struct DecayTrace {
    long n = 0;
    rvec times;
    rvec norms;
    double gamma_fit = 0.0;  // -slope of log(norm) against t over the fitted window
    double constant = 0.0;   // exp(intercept), the reported C
    double fit_from = 0.0;   // earliest t included in the fit
    std::size_t steps_per_unit_time = 0;
};

struct DecayOptions {
    int per_scale = 20;
    bool scale_times = false;  // multiply t_grid by 1/max(1, sqrt|n|)
    int threads = 1;
    std::uint64_t seed = default_seed;
};

// Fits exclude t < 0.5 / max(1, sqrt|n|), where transient growth still dominates.
inline void fit_decay(DecayTrace& tr) {
    tr.fit_from = 0.5 / std::max(1.0, std::sqrt(std::abs(double(tr.n))));
    rvec x, y;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        if (tr.times[i] >= tr.fit_from * (1.0 - 1e-12)) {
            x.push_back(tr.times[i]);
            y.push_back(std::log(tr.norms[i]));
        }
    if (x.size() < 2) throw ValidationError("decay fit needs at least two times past the transient window");
    const LineFit f = fit_line(x, y);
    tr.gamma_fit = -f.slope;
    tr.constant = std::exp(f.intercept);
}

inline std::vector<DecayTrace> decay_sweep(const QProfile& p, const std::vector<long>& ns, const rvec& t_grid,
                                           const DecayOptions& o = {}) {
    if (ns.empty() || t_grid.empty()) throw ValidationError("decay sweep needs nonempty n and t lists");
    for (double t : t_grid)
        if (!(t >= 0.0)) throw ValidationError("decay sweep: times must be nonnegative");
    std::vector<DecayTrace> out(ns.size());
    std::vector<DiscreteOperator> ops;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        ops.push_back(assemble_kn(p, ns[i], kn_grid(p, ns[i], o.per_scale)));
        out[i].n = ns[i];
        const double f = o.scale_times ? 1.0 / std::max(1.0, std::sqrt(std::abs(double(ns[i])))) : 1.0;
        for (double t : t_grid) out[i].times.push_back(t * f);
        out[i].norms.assign(t_grid.size(), 0.0);
    }
    std::vector<std::size_t> per_unit(ns.size());
    parallel_for(ns.size(), o.threads, [&](std::size_t i) { per_unit[i] = default_steps(ops[i], 1.0); });
    const std::size_t jobs = ns.size() * t_grid.size();
    parallel_for(jobs, o.threads, [&](std::size_t k) {
        const std::size_t i = k / t_grid.size(), j = k % t_grid.size();
        const double t = out[i].times[j];
        const auto steps = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(t * per_unit[i])));
        PowerOptions po;
        po.seed = o.seed;
        out[i].norms[j] = propagator_norm(ops[i], t, steps, po);
    });
    for (std::size_t i = 0; i < ns.size(); ++i) {
        out[i].steps_per_unit_time = per_unit[i];
        fit_decay(out[i]);
    }
    return out;
}

// min over n != 0 of gamma_fit / sqrt|n|.
inline double min_normalized_rate(const std::vector<DecayTrace>& traces) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : traces)
        if (t.n != 0) m = std::min(m, t.gamma_fit / std::sqrt(std::abs(double(t.n))));
    return m;
}

// For each gamma, the smallest |n| in the sweep from which every larger |n| clears it; -1 if none does.
inline std::vector<long> rate_thresholds(const std::vector<DecayTrace>& traces, const rvec& gammas) {
    std::vector<const DecayTrace*> s;
    for (const auto& t : traces)
        if (t.n != 0) s.push_back(&t);
    std::sort(s.begin(), s.end(), [](auto a, auto b) { return std::abs(a->n) < std::abs(b->n); });
    std::vector<long> out;
    for (double g : gammas) {
        long thr = -1;
        for (std::size_t i = s.size(); i-- > 0;) {
            if (s[i]->gamma_fit / std::sqrt(std::abs(double(s[i]->n))) < g) break;
            thr = std::abs(s[i]->n);
        }
        out.push_back(thr);
    }
    return out;
}

inline void write_decay_csv(const std::string& path, const std::vector<DecayTrace>& traces) {
    CsvWriter w(path);
    w.header({"n", "t", "norm"});
    for (const auto& tr : traces)
        for (std::size_t i = 0; i < tr.times.size(); ++i) w.row({double(tr.n), tr.times[i], tr.norms[i]});
}

struct ResolventSample {
    cplx z = 0.0;
    double norm = 0.0;  // ||(M - z)^{-1}||
    double smin = 0.0;  // smallest singular value of M - z
    bool flagged = false;  // z numerically on the spectrum
    int iterations = 0;
};

// Largest singular value of (M - z)^{-1} by block subspace iteration on
// (M - z)^{-H} (M - z)^{-1} with Rayleigh-Ritz; the block of 4 keeps nearly tied
// smallest singular values from stalling convergence.
inline ResolventSample resolvent_norm(const DiscreteOperator& op, cplx z, const PowerOptions& o = {}) {
    constexpr int block = 4;
    ResolventSample s;
    s.z = z;
    const double singular_level = 1e-12 * std::max(1.0, op.inf_norm());
    auto flag = [&] {
        s.flagged = true;
        s.smin = 0.0;
        s.norm = std::numeric_limits<double>::infinity();
        return s;
    };
    TridiagonalLU a, ah;
    try {
        a = TridiagonalLU(op, -z);
        ah = TridiagonalLU(op.adjoint(), -std::conj(z));
    } catch (const SingularMatrix&) {
        return flag();
    }
    const std::size_t m = op.dim();
    const int b = static_cast<int>(std::min<std::size_t>(block, m));
    Rng rng(o.seed);
    std::vector<cvec> x(b);
    for (auto& c : x) c = rng.complex_vector(m);
    auto orthonormalize = [&](std::vector<cvec>& v) {
        for (int k = 0; k < b; ++k) {
            for (int pass = 0; pass < 2; ++pass)
                for (int l = 0; l < k; ++l) {
                    const cplx c = dotc(v[l], v[k]);
                    for (std::size_t j = 0; j < m; ++j) v[k][j] -= c * v[l][j];
                }
            const double nk = norm2(v[k]);
            if (!(nk > 0.0) || !std::isfinite(nk)) throw NumericalError("resolvent norm: block collapsed");
            scale(v[k], 1.0 / nk);
        }
    };
    orthonormalize(x);
    double prev = -1.0;
    Eigen::MatrixXcd g(b, b);
    for (int it = 1; it <= o.max_iter; ++it) {
        for (auto& c : x) a.solve(c);
        for (int k = 0; k < b; ++k)
            for (int l = 0; l <= k; ++l) {
                g(k, l) = dotc(x[k], x[l]);
                g(l, k) = std::conj(g(k, l));
            }
        if (!g.allFinite()) return flag();
        const double sig2 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(g, Eigen::EigenvaluesOnly).eigenvalues()(b - 1);
        s.iterations = it;
        if (std::abs(sig2 - prev) <= o.tol * sig2) {
            s.norm = std::sqrt(sig2);
            s.smin = 1.0 / s.norm;
            if (s.smin <= singular_level) return flag();
            return s;
        }
        prev = sig2;
        for (auto& c : x) ah.solve(c);
        orthonormalize(x);
    }
    throw NumericalError("resolvent norm: subspace iteration did not converge", 1.0 / std::sqrt(std::max(prev, 1e-300)));
}

inline std::vector<ResolventSample> resolvent_sweep(const DiscreteOperator& op, const std::vector<cplx>& zs,
                                                    int threads = 1, const PowerOptions& o = {}) {
    std::vector<ResolventSample> out(zs.size());
    parallel_for(zs.size(), threads, [&](std::size_t k) { out[k] = resolvent_norm(op, zs[k], o); });
    return out;
}

struct PseudospectrumGrid {
    rvec re;
    rvec im;
    std::vector<rvec> smin;  // smin[i][j] at z = re[j] + i im[i]
};

inline rvec linspace(double a, double b, int count) {
    if (count < 1) throw ValidationError("linspace needs at least one point");
    rvec v(count);
    for (int i = 0; i < count; ++i) v[i] = count == 1 ? a : a + (b - a) * i / (count - 1);
    return v;
}

inline PseudospectrumGrid pseudospectrum_grid(const DiscreteOperator& op, std::pair<double, double> re_range,
                                              std::pair<double, double> im_range, int re_points, int im_points,
                                              int threads = 1) {
    if (re_points < 1 || im_points < 1 || re_points > 256 || im_points > 256)
        throw ValidationError("pseudospectrum resolution must be between 1x1 and 256x256");
    PseudospectrumGrid g;
    g.re = linspace(re_range.first, re_range.second, re_points);
    g.im = linspace(im_range.first, im_range.second, im_points);
    g.smin.assign(im_points, rvec(re_points, 0.0));
    parallel_for(std::size_t(re_points) * im_points, threads, [&](std::size_t k) {
        const std::size_t i = k / re_points, j = k % re_points;
        g.smin[i][j] = resolvent_norm(op, cplx(g.re[j], g.im[i])).smin;
    });
    return g;
}

inline void write_pseudospectrum_csv(const std::string& path, const PseudospectrumGrid& g) {
    CsvWriter w(path);
    w.header({"re", "im", "smin"});
    for (std::size_t i = 0; i < g.im.size(); ++i)
        for (std::size_t j = 0; j < g.re.size(); ++j) w.row({g.re[j], g.im[i], g.smin[i][j]});
}

}  // namespace kolmo
