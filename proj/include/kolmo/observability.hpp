// observability.hpp - per-mode observability constants, eigenfunction ratios, cost law, critical-time scan
#pragma once

#include <json.hpp>

#include "kolmo/eigen.hpp"
#include "kolmo/io.hpp"
#include "kolmo/stepper.hpp"

namespace kolmo {

struct ObservationSetup {
    QProfile profile = QProfile::linear(1.0, 1.0);
    double T = 1.0;
    double tau1 = 0.0;
    double tau2 = 1.0;
    Grid1D grid;
    double dt = 1e-3;

    void validate() const {
        if (!(T > 0.0)) throw ValidationError("observation: T must be positive");
        if (!(tau1 >= 0.0 && tau1 < tau2 && tau2 <= T * (1 + 1e-12)))
            throw ValidationError("observation: need 0 <= tau1 < tau2 <= T (got tau1 = " + fmt(tau1) +
                                  ", tau2 = " + fmt(tau2) + ", T = " + fmt(T) + ")");
        if (!(dt > 0.0)) throw ValidationError("observation: dt must be positive");
        if (grid.y_lo != profile.lo() || grid.y_hi != profile.hi())
            throw ValidationError("observation: grid does not span the profile interval");
    }
};

inline constexpr std::size_t max_observation_dim = 400;

// h <= n^{-1/2}/5 (per unit length when n = 0), at least 40 cells, capped at
// max_observation_dim interior nodes. `capped` reports whether the cap bit.
inline Grid1D observability_grid(const QProfile& p, long n, bool* capped = nullptr) {
    const double scale = std::max(1.0, std::sqrt(std::abs(double(n))));
    int cells = std::max(40, static_cast<int>(std::ceil(p.length() * 5.0 * scale)));
    const int cap = static_cast<int>(max_observation_dim) + 1;
    if (capped) *capped = cells > cap;
    cells = std::min(cells, cap);
    return Grid1D::uniform(p.lo(), p.hi(), cells);
}

// Coefficient-space Gram matrices for u0 = sum c_j e_j (interior node basis):
// final = h F^H F (so c^H final c = ||u(T)||^2) and flux = time integral of both
// boundary fluxes squared over [tau1, tau2].
struct ObservationMaps {
    long n = 0;
    std::size_t dim = 0;
    double h = 0.0;
    std::size_t steps = 0;
    double dt = 0.0;
    Eigen::MatrixXcd final_gram;
    Eigen::MatrixXcd flux_gram;
};

// Weight of node k in the integral over [a, b] of the piecewise-linear interpolant of nodal values.
inline rvec window_weights(const rvec& t, double a, double b) {
    rvec w(t.size(), 0.0);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double s1 = std::max(a, t[k]), s2 = std::min(b, t[k + 1]);
        if (!(s2 > s1)) continue;
        const double len = t[k + 1] - t[k];
        // mean of the hat (s - t_k)/len over [s1, s2]
        const double mean = 0.5 * ((s1 - t[k]) + (s2 - t[k])) / len;
        w[k] += (s2 - s1) * (1.0 - mean);
        w[k + 1] += (s2 - s1) * mean;
    }
    return w;
}

// Evolves every basis vector with Crank-Nicolson (Rannacher start) and assembles both Gram matrices.
inline ObservationMaps observation_maps(const ObservationSetup& s, long n, int threads = 1) {
    s.validate();
    const auto op = assemble_kn(s.profile, n, s.grid);
    const std::size_t m = op.dim();
    if (m > max_observation_dim)
        throw ValidationError("observation: " + std::to_string(m) + " interior nodes exceed the dense limit of " +
                              std::to_string(max_observation_dim));
    if (m < 4) throw ValidationError("observation: need at least 4 interior nodes");
    ObservationMaps out;
    out.n = n;
    out.dim = m;
    out.h = s.grid.h;
    out.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s.T / s.dt)));
    out.dt = s.T / double(out.steps);
    rvec t(out.steps + 1);
    for (std::size_t k = 0; k <= out.steps; ++k) t[k] = out.dt * double(k);
    const rvec w = window_weights(t, s.tau1, s.tau2);
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w[k] > 0.0) active.push_back(k);
    // flux history: rows are active time nodes, columns basis vectors
    Eigen::MatrixXcd lo(active.size(), m), hi(active.size(), m), fin(m, m);
    parallel_for(m, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t j) {
        CrankNicolson cn(op, out.dt, true);
        cvec u(m, 0.0);
        u[j] = 1.0;
        std::size_t next = 0;
        for (std::size_t k = 0; k <= out.steps; ++k) {
            if (k > 0) cn.step(u, k - 1);
            if (next < active.size() && active[next] == k) {
                auto [a, b] = boundary_derivative(u, s.grid);
                lo(next, j) = a;
                hi(next, j) = b;
                ++next;
            }
        }
        for (std::size_t i = 0; i < m; ++i) fin(i, j) = u[i];
    });
    for (std::size_t r = 0; r < active.size(); ++r) {
        const double sw = std::sqrt(w[active[r]]);
        lo.row(r) *= sw;
        hi.row(r) *= sw;
    }
    out.final_gram = out.h * (fin.adjoint() * fin);
    out.flux_gram = lo.adjoint() * lo + hi.adjoint() * hi;
    out.final_gram = 0.5 * (out.final_gram + out.final_gram.adjoint()).eval();
    out.flux_gram = 0.5 * (out.flux_gram + out.flux_gram.adjoint()).eval();
    return out;
}

struct ObservabilityConstant {
    long n = 0;
    double constant = 0.0;
    double regularization = 0.0;  // delta multiplying ||u0||^2
    double relative_regularization = 0.0;
    int iterations = 0;
    cvec maximizer;  // coefficients of the maximizing u0
};

// delta = rel * trace(S*S) / dim with S*S the L2 adjoint form flux_gram / h.
inline double regularization_of(const ObservationMaps& m, double rel) {
    return rel * m.flux_gram.trace().real() / (m.h * double(m.dim));
}

// Largest mu with final c = mu (flux + delta h I) c, by power iteration on
// L^{-1} final L^{-H} where L is the Cholesky factor of the regularized flux Gram matrix.
inline ObservabilityConstant observability_constant(const ObservationMaps& m, double rel = 1e-12, double tol = 1e-10,
                                                    int max_iter = 20000, std::uint64_t seed = default_seed) {
    if (!(rel > 0.0)) throw ValidationError("observability: regularization must be positive");
    ObservabilityConstant r;
    r.n = m.n;
    r.relative_regularization = rel;
    r.regularization = regularization_of(m, rel);
    Eigen::MatrixXcd B = m.flux_gram;
    B.diagonal().array() += r.regularization * m.h;
    Eigen::LLT<Eigen::MatrixXcd> llt(B);
    if (llt.info() != Eigen::Success)
        throw NumericalError("observability: regularized flux Gram matrix is not positive definite (rel = " + fmt(rel) + ")");
    const Eigen::MatrixXcd L = llt.matrixL();
    Eigen::MatrixXcd K = L.triangularView<Eigen::Lower>().solve(m.final_gram);
    K = L.triangularView<Eigen::Lower>().solve(K.adjoint().eval()).adjoint();
    K = 0.5 * (K + K.adjoint()).eval();
    Rng rng(seed);
    cvec v0 = rng.complex_vector(m.dim);
    Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(v0.data(), long(m.dim));
    v.normalize();
    double mu = 0.0;
    bool converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXcd z = K * v;
        const double next = v.dot(z).real();
        const double zn = z.norm();
        if (zn == 0.0) {
            mu = 0.0;
            converged = true;
            r.iterations = it;
            break;
        }
        v = z / zn;
        if (it > 1 && std::abs(next - mu) <= tol * std::abs(next)) {
            mu = next;
            converged = true;
            r.iterations = it;
            break;
        }
        mu = next;
    }
    if (!converged) throw NumericalError("observability: power iteration did not converge in " + std::to_string(max_iter) + " iterations");
    r.constant = mu;
    Eigen::VectorXcd c = L.adjoint().triangularView<Eigen::Upper>().solve(v);
    r.maximizer.assign(c.data(), c.data() + c.size());
    return r;
}

inline ObservabilityConstant observability_constant(const ObservationSetup& s, long n, double rel = 1e-12,
                                                    int threads = 1) {
    return observability_constant(observation_maps(s, n, threads), rel);
}

// ||u(T)||^2 / (flux integral + delta ||u0||^2) at one initial datum given on interior nodes.
inline double observation_quotient(const ObservationMaps& m, const cvec& u0, double rel = 1e-12) {
    if (u0.size() != m.dim) throw ValidationError("observation quotient: datum does not match the maps");
    Eigen::Map<const Eigen::VectorXcd> c(u0.data(), long(m.dim));
    const double num = c.dot(m.final_gram * c).real();
    const double den = c.dot(m.flux_gram * c).real() + regularization_of(m, rel) * m.h * c.squaredNorm();
    if (!(den > 0.0)) throw NumericalError("observation quotient: vanishing denominator");
    return num / den;
}

// ---- eigenfunction ratios ----

struct EigenRatio {
    long n = 0;
    double T = 0.0;
    cplx lambda = 0.0;
    double flux_sq = 0.0;  // |psi'(lo)|^2 + |psi'(hi)|^2 for unit-norm psi
    double log_ratio = 0.0;
    double ratio() const { return std::exp(log_ratio); }
};

// r = 2 Re(lambda) e^{-2 T Re lambda} / ((1 - e^{-2 T Re lambda}) flux_sq), in logarithmic form.
inline EigenRatio eigen_ratio_from_pair(const EigenPair& p, double T) {
    if (!(T > 0.0)) throw ValidationError("eigenfunction ratio: T must be positive");
    const double R = p.lambda.real();
    if (!(R > 0.0)) throw NumericalError("eigenfunction ratio: Re(lambda) = " + fmt(R) + " is not positive");
    EigenRatio r;
    r.n = p.tag.n;
    r.T = T;
    r.lambda = p.lambda;
    r.flux_sq = std::norm(p.deriv_lo) + std::norm(p.deriv_hi);
    if (!(r.flux_sq > 0.0)) throw NumericalError("eigenfunction ratio: vanishing boundary flux");
    r.log_ratio = std::log(2.0 * R) - 2.0 * T * R - std::log(-std::expm1(-2.0 * T * R)) - std::log(r.flux_sq);
    return r;
}

inline EigenPair ratio_eigenpair(const QProfile& p, long n, double per_scale = 20.0) {
    return smallest_real_eigenpair(assemble_kn(p, n, kn_grid(p, n, per_scale)));
}

inline EigenRatio eigenfunction_ratio(const QProfile& p, long n, double T, double per_scale = 20.0) {
    return eigen_ratio_from_pair(ratio_eigenpair(p, n, per_scale), T);
}

// ---- cost law ----

struct CostLawFit {
    std::vector<long> ns;
    rvec constants;
    double kappa_hat = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms of the log fit
    bool flagged = false;   // residual above the threshold
    double kappa_bound = 0.0;  // 1.5 q'(0)/sqrt2 T_max
    bool within_bound = false;
};

// Least-squares slope of log C_n against 2 sqrt n, one grid per n from observability_grid.
inline CostLawFit cost_law_fit(const ObservationSetup& base, const std::vector<long>& ns, double dt, int threads = 1,
                               double rel = 1e-12, double residual_threshold = 0.5) {
    if (ns.size() < 4) throw ValidationError("cost law: need at least 4 modes, got " + std::to_string(ns.size()));
    if (!std::is_sorted(ns.begin(), ns.end())) throw ValidationError("cost law: modes must be sorted");
    CostLawFit f;
    f.ns = ns;
    f.constants.resize(ns.size());
    rvec x, y;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        ObservationSetup s = base;
        s.grid = observability_grid(s.profile, ns[i]);
        s.dt = dt;
        f.constants[i] = observability_constant(s, ns[i], rel, threads).constant;
        x.push_back(2.0 * std::sqrt(std::abs(double(ns[i]))));
        y.push_back(std::log(f.constants[i]));
    }
    auto lf = fit_line(x, y);
    f.kappa_hat = lf.slope;
    f.intercept = lf.intercept;
    f.residual = lf.rms;
    f.flagged = lf.rms > residual_threshold;
    f.kappa_bound = 1.5 * base.profile.qprime0() / sqrt2 * time_bounds(base.profile).t_max;
    f.within_bound = f.kappa_hat <= f.kappa_bound;
    return f;
}

// ---- critical-time scan ----

enum class Verdict { blow_up, bounded, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::blow_up: return "blow-up";
        case Verdict::bounded: return "bounded";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct TimeVerdict {
    double T = 0.0;
    double slope = 0.0;  // of log r_n against sqrt n
    double residual = 0.0;
    rvec log_ratios;
    Verdict verdict = Verdict::inconclusive;
};

// Slope above +threshold: blow-up. Below -threshold: bounded. In between the ratios count as
// bounded only if they do not grow from the first to the last mode; otherwise inconclusive.
inline Verdict classify(double slope, const rvec& log_ratios, double threshold = 0.05) {
    if (slope > threshold) return Verdict::blow_up;
    if (slope < -threshold) return Verdict::bounded;
    if (!log_ratios.empty() && log_ratios.back() <= log_ratios.front()) return Verdict::bounded;
    return Verdict::inconclusive;
}

struct ObservabilityReport {
    std::vector<long> ns;
    std::vector<EigenPair> pairs;
    std::vector<TimeVerdict> verdicts;
    TimeBounds bracket;
    bool has_transition = false;
    double transition_lo = 0.0;  // largest blow-up T
    double transition_hi = 0.0;  // smallest bounded T
    bool monotone = true;        // no bounded verdict below a blow-up verdict
    bool intersects_bracket = false;
    // optional extras filled by callers
    std::vector<double> constants;  // C_n, parallel to ns when present
    double kappa_fit = std::numeric_limits<double>::quiet_NaN();
    double blowup_fit = std::numeric_limits<double>::quiet_NaN();
};

inline ObservabilityReport critical_time_scan(const QProfile& p, rvec T_list, const std::vector<long>& ns,
                                              int threads = 1, double per_scale = 20.0, double threshold = 0.05) {
    if (T_list.empty()) throw ValidationError("critical-time scan: no times");
    if (ns.size() < 2) throw ValidationError("critical-time scan: need at least two modes");
    std::sort(T_list.begin(), T_list.end());
    ObservabilityReport r;
    r.ns = ns;
    r.bracket = time_bounds(p);
    r.pairs.resize(ns.size());
    parallel_for(ns.size(), static_cast<unsigned>(std::max(1, threads)),
                 [&](std::size_t i) { r.pairs[i] = ratio_eigenpair(p, ns[i], per_scale); });
    rvec x;
    for (long n : ns) x.push_back(std::sqrt(std::abs(double(n))));
    for (double T : T_list) {
        TimeVerdict v;
        v.T = T;
        for (const auto& pair : r.pairs) v.log_ratios.push_back(eigen_ratio_from_pair(pair, T).log_ratio);
        auto lf = fit_line(x, v.log_ratios);
        v.slope = lf.slope;
        v.residual = lf.rms;
        v.verdict = classify(v.slope, v.log_ratios, threshold);
        r.verdicts.push_back(v);
    }
    double last_blow = -1.0, first_bounded = -1.0;
    bool seen_bounded = false;
    for (const auto& v : r.verdicts) {
        if (v.verdict == Verdict::blow_up) {
            last_blow = v.T;
            if (seen_bounded) r.monotone = false;
        } else if (v.verdict == Verdict::bounded) {
            if (!seen_bounded) first_bounded = v.T;
            seen_bounded = true;
        }
    }
    r.has_transition = last_blow >= 0.0 && first_bounded >= 0.0 && r.monotone && last_blow < first_bounded;
    if (r.has_transition) {
        r.transition_lo = last_blow;
        r.transition_hi = first_bounded;
        r.intersects_bracket = r.transition_lo <= r.bracket.t_max && r.transition_hi >= r.bracket.t_min;
    }
    return r;
}

inline nlohmann::json to_json(const ObservabilityReport& r) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : r.verdicts)
        verdicts.push_back({{"T", v.T}, {"slope", v.slope}, {"residual", v.residual}, {"log_ratios", v.log_ratios},
                            {"verdict", to_string(v.verdict)}});
    nlohmann::json modes = nlohmann::json::array();
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
        nlohmann::json m{{"n", r.ns[i]},
                         {"lambda", {r.pairs[i].lambda.real(), r.pairs[i].lambda.imag()}},
                         {"flux_sq", std::norm(r.pairs[i].deriv_lo) + std::norm(r.pairs[i].deriv_hi)}};
        if (i < r.constants.size()) m["constant"] = r.constants[i];
        modes.push_back(m);
    }
    nlohmann::json j{{"modes", modes},
                     {"verdicts", verdicts},
                     {"t_min", r.bracket.t_min},
                     {"t_max", r.bracket.t_max},
                     {"has_transition", r.has_transition},
                     {"monotone", r.monotone},
                     {"intersects_bracket", r.intersects_bracket}};
    if (r.has_transition) j["transition"] = {r.transition_lo, r.transition_hi};
    if (!std::isnan(r.kappa_fit)) j["kappa_fit"] = r.kappa_fit;
    if (!std::isnan(r.blowup_fit)) j["blowup_fit"] = r.blowup_fit;
    return j;
}

// Long format: one row per (T, n) with the ratio, the slope and verdict of that T.
inline void write_scan_csv(const std::string& path, const ObservabilityReport& r) {
    CsvWriter w(path);
    w.header({"T", "n", "C_n", "log_r_n", "slope", "verdict"});
    for (const auto& v : r.verdicts)
        for (std::size_t i = 0; i < r.ns.size(); ++i)
            w.row_strings({fmt(v.T), std::to_string(r.ns[i]), i < r.constants.size() ? fmt(r.constants[i]) : "",
                           fmt(v.log_ratios[i]), fmt(v.slope), to_string(v.verdict)});
}

}  // namespace kolmo
