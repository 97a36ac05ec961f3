// evolve.hpp - Fourier-mode time integration, boundary flux traces, 2D synthesis
#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kolmo/eigen.hpp"
#include "kolmo/io.hpp"
#include "kolmo/stepper.hpp"

namespace kolmo {

struct ModeState {
    long n = 0;
    double t = 0.0;
    cvec values;  // interior nodes
    Grid1D grid;
};

struct BoundaryTrace {
    rvec times;
    cvec flux_lo;  // d/dy u at the lower endpoint
    cvec flux_hi;  // d/dy u at the upper endpoint
};

struct EvolveOptions {
    bool rannacher = true;
    // called after every accepted step with (step index, time, state)
    std::function<void(std::size_t, double, const cvec&)> observer;
};

inline void record_flux(BoundaryTrace& tr, double t, const cvec& u, const Grid1D& g) {
    tr.times.push_back(t);
    if (u.size() >= 4) {
        auto [lo, hi] = boundary_derivative(u, g);
        tr.flux_lo.push_back(lo);
        tr.flux_hi.push_back(hi);
    } else {
        // two-point stencil for very coarse grids
        tr.flux_lo.push_back(u.empty() ? cplx(0.0) : u.front() / g.h);
        tr.flux_hi.push_back(u.empty() ? cplx(0.0) : -u.back() / g.h);
    }
}

// Integrates du/dt + M u = 0 from initial.t to initial.t + t_final. The step is
// dt rounded so that a whole number of steps lands on t_final.
inline std::pair<ModeState, BoundaryTrace> evolve_mode(const DiscreteOperator& op, const ModeState& initial,
                                                       double t_final, double dt, const EvolveOptions& o = {}) {
    if (!(dt > 0.0)) throw ValidationError("evolve: dt must be positive");
    if (!(t_final >= 0.0)) throw ValidationError("evolve: t_final must be nonnegative");
    if (initial.values.size() != op.dim()) throw ValidationError("evolve: initial data does not match the operator");
    if (op.tag.kind == ModelKind::kolmogorov && initial.n != op.tag.n)
        throw ValidationError("evolve: initial mode " + std::to_string(initial.n) + " does not match operator mode " +
                              std::to_string(op.tag.n));
    const auto steps = static_cast<std::size_t>(std::max(0.0, std::round(t_final / dt)));
    ModeState s = initial;
    s.grid = op.grid;
    BoundaryTrace tr;
    record_flux(tr, s.t, s.values, op.grid);
    if (steps == 0) return {s, tr};
    const double h = t_final / static_cast<double>(steps);
    CrankNicolson cn(op, h, o.rannacher);
    const double t0 = s.t;
    for (std::size_t k = 0; k < steps; ++k) {
        cn.step(s.values, k);
        s.t = t0 + h * static_cast<double>(k + 1);
        record_flux(tr, s.t, s.values, op.grid);
        if (o.observer) o.observer(k, s.t, s.values);
    }
    return {s, tr};
}

// Time integral of |flux_lo|^2 + |flux_hi|^2 over [t1, t2] by the trapezoid rule on stored steps.
inline double flux_energy(const BoundaryTrace& tr, double t1, double t2) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < tr.times.size(); ++k) {
        const double a = tr.times[k], b = tr.times[k + 1];
        if (b <= t1 + 1e-14 * std::max(1.0, std::abs(t1)) || a >= t2 - 1e-14 * std::max(1.0, std::abs(t2))) continue;
        const double fa = std::norm(tr.flux_lo[k]) + std::norm(tr.flux_hi[k]);
        const double fb = std::norm(tr.flux_lo[k + 1]) + std::norm(tr.flux_hi[k + 1]);
        acc += 0.5 * (b - a) * (fa + fb);
    }
    return acc;
}

inline void write_trace_csv(const std::string& path, const BoundaryTrace& tr) {
    CsvWriter w(path);
    w.header({"t", "flux_lo_sq", "flux_hi_sq"});
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        w.row({tr.times[k], std::norm(tr.flux_lo[k]), std::norm(tr.flux_hi[k])});
}

// ---- initial data ----

inline ModeState mode_from_function(long n, const Grid1D& g, const std::function<cplx(double)>& f) {
    ModeState s;
    s.n = n;
    s.grid = g;
    s.values.resize(g.interior());
    for (std::size_t j = 0; j < s.values.size(); ++j) s.values[j] = f(g.interior_node(j));
    return s;
}

inline void normalize_state(ModeState& s) {
    const double nrm = l2_norm(s.values, s.grid.h);
    if (nrm > 0.0) scale(s.values, 1.0 / nrm);
}

// sin(k pi (y - lo) / L), unit discrete L2 norm
inline ModeState laplacian_mode(long n, const Grid1D& g, int k) {
    if (k < 1) throw ValidationError("laplacian mode index must be >= 1");
    const double L = g.length();
    auto s = mode_from_function(n, g, [&](double y) { return cplx(std::sin(k * pi * (y - g.y_lo) / L), 0.0); });
    normalize_state(s);
    return s;
}

inline ModeState gaussian_mode(long n, const Grid1D& g, double center, double width) {
    if (!(width > 0.0)) throw ValidationError("gaussian width must be positive");
    auto s = mode_from_function(n, g, [&](double y) {
        const double r = (y - center) / width;
        return cplx(std::exp(-0.5 * r * r), 0.0);
    });
    normalize_state(s);
    return s;
}

inline ModeState eigenfunction_mode(const DiscreteOperator& op, std::uint64_t seed = default_seed) {
    auto p = smallest_real_eigenpair(op, 1e-10, 2000, nullptr, seed);
    ModeState s;
    s.n = op.tag.n;
    s.grid = op.grid;
    s.values = p.vector;
    return s;
}

// Samples (y, re, im) read from CSV and interpolated linearly onto the interior nodes.
inline ModeState mode_from_csv(long n, const Grid1D& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open initial data file " + path);
    rvec ys, re, im;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double y, a, b = 0.0;
        if (!(ss >> y >> a)) {
            if (lineno == 1) continue;  // header
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected y,re,im");
        }
        ss >> b;
        if (!ys.empty() && y <= ys.back()) throw ValidationError(path + ": y must be strictly increasing");
        ys.push_back(y);
        re.push_back(a);
        im.push_back(b);
    }
    if (ys.size() < 2) throw ValidationError(path + ": need at least two samples");
    return mode_from_function(n, g, [&](double y) {
        if (y <= ys.front() || y >= ys.back()) return cplx(0.0);
        auto it = std::upper_bound(ys.begin(), ys.end(), y);
        const std::size_t i = static_cast<std::size_t>(it - ys.begin()) - 1;
        const double w = (y - ys[i]) / (ys[i + 1] - ys[i]);
        return cplx((1 - w) * re[i] + w * re[i + 1], (1 - w) * im[i] + w * im[i + 1]);
    });
}

// ---- 2D fields ----

struct FourierField {
    std::map<long, ModeState> modes;
    int x_resolution = 0;  // 0: chosen by synthesize_2d
};

struct Field2D {
    rvec x;  // x_k = 2 pi k / x_points
    rvec y;  // all grid nodes, Dirichlet zeros at the ends
    std::vector<cvec> values;  // values[k][i] at (x_k, y_i)
    double energy = 0.0;       // quadrature of |u|^2 over the torus times the interval
    double mode_energy = 0.0;  // 2 pi sum_n ||u_n||^2
};

inline double mode_energy(const FourierField& f) {
    double acc = 0.0;
    for (const auto& [n, s] : f.modes) acc += std::pow(l2_norm(s.values, s.grid.h), 2);
    return 2.0 * pi * acc;
}

// u(x, y) = sum_n u_n(y) e^{i n x}. The periodic trapezoid rule in x is exact for
// trigonometric polynomials once x_points > 2 max|n|, so the 2D energy must match
// the mode sum to rounding; a mismatch above 1e-10 relative is an error.
inline Field2D synthesize_2d(const FourierField& f, int x_points, const Grid1D& g) {
    if (f.modes.empty()) throw ValidationError("synthesize: no modes");
    long nmax = 0;
    for (const auto& [n, s] : f.modes) {
        nmax = std::max(nmax, std::abs(n));
        if (s.values.size() != g.interior() || s.grid.n_cells != g.n_cells || s.grid.y_lo != g.y_lo ||
            s.grid.y_hi != g.y_hi)
            throw ValidationError("synthesize: mode " + std::to_string(n) + " is not on the requested grid");
    }
    if (x_points <= 2 * nmax) throw ValidationError("synthesize: need more than 2 max|n| points in x to avoid aliasing");
    Field2D out;
    out.y = g.nodes;
    out.x.resize(x_points);
    out.values.assign(x_points, cvec(g.nodes.size(), 0.0));
    double acc = 0.0;
    for (int k = 0; k < x_points; ++k) {
        const double x = 2.0 * pi * k / x_points;
        out.x[k] = x;
        for (const auto& [n, s] : f.modes) {
            const cplx e = std::polar(1.0, static_cast<double>(n) * x);
            for (std::size_t j = 0; j < s.values.size(); ++j) out.values[k][j + 1] += s.values[j] * e;
        }
        for (const auto& v : out.values[k]) acc += std::norm(v);
    }
    out.energy = acc * g.h * (2.0 * pi / x_points);
    out.mode_energy = mode_energy(f);
    const double scale_ref = std::max(out.mode_energy, std::numeric_limits<double>::min());
    if (std::abs(out.energy - out.mode_energy) > 1e-10 * scale_ref)
        throw NumericalError("synthesize: Parseval check failed (2D " + fmt(out.energy) + " vs modes " +
                             fmt(out.mode_energy) + ")");
    return out;
}

// Evolves each mode of the field independently; modes never interact.
inline FourierField evolve_field(const QProfile& p, const FourierField& f, double t_final, double dt, int threads = 1) {
    std::vector<std::pair<long, ModeState>> items(f.modes.begin(), f.modes.end());
    std::vector<ModeState> out(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        const auto& s = items[i].second;
        auto op = assemble_kn(p, items[i].first, s.grid);
        out[i] = evolve_mode(op, s, t_final, dt).first;
    });
    FourierField r;
    r.x_resolution = f.x_resolution;
    for (std::size_t i = 0; i < items.size(); ++i) r.modes[items[i].first] = std::move(out[i]);
    return r;
}

}  // namespace kolmo
