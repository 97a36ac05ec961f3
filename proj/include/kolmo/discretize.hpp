// discretize.hpp - uniform grids and tridiagonal Dirichlet operators
#pragma once

#include <json.hpp>
#include <string>

#include "kolmo/core.hpp"
#include "kolmo/profile.hpp"

namespace kolmo {

struct Grid1D {
    double y_lo = 0.0;
    double y_hi = 1.0;
    int n_cells = 2;
    double h = 0.5;
    rvec nodes;  // all n_cells + 1 nodes, endpoints included

    static Grid1D uniform(double lo, double hi, int cells) {
        if (!(hi > lo)) throw ValidationError("grid: y_hi must exceed y_lo");
        if (cells < 2) throw ValidationError("grid: need at least 2 cells");
        Grid1D g;
        g.y_lo = lo;
        g.y_hi = hi;
        g.n_cells = cells;
        g.h = (hi - lo) / cells;
        g.nodes.resize(static_cast<std::size_t>(cells) + 1);
        // convex-combination form keeps symmetric intervals exactly symmetric
        for (int i = 0; i <= cells; ++i)
            g.nodes[static_cast<std::size_t>(i)] = (lo * (cells - i) + hi * i) / cells;
        g.nodes.back() = hi;
        return g;
    }

    std::size_t interior() const { return static_cast<std::size_t>(n_cells - 1); }
    double interior_node(std::size_t j) const { return nodes[j + 1]; }
    double length() const { return y_hi - y_lo; }

    Grid1D refined() const { return uniform(y_lo, y_hi, 2 * n_cells); }
};

// Cells for the K_n grid: at least `per_scale` points per n^{-1/2}, and per unit length when n = 0.
inline Grid1D kn_grid(const QProfile& p, long n, double per_scale = 20.0) {
    const double scale = std::max(1.0, std::sqrt(std::abs(static_cast<double>(n))));
    const int cells = static_cast<int>(std::ceil(p.length() * per_scale * scale));
    return Grid1D::uniform(p.lo(), p.hi(), std::max(cells, 8));
}

enum class ModelKind { kolmogorov, harmonic, airy_plus, airy_minus, airy_line, dirichlet_laplacian };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::kolmogorov: return "kolmogorov";
        case ModelKind::harmonic: return "harmonic";
        case ModelKind::airy_plus: return "airy_plus";
        case ModelKind::airy_minus: return "airy_minus";
        case ModelKind::airy_line: return "airy_line";
        case ModelKind::dirichlet_laplacian: return "dirichlet_laplacian";
    }
    return "unknown";
}

struct ModelTag {
    ModelKind kind = ModelKind::dirichlet_laplacian;
    long n = 0;             // Fourier mode (kolmogorov, harmonic)
    double qprime0 = 0.0;   // harmonic
    double alpha = 0.0;     // airy
    double offset = 0.0;    // airy wall position
    std::string profile;    // kolmogorov profile description
};

struct DiscreteOperator {
    Grid1D grid;
    cvec sub;   // length m-1, row j+1 column j
    cvec diag;  // length m
    cvec sup;   // length m-1, row j column j+1
    ModelTag tag;

    std::size_t dim() const { return diag.size(); }

    void apply(const cvec& x, cvec& y) const {
        const std::size_t m = dim();
        y.resize(m);
        if (m == 1) {
            y[0] = diag[0] * x[0];
            return;
        }
        y[0] = diag[0] * x[0] + sup[0] * x[1];
        for (std::size_t j = 1; j + 1 < m; ++j) y[j] = sub[j - 1] * x[j - 1] + diag[j] * x[j] + sup[j] * x[j + 1];
        y[m - 1] = sub[m - 2] * x[m - 2] + diag[m - 1] * x[m - 1];
    }

    cvec operator*(const cvec& x) const {
        cvec y;
        apply(x, y);
        return y;
    }

    // Conjugate transpose.
    DiscreteOperator adjoint() const {
        DiscreteOperator a = *this;
        for (std::size_t j = 0; j < dim(); ++j) a.diag[j] = std::conj(diag[j]);
        for (std::size_t j = 0; j + 1 < dim(); ++j) {
            a.sub[j] = std::conj(sup[j]);
            a.sup[j] = std::conj(sub[j]);
        }
        return a;
    }

    DiscreteOperator transpose() const {
        DiscreteOperator a = *this;
        std::swap(a.sub, a.sup);
        return a;
    }

    bool complex_symmetric() const { return sub == sup; }

    double inf_norm() const {
        double r = 0.0;
        const std::size_t m = dim();
        for (std::size_t j = 0; j < m; ++j) {
            double s = std::abs(diag[j]);
            if (j > 0) s += std::abs(sub[j - 1]);
            if (j + 1 < m) s += std::abs(sup[j]);
            r = std::max(r, s);
        }
        return r;
    }
};

namespace detail {

inline DiscreteOperator laplacian_skeleton(const Grid1D& g) {
    DiscreteOperator op;
    op.grid = g;
    const std::size_t m = g.interior();
    if (m < 1) throw ValidationError("grid has no interior nodes");
    const double ih2 = 1.0 / (g.h * g.h);
    op.diag.assign(m, cplx(2.0 * ih2, 0.0));
    op.sub.assign(m - 1, cplx(-ih2, 0.0));
    op.sup.assign(m - 1, cplx(-ih2, 0.0));
    return op;
}

inline bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a) + std::abs(b)); }

}  // namespace detail

inline DiscreteOperator assemble_dirichlet_laplacian(const Grid1D& g) {
    DiscreteOperator op = detail::laplacian_skeleton(g);
    op.tag.kind = ModelKind::dirichlet_laplacian;
    return op;
}

// -d^2/dy^2 + i n q(y)^2 on the interior nodes; negative n gives the conjugate mode.
inline DiscreteOperator assemble_kn(const QProfile& p, long n, const Grid1D& g) {
    if (!detail::close(g.y_lo, p.lo()) || !detail::close(g.y_hi, p.hi()))
        throw ValidationError("grid [" + std::to_string(g.y_lo) + ", " + std::to_string(g.y_hi) +
                              "] does not match the profile domain [" + std::to_string(p.lo()) + ", " +
                              std::to_string(p.hi()) + "]");
    DiscreteOperator op = detail::laplacian_skeleton(g);
    const double nn = static_cast<double>(n);
    for (std::size_t j = 0; j < op.dim(); ++j) {
        const double qj = p.q(g.interior_node(j));
        op.diag[j] += cplx(0.0, nn * qj * qj);
    }
    op.tag.kind = ModelKind::kolmogorov;
    op.tag.n = n;
    op.tag.qprime0 = p.qprime0();
    op.tag.profile = p.describe();
    return op;
}

// Smallest half-width for which the k-th harmonic eigenfunction envelope
// (alpha y)^(k-1) exp(-(alpha y)^2 / (2 sqrt 2)) falls below 1e-12, alpha = |n|^{1/4} q'(0)^{1/2}.
inline double harmonic_box_half_width(double qprime0, long n, int modes = 1) {
    if (!(qprime0 > 0.0)) throw ValidationError("harmonic: q'(0) must be positive");
    if (n == 0) throw ValidationError("harmonic: n must be nonzero");
    const double alpha = std::pow(std::abs(static_cast<double>(n)), 0.25) * std::sqrt(qprime0);
    const double target = 12.0 * std::log(10.0);
    double x = 1.0;
    while (x * x / (2.0 * sqrt2) - (modes - 1) * std::log(std::max(x, 1.0)) < target) x += 1e-3;
    return x / alpha;
}

inline DiscreteOperator assemble_hn(double qprime0, long n, double box_half_width, const Grid1D& g, int modes = 1) {
    const double need = harmonic_box_half_width(qprime0, n, modes);
    if (box_half_width < need)
        throw ValidationError("harmonic: box half-width " + std::to_string(box_half_width) + " is too small for " +
                              std::to_string(modes) + " mode(s); use at least " + std::to_string(need));
    if (!detail::close(g.y_lo, -box_half_width) || !detail::close(g.y_hi, box_half_width))
        throw ValidationError("harmonic: grid must span [-box_half_width, box_half_width]");
    DiscreteOperator op = detail::laplacian_skeleton(g);
    const double c = static_cast<double>(n) * qprime0 * qprime0;
    for (std::size_t j = 0; j < op.dim(); ++j) {
        const double y = g.interior_node(j);
        op.diag[j] += cplx(0.0, c * y * y);
    }
    op.tag.kind = ModelKind::harmonic;
    op.tag.n = n;
    op.tag.qprime0 = qprime0;
    return op;
}

enum class AirySide { plus, minus };

// |mu_k| from the large-k expansion of the Airy zeros; used only for box sizing.
inline double airy_zero_magnitude_estimate(int k) {
    const double t = 3.0 * pi * (4.0 * k - 1.0) / 8.0;
    return std::pow(t, 2.0 / 3.0) * (1.0 + 5.0 / (48.0 * t * t));
}

inline double airy_min_box_length(double alpha, int modes = 1) {
    return 10.0 * std::pow(std::abs(alpha), -1.0 / 3.0) * airy_zero_magnitude_estimate(modes);
}

// -d^2/dy^2 + i alpha y on [0, L] (plus) or [-L, 0] (minus), Dirichlet at both ends.
inline DiscreteOperator assemble_airy(double alpha, AirySide side, double box_length, const Grid1D& g, int modes = 1) {
    if (alpha == 0.0 || !std::isfinite(alpha)) throw ValidationError("airy: alpha must be nonzero");
    const double need = airy_min_box_length(alpha, modes);
    if (box_length < need)
        throw ValidationError("airy: box length " + std::to_string(box_length) + " is too small; use at least " +
                              std::to_string(need));
    const double lo = side == AirySide::plus ? 0.0 : -box_length;
    const double hi = side == AirySide::plus ? box_length : 0.0;
    if (!detail::close(g.y_lo, lo) || !detail::close(g.y_hi, hi))
        throw ValidationError("airy: grid must span the half-line box");
    DiscreteOperator op = detail::laplacian_skeleton(g);
    for (std::size_t j = 0; j < op.dim(); ++j) op.diag[j] += cplx(0.0, alpha * g.interior_node(j));
    op.tag.kind = side == AirySide::plus ? ModelKind::airy_plus : ModelKind::airy_minus;
    op.tag.alpha = alpha;
    op.tag.offset = 0.0;
    return op;
}

// Whole-line Airy operator truncated to [-L, L]; its continuum version has empty spectrum.
inline DiscreteOperator assemble_airy_line(double alpha, double half_width, const Grid1D& g) {
    if (alpha == 0.0) throw ValidationError("airy: alpha must be nonzero");
    if (!detail::close(g.y_lo, -half_width) || !detail::close(g.y_hi, half_width))
        throw ValidationError("airy line: grid must span [-L, L]");
    DiscreteOperator op = detail::laplacian_skeleton(g);
    for (std::size_t j = 0; j < op.dim(); ++j) op.diag[j] += cplx(0.0, alpha * g.interior_node(j));
    op.tag.kind = ModelKind::airy_line;
    op.tag.alpha = alpha;
    return op;
}

inline nlohmann::json grid_json(const Grid1D& g) {
    return {{"y_lo", g.y_lo}, {"y_hi", g.y_hi}, {"n_cells", g.n_cells}, {"h", g.h}};
}

inline nlohmann::json complex_array_json(const cvec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& z : v) a.push_back({z.real(), z.imag()});
    return a;
}

inline nlohmann::json to_json(const DiscreteOperator& op) {
    nlohmann::json j;
    j["model"] = to_string(op.tag.kind);
    j["n"] = op.tag.n;
    if (op.tag.kind == ModelKind::harmonic) j["qprime0"] = op.tag.qprime0;
    if (op.tag.kind == ModelKind::airy_plus || op.tag.kind == ModelKind::airy_minus ||
        op.tag.kind == ModelKind::airy_line) {
        j["alpha"] = op.tag.alpha;
        j["offset"] = op.tag.offset;
    }
    if (!op.tag.profile.empty()) j["profile"] = op.tag.profile;
    j["grid"] = grid_json(op.grid);
    j["sub"] = complex_array_json(op.sub);
    j["diag"] = complex_array_json(op.diag);
    j["sup"] = complex_array_json(op.sup);
    return j;
}

}  // namespace kolmo
