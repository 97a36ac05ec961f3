// eigen.hpp - shift-invert eigenpairs of tridiagonal operators, dense oracle, boundary derivatives
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <functional>
#include <json.hpp>

#include "kolmo/core.hpp"
#include "kolmo/discretize.hpp"
#include "kolmo/profile.hpp"
#include "kolmo/tridiag.hpp"

namespace kolmo {

struct EigenOptions {
    double tol = 1e-10;  // relative: ||Mv - lambda v|| <= tol |lambda| ||v||
    int max_iter = 2000;
    std::uint64_t seed = default_seed;
};

struct EigenPair {
    cplx lambda = 0.0;
    cvec vector;  // interior nodes, discrete L2 norm 1, max-modulus entry real positive
    double residual = 0.0;  // ||Mv - lambda v|| / ||v||
    cplx deriv_lo = 0.0;
    cplx deriv_hi = 0.0;
    bool normalized = false;
    Grid1D grid;
    ModelTag tag;
    std::uint64_t seed = default_seed;
    int iterations = 0;
    cplx shift = 0.0;
};

// Residual floor: below roughly this level the residual is set by rounding, not by convergence.
inline double residual_floor(const DiscreteOperator& op) {
    return 64.0 * std::numeric_limits<double>::epsilon() * op.inf_norm();
}

inline double residual_tolerance(const DiscreteOperator& op, cplx lambda, double tol) {
    return std::max(tol * std::max(std::abs(lambda), std::numeric_limits<double>::min()), residual_floor(op));
}

inline double residual_of(const DiscreteOperator& op, const cvec& v, cplx lambda) {
    cvec mv = op * v;
    for (std::size_t j = 0; j < v.size(); ++j) mv[j] -= lambda * v[j];
    return norm2(mv) / norm2(v);
}

inline std::pair<cplx, cplx> boundary_derivative(const cvec& v, const Grid1D& g) {
    const std::size_t m = v.size();
    if (m < 4) throw ValidationError("boundary derivative: grid too coarse (need at least 4 interior nodes)");
    const double h = g.h;
    // second-order one-sided stencil with the Dirichlet zero at the endpoint
    const cplx lo = (4.0 * v[0] - v[1]) / (2.0 * h);
    const cplx hi = -(4.0 * v[m - 1] - v[m - 2]) / (2.0 * h);
    return {lo, hi};
}

inline std::pair<cplx, cplx> boundary_derivative(const EigenPair& p, const Grid1D& g) {
    return boundary_derivative(p.vector, g);
}

namespace detail {

struct Deflation {
    std::vector<cvec> right;
    std::vector<cvec> left;
    std::vector<cplx> denom;

    // Oblique projector onto the complement of the found eigenvectors, using the bilinear pairing.
    void apply(cvec& x) const {
        for (std::size_t k = 0; k < right.size(); ++k) {
            const cplx c = dotu(left[k], x) / denom[k];
            for (std::size_t j = 0; j < x.size(); ++j) x[j] -= c * right[k][j];
        }
    }

    void add(cvec r, cvec l) {
        const cplx d = dotu(l, r);
        if (std::abs(d) <= 1e-14 * norm2(l) * norm2(r))
            throw NumericalError("deflation: left and right eigenvectors are numerically orthogonal");
        right.push_back(std::move(r));
        left.push_back(std::move(l));
        denom.push_back(d);
    }
};

inline TridiagonalLU factor_with_retry(const DiscreteOperator& op, cplx& shift) {
    double bump = 1e-10;
    for (int attempt = 0; attempt < 8; ++attempt) {
        try {
            return TridiagonalLU(op, -shift);
        } catch (const SingularMatrix&) {
            shift += bump * (1.0 + std::abs(shift)) * std::polar(1.0, pi / 3.0);
            bump *= 10.0;
        }
    }
    throw SingularMatrix("shift-invert: shifted matrix stays singular after perturbation");
}

inline cplx rayleigh(const DiscreteOperator& op, const cvec& v, const cvec& mv) {
    if (op.complex_symmetric()) {
        const cplx vv = dotu(v, v);
        if (std::abs(vv) > 1e-8 * std::norm(norm2(v))) return dotu(v, mv) / vv;
    }
    return dotc(v, mv) / dotc(v, v);
}

inline void normalize_pair(EigenPair& p, const DiscreteOperator& op) {
    const double nrm = l2_norm(p.vector, op.grid.h);
    std::size_t imax = 0;
    for (std::size_t j = 0; j < p.vector.size(); ++j)
        if (std::abs(p.vector[j]) > std::abs(p.vector[imax])) imax = j;
    const cplx phase = std::abs(p.vector[imax]) / p.vector[imax];
    scale(p.vector, phase / nrm);
    p.vector[imax] = cplx(p.vector[imax].real(), 0.0);
    p.normalized = true;
    p.grid = op.grid;
    p.tag = op.tag;
    p.residual = residual_of(op, p.vector, p.lambda);  // independent re-verification
    if (p.vector.size() >= 4) std::tie(p.deriv_lo, p.deriv_hi) = boundary_derivative(p.vector, op.grid);
}

inline cvec left_eigenvector(const DiscreteOperator& op, cplx lambda, const cvec& right, Rng& rng) {
    if (op.complex_symmetric()) return right;
    DiscreteOperator t = op.transpose();
    cplx s = lambda;
    TridiagonalLU lu = factor_with_retry(t, s);
    cvec w = rng.complex_vector(op.dim());
    for (int it = 0; it < 6; ++it) {
        lu.solve(w);
        scale(w, 1.0 / norm2(w));
    }
    return w;
}

}  // namespace detail

// Inverse iteration at `shift` restricted to the complement of `defl`. Once the
// residual is small the shift moves to the current Rayleigh quotient once.
inline EigenPair inverse_iteration(const DiscreteOperator& op, cplx shift, const detail::Deflation& defl,
                                   const EigenOptions& o, Rng& rng) {
    if (!(o.tol > 0.0)) throw ValidationError("eigen tol must be positive");
    const std::size_t m = op.dim();
    EigenPair p;
    p.shift = shift;
    p.seed = rng.seed();
    cplx sigma = shift;
    TridiagonalLU lu = detail::factor_with_retry(op, sigma);
    cvec v = rng.complex_vector(m);
    defl.apply(v);
    scale(v, 1.0 / norm2(v));
    double best = std::numeric_limits<double>::infinity();
    cplx lambda_prev = std::numeric_limits<double>::quiet_NaN();
    bool reshifted = false;
    int stagnant = 0;
    cvec mv;
    for (int it = 1; it <= o.max_iter; ++it) {
        cvec x = v;
        lu.solve(x);
        defl.apply(x);
        const double nx = norm2(x);
        if (!(nx > 0.0) || !std::isfinite(nx)) throw NumericalError("inverse iteration: solve produced no usable vector", best);
        for (std::size_t j = 0; j < m; ++j) v[j] = x[j] / nx;
        op.apply(v, mv);
        const cplx lambda = detail::rayleigh(op, v, mv);
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) r += std::norm(mv[j] - lambda * v[j]);
        r = std::sqrt(r);
        best = std::min(best, r);
        p.lambda = lambda;
        p.iterations = it;
        const double target = residual_tolerance(op, lambda, o.tol);
        if (r <= target) break;
        if (std::abs(lambda - lambda_prev) <= 1e-12 * std::abs(lambda)) {
            if (++stagnant >= 3) {
                if (r <= 1e3 * target) break;  // stagnated near the rounding floor
                throw NumericalError("inverse iteration: Rayleigh quotient stagnated above tolerance", best);
            }
        } else {
            stagnant = 0;
        }
        if (!reshifted && r <= 1e-3 * std::abs(lambda)) {
            sigma = lambda;
            lu = detail::factor_with_retry(op, sigma);
            reshifted = true;
        }
        lambda_prev = lambda;
        if (it == o.max_iter)
            throw NumericalError("inverse iteration: no convergence after " + std::to_string(o.max_iter) +
                                     " iterations (best residual " + std::to_string(best) + ")",
                                 best);
    }
    p.vector = std::move(v);
    detail::normalize_pair(p, op);
    return p;
}

// `count` eigenpairs nearest to `shift`, found one at a time with deflation.
inline std::vector<EigenPair> eigenpairs_near(const DiscreteOperator& op, cplx shift, int count,
                                              const EigenOptions& o = {}) {
    Rng rng(o.seed);
    detail::Deflation defl;
    std::vector<EigenPair> out;
    for (int k = 0; k < count; ++k) {
        EigenPair p = inverse_iteration(op, shift, defl, o, rng);
        defl.add(p.vector, detail::left_eigenvector(op, p.lambda, p.vector, rng));
        out.push_back(std::move(p));
    }
    return out;
}

struct RayConfirmation {
    std::vector<cplx> candidates;  // every eigenvalue found in the pass
    double search_radius = 0.0;
    bool confirmed = false;  // true when the shift-0 eigenvalue kept the smallest real part
};

// Shift-invert at 0, then deflated restarts at shifts along the ray e^{i pi/4} R_+
// up to radius_factor |lambda_0|. Returns the candidate of smallest real part.
inline EigenPair smallest_real_eigenpair(const DiscreteOperator& op, double tol = 1e-10, int max_iter = 2000,
                                         RayConfirmation* report = nullptr, std::uint64_t seed = default_seed,
                                         double radius_factor = 3.0, int ray_shifts = 4) {
    EigenOptions o{tol, max_iter, seed};
    Rng rng(seed);
    detail::Deflation defl;
    std::vector<EigenPair> found;
    found.push_back(inverse_iteration(op, 0.0, defl, o, rng));
    defl.add(found[0].vector, detail::left_eigenvector(op, found[0].lambda, found[0].vector, rng));
    const double radius = radius_factor * std::abs(found[0].lambda);
    for (int k = 1; k <= ray_shifts && found.size() < op.dim(); ++k) {
        const cplx sigma = std::polar(radius * k / ray_shifts, pi / 4.0);
        try {
            EigenPair p = inverse_iteration(op, sigma, defl, o, rng);
            bool dup = false;
            for (const auto& f : found)
                if (std::abs(f.lambda - p.lambda) <= 1e-8 * std::max(1.0, std::abs(p.lambda))) dup = true;
            if (dup) continue;
            defl.add(p.vector, detail::left_eigenvector(op, p.lambda, p.vector, rng));
            found.push_back(std::move(p));
        } catch (const NumericalError&) {
            // a failed confirmation shift leaves the primary result untouched
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < found.size(); ++k)
        if (found[k].lambda.real() < found[best].lambda.real()) best = k;
    if (report) {
        report->candidates.clear();
        for (const auto& f : found) report->candidates.push_back(f.lambda);
        report->search_radius = radius;
        report->confirmed = best == 0;
    }
    EigenPair out = std::move(found[best]);
    out.seed = seed;
    return out;
}

// All eigenvalues by Hessenberg reduction and shifted QR, sorted by real part then imaginary part.
inline std::vector<cplx> dense_spectrum(const DiscreteOperator& op) {
    const std::size_t m = op.dim();
    if (m > 2000) throw ValidationError("dense spectrum: dimension " + std::to_string(m) + " exceeds 2000");
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        a(jj, jj) = op.diag[j];
        if (j + 1 < m) {
            a(jj + 1, jj) = op.sub[j];
            a(jj, jj + 1) = op.sup[j];
        }
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es;
    es.setMaxIterations(static_cast<Eigen::Index>(30 * m));
    es.compute(a, false);
    if (es.info() != Eigen::Success) throw NumericalError("dense spectrum: QR iteration did not converge");
    std::vector<cplx> ev(m);
    for (std::size_t j = 0; j < m; ++j) ev[j] = es.eigenvalues()(static_cast<Eigen::Index>(j));
    std::sort(ev.begin(), ev.end(), [](cplx x, cplx y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return ev;
}

// Largest relative change of the `count` eigenvalues nearest 0 when the box doubles.
inline double box_doubling_change(const std::function<DiscreteOperator(double)>& build, double box, int count,
                                  const EigenOptions& o = {}) {
    auto a = eigenpairs_near(build(box), 0.0, count, o);
    auto b = eigenpairs_near(build(2.0 * box), 0.0, count, o);
    auto by_modulus = [](const EigenPair& x, const EigenPair& y) { return std::abs(x.lambda) < std::abs(y.lambda); };
    std::sort(a.begin(), a.end(), by_modulus);
    std::sort(b.begin(), b.end(), by_modulus);
    double worst = 0.0;
    for (int k = 0; k < count; ++k)
        worst = std::max(worst, std::abs(a[k].lambda - b[k].lambda) / std::abs(b[k].lambda));
    return worst;
}

struct AgmonReport {
    long n = 0;
    double eps = 0.0;
    double max_weighted = 0.0;  // max_y e^{sqrt(n) kappa_eps(y)} |psi'(y)|
    double ratio = 0.0;         // max_weighted / max(1, sqrt(n))
    double argmax_y = 0.0;
};

inline AgmonReport agmon_profile_check(const EigenPair& p, const QProfile& profile, double eps) {
    if (p.tag.kind != ModelKind::kolmogorov)
        throw ValidationError("agmon check needs an eigenpair of a kolmogorov operator");
    if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("agmon check: eps must lie in [0, 1]");
    const Grid1D& g = p.grid;
    const std::size_t m = p.vector.size();
    if (m < 4) throw ValidationError("agmon check: grid too coarse");
    // values on all nodes, Dirichlet zeros at the ends
    cvec u(m + 2, 0.0);
    for (std::size_t j = 0; j < m; ++j) u[j + 1] = p.vector[j];
    const double rn = std::sqrt(std::abs(static_cast<double>(p.tag.n)));
    AgmonReport r;
    r.n = p.tag.n;
    r.eps = eps;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cplx d;
        if (i == 0)
            d = p.deriv_lo;
        else if (i + 1 == u.size())
            d = p.deriv_hi;
        else
            d = (u[i + 1] - u[i - 1]) / (2.0 * g.h);
        const double y = g.nodes[i];
        const double w = std::exp(rn * kappa_eps(profile, eps, y)) * std::abs(d);
        if (w > r.max_weighted) {
            r.max_weighted = w;
            r.argmax_y = y;
        }
    }
    r.ratio = r.max_weighted / std::max(1.0, rn);
    return r;
}

inline nlohmann::json to_json(const EigenPair& p) {
    nlohmann::json j;
    j["n"] = p.tag.n;
    j["model"] = to_string(p.tag.kind);
    j["lambda"] = {p.lambda.real(), p.lambda.imag()};
    j["residual"] = p.residual;
    j["boundary_derivative_lo"] = {p.deriv_lo.real(), p.deriv_lo.imag()};
    j["boundary_derivative_hi"] = {p.deriv_hi.real(), p.deriv_hi.imag()};
    j["normalized"] = p.normalized;
    j["grid"] = grid_json(p.grid);
    j["seed"] = p.seed;
    j["iterations"] = p.iterations;
    return j;
}

}  // namespace kolmo
