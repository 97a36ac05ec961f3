#include <gtest/gtest.h>

#include "kolmo/eigen.hpp"
#include "oracles.hpp"

using namespace kolmo;

namespace {

DiscreteOperator laplacian_pi(int cells) {
    return assemble_dirichlet_laplacian(Grid1D::uniform(0.0, pi, cells));
}

DiscreteOperator kolmogorov(long n, double lm = 1.0, double lp = 1.0) {
    auto p = QProfile::linear(lm, lp);
    return assemble_kn(p, n, kn_grid(p, n));
}

}  // namespace

TEST(SmallestReal, LaplacianOnPi) {
    auto op = laplacian_pi(400);
    auto p = smallest_real_eigenpair(op);
    EXPECT_NEAR(p.lambda.real(), oracle::discrete_laplacian_eigenvalue(1, pi, 400), 1e-10);
    EXPECT_NEAR(p.lambda.real(), 1.0, 1e-5);
    EXPECT_NEAR(p.lambda.imag(), 0.0, 1e-12);
}

TEST(SmallestReal, KolmogorovNearRotatedSqrtN) {
    auto op = kolmogorov(400);
    RayConfirmation rep;
    auto p = smallest_real_eigenpair(op, 1e-10, 2000, &rep);
    const cplx r = p.lambda / 20.0;
    EXPECT_LT(std::abs(r - std::polar(1.0, pi / 4)), 0.1);
    EXPECT_TRUE(rep.confirmed);
    EXPECT_GE(rep.candidates.size(), 2u);
}

TEST(SmallestReal, HarmonicGroundState) {
    const double bw = harmonic_box_half_width(1.0, 1);
    auto op = assemble_hn(1.0, 1, bw, Grid1D::uniform(-bw, bw, 4000));
    auto p = smallest_real_eigenpair(op);
    EXPECT_LT(std::abs(p.lambda - std::polar(1.0, pi / 4)), 1e-5);
    EXPECT_LE(p.residual, residual_tolerance(op, p.lambda, 1e-10));
}

TEST(SmallestReal, ResidualContractReverified) {
    for (long n : {0L, 25L, 400L}) {
        auto op = kolmogorov(n, 1.0, 2.0);
        auto p = smallest_real_eigenpair(op);
        const double r = residual_of(op, p.vector, p.lambda);
        EXPECT_LE(r, residual_tolerance(op, p.lambda, 1e-10));
        EXPECT_NEAR(l2_norm(p.vector, op.grid.h), 1.0, 1e-12);
        std::size_t imax = 0;
        for (std::size_t j = 0; j < p.vector.size(); ++j)
            if (std::abs(p.vector[j]) > std::abs(p.vector[imax])) imax = j;
        EXPECT_EQ(p.vector[imax].imag(), 0.0);
        EXPECT_GT(p.vector[imax].real(), 0.0);
    }
}

TEST(SmallestReal, NonConvergenceCarriesBestResidual) {
    auto op = kolmogorov(400);
    try {
        smallest_real_eigenpair(op, 1e-10, 2);
        FAIL() << "expected a numerical error";
    } catch (const NumericalError& e) {
        EXPECT_TRUE(std::isfinite(e.best_residual()));
        EXPECT_GT(e.best_residual(), 0.0);
    }
}

TEST(SmallestReal, ShiftOnAnEigenvalueIsPerturbed) {
    // A diagonal matrix makes the shifted system exactly singular.
    DiscreteOperator op = assemble_dirichlet_laplacian(Grid1D::uniform(0.0, 1.0, 6));
    for (std::size_t j = 0; j < op.dim(); ++j) op.diag[j] = cplx(1.0 + j, 0.0);
    for (auto& s : op.sub) s = 0.0;
    for (auto& s : op.sup) s = 0.0;
    detail::Deflation none;
    Rng rng(1);
    auto p = inverse_iteration(op, cplx(3.0, 0.0), none, EigenOptions{}, rng);
    EXPECT_LT(std::abs(p.lambda - 3.0), 1e-9);
}

TEST(SmallestReal, RejectsNonPositiveTolerance) {
    EXPECT_THROW(smallest_real_eigenpair(laplacian_pi(50), 0.0), ValidationError);
}

TEST(DenseSpectrum, LaplacianFirstThree) {
    auto ev = dense_spectrum(laplacian_pi(201));
    ASSERT_EQ(ev.size(), 200u);
    for (int k = 1; k <= 3; ++k) {
        EXPECT_NEAR(ev[k - 1].real(), oracle::discrete_laplacian_eigenvalue(k, pi, 201), 1e-9);
        EXPECT_NEAR(ev[k - 1].real(), double(k * k), 5e-4 * k * k);
    }
}

TEST(DenseSpectrum, HarmonicFirstThree) {
    const double bw = harmonic_box_half_width(1.0, 1, 3);
    auto op = assemble_hn(1.0, 1, bw, Grid1D::uniform(-bw, bw, 600), 3);
    auto ev = dense_spectrum(op);
    for (int k = 1; k <= 3; ++k) EXPECT_LT(std::abs(ev[k - 1] - oracle::harmonic_eigenvalue(k, 1, 1)), 2e-3);
}

TEST(DenseSpectrum, RejectsLargeDimension) {
    EXPECT_THROW(dense_spectrum(laplacian_pi(2500)), ValidationError);
}

TEST(DenseSpectrum, AgreesWithTargetedSolverOnOverlap) {
    std::vector<DiscreteOperator> ops{laplacian_pi(300), kolmogorov(25), kolmogorov(100, 1.0, 2.0)};
    const double bw = harmonic_box_half_width(1.0, 1, 3);
    ops.push_back(assemble_hn(1.0, 1, bw, Grid1D::uniform(-bw, bw, 500), 3));
    for (const auto& op : ops) {
        ASSERT_LE(op.dim(), 600u);
        auto dense = dense_spectrum(op);
        auto p = smallest_real_eigenpair(op);
        EXPECT_LT(std::abs(p.lambda - dense.front()), 1e-8 * std::max(1.0, std::abs(p.lambda)));
        for (const auto& q : eigenpairs_near(op, 0.0, 3)) {
            double best = 1e300;
            for (const auto& z : dense) best = std::min(best, std::abs(z - q.lambda));
            EXPECT_LT(best, 1e-8 * std::max(1.0, std::abs(q.lambda)));
        }
    }
}

TEST(Symmetry, OddProfileSpectrumClosedUnderReflectedConjugation) {
    auto p = QProfile::cubic_perturbed(0.3, 1.0, 1.0);
    auto op = assemble_kn(p, 60, Grid1D::uniform(-1.0, 1.0, 300));
    auto a = dense_spectrum(op);
    // K_{-n} on the reflected node order is the entrywise conjugate of K_n
    auto r = assemble_kn(p, -60, Grid1D::uniform(-1.0, 1.0, 300));
    std::reverse(r.diag.begin(), r.diag.end());
    auto b = dense_spectrum(r);
    for (std::size_t k = 0; k < 10; ++k) {
        double best = 1e300;
        for (const auto& z : b) best = std::min(best, std::abs(std::conj(a[k]) - z));
        EXPECT_LT(best, 1e-8 * std::max(1.0, std::abs(a[k])));
    }
}

TEST(BoundaryDerivative, LaplacianFirstMode) {
    auto op = laplacian_pi(800);
    auto p = smallest_real_eigenpair(op);
    auto [lo, hi] = boundary_derivative(p, op.grid);
    const double ref = std::sqrt(2.0 / pi);
    EXPECT_NEAR(lo.real(), ref, 1e-4);
    EXPECT_NEAR(hi.real(), -ref, 1e-4);
}

TEST(BoundaryDerivative, SymmetricProfileEqualMagnitudes) {
    auto op = kolmogorov(225);
    auto p = smallest_real_eigenpair(op);
    auto [lo, hi] = boundary_derivative(p, op.grid);
    EXPECT_NEAR(std::abs(lo), std::abs(hi), 1e-8 * std::abs(hi));
}

TEST(BoundaryDerivative, InvariantUnderUnitPhase) {
    auto op = kolmogorov(100, 1.0, 2.0);
    auto p = smallest_real_eigenpair(op);
    auto [lo, hi] = boundary_derivative(p, op.grid);
    cvec v = p.vector;
    scale(v, std::polar(1.0, 1.234));
    auto [lo2, hi2] = boundary_derivative(v, op.grid);
    EXPECT_NEAR(std::abs(lo), std::abs(lo2), 1e-14 * std::abs(lo));
    EXPECT_NEAR(std::abs(hi), std::abs(hi2), 1e-14 * std::abs(hi));
}

TEST(BoundaryDerivative, CoarseGridRejected) {
    cvec v(3, 1.0);
    EXPECT_THROW(boundary_derivative(v, Grid1D::uniform(0.0, 1.0, 4)), ValidationError);
}

TEST(BoundaryDerivative, AgmonSlopeRecorded) {
    // Raw slope of log|psi'(1)| against sqrt(n); the acceptance suite gates it.
    rvec x, y;
    for (long n : {25L, 100L, 225L, 400L, 625L}) {
        auto op = kolmogorov(n);
        auto p = smallest_real_eigenpair(op);
        x.push_back(std::sqrt(double(n)));
        y.push_back(std::log(std::abs(p.deriv_hi)));
    }
    auto fit = fit_line(x, y);
    EXPECT_LT(fit.slope, 0.0);
    RecordProperty("slope", std::to_string(fit.slope));
}

TEST(AgmonProfile, ZeroModeReducesToDerivativeSup) {
    auto p = QProfile::linear(1.0, 1.0);
    auto op = assemble_kn(p, 0, kn_grid(p, 0, 200));
    auto pair = smallest_real_eigenpair(op);
    auto r = agmon_profile_check(pair, p, 0.2);
    // psi = sin(pi (y+1)/2), so max |psi'| = pi/2
    EXPECT_NEAR(r.max_weighted, pi / 2, 1e-3);
    EXPECT_TRUE(std::isfinite(r.ratio));
}

TEST(AgmonProfile, BoundedSweepAndMonotoneInEps) {
    auto p = QProfile::linear(1.0, 1.0);
    std::vector<double> r2, r9;
    for (long n : {25L, 100L, 225L, 400L, 625L}) {
        auto op = assemble_kn(p, n, kn_grid(p, n));
        auto pair = smallest_real_eigenpair(op);
        r2.push_back(agmon_profile_check(pair, p, 0.2).ratio);
        r9.push_back(agmon_profile_check(pair, p, 0.9).ratio);
    }
    const auto [mn, mx] = std::minmax_element(r2.begin(), r2.end());
    EXPECT_LT(*mx, 10.0 * *mn);
    for (std::size_t i = 0; i < r2.size(); ++i) EXPECT_LT(r9[i], r2[i]);
}

TEST(AgmonProfile, NeedsKolmogorovPair) {
    auto op = laplacian_pi(50);
    auto pair = smallest_real_eigenpair(op);
    EXPECT_THROW(agmon_profile_check(pair, QProfile::linear(1.0, 1.0), 0.2), ValidationError);
}

TEST(Export, EigenPairJson) {
    auto op = kolmogorov(100);
    auto p = smallest_real_eigenpair(op, 1e-10, 2000, nullptr, 99);
    auto j = to_json(p);
    EXPECT_EQ(j["n"], 100);
    EXPECT_EQ(j["seed"], 99);
    EXPECT_EQ(j["lambda"].size(), 2u);
    EXPECT_TRUE(j.contains("grid"));
    EXPECT_TRUE(j.contains("boundary_derivative_hi"));
}
