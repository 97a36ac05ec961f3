#include <gtest/gtest.h>

#include "kolmo/tridiag.hpp"
#include "oracles.hpp"

using namespace kolmo;

namespace {

std::vector<cvec> dense_of(const cvec& sub, const cvec& diag, const cvec& sup) {
    const std::size_t n = diag.size();
    std::vector<cvec> a(n, cvec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        a[i][i] = diag[i];
        if (i + 1 < n) {
            a[i + 1][i] = sub[i];
            a[i][i + 1] = sup[i];
        }
    }
    return a;
}

}  // namespace

TEST(TridiagonalLU, MatchesDenseEliminationOnAccretiveMatrix) {
    Rng rng(3);
    const std::size_t n = 60;
    cvec sub = rng.complex_vector(n - 1), sup = rng.complex_vector(n - 1), diag = rng.complex_vector(n);
    for (auto& d : diag) d += 6.0;
    cvec b = rng.complex_vector(n);
    cvec x = b;
    TridiagonalLU lu(sub, diag, sup);
    EXPECT_FALSE(lu.pivoted());
    lu.solve(x);
    auto ref = oracle::dense_solve(dense_of(sub, diag, sup), b);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LT(std::abs(x[i] - ref[i]), 1e-12);
}

TEST(TridiagonalLU, ZeroLeadingPivotFallsBackToPivoting) {
    Rng rng(5);
    const std::size_t n = 25;
    cvec sub = rng.complex_vector(n - 1), sup = rng.complex_vector(n - 1), diag = rng.complex_vector(n);
    diag[0] = 0.0;
    diag[7] = 1e-14;
    cvec b = rng.complex_vector(n);
    TridiagonalLU lu(sub, diag, sup);
    EXPECT_TRUE(lu.pivoted());
    cvec x = b;
    lu.solve(x);
    auto ref = oracle::dense_solve(dense_of(sub, diag, sup), b);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LT(std::abs(x[i] - ref[i]), 1e-9 * (1.0 + std::abs(ref[i])));
}

TEST(TridiagonalLU, ShiftIsAppliedToDiagonal) {
    cvec sub(4, -1.0), sup(4, -1.0), diag(5, 2.0);
    const cplx shift(0.3, -0.7);
    TridiagonalLU lu(sub, diag, sup, shift);
    cvec b{1.0, 2.0, 3.0, 4.0, 5.0}, x = b;
    lu.solve(x);
    cvec shifted = diag;
    for (auto& d : shifted) d += shift;
    auto ref = oracle::dense_solve(dense_of(sub, shifted, sup), b);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(std::abs(x[i] - ref[i]), 1e-13);
}

TEST(TridiagonalLU, ExactlySingularIsReported) {
    cvec sub(2, 0.0), sup(2, 0.0), diag{1.0, 0.0, 2.0};
    EXPECT_THROW(TridiagonalLU(sub, diag, sup), SingularMatrix);
}

TEST(TridiagonalLU, OneByOne) {
    TridiagonalLU lu(cvec{}, cvec{cplx(2.0, 1.0)}, cvec{});
    cvec x{cplx(4.0, 2.0)};
    lu.solve(x);
    EXPECT_LT(std::abs(x[0] - cplx(2.0, 0.0)), 1e-15);
}
