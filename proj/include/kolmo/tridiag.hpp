// tridiag.hpp - complex tridiagonal LU: unpivoted with growth monitoring, pivoted fallback
#pragma once

#include "kolmo/core.hpp"
#include "kolmo/discretize.hpp"

namespace kolmo {

class TridiagonalLU {
public:
    TridiagonalLU() = default;

    // Factors tridiag(sub, diag + shift, sup). Growth above `growth_limit` or a
    // vanishing pivot switches to partial pivoting (the zgttrf scheme).
    TridiagonalLU(const cvec& sub, const cvec& diag, const cvec& sup, cplx shift = 0.0, double growth_limit = 1e8) {
        factor(sub, diag, sup, shift, growth_limit);
    }

    TridiagonalLU(const DiscreteOperator& op, cplx shift = 0.0, double growth_limit = 1e8) {
        factor(op.sub, op.diag, op.sup, shift, growth_limit);
    }

    bool pivoted() const { return pivoted_; }
    double growth() const { return growth_; }
    std::size_t dim() const { return d_.size(); }

    void solve(cvec& b) const {
        const std::size_t n = d_.size();
        if (b.size() != n) throw ValidationError("tridiagonal solve: size mismatch");
        if (!pivoted_) {
            for (std::size_t i = 1; i < n; ++i) b[i] -= dl_[i - 1] * b[i - 1];
            b[n - 1] /= d_[n - 1];
            for (std::size_t i = n - 1; i-- > 0;) b[i] = (b[i] - du_[i] * b[i + 1]) / d_[i];
            return;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (ipiv_[i] == i) {
                b[i + 1] -= dl_[i] * b[i];
            } else {
                const cplx t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - dl_[i] * b[i];
            }
        }
        b[n - 1] /= d_[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
        if (n > 2)
            for (std::size_t i = n - 2; i-- > 0;) b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    }

private:
    void factor(const cvec& sub, const cvec& diag, const cvec& sup, cplx shift, double growth_limit) {
        const std::size_t n = diag.size();
        if (n == 0 || sub.size() + 1 != n || sup.size() + 1 != n)
            throw ValidationError("tridiagonal factor: inconsistent band lengths");
        double amax = 0.0;
        for (std::size_t i = 0; i < n; ++i) amax = std::max(amax, std::abs(diag[i] + shift));
        for (std::size_t i = 0; i + 1 < n; ++i) amax = std::max({amax, std::abs(sub[i]), std::abs(sup[i])});
        if (amax == 0.0) throw SingularMatrix("tridiagonal factor: zero matrix");

        d_.resize(n);
        dl_ = sub;
        du_ = sup;
        bool ok = true;
        double umax = 0.0;
        d_[0] = diag[0] + shift;
        for (std::size_t i = 1; i < n && ok; ++i) {
            if (d_[i - 1] == cplx(0.0)) {
                ok = false;
                break;
            }
            dl_[i - 1] = sub[i - 1] / d_[i - 1];
            d_[i] = diag[i] + shift - dl_[i - 1] * sup[i - 1];
            umax = std::max(umax, std::abs(d_[i]));
        }
        umax = std::max(umax, std::abs(d_[0]));
        growth_ = umax / amax;
        if (ok && d_[n - 1] != cplx(0.0) && std::isfinite(growth_) && growth_ <= growth_limit) {
            pivoted_ = false;
            return;
        }
        factor_pivoted(sub, diag, sup, shift);
    }

    void factor_pivoted(const cvec& sub, const cvec& diag, const cvec& sup, cplx shift) {
        const std::size_t n = diag.size();
        pivoted_ = true;
        dl_ = sub;
        du_ = sup;
        d_.resize(n);
        for (std::size_t i = 0; i < n; ++i) d_[i] = diag[i] + shift;
        du2_.assign(n > 2 ? n - 2 : 0, 0.0);
        ipiv_.resize(n);
        for (std::size_t i = 0; i < n; ++i) ipiv_[i] = i;
        auto cabs1 = [](cplx z) { return std::abs(z.real()) + std::abs(z.imag()); };
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (cabs1(d_[i]) >= cabs1(dl_[i])) {
                if (d_[i] != cplx(0.0)) {
                    const cplx f = dl_[i] / d_[i];
                    dl_[i] = f;
                    d_[i + 1] -= f * du_[i];
                }
            } else {
                const cplx f = d_[i] / dl_[i];
                d_[i] = dl_[i];
                dl_[i] = f;
                const cplx t = du_[i];
                du_[i] = d_[i + 1];
                d_[i + 1] = t - f * d_[i + 1];
                if (i + 2 < n) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -f * du_[i + 1];
                }
                ipiv_[i] = i + 1;
            }
        }
        double umax = 0.0, amax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (d_[i] == cplx(0.0)) throw SingularMatrix("tridiagonal factor: exactly singular pivot");
            umax = std::max(umax, std::abs(d_[i]));
            amax = std::max(amax, std::abs(diag[i] + shift));
        }
        growth_ = amax > 0.0 ? umax / amax : 0.0;
    }

    bool pivoted_ = false;
    double growth_ = 1.0;
    cvec d_, dl_, du_, du2_;
    std::vector<std::size_t> ipiv_;
};

}  // namespace kolmo
