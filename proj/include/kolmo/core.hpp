// core.hpp - shared scalar types, error hierarchy, seeded vectors, line fits
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kolmo {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double sqrt2 = std::numbers::sqrt2;
inline constexpr std::uint64_t default_seed = 20240917;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: exit status 1 at the command line.
class ValidationError : public Error {
public:
    using Error::Error;
};

class RangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Solver failure: exit status 2 at the command line.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what,
                            double best_residual = std::numeric_limits<double>::quiet_NaN())
        : Error(what), best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

private:
    double best_residual_;
};

class SingularMatrix : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline double norm2(const cvec& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

inline cplx dotc(const cvec& a, const cvec& b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

// Bilinear (unconjugated) product, the natural pairing for complex-symmetric matrices.
inline cplx dotu(const cvec& a, const cvec& b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void scale(cvec& v, cplx s) {
    for (auto& x : v) x *= s;
}

// Discrete L2 norm on interior nodes; Dirichlet endpoints contribute zero to the trapezoid sum.
inline double l2_norm(const cvec& v, double h) { return std::sqrt(h) * norm2(v); }

class Rng {
public:
    explicit Rng(std::uint64_t seed = default_seed) : engine_(seed), seed_(seed) {}
    std::uint64_t seed() const { return seed_; }

    double uniform() {
        // 53 random bits mapped to [-1, 1); avoids library-specific distribution code.
        return static_cast<double>(engine_() >> 11) * 0x1.0p-52 - 1.0;
    }

    cvec complex_vector(std::size_t m) {
        cvec v(m);
        for (auto& x : v) {
            double re = uniform();
            double im = uniform();
            x = cplx(re, im);
        }
        return v;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

inline LineFit fit_line(const rvec& x, const rvec& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("line fit abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// handled exactly once and results go to caller-owned slots, so output order
// does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace kolmo
