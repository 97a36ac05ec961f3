// quadrature.hpp - composite trapezoid with a Richardson error estimate
#pragma once

#include "kolmo/core.hpp"

namespace kolmo {

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;  // |T(N) - T(N/2)| / 3
};

template <class F>
double trapezoid(F&& f, double a, double b, int points) {
    if (points < 2) throw ValidationError("quadrature needs at least 2 points");
    if (a == b) return 0.0;
    const int cells = points - 1;
    const double h = (b - a) / cells;
    double s = 0.5 * (f(a) + f(b));
    for (int i = 1; i < cells; ++i) s += f(a + i * h);
    return s * h;
}

template <class F>
QuadResult trapezoid_checked(F&& f, double a, double b, int points) {
    QuadResult r;
    r.value = trapezoid(f, a, b, points);
    const int coarse = std::max(2, (points - 1) / 2 + 1);
    r.error_estimate = std::abs(r.value - trapezoid(f, a, b, coarse)) / 3.0;
    return r;
}

}  // namespace kolmo
