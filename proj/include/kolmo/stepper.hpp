// stepper.hpp - Crank-Nicolson time stepping for du/dt + M u = 0
#pragma once

#include "kolmo/core.hpp"
#include "kolmo/discretize.hpp"
#include "kolmo/tridiag.hpp"

namespace kolmo {

// One factorization of I + dt/2 M serves both schemes:
//   CN:               (I + dt/2 M) u+ = (I - dt/2 M) u
//   BE half-step:     (I + dt/2 M) u+ = u
// With `rannacher` set, the first step of a trajectory is two backward Euler
// half-steps, which damps the stiff components CN would otherwise carry along.
class CrankNicolson {
public:
    CrankNicolson(const DiscreteOperator& op, double dt, bool rannacher = true)
        : op_(op), dt_(dt), rannacher_(rannacher) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be positive");
        const std::size_t m = op.dim();
        cvec sub(op.sub), sup(op.sup), diag(m);
        for (auto& s : sub) s *= 0.5 * dt;
        for (auto& s : sup) s *= 0.5 * dt;
        for (std::size_t j = 0; j < m; ++j) diag[j] = 1.0 + 0.5 * dt * op.diag[j];
        lu_ = TridiagonalLU(sub, diag, sup);
        work_.resize(m);
    }

    double dt() const { return dt_; }
    bool rannacher() const { return rannacher_; }
    const DiscreteOperator& op() const { return op_; }

    // Advances u by one step; `index` is the step number within the trajectory.
    void step(cvec& u, std::size_t index) const {
        if (rannacher_ && index == 0) {
            lu_.solve(u);
            lu_.solve(u);
            return;
        }
        op_.apply(u, work_);
        for (std::size_t j = 0; j < u.size(); ++j) u[j] -= 0.5 * dt_ * work_[j];
        lu_.solve(u);
    }

    void advance(cvec& u, std::size_t steps) const {
        for (std::size_t k = 0; k < steps; ++k) step(u, k);
    }

private:
    DiscreteOperator op_;
    double dt_;
    bool rannacher_;
    TridiagonalLU lu_;
    mutable cvec work_;
};

}  // namespace kolmo
