// carleman.hpp - Carleman weights, coefficient fields and numerical verification
#pragma once

#include <json.hpp>

#include "kolmo/eigen.hpp"
#include "kolmo/io.hpp"

namespace kolmo {

// Quintic smoothstep S(x) = 6x^5 - 15x^4 + 10x^3 on [0, 1]; S', S'' vanish at both ends.
struct Smoothstep {
    static double value(double x) {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
    }
    static double d1(double x) {
        if (x <= 0.0 || x >= 1.0) return 0.0;
        return 30.0 * x * x * (1.0 - x) * (1.0 - x);
    }
    static double d2(double x) {
        if (x <= 0.0 || x >= 1.0) return 0.0;
        return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    }
};

// theta(t) = 1 + (1 - chi(t)) / ((t - tau1)(tau2 - t)), with chi rising from 0 at
// tau1 to 1 on the middle third and falling back to 0 at tau2.
class ThetaWeight {
public:
    ThetaWeight() = default;

    ThetaWeight(double tau1, double tau2) : tau1_(tau1), tau2_(tau2) {
        if (!(tau1 > 0.0) || !(tau2 > tau1)) throw ValidationError("theta: need 0 < tau1 < tau2");
        a_ = (2.0 * tau1 + tau2) / 3.0;
        b_ = (tau1 + 2.0 * tau2) / 3.0;
        estimate_constants();
    }

    double tau1() const { return tau1_; }
    double tau2() const { return tau2_; }
    double plateau_lo() const { return a_; }
    double plateau_hi() const { return b_; }
    double c1() const { return c1_; }  // sup |theta'| / theta^2 on the sample
    double c2() const { return c2_; }  // sup |theta''| / theta^3 on the sample

    bool inside(double t) const { return t > tau1_ && t < tau2_; }

    // {theta, theta', theta''}
    std::array<double, 3> eval(double t) const {
        if (!inside(t)) throw RangeError("theta: t = " + fmt(t) + " outside the open window");
        if (t >= a_ && t <= b_) return {1.0, 0.0, 0.0};
        double x, sgn;
        if (t < a_) {
            x = (t - tau1_) / (a_ - tau1_);
            sgn = 1.0 / (a_ - tau1_);
        } else {
            x = (tau2_ - t) / (tau2_ - b_);
            sgn = -1.0 / (tau2_ - b_);
        }
        const double N = 1.0 - Smoothstep::value(x);
        const double N1 = -Smoothstep::d1(x) * sgn;
        const double N2 = -Smoothstep::d2(x) * sgn * sgn;
        const double D = (t - tau1_) * (tau2_ - t);
        const double D1 = tau1_ + tau2_ - 2.0 * t;
        const double D2 = -2.0;
        const double th = 1.0 + N / D;
        const double th1 = (N1 * D - N * D1) / (D * D);
        const double th2 = N2 / D - 2.0 * N1 * D1 / (D * D) - N * D2 / (D * D) + 2.0 * N * D1 * D1 / (D * D * D);
        return {th, th1, th2};
    }

    double operator()(double t) const { return eval(t)[0]; }

private:
    // Dense uniform sample plus geometric clustering toward both ends.
    void estimate_constants() {
        const double L = tau2_ - tau1_;
        rvec ts;
        for (int i = 1; i < 20000; ++i) ts.push_back(tau1_ + L * i / 20000.0);
        for (int k = 2; k <= 12; ++k)
            for (double m : {1.0, 2.0, 5.0}) {
                const double d = m * std::pow(10.0, -k) * L;
                ts.push_back(tau1_ + d);
                ts.push_back(tau2_ - d);
            }
        for (double t : ts) {
            if (!inside(t)) continue;
            auto [th, th1, th2] = eval(t);
            c1_ = std::max(c1_, std::abs(th1) / (th * th));
            c2_ = std::max(c2_, std::abs(th2) / (th * th * th));
        }
    }

    double tau1_ = 0.0, tau2_ = 1.0, a_ = 0.0, b_ = 0.0;
    double c1_ = 0.0, c2_ = 0.0;
};

inline ThetaWeight build_theta(double tau1, double tau2) { return ThetaWeight(tau1, tau2); }

enum class WeightKind { quadratic, integral_plus, integral_minus };

inline std::string to_string(WeightKind k) {
    switch (k) {
        case WeightKind::quadratic: return "quadratic";
        case WeightKind::integral_plus: return "integral_plus";
        case WeightKind::integral_minus: return "integral_minus";
    }
    return "?";
}

// Spatial weight psi with derivatives up to order four, on [a, b].
class CarlemanWeight {
public:
    // psi(y) = psi1(eta), psi1(eta) = -eta^2/2 + sign 2 eta + 3, eta the affine map of I onto [-1, 1].
    // sign = +1 gives psi' > 0 (observe at the lower end), -1 gives psi' < 0 (upper end).
    static CarlemanWeight quadratic(const QProfile& p, int sign) {
        if (sign != 1 && sign != -1) throw ValidationError("quadratic weight: sign must be +1 or -1");
        CarlemanWeight w;
        w.kind_ = WeightKind::quadratic;
        w.profile_ = p;
        w.sign_ = sign;
        w.a_ = -p.ell_minus();
        w.b_ = p.ell_plus();
        return w;
    }

    // Plus side: psi = P - beta (Q(y) + 3 eps0 y) on [-delta, ell_plus];
    // minus side: psi = P - beta (Q(y) - 3 eps0 y) on [-ell_minus, delta];
    // P = eps0 + beta max(I+, I-) so that both sides meet at P at y = 0.
    static CarlemanWeight integral(const QProfile& p, bool plus, double beta, double eps0, double delta, double top) {
        CarlemanWeight w;
        w.kind_ = plus ? WeightKind::integral_plus : WeightKind::integral_minus;
        w.profile_ = p;
        w.beta_ = beta;
        w.eps0_ = eps0;
        w.top_ = top;
        w.a_ = plus ? -delta : -p.ell_minus();
        w.b_ = plus ? p.ell_plus() : delta;
        return w;
    }

    WeightKind kind() const { return kind_; }
    double lo() const { return a_; }
    double hi() const { return b_; }
    double beta() const { return beta_; }
    double eps0() const { return eps0_; }
    const QProfile& profile() const { return profile_; }

    // Observed endpoint: upper when psi' < 0, lower when psi' > 0.
    bool observes_upper() const {
        return kind_ == WeightKind::integral_plus || (kind_ == WeightKind::quadratic && sign_ < 0);
    }

    // {psi, psi', psi'', psi''', psi''''}
    std::array<double, 5> eval(double y) const {
        if (kind_ == WeightKind::quadratic) {
            const double L = profile_.ell_minus() + profile_.ell_plus();
            const double k = 2.0 / L;
            const double eta = (2.0 * y + profile_.ell_minus() - profile_.ell_plus()) / L;
            return {-0.5 * eta * eta + 2.0 * sign_ * eta + 3.0, k * (-eta + 2.0 * sign_), -k * k, 0.0, 0.0};
        }
        const double s = kind_ == WeightKind::integral_plus ? 3.0 * eps0_ : -3.0 * eps0_;
        const double q = profile_.q(y);
        return {top_ - beta_ * (profile_.primitive(y) + s * y), -beta_ * (q + s), -beta_ * profile_.dq(y),
                -beta_ * profile_.d2q(y), -beta_ * profile_.d3q(y)};
    }

    double operator()(double y) const { return eval(y)[0]; }

private:
    WeightKind kind_ = WeightKind::quadratic;
    QProfile profile_ = QProfile::linear(1.0, 1.0);
    int sign_ = 1;
    double beta_ = 0.0, eps0_ = 0.0, top_ = 0.0;
    double a_ = 0.0, b_ = 0.0;
};

struct WeightSearchStep {
    double beta;
    double eps0;
    double lhs;  // eps0 + beta max(I+, I-)
};

struct WeightPair {
    CarlemanWeight plus;
    CarlemanWeight minus;
    ThetaWeight theta;
    double kappa = 0.0;
    double beta = 0.0;
    double eps0 = 0.0;
    double delta = 0.0;
    double c_plus = 0.0;
    double c_minus = 0.0;
    double top = 0.0;  // psi(0), the maximum of the glued weight
    double eps = 0.0;  // min over both sides of the three hypothesis quantities
    double plateau_phi_max = 0.0;
    double plateau_phi_min = 0.0;
    std::vector<WeightSearchStep> search;

    // Glued weight theta(t) psi(y): minus side for y <= 0, plus side for y >= 0.
    double phi(double t, double y) const { return theta(t) * (y <= 0.0 ? minus(y) : plus(y)); }
};

struct WeightSearchOptions {
    double beta_margin = 0.1;
    int margin_halvings = 20;
    int eps_halvings = 60;
};

// Smallest value over a dense sample of [a, b] of each hypothesis quantity:
// psi, -2 psi'^2 psi'' - q^2 q'/sqrt2 and -2 psi'' - sqrt2 q'.
inline std::array<double, 3> hypothesis_minima(const CarlemanWeight& w, int samples = 4001) {
    std::array<double, 3> m{1e300, 1e300, 1e300};
    const QProfile& p = w.profile();
    for (int i = 0; i < samples; ++i) {
        const double y = w.lo() + (w.hi() - w.lo()) * i / (samples - 1);
        auto d = w.eval(y);
        const double q = p.q(y), dq = p.dq(y);
        m[0] = std::min(m[0], d[0]);
        m[1] = std::min(m[1], -2.0 * d[1] * d[1] * d[2] - q * q * dq / sqrt2);
        m[2] = std::min(m[2], -2.0 * d[2] - sqrt2 * dq);
    }
    return m;
}

// Search: beta = 1/sqrt2 + margin, eps0 halving from q(min(ell))/4 until
// eps0 + beta max(I+(eps0), I-(eps0)) < kappa; if no eps0 works the margin halves.
inline WeightPair build_weight_pair(const QProfile& p, double kappa, double tau1, double tau2,
                                    const WeightSearchOptions& o = {}) {
    const double ip0 = p.primitive(p.ell_plus()), im0 = p.primitive(-p.ell_minus());
    const double floor_kappa = std::max(ip0, im0) / sqrt2;
    if (!(kappa > floor_kappa))
        throw ValidationError("carleman weights: kappa = " + fmt(kappa) + " must exceed q'(0) T_max / sqrt2 = " +
                              fmt(floor_kappa));
    WeightPair wp;
    wp.kappa = kappa;
    wp.theta = ThetaWeight(tau1, tau2);
    const double lmin = std::min(p.ell_minus(), p.ell_plus());
    const double eps_start = std::min(p.q(lmin), -p.q(-lmin)) / 4.0;
    auto side_plus = [&](double e) { return ip0 + 3.0 * e * p.ell_plus(); };
    auto side_minus = [&](double e) { return im0 + 3.0 * e * p.ell_minus(); };
    double margin = o.beta_margin;
    bool found = false;
    for (int mh = 0; mh <= o.margin_halvings && !found; ++mh, margin *= 0.5) {
        const double beta = 1.0 / sqrt2 + margin;
        double e = eps_start;
        for (int k = 0; k <= o.eps_halvings; ++k, e *= 0.5) {
            const double lhs = e + beta * std::max(side_plus(e), side_minus(e));
            wp.search.push_back({beta, e, lhs});
            if (lhs < kappa) {
                wp.beta = beta;
                wp.eps0 = e;
                found = true;
                break;
            }
        }
    }
    if (!found)
        throw NumericalError("carleman weights: no (beta, eps0) satisfies eps0 + beta max(I+, I-) < kappa within the search budget");
    // delta: largest in (0, min ell] with max(|q(-delta)|, q(delta)) <= eps0
    auto g = [&](double d) { return std::max(-p.q(-d), p.q(d)); };
    double lo = 0.0, hi = lmin;
    if (g(hi) <= wp.eps0) {
        lo = hi;
    } else {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) <= wp.eps0 ? lo : hi) = mid;
        }
    }
    wp.delta = lo;
    if (!(wp.delta > 0.0)) throw NumericalError("carleman weights: cutoff width delta collapsed to 0");
    const double c = wp.beta * (side_minus(wp.eps0) - side_plus(wp.eps0));
    wp.c_plus = std::max(0.0, c);
    wp.c_minus = std::max(0.0, -c);
    wp.top = wp.eps0 + wp.beta * std::max(side_plus(wp.eps0), side_minus(wp.eps0));
    wp.plus = CarlemanWeight::integral(p, true, wp.beta, wp.eps0, wp.delta, wp.top);
    wp.minus = CarlemanWeight::integral(p, false, wp.beta, wp.eps0, wp.delta, wp.top);
    auto mp = hypothesis_minima(wp.plus), mm = hypothesis_minima(wp.minus);
    wp.eps = std::min({mp[0], mp[1], mp[2], mm[0], mm[1], mm[2]});
    if (!(wp.eps > 0.0))
        throw NumericalError("carleman weights: hypothesis quantities are not positive (eps = " + fmt(wp.eps) + ")");
    // 0 <= phi <= kappa on the plateau, where theta = 1
    wp.plateau_phi_max = 0.0;
    wp.plateau_phi_min = 1e300;
    for (int i = 0; i <= 2000; ++i) {
        const double y = -p.ell_minus() + (p.ell_minus() + p.ell_plus()) * i / 2000.0;
        const double v = wp.phi(wp.theta.plateau_lo(), y);
        wp.plateau_phi_max = std::max(wp.plateau_phi_max, v);
        wp.plateau_phi_min = std::min(wp.plateau_phi_min, v);
    }
    if (wp.plateau_phi_max > kappa || wp.plateau_phi_min < 0.0)
        throw NumericalError("carleman weights: plateau weight leaves [0, kappa]");
    return wp;
}

struct Coefficients {
    double phi0 = 0.0;
    double phi1 = 0.0;
};

// Generic form with phi = s theta psi.
inline Coefficients generic_coefficients(const CarlemanWeight& w, const ThetaWeight& th, double s, long n, double t,
                                         double y) {
    auto [T, T1, T2] = th.eval(t);
    auto d = w.eval(y);
    const QProfile& p = w.profile();
    const double rn = std::sqrt(std::abs(double(n)));
    const double py = s * T * d[1], pyy = s * T * d[2], ptt = s * T2 * d[0], pyyyy = s * T * d[4], pty = s * T1 * d[1];
    const double q = p.q(y), dq = p.dq(y);
    Coefficients c;
    c.phi0 = -2.0 * py * py * pyy - 0.5 * ptt + 0.5 * pyyyy + 2.0 * pty * py - rn * rn * rn * q * q * dq / sqrt2;
    c.phi1 = -2.0 * pyy - sqrt2 * rn * dq;
    return c;
}

// Refined form, normalized by n^{3/2} and sqrt n respectively, for phi = sqrt n theta psi.
inline Coefficients refined_coefficients(const CarlemanWeight& w, const ThetaWeight& th, long n, double t, double y) {
    auto [T, T1, T2] = th.eval(t);
    auto d = w.eval(y);
    const QProfile& p = w.profile();
    const double nn = std::abs(double(n)), rn = std::sqrt(nn);
    const double q = p.q(y), dq = p.dq(y);
    Coefficients c;
    c.phi0 = -2.0 * T * T * T * d[1] * d[1] * d[2] - q * q * dq / sqrt2 + (-T2 * d[0] + T * d[4]) / (2.0 * nn) +
             2.0 * T1 * T * d[1] * d[1] / rn;
    c.phi1 = -2.0 * T * d[2] - sqrt2 * dq;
    return c;
}

inline rvec theta_sample_times(const ThetaWeight& th, int uniform = 400) {
    rvec ts;
    const double L = th.tau2() - th.tau1();
    for (int i = 1; i < uniform; ++i) ts.push_back(th.tau1() + L * i / uniform);
    for (int k = 3; k <= 10; ++k) {
        ts.push_back(th.tau1() + std::pow(10.0, -k) * L);
        ts.push_back(th.tau2() - std::pow(10.0, -k) * L);
    }
    std::sort(ts.begin(), ts.end());
    return ts;
}

struct PositivityReport {
    double threshold = 0.0;  // every n >= threshold satisfies both bounds on the sample
    double eps = 0.0;
    bool phi1_holds = false;  // Phi1 >= eps theta does not depend on n
    std::vector<std::pair<double, bool>> scan;  // (n, both bounds hold) on a geometric grid
    bool scan_consistent = false;  // scan agrees with the threshold
};

// With x = 1/sqrt n the margin Phi0 - (eps/2) theta^3 is A + C x + B x^2 at each sample
// point. The exact threshold there is 1/x0^2 for the first positive root x0.
inline PositivityReport positivity_threshold(const WeightPair& wp, const CarlemanWeight& w, int y_samples = 801,
                                             double scan_max = 1e30) {
    PositivityReport r;
    r.eps = wp.eps;
    r.phi1_holds = true;
    const rvec ts = theta_sample_times(wp.theta);
    const QProfile& p = w.profile();
    double xmin = std::numeric_limits<double>::infinity();
    for (double t : ts) {
        auto [T, T1, T2] = wp.theta.eval(t);
        for (int i = 0; i < y_samples; ++i) {
            const double y = w.lo() + (w.hi() - w.lo()) * i / (y_samples - 1);
            auto d = w.eval(y);
            const double q = p.q(y), dq = p.dq(y);
            const double A = -2.0 * T * T * T * d[1] * d[1] * d[2] - q * q * dq / sqrt2 - 0.5 * wp.eps * T * T * T;
            const double C = 2.0 * T1 * T * d[1] * d[1];
            const double B = 0.5 * (-T2 * d[0] + T * d[4]);
            if (-2.0 * T * d[2] - sqrt2 * dq < wp.eps * T * (1.0 - 1e-12)) r.phi1_holds = false;
            if (A <= 0.0) {
                xmin = 0.0;
                continue;
            }
            // smallest positive root of B x^2 + C x + A
            double x0 = std::numeric_limits<double>::infinity();
            if (B == 0.0) {
                if (C < 0.0) x0 = -A / C;
            } else {
                const double disc = C * C - 4.0 * A * B;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    for (double root : {(-C - sq) / (2.0 * B), (-C + sq) / (2.0 * B)})
                        if (root > 0.0) x0 = std::min(x0, root);
                }
            }
            xmin = std::min(xmin, x0);
        }
    }
    r.threshold = xmin == 0.0 ? std::numeric_limits<double>::infinity()
                              : (std::isinf(xmin) ? 1.0 : std::max(1.0, 1.0 / (xmin * xmin)));
    // independent geometric scan with the full coefficient evaluator
    r.scan_consistent = true;
    for (double n = 1.0; n <= scan_max; n *= std::pow(10.0, 0.25)) {
        bool ok = true;
        for (double t : ts) {
            const double T = wp.theta(t);
            for (int i = 0; i < y_samples && ok; i += 4) {
                const double y = w.lo() + (w.hi() - w.lo()) * i / (y_samples - 1);
                auto c = refined_coefficients(w, wp.theta, static_cast<long>(std::min(n, 9e18)), t, y);
                if (n > 9e18) {
                    // beyond long range: evaluate with the real n directly
                    auto [TT, T1, T2] = wp.theta.eval(t);
                    auto d = w.eval(y);
                    const double q = p.q(y), dq = p.dq(y);
                    c.phi0 = -2.0 * TT * TT * TT * d[1] * d[1] * d[2] - q * q * dq / sqrt2 +
                             (-T2 * d[0] + TT * d[4]) / (2.0 * n) + 2.0 * T1 * TT * d[1] * d[1] / std::sqrt(n);
                }
                if (c.phi0 < 0.5 * wp.eps * T * T * T * (1.0 - 1e-9) || c.phi1 < wp.eps * T * (1.0 - 1e-9)) ok = false;
            }
            if (!ok) break;
        }
        r.scan.push_back({n, ok});
        if (n >= r.threshold * (1.0 + 1e-9) && !ok) r.scan_consistent = false;
    }
    return r;
}

// Cutoff eta_plus: 0 below -delta, quintic rise on [-delta, 0], 1 above. eta_minus(y) = eta_plus(-y).
inline std::array<double, 3> cutoff(bool plus, double delta, double y) {
    const double s = plus ? y : -y;
    const double x = (s + delta) / delta;
    const double sgn = plus ? 1.0 : -1.0;
    return {Smoothstep::value(x), sgn * Smoothstep::d1(x) / delta, Smoothstep::d2(x) / (delta * delta)};
}

// A solution sampled at time nodes on all grid nodes (Dirichlet zeros included), with its source.
struct SpaceTimeSamples {
    Grid1D grid;
    rvec t;
    std::vector<cvec> u;
    std::vector<cvec> f;
};

// Nodes clustered toward both ends so that the theta blow-up is resolved.
inline rvec carleman_time_nodes(double tau1, double tau2, int count) {
    if (count < 2) throw ValidationError("need at least two time nodes");
    rvec t(count);
    for (int k = 0; k < count; ++k) {
        const double s = (k + 1.0) / (count + 1.0);
        t[k] = tau1 + (tau2 - tau1) * 0.5 * (1.0 - std::cos(pi * s));
    }
    return t;
}

inline cvec with_boundary(const cvec& interior) {
    cvec v(interior.size() + 2, 0.0);
    std::copy(interior.begin(), interior.end(), v.begin() + 1);
    return v;
}

// u(t) = e^{-lambda t} psi_n solves the discrete mode equation with zero source.
inline SpaceTimeSamples eigenfunction_samples(const EigenPair& pair, const rvec& times) {
    SpaceTimeSamples s;
    s.grid = pair.grid;
    s.t = times;
    const cvec full = with_boundary(pair.vector);
    for (double t : times) {
        cvec u = full;
        scale(u, std::exp(-pair.lambda * t));
        s.u.push_back(std::move(u));
        s.f.push_back(cvec(full.size(), 0.0));
    }
    return s;
}

inline cvec node_derivative(const cvec& u, double h) {
    const std::size_t m = u.size();
    cvec d(m);
    for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h);
    return d;
}

// u_side = eta u, f_side = eta f - eta'' u - 2 eta' u_y.
inline SpaceTimeSamples localize(const SpaceTimeSamples& s, bool plus, double delta) {
    SpaceTimeSamples out = s;
    const auto& y = s.grid.nodes;
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        const cvec uy = node_derivative(s.u[k], s.grid.h);
        for (std::size_t i = 0; i < y.size(); ++i) {
            auto [e, e1, e2] = cutoff(plus, delta, y[i]);
            out.u[k][i] = e * s.u[k][i];
            out.f[k][i] = e * s.f[k][i] - e2 * s.u[k][i] - 2.0 * e1 * uy[i];
        }
    }
    return out;
}

struct CarlemanReport {
    std::string side;
    long n = 0;
    double lhs = 0.0;       // integral of n^{3/2} theta^3 |w|^2 + sqrt n theta |w_y|^2
    double boundary = 0.0;  // integral of |w_y|^2 at the observed endpoint
    double source = 0.0;    // integral of |g|^2
    double constant = 0.0;  // smallest C with lhs <= C (sqrt n boundary + source)
    bool any_constant = false;  // lhs = rhs = 0
    double end_slice_max = 0.0;
    std::size_t time_nodes = 0;
    int cells = 0;
};

// Weighted integrals over the weight's interval [a, b] (nodes outside it are skipped),
// trapezoid in y and in t with w = 0 at tau1, tau2.
inline CarlemanReport verify_carleman(const CarlemanWeight& w, const ThetaWeight& th, long n,
                                      const SpaceTimeSamples& s, double end_tol = 1e-14) {
    if (s.t.size() < 2 || s.u.size() != s.t.size() || s.f.size() != s.t.size())
        throw ValidationError("carleman verification: inconsistent samples");
    const double rn = std::sqrt(std::abs(double(n)));
    const double n32 = rn * rn * rn;
    const auto& y = s.grid.nodes;
    const double h = s.grid.h;
    const double tol_y = 1e-12 * std::max(1.0, std::abs(w.hi() - w.lo()));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] >= w.lo() - tol_y && y[i] <= w.hi() + tol_y) idx.push_back(i);
    if (idx.size() < 3) throw ValidationError("carleman verification: grid does not resolve the weight interval");
    const std::size_t obs = w.observes_upper() ? idx.back() : idx.front();
    rvec psi(y.size(), 0.0);
    for (std::size_t i : idx) psi[i] = w(y[i]);
    CarlemanReport r;
    r.n = n;
    r.side = to_string(w.kind());
    r.time_nodes = s.t.size();
    r.cells = s.grid.n_cells;
    rvec L(s.t.size()), B(s.t.size()), G(s.t.size());
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        const double T = th(s.t[k]);
        cvec wv(y.size(), 0.0);
        double lsum = 0.0, gsum = 0.0, wmax = 0.0;
        for (std::size_t i : idx) {
            const double e = std::exp(-rn * T * psi[i]);
            wv[i] = s.u[k][i] * e;
            wmax = std::max(wmax, std::abs(wv[i]));
            const double wt = (i == idx.front() || i == idx.back()) ? 0.5 * h : h;
            gsum += wt * std::norm(s.f[k][i] * e);
            lsum += wt * n32 * T * T * T * std::norm(wv[i]);
        }
        const cvec wy = node_derivative(wv, h);
        for (std::size_t i : idx) {
            const double wt = (i == idx.front() || i == idx.back()) ? 0.5 * h : h;
            lsum += wt * rn * T * std::norm(wy[i]);
        }
        L[k] = lsum;
        G[k] = gsum;
        B[k] = std::norm(wy[obs]);
        if (k == 0 || k + 1 == s.t.size()) r.end_slice_max = std::max(r.end_slice_max, wmax);
    }
    if (r.end_slice_max >= end_tol)
        throw NumericalError("carleman verification: |w| = " + fmt(r.end_slice_max) +
                             " at an end slice; the time window is too short for n = " + std::to_string(n) +
                             " or the end nodes are too far from tau1, tau2");
    // trapezoid in t including the endpoints tau1, tau2 where w vanishes
    rvec tt{th.tau1()};
    tt.insert(tt.end(), s.t.begin(), s.t.end());
    tt.push_back(th.tau2());
    auto integrate = [&](const rvec& v) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < tt.size(); ++k) {
            const double a = k == 0 ? 0.0 : v[k - 1];
            const double b = k + 1 == tt.size() - 1 ? 0.0 : v[k];
            acc += 0.5 * (tt[k + 1] - tt[k]) * (a + b);
        }
        return acc;
    };
    r.lhs = integrate(L);
    r.boundary = integrate(B);
    r.source = integrate(G);
    const double rhs_unit = rn * r.boundary + r.source;
    if (rhs_unit == 0.0) {
        if (r.lhs != 0.0) throw NumericalError("carleman verification: nonzero left side with vanishing right side");
        r.any_constant = true;
        r.constant = 0.0;
    } else {
        r.constant = r.lhs / rhs_unit;
    }
    return r;
}

struct TwoSidedCarleman {
    CarlemanReport plus;
    CarlemanReport minus;
    double constant = 0.0;  // max of the two sides
};

// Both cutoff halves of the eigenfunction-driven solution e^{-lambda t} psi_n.
inline TwoSidedCarleman verify_eigenfunction_carleman(const WeightPair& wp, const EigenPair& pair, int time_nodes) {
    const rvec ts = carleman_time_nodes(wp.theta.tau1(), wp.theta.tau2(), time_nodes);
    const auto s = eigenfunction_samples(pair, ts);
    TwoSidedCarleman r;
    r.plus = verify_carleman(wp.plus, wp.theta, pair.tag.n, localize(s, true, wp.delta));
    r.minus = verify_carleman(wp.minus, wp.theta, pair.tag.n, localize(s, false, wp.delta));
    r.constant = std::max(r.plus.constant, r.minus.constant);
    return r;
}

inline nlohmann::json to_json(const CarlemanReport& r) {
    return {{"side", r.side},         {"n", r.n},
            {"lhs", r.lhs},           {"boundary", r.boundary},
            {"source", r.source},     {"constant", r.constant},
            {"any_constant", r.any_constant}, {"end_slice_max", r.end_slice_max},
            {"time_nodes", r.time_nodes},     {"cells", r.cells}};
}

inline nlohmann::json to_json(const WeightPair& wp) {
    nlohmann::json search = nlohmann::json::array();
    for (const auto& s : wp.search) search.push_back({s.beta, s.eps0, s.lhs});
    return {{"kappa", wp.kappa},     {"beta", wp.beta},   {"eps0", wp.eps0},
            {"delta", wp.delta},     {"c_plus", wp.c_plus}, {"c_minus", wp.c_minus},
            {"psi_top", wp.top},     {"eps", wp.eps},     {"plateau_phi_max", wp.plateau_phi_max},
            {"tau1", wp.theta.tau1()}, {"tau2", wp.theta.tau2()}, {"theta_c1", wp.theta.c1()},
            {"theta_c2", wp.theta.c2()}, {"search", search}};
}

// (t, y, phi, Phi0, Phi1) for the glued weight with the refined coefficients.
inline void write_weight_csv(const std::string& path, const WeightPair& wp, long n, int t_points, int y_points) {
    CsvWriter out(path);
    out.header({"t", "y", "phi", "Phi0", "Phi1"});
    const QProfile& p = wp.plus.profile();
    for (int i = 1; i <= t_points; ++i) {
        const double t = wp.theta.tau1() + (wp.theta.tau2() - wp.theta.tau1()) * i / (t_points + 1.0);
        for (int j = 0; j < y_points; ++j) {
            const double y = -p.ell_minus() + (p.ell_minus() + p.ell_plus()) * j / (y_points - 1.0);
            const auto& w = y <= 0.0 ? wp.minus : wp.plus;
            auto c = refined_coefficients(w, wp.theta, n, t, y);
            out.row({t, y, wp.phi(t, y), c.phi0, c.phi1});
        }
    }
}

}  // namespace kolmo
