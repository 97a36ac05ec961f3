// profile.hpp - the degeneracy coefficient q and its scalar functionals
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "kolmo/core.hpp"
#include "kolmo/quadrature.hpp"

namespace kolmo {

enum class ProfileKind { linear, scaled_linear, cubic_perturbed, sampled };

inline std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::linear: return "linear";
        case ProfileKind::scaled_linear: return "scaled-linear";
        case ProfileKind::cubic_perturbed: return "cubic-perturbed";
        case ProfileKind::sampled: return "user-sampled";
    }
    return "unknown";
}

// q on [-ell_minus, ell_plus] with q(0) = 0 and q' > 0. Immutable after construction.
class QProfile {
public:
    static QProfile linear(double ell_minus, double ell_plus) {
        QProfile p(ProfileKind::linear, ell_minus, ell_plus);
        p.param_ = 1.0;
        return p;
    }

    static QProfile scaled_linear(double c, double ell_minus, double ell_plus) {
        if (!(c > 0.0)) throw ValidationError("profile.c: slope must be positive");
        QProfile p(ProfileKind::scaled_linear, ell_minus, ell_plus);
        p.param_ = c;
        return p;
    }

    // q(y) = y + a y^3; q' = 1 + 3 a y^2 must stay positive on the interval.
    static QProfile cubic_perturbed(double a, double ell_minus, double ell_plus) {
        QProfile p(ProfileKind::cubic_perturbed, ell_minus, ell_plus);
        p.param_ = a;
        const double L = std::max(ell_minus, ell_plus);
        if (!(1.0 + 3.0 * a * L * L > 0.0))
            throw ValidationError("profile.a: min q' must be positive (need a > -1/(3 max(ell)^2))");
        return p;
    }

    // Monotone cubic (Fritsch-Carlson) interpolation of samples. The samples must
    // start at -ell_minus, end at ell_plus, include (0, 0), and be strictly increasing.
    static QProfile sampled(rvec ys, rvec qs) {
        if (ys.size() != qs.size() || ys.size() < 3)
            throw ValidationError("profile.samples: need at least 3 (y, q) pairs");
        for (std::size_t i = 1; i < ys.size(); ++i) {
            if (!(ys[i] > ys[i - 1])) throw ValidationError("profile.samples: y values must be strictly increasing");
            if (!(qs[i] > qs[i - 1])) throw ValidationError("profile.samples: q must be strictly increasing (non-monotone sample)");
        }
        if (!(ys.front() < 0.0 && ys.back() > 0.0))
            throw ValidationError("profile.samples: samples must straddle y = 0");
        std::size_t zero = ys.size();
        for (std::size_t i = 0; i < ys.size(); ++i)
            if (ys[i] == 0.0) zero = i;
        if (zero == ys.size() || qs[zero] != 0.0)
            throw ValidationError("profile.samples: a sample (0, 0) is required so that q(0) = 0 exactly");

        QProfile p(ProfileKind::sampled, -ys.front(), ys.back());
        p.sy_ = std::move(ys);
        p.sq_ = std::move(qs);
        p.build_slopes();
        p.zero_index_ = zero;
        p.build_primitive();
        const int checks = 4096;
        for (int i = 0; i <= checks; ++i) {
            double y = p.lo() + (p.hi() - p.lo()) * i / checks;
            if (!(p.dq(y) > 0.0)) throw ValidationError("profile.samples: interpolated q' is not positive everywhere");
        }
        return p;
    }

    static QProfile from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("profile.samples-file: cannot open '" + path + "'");
        rvec ys, qs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            for (auto& ch : line)
                if (ch == ',') ch = ' ';
            std::istringstream ss(line);
            double y, q;
            if (!(ss >> y >> q)) {
                if (ys.empty()) continue;  // header row
                throw ValidationError("profile.samples-file: malformed row '" + line + "'");
            }
            ys.push_back(y);
            qs.push_back(q);
        }
        return sampled(std::move(ys), std::move(qs));
    }

    ProfileKind kind() const { return kind_; }
    double param() const { return param_; }
    double ell_minus() const { return ell_minus_; }
    double ell_plus() const { return ell_plus_; }
    double lo() const { return -ell_minus_; }
    double hi() const { return ell_plus_; }
    double length() const { return ell_minus_ + ell_plus_; }
    const rvec& sample_y() const { return sy_; }
    const rvec& sample_q() const { return sq_; }

    bool contains(double y, double slack = 1e-12) const {
        const double s = slack * std::max(1.0, length());
        return y >= lo() - s && y <= hi() + s;
    }

    void require_in_domain(double y) const {
        if (!contains(y))
            throw RangeError("y = " + std::to_string(y) + " lies outside [" + std::to_string(lo()) + ", " +
                             std::to_string(hi()) + "]");
    }

    double q(double y) const {
        switch (kind_) {
            case ProfileKind::linear: return y;
            case ProfileKind::scaled_linear: return param_ * y;
            case ProfileKind::cubic_perturbed: return y + param_ * y * y * y;
            case ProfileKind::sampled: return hermite(y, 0);
        }
        return 0.0;
    }

    double dq(double y) const {
        switch (kind_) {
            case ProfileKind::linear: return 1.0;
            case ProfileKind::scaled_linear: return param_;
            case ProfileKind::cubic_perturbed: return 1.0 + 3.0 * param_ * y * y;
            case ProfileKind::sampled: return hermite(y, 1);
        }
        return 0.0;
    }

    double d2q(double y) const {
        switch (kind_) {
            case ProfileKind::cubic_perturbed: return 6.0 * param_ * y;
            case ProfileKind::sampled: return hermite(y, 2);
            default: return 0.0;
        }
    }

    double d3q(double y) const {
        switch (kind_) {
            case ProfileKind::cubic_perturbed: return 6.0 * param_;
            case ProfileKind::sampled: return hermite(y, 3);
            default: return 0.0;
        }
    }

    double qprime0() const { return dq(0.0); }

    // Q(y) = integral of q from 0 to y (signed), exact for every kind.
    double primitive(double y) const {
        switch (kind_) {
            case ProfileKind::linear: return 0.5 * y * y;
            case ProfileKind::scaled_linear: return 0.5 * param_ * y * y;
            case ProfileKind::cubic_perturbed: return 0.5 * y * y + 0.25 * param_ * y * y * y * y;
            case ProfileKind::sampled: {
                std::size_t i = segment(y);
                return cum_[i] - cum_[zero_index_] + segment_integral(i, y);
            }
        }
        return 0.0;
    }

    // Profile under y -> -y with q -> -q(-y); swaps the two sides.
    QProfile reflected() const {
        if (kind_ != ProfileKind::sampled) {
            QProfile p = *this;
            std::swap(p.ell_minus_, p.ell_plus_);
            return p;
        }
        rvec ys(sy_.size()), qs(sq_.size());
        for (std::size_t i = 0; i < sy_.size(); ++i) {
            ys[i] = -sy_[sy_.size() - 1 - i];
            qs[i] = -sq_[sq_.size() - 1 - i];
        }
        return sampled(std::move(ys), std::move(qs));
    }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(kind_) << " ell_minus=" << ell_minus_ << " ell_plus=" << ell_plus_;
        if (kind_ == ProfileKind::scaled_linear) os << " c=" << param_;
        if (kind_ == ProfileKind::cubic_perturbed) os << " a=" << param_;
        return os.str();
    }

private:
    QProfile(ProfileKind k, double lm, double lp) : kind_(k), ell_minus_(lm), ell_plus_(lp) {
        if (!(lm > 0.0) || !std::isfinite(lm)) throw ValidationError("profile.ell_minus: must be a positive length");
        if (!(lp > 0.0) || !std::isfinite(lp)) throw ValidationError("profile.ell_plus: must be a positive length");
    }

    std::size_t segment(double y) const {
        auto it = std::upper_bound(sy_.begin(), sy_.end(), y);
        std::size_t i = it == sy_.begin() ? 0 : static_cast<std::size_t>(it - sy_.begin()) - 1;
        return std::min(i, sy_.size() - 2);
    }

    void build_slopes() {
        const std::size_t n = sy_.size();
        rvec delta(n - 1), hseg(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            hseg[i] = sy_[i + 1] - sy_[i];
            delta[i] = (sq_[i + 1] - sq_[i]) / hseg[i];
        }
        sd_.assign(n, 0.0);
        sd_.front() = delta.front();
        sd_.back() = delta.back();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            // weighted harmonic mean; both neighbouring secants are positive
            const double w1 = 2.0 * hseg[i] + hseg[i - 1];
            const double w2 = hseg[i] + 2.0 * hseg[i - 1];
            sd_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }

    void build_primitive() {
        cum_.assign(sy_.size(), 0.0);
        for (std::size_t i = 0; i + 1 < sy_.size(); ++i) cum_[i + 1] = cum_[i] + segment_integral(i, sy_[i + 1]);
    }

    // Integral of the Hermite cubic on segment i from sy_[i] to y.
    double segment_integral(std::size_t i, double y) const {
        const double H = sy_[i + 1] - sy_[i];
        const double t = (y - sy_[i]) / H;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
        const double i00 = 0.5 * t4 - t3 + t;
        const double i10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2;
        const double i01 = -0.5 * t4 + t3;
        const double i11 = 0.25 * t4 - t3 / 3.0;
        return H * (i00 * sq_[i] + i10 * H * sd_[i] + i01 * sq_[i + 1] + i11 * H * sd_[i + 1]);
    }

    double hermite(double y, int derivative) const {
        const std::size_t i = segment(y);
        const double H = sy_[i + 1] - sy_[i];
        const double t = (y - sy_[i]) / H;
        const double y0 = sq_[i], y1 = sq_[i + 1], m0 = H * sd_[i], m1 = H * sd_[i + 1];
        // p(t) = c0 + c1 t + c2 t^2 + c3 t^3
        const double c0 = y0, c1 = m0;
        const double c2 = -3.0 * y0 - 2.0 * m0 + 3.0 * y1 - m1;
        const double c3 = 2.0 * y0 + m0 - 2.0 * y1 + m1;
        switch (derivative) {
            case 0: return ((c3 * t + c2) * t + c1) * t + c0;
            case 1: return ((3.0 * c3 * t + 2.0 * c2) * t + c1) / H;
            case 2: return (6.0 * c3 * t + 2.0 * c2) / (H * H);
            default: return 6.0 * c3 / (H * H * H);
        }
    }

    ProfileKind kind_;
    double ell_minus_;
    double ell_plus_;
    double param_ = 1.0;
    rvec sy_, sq_, sd_, cum_;
    std::size_t zero_index_ = 0;
};

struct TimeBounds {
    double t_min = 0.0;
    double t_max = 0.0;
};

struct SideIntegrals {
    double plus = 0.0;   // integral of q over [0, ell_plus]
    double minus = 0.0;  // integral of |q| over [-ell_minus, 0]
    double error_estimate = 0.0;
};

inline SideIntegrals side_integrals_quadrature(const QProfile& p, int quad_points = 4096) {
    auto plus = trapezoid_checked([&](double s) { return p.q(s); }, 0.0, p.ell_plus(), quad_points);
    auto minus = trapezoid_checked([&](double s) { return std::abs(p.q(s)); }, -p.ell_minus(), 0.0, quad_points);
    return {plus.value, minus.value, std::max(plus.error_estimate, minus.error_estimate)};
}

inline TimeBounds time_bounds(const QProfile& p, int quad_points = 4096) {
    if (quad_points < 2) throw ValidationError("quad_points must be at least 2");
    double plus, minus;
    if (p.kind() == ProfileKind::linear || p.kind() == ProfileKind::scaled_linear) {
        plus = p.primitive(p.ell_plus());
        minus = p.primitive(-p.ell_minus());
    } else {
        auto s = side_integrals_quadrature(p, quad_points);
        plus = s.plus;
        minus = s.minus;
    }
    const double qp0 = p.qprime0();
    TimeBounds tb{std::min(plus, minus) / qp0, std::max(plus, minus) / qp0};
    return tb;
}

// kappa_eps(y) = (1 - eps)/sqrt(2) * Q(y); for y < 0 Q(y) is the integral of |q| over [y, 0].
inline double kappa_eps(const QProfile& p, double eps, double y) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("eps must lie in [0, 1]");
    p.require_in_domain(y);
    return (1.0 - eps) / sqrt2 * p.primitive(y);
}

struct AgmonParams {
    double E = 1.0;
    double eps = 0.1;
    long n = 0;

    void validate() const {
        if (!(E > 0.0)) throw ValidationError("agmon.E must be positive");
        if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("agmon.eps must lie in (0, 1)");
    }
};

// W_{n,eps}(y) = (1-eps)/sqrt(2) |int_0^y sqrt((n q^2 - sqrt(n)(E+eps))_+) ds|.
// The integrand vanishes until |q| reaches the threshold s*; on [s*, y] the
// substitution s = s* + (y - s*) u^2 removes the square-root endpoint behaviour.
inline double agmon_weight(const QProfile& p, const AgmonParams& a, double y, int quad_points = 4096) {
    a.validate();
    p.require_in_domain(y);
    const double n = std::abs(static_cast<double>(a.n));
    if (n == 0.0 || y == 0.0) return 0.0;
    const double rn = std::sqrt(n);
    const double shift = rn * (a.E + a.eps);
    auto integrand = [&](double s) {
        const double v = n * p.q(s) * p.q(s) - shift;
        return v > 0.0 ? std::sqrt(v) : 0.0;
    };
    const double qthr = std::sqrt(shift / n);
    if (std::abs(p.q(y)) <= qthr) return 0.0;
    // bisection for the threshold point between 0 and y
    double a0 = 0.0, b0 = y;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a0 + b0);
        if (std::abs(p.q(mid)) <= qthr)
            a0 = mid;
        else
            b0 = mid;
        if (std::abs(b0 - a0) <= 1e-16 * std::max(1.0, std::abs(y))) break;
    }
    const double s0 = a0;
    const double span = y - s0;
    auto mapped = [&](double u) { return integrand(s0 + span * u * u) * 2.0 * span * u; };
    const double integral = trapezoid(mapped, 0.0, 1.0, quad_points);
    return (1.0 - a.eps) / sqrt2 * std::abs(integral);
}

struct WeightBoundReport {
    long n = 0;
    double eps = 0.0;
    double min_gap = 0.0;  // min over grid of W_{n,eps/2} - sqrt(n) kappa_eps
    double argmin_y = 0.0;
};

inline WeightBoundReport weight_lower_bound_check(const QProfile& p, const AgmonParams& a, const rvec& ys) {
    a.validate();
    if (ys.empty()) throw ValidationError("weight check grid is empty");
    AgmonParams half = a;
    half.eps = 0.5 * a.eps;
    const double rn = std::sqrt(std::abs(static_cast<double>(a.n)));
    WeightBoundReport r;
    r.n = a.n;
    r.eps = a.eps;
    r.min_gap = std::numeric_limits<double>::infinity();
    for (double y : ys) {
        const double gap = agmon_weight(p, half, y) - rn * kappa_eps(p, a.eps, y);
        if (gap < r.min_gap) {
            r.min_gap = gap;
            r.argmin_y = y;
        }
    }
    return r;
}

// Empirical C_eps: the largest observed sqrt(n) kappa_eps - W_{n,eps/2} over an n sweep.
inline double weight_constant_estimate(const QProfile& p, double E, double eps, const std::vector<long>& ns,
                                       const rvec& ys) {
    double c = 0.0;
    for (long n : ns) {
        auto r = weight_lower_bound_check(p, AgmonParams{E, eps, n}, ys);
        c = std::max(c, -r.min_gap);
    }
    return c;
}

}  // namespace kolmo
