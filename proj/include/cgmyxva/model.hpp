#pragma once

// CGMY process description, market and contract data, and the closed-form
// quantities derived from them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "cgmyxva/errors.hpp"

namespace cgmyxva {

namespace detail {
inline constexpr double kPi = 3.14159265358979323846;

inline bool is_nonpositive_integer(double x) {
    return x <= 0.0 && std::floor(x) == x;
}

/// Gamma function; rejects the poles at 0, -1, -2, ...
inline double gamma_fn(double x) {
    if (is_nonpositive_integer(x)) {
        throw DomainError("Gamma function pole at " + std::to_string(x));
    }
    return std::tgamma(x);
}
}  // namespace detail

/// Parameters of the CGMY Levy measure
///   C e^{-G|x|}/|x|^{1+Y} on x < 0,  C e^{-Mx}/x^{1+Y} on x > 0.
struct CgmyParams {
    double C = 1.0;   ///< jump intensity scale
    double G = 25.0;  ///< left-tail tempering rate
    double M = 26.0;  ///< right-tail tempering rate
    double Y = 1.5;   ///< activity index

    /// C > 0, G >= 0, M >= 0, Y < 2.
    void validate() const {
        if (!(C > 0.0)) throw DomainError("CGMY parameter C must be > 0");
        if (!(G >= 0.0)) throw DomainError("CGMY parameter G must be >= 0");
        if (!(M >= 0.0)) throw DomainError("CGMY parameter M must be >= 0");
        if (!(Y < 2.0)) throw DomainError("CGMY parameter Y must be < 2");
    }

    /// The finite-difference engine additionally needs infinite variation.
    void validate_for_fpde() const {
        validate();
        if (!(Y > 1.0 && Y < 2.0)) throw DomainError("FPDE engine requires Y in (1,2)");
    }
};

/// Piecewise-constant, right-continuous curve given as (time, value) knots.
/// Before the first knot the first value applies.
class SpreadCurve {
public:
    SpreadCurve() = default;
    SpreadCurve(double flat) : knots_{{0.0, flat}} {}  // NOLINT: scalar promotes to a flat curve
    explicit SpreadCurve(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
        if (knots_.empty()) throw DomainError("spread curve needs at least one knot");
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            if (!(knots_[i].first > knots_[i - 1].first)) {
                throw DomainError("spread curve knot times must be strictly increasing");
            }
        }
    }

    double operator()(double t) const {
        if (knots_.empty()) return 0.0;
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                   [](double v, const auto& k) { return v < k.first; });
        if (it == knots_.begin()) return knots_.front().second;
        return std::prev(it)->second;
    }

    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

    bool nonnegative() const {
        return std::all_of(knots_.begin(), knots_.end(), [](const auto& k) { return k.second >= 0.0; });
    }

private:
    std::vector<std::pair<double, double>> knots_{{0.0, 0.0}};
};

struct MarketSpec {
    double S0 = 40.0;
    double r = 0.05;
    SpreadCurve credit_spread{0.0};
    SpreadCurve funding_spread{0.0};
    double recovery_rate = 0.0;  ///< no default: callers must set it explicitly

    double lgd() const { return 1.0 - recovery_rate; }

    void validate() const {
        if (!(S0 > 0.0)) throw DomainError("S0 must be > 0");
        if (!std::isfinite(r)) throw DomainError("r must be finite");
        if (!credit_spread.nonnegative()) throw DomainError("credit spread must be >= 0");
        if (!funding_spread.nonnegative()) throw DomainError("funding spread must be >= 0");
        if (!(recovery_rate >= 0.0 && recovery_rate < 1.0)) {
            throw DomainError("recovery rate must lie in [0,1)");
        }
    }
};

enum class OptionKind { Call, Put };

inline std::string to_string(OptionKind k) { return k == OptionKind::Call ? "call" : "put"; }

struct ContractSpec {
    double strike = 50.0;
    double expiry = 1.0;
    int num_exercises = 50;
    OptionKind kind = OptionKind::Call;

    void validate() const {
        if (!(strike > 0.0)) throw DomainError("strike must be > 0");
        if (!(expiry > 0.0)) throw DomainError("expiry must be > 0");
        if (num_exercises < 1) throw DomainError("number of exercise dates must be >= 1");
    }
};

/// Equally spaced exercise dates t_m = m T / M, m = 1..M. Index 0 is t_0 = 0.
class ExerciseSchedule {
public:
    ExerciseSchedule(double expiry, int num_exercises) : dt_(expiry / num_exercises) {
        if (!(expiry > 0.0) || num_exercises < 1) throw DomainError("invalid exercise schedule");
        times_.resize(static_cast<std::size_t>(num_exercises) + 1);
        for (int m = 0; m <= num_exercises; ++m) {
            times_[static_cast<std::size_t>(m)] = expiry * m / num_exercises;
        }
        times_.back() = expiry;
    }
    explicit ExerciseSchedule(const ContractSpec& c) : ExerciseSchedule(c.expiry, c.num_exercises) {}

    int num_exercises() const { return static_cast<int>(times_.size()) - 1; }
    double dt() const { return dt_; }
    double expiry() const { return times_.back(); }
    /// t_m for m = 0..M.
    double time(int m) const { return times_[static_cast<std::size_t>(m)]; }
    const std::vector<double>& times() const { return times_; }

private:
    double dt_;
    std::vector<double> times_;
};

namespace detail {
inline std::complex<double> cgmy_bracket(const CgmyParams& p, double z) {
    using cd = std::complex<double>;
    const cd iz(0.0, z);
    return std::pow(cd(p.M) - iz, p.Y) - std::pow(p.M, p.Y) + std::pow(cd(p.G) + iz, p.Y) -
           std::pow(p.G, p.Y);
}
}  // namespace detail

/// Characteristic exponent in the Levy-Khintchine form
///   C Gamma(Y) [(M - iz)^Y - M^Y + (G + iz)^Y - G^Y].
/// Kept for reference; the pricing engines consume characteristic_function().
inline std::complex<double> characteristic_exponent(const CgmyParams& p, double z) {
    p.validate();
    return p.C * detail::gamma_fn(p.Y) * detail::cgmy_bracket(p, z);
}

/// log E[exp(i z X_t)] / t = C Gamma(-Y) [(M - iz)^Y - M^Y + (G + iz)^Y - G^Y].
inline std::complex<double> log_characteristic_function(const CgmyParams& p, double z) {
    p.validate();
    if (p.Y == 0.0 || p.Y == 1.0) throw DomainError("characteristic function undefined for Y in {0,1}");
    return p.C * detail::gamma_fn(-p.Y) * detail::cgmy_bracket(p, z);
}

/// E[exp(i z X_t)] for the CGMY process at time t.
inline std::complex<double> characteristic_function(const CgmyParams& p, double z, double t) {
    if (!(t >= 0.0)) throw DomainError("characteristic function needs t >= 0");
    if (t == 0.0) {
        p.validate();
        return {1.0, 0.0};
    }
    return std::exp(t * log_characteristic_function(p, z));
}

/// Drift correction nu with E[exp(X_1)] = exp(nu), so that S_t = S_0 exp((r - nu) t + X_t)
/// discounts to a martingale. Uses the same C Gamma(-Y) constant as the characteristic function.
inline double convexity_adjustment(const CgmyParams& p) {
    p.validate();
    if (p.M < 1.0) throw DomainError("convexity adjustment requires M >= 1");
    if (p.Y == 0.0 || p.Y == 1.0) throw DomainError("convexity adjustment undefined for Y in {0,1}");
    // Pair the terms so that M = G + 1 cancels exactly.
    const double right = std::pow(p.M - 1.0, p.Y) - std::pow(p.G, p.Y);
    const double left = std::pow(p.G + 1.0, p.Y) - std::pow(p.M, p.Y);
    return p.C * detail::gamma_fn(-p.Y) * (right + left);
}

struct Cumulants {
    double zeta1;
    double zeta2;
    double zeta4;
};

/// Cumulants of r t + X_t used to size the COS truncation range.
inline Cumulants cumulants(const CgmyParams& p, double r, double t) {
    p.validate();
    if (!(t > 0.0)) throw DomainError("cumulants need t > 0");
    for (double pole : {0.0, 1.0, 2.0, 3.0}) {
        if (p.Y == pole) throw DomainError("cumulants undefined at Gamma poles Y in {0,1,2,3}");
    }
    const double ct = p.C * t;
    Cumulants c{};
    c.zeta1 = r * t + ct * detail::gamma_fn(1.0 - p.Y) * (std::pow(p.M, p.Y - 1.0) - std::pow(p.G, p.Y - 1.0));
    c.zeta2 = ct * detail::gamma_fn(2.0 - p.Y) * (std::pow(p.M, p.Y - 2.0) + std::pow(p.G, p.Y - 2.0));
    c.zeta4 = ct * detail::gamma_fn(4.0 - p.Y) * (std::pow(p.M, p.Y - 4.0) + std::pow(p.G, p.Y - 4.0));
    return c;
}

inline double payoff(OptionKind kind, double strike, double S) {
    return kind == OptionKind::Call ? std::max(S - strike, 0.0) : std::max(strike - S, 0.0);
}

inline double payoff(const ContractSpec& c, double S) { return payoff(c.kind, c.strike, S); }

}  // namespace cgmyxva
