#pragma once

// Fourier-cosine (COS) Bermudan engine. Works in log-moneyness x = log(S/K) on a fixed
// truncation interval [a, b]; the value at each exercise date is carried as its cosine
// coefficients H_k and continuation values are recovered from the transition characteristic
// function over one exercise interval.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cgmyxva/errors.hpp"
#include "cgmyxva/model.hpp"

namespace cgmyxva::cos {

struct CosConfig {
    int n_terms = 512;
    double L = 8.0;
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    int bisection_max_iter = 200;

    void validate() const {
        if (n_terms < 16 || (n_terms & (n_terms - 1)) != 0) {
            throw DomainError("cos.n_terms must be a power of two >= 16");
        }
        if (!(L >= 6.0 && L <= 12.0)) throw DomainError("cos.L must lie in [6, 12]");
        if (!(newton_tol > 0.0)) throw DomainError("cos.newton_tol must be > 0");
        if (newton_max_iter < 1) throw DomainError("cos.newton_max_iter must be >= 1");
    }
};

/// [a, b] = x + zeta1 -/+ L sqrt(zeta2 + sqrt(zeta4)).
inline std::pair<double, double> truncation_range(const CgmyParams& p, double r, double t, double x, double L) {
    const auto c = cumulants(p, r, t);
    const double centre = x + c.zeta1;
    const double half = L * std::sqrt(c.zeta2 + std::sqrt(c.zeta4));
    return {centre - half, centre + half};
}

/// chi_k(c, d) = int_c^d e^y cos(k pi (y - a) / (b - a)) dy.
inline double chi_coefficient(int k, double c, double d, double a, double b) {
    const double w = k * detail::kPi / (b - a);
    const double ed = std::exp(d);
    const double ec = std::exp(c);
    return (std::cos(w * (d - a)) * ed - std::cos(w * (c - a)) * ec + w * std::sin(w * (d - a)) * ed -
            w * std::sin(w * (c - a)) * ec) /
           (1.0 + w * w);
}

/// int_c^d cos(k pi (y - a) / (b - a)) dy.
inline double cosine_integral(int k, double c, double d, double a, double b) {
    if (k == 0) return d - c;
    const double w = k * detail::kPi / (b - a);
    return (std::sin(w * (d - a)) - std::sin(w * (c - a))) / w;
}

/// Coefficients (2/(b-a)) int_c^d payoff(K e^y) cos(k pi (y - a)/(b - a)) dy for k = 0..N-1,
/// with [c, d] on the in-the-money side.
inline std::vector<double> payoff_coefficients(OptionKind kind, double K, double c, double d, double a, double b, int N) {
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    if (!(d > c)) return out;
    const double scale = 2.0 / (b - a) * K;
    const double sign = kind == OptionKind::Call ? 1.0 : -1.0;
    for (int k = 0; k < N; ++k) {
        out[static_cast<std::size_t>(k)] = sign * scale * (chi_coefficient(k, c, d, a, b) - cosine_integral(k, c, d, a, b));
    }
    return out;
}

/// Transition data for one exercise interval: phi_k = e^{i u_k (r - nu) dt} phi(u_k, dt), u_k = k pi/(b-a).
struct Transition {
    double a = 0.0;
    double b = 0.0;
    double dt = 0.0;
    double discount = 1.0;
    std::vector<std::complex<double>> phi;

    Transition() = default;
    Transition(const CgmyParams& p, double r, double dt_, double a_, double b_, int N)
        : a(a_), b(b_), dt(dt_), discount(std::exp(-r * dt_)), phi(static_cast<std::size_t>(N)) {
        const double drift = (r - convexity_adjustment(p)) * dt;
        for (int k = 0; k < N; ++k) {
            const double u = k * detail::kPi / (b - a);
            phi[static_cast<std::size_t>(k)] =
                std::polar(1.0, u * drift) * characteristic_function(p, u, dt);
        }
    }

    double u(int k) const { return k * detail::kPi / (b - a); }

    /// Continuation value and its x-derivative from coefficients H.
    std::pair<double, double> evaluate(const std::vector<double>& H, double x) const {
        const std::size_t N = H.size();
        const std::complex<double> step = std::polar(1.0, detail::kPi * (x - a) / (b - a));
        std::complex<double> rot(1.0, 0.0);
        double value = 0.0;
        double slope = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const std::complex<double> term = phi[k] * rot * H[k];
            const double weight = k == 0 ? 0.5 : 1.0;
            value += weight * term.real();
            slope -= weight * u(static_cast<int>(k)) * term.imag();
            rot *= step;
            if ((k & 63U) == 63U) rot /= std::abs(rot);
        }
        return {discount * value, discount * slope};
    }
};

/// psi_k(c, d) = int_c^d V^c(y) cos(u_k (y - a)) dy for k = 0..N-1, where V^c is the continuation
/// value represented by coefficients H through transition tr. Uses
///   int e^{i u_j s} cos(u_k s) ds = (P[j+k] + P[j-k]) / 2,  P[s] = int_{c-a}^{d-a} e^{i s pi t/(b-a)} dt.
inline std::vector<double> psi_coefficients(const std::vector<double>& H, const Transition& tr, double c, double d) {
    const int N = static_cast<int>(H.size());
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    if (!(d > c)) return out;
    const double width = tr.b - tr.a;
    // P indexed by s + (N - 1), s in [-(N-1), 2N-2].
    std::vector<std::complex<double>> P(static_cast<std::size_t>(3 * N - 2));
    for (int s = -(N - 1); s <= 2 * N - 2; ++s) {
        std::complex<double> val;
        if (s == 0) {
            val = d - c;
        } else {
            const double w = s * detail::kPi / width;
            val = (std::polar(1.0, w * (d - tr.a)) - std::polar(1.0, w * (c - tr.a))) / std::complex<double>(0.0, w);
        }
        P[static_cast<std::size_t>(s + N - 1)] = val;
    }
    std::vector<std::complex<double>> w(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        w[static_cast<std::size_t>(j)] = tr.phi[static_cast<std::size_t>(j)] * H[static_cast<std::size_t>(j)] * (j == 0 ? 0.5 : 1.0);
    }
    for (int k = 0; k < N; ++k) {
        double acc = 0.0;
        for (int j = 0; j < N; ++j) {
            const auto& wj = w[static_cast<std::size_t>(j)];
            const std::complex<double> q =
                P[static_cast<std::size_t>(j + k + N - 1)] + P[static_cast<std::size_t>(j - k + N - 1)];
            acc += wj.real() * q.real() - wj.imag() * q.imag();
        }
        out[static_cast<std::size_t>(k)] = 0.5 * tr.discount * acc;
    }
    return out;
}

/// Root of payoff(x) = V^c(x) on the in-the-money part of [a, b].
/// Call: searched on [max(a,0), b]; returns b when payoff < V^c throughout (never exercise) and the
/// lower end when payoff >= V^c throughout. Put mirrored on [a, min(b,0)].
inline double find_exercise_point(const std::vector<double>& H, const Transition& tr, OptionKind kind, double K,
                                  double guess, const CosConfig& cfg) {
    const bool call = kind == OptionKind::Call;
    const double lo = call ? std::max(tr.a, 0.0) : tr.a;
    const double hi = call ? tr.b : std::min(tr.b, 0.0);
    if (!(hi > lo)) return call ? tr.b : tr.a;
    auto g = [&](double x) {
        const auto [v, dv] = tr.evaluate(H, x);
        const double ex = std::exp(x);
        const double pay = call ? K * (ex - 1.0) : K * (1.0 - ex);
        const double dpay = call ? K * ex : -K * ex;
        return std::pair<double, double>{pay - v, dpay - dv};
    };
    // Exercise side: right end for a call, left end for a put.
    const double g_ex = g(call ? hi : lo).first;
    const double g_cont = g(call ? lo : hi).first;
    if (g_ex < 0.0) return call ? tr.b : tr.a;
    if (g_cont >= 0.0) return call ? lo : hi;

    double x = std::clamp(guess, lo, hi);
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        const auto [f, df] = g(x);
        if (!(std::abs(df) > 0.0) || !std::isfinite(df)) break;
        const double nx = x - f / df;
        if (!(nx >= lo && nx <= hi)) break;
        if (std::abs(nx - x) < cfg.newton_tol) return nx;
        x = nx;
    }
    // Bisection: g has the exercise-side sign at one end and the continuation sign at the other.
    double left = lo;
    double right = hi;
    for (int it = 0; it < cfg.bisection_max_iter; ++it) {
        const double mid = 0.5 * (left + right);
        const double f = g(mid).first;
        const bool exercise_side = f >= 0.0;
        if (exercise_side == call) {
            right = mid;
        } else {
            left = mid;
        }
        if (right - left < cfg.newton_tol) return 0.5 * (left + right);
    }
    throw NumericalError("exercise point search did not converge");
}

struct CosState {
    double a = 0.0;
    double b = 0.0;
    double strike = 0.0;
    OptionKind kind = OptionKind::Call;
    Transition transition;
    std::vector<std::vector<double>> hk;  ///< hk[m]: coefficients of V(t_m), m = 1..M; hk[0] empty
    std::vector<double> x_star;           ///< early-exercise point per date; x_star[M] = 0, x_star[0] NaN
    std::vector<double> times;
};

inline CosState backward_induction(const CgmyParams& p, const MarketSpec& market, const ContractSpec& contract,
                                   const ExerciseSchedule& schedule, const CosConfig& cfg) {
    p.validate();
    market.validate();
    contract.validate();
    cfg.validate();
    const int N = cfg.n_terms;
    const int M = schedule.num_exercises();
    const double K = contract.strike;
    const auto [a, b] = truncation_range(p, market.r, contract.expiry, std::log(market.S0 / K), cfg.L);

    CosState st;
    st.a = a;
    st.b = b;
    st.strike = K;
    st.kind = contract.kind;
    st.times = schedule.times();
    st.transition = Transition(p, market.r, schedule.dt(), a, b, N);
    st.hk.assign(static_cast<std::size_t>(M) + 1, {});
    st.x_star.assign(static_cast<std::size_t>(M) + 1, std::numeric_limits<double>::quiet_NaN());

    const bool call = contract.kind == OptionKind::Call;
    if (call) {
        st.hk[static_cast<std::size_t>(M)] = payoff_coefficients(contract.kind, K, std::max(a, 0.0), b, a, b, N);
    } else {
        st.hk[static_cast<std::size_t>(M)] = payoff_coefficients(contract.kind, K, a, std::min(b, 0.0), a, b, N);
    }
    st.x_star[static_cast<std::size_t>(M)] = 0.0;

    const double scale = 2.0 / (b - a);
    double guess = 0.0;
    for (int m = M - 1; m >= 1; --m) {
        const auto& next = st.hk[static_cast<std::size_t>(m) + 1];
        const double xs = find_exercise_point(next, st.transition, contract.kind, K, guess, cfg);
        st.x_star[static_cast<std::size_t>(m)] = xs;
        guess = xs;
        std::vector<double> h;
        if (call) {
            h = psi_coefficients(next, st.transition, a, xs);
            const auto pay = payoff_coefficients(contract.kind, K, std::max(xs, 0.0), b, a, b, N);
            for (int k = 0; k < N; ++k) h[static_cast<std::size_t>(k)] = scale * h[static_cast<std::size_t>(k)] + pay[static_cast<std::size_t>(k)];
        } else {
            h = psi_coefficients(next, st.transition, xs, b);
            const auto pay = payoff_coefficients(contract.kind, K, a, std::min(xs, 0.0), a, b, N);
            for (int k = 0; k < N; ++k) h[static_cast<std::size_t>(k)] = scale * h[static_cast<std::size_t>(k)] + pay[static_cast<std::size_t>(k)];
        }
        st.hk[static_cast<std::size_t>(m)] = std::move(h);
    }
    return st;
}

/// Continuation value at date m (0 <= m < M) for spot S; at m = M the payoff.
inline double continuation_at(const CosState& st, int m, double S) {
    if (!(S > 0.0)) throw DomainError("continuation value needs S > 0");
    const int M = static_cast<int>(st.hk.size()) - 1;
    if (m < 0 || m > M) throw DomainError("exercise date index out of range");
    if (m == M) return payoff(st.kind, st.strike, S);
    return st.transition.evaluate(st.hk[static_cast<std::size_t>(m) + 1], std::log(S / st.strike)).first;
}

inline double value_at(const CosState& st, double S) { return continuation_at(st, 0, S); }

/// Plain COS European price (single exercise date at expiry).
inline double european_price(const CgmyParams& p, const MarketSpec& market, ContractSpec contract, const CosConfig& cfg) {
    contract.num_exercises = 1;
    const auto st = backward_induction(p, market, contract, ExerciseSchedule(contract), cfg);
    return value_at(st, market.S0);
}

}  // namespace cgmyxva::cos
