#pragma once

// Tempered fractional PDE engine on a log-price grid.
//
// In backward time the option value solves
//   V_t + (r - nu) V_x + C Gamma(-Y) [ (D_left^{Y,G} - G^Y) V + (D_right^{Y,M} - M^Y) V ] - r V = 0
// on (x_L, x_R) with Dirichlet data. The tempered Riemann-Liouville terms are discretised by
// tempered weighted-and-shifted Grunwald (WSGD) operators, the advection term by central
// differences and time by Crank-Nicolson. Bermudan exercise is a pointwise max at each date.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgmyxva/errors.hpp"
#include "cgmyxva/model.hpp"

namespace cgmyxva::fpde {

struct WsgdConfig {
    double gamma3 = 0.0;
    int grid_n = 2048;                 ///< N_x, number of space intervals
    int substeps = 16;                 ///< Crank-Nicolson steps per exercise interval
    double x_left = std::log(0.4);
    double x_right = std::log(400.0);

    double h() const { return (x_right - x_left) / grid_n; }

    void validate(const CgmyParams& p, double S0) const {
        p.validate_for_fpde();
        if (!(gamma3 >= -0.5 * p.Y)) throw DomainError("fpde.gamma3 must be >= -Y/2");
        if (grid_n < 8) throw DomainError("fpde.grid_n must be >= 8");
        if (substeps < 1) throw DomainError("fpde.substeps must be >= 1");
        if (!(x_left < std::log(S0) && std::log(S0) < x_right)) {
            throw DomainError("fpde domain must satisfy x_left < log(S0) < x_right");
        }
        if (h() * std::max(p.G, p.M) > kMaxHLambda) {
            throw DomainError("fpde grid too coarse: h * max(G, M) exceeds " + std::to_string(kMaxHLambda));
        }
    }

    static constexpr double kMaxHLambda = 10.0;
};

/// omega_0 = 1, omega_l = (1 - (1 + Y) / l) omega_{l-1}; returns omega_0..omega_n.
inline std::vector<double> omega_weights(double Y, int n) {
    if (n < 0) throw DomainError("omega_weights needs n >= 0");
    std::vector<double> w(static_cast<std::size_t>(n) + 1);
    w[0] = 1.0;
    for (int l = 1; l <= n; ++l) {
        w[static_cast<std::size_t>(l)] = (1.0 - (1.0 + Y) / l) * w[static_cast<std::size_t>(l) - 1];
    }
    return w;
}

struct GammaCoefficients {
    double gamma1;
    double gamma2;
    double gamma3;
};

inline GammaCoefficients gamma_coefficients(double Y, double gamma3) {
    return {0.5 * Y + gamma3, 0.5 * (2.0 - Y) - 2.0 * gamma3, gamma3};
}

struct WsgdWeights {
    std::vector<double> g;  ///< g_0..g_n
    double phi = 0.0;       ///< shift coefficient phi(lambda)
    double lambda = 0.0;
    double Y = 0.0;
};

/// phi(lambda) = (gamma1 e^{h lambda} + gamma2 + gamma3 e^{-h lambda}) (1 - e^{-h lambda})^Y.
inline double shift_coefficient(double Y, double lambda, double h, double gamma3) {
    const auto [g1, g2, g3] = gamma_coefficients(Y, gamma3);
    const double hl = h * lambda;
    return (g1 * std::exp(hl) + g2 + g3 * std::exp(-hl)) * std::pow(-std::expm1(-hl), Y);
}

inline WsgdWeights tempered_weights(double Y, double lambda, double h, double gamma3, int n) {
    if (!(lambda >= 0.0)) throw DomainError("tempering rate must be >= 0");
    if (!(h > 0.0)) throw DomainError("grid step must be > 0");
    if (h * lambda > WsgdConfig::kMaxHLambda) throw DomainError("h * lambda exceeds the admissible cap");
    if (n < 1) throw DomainError("tempered_weights needs n >= 1");
    const auto [g1, g2, g3] = gamma_coefficients(Y, gamma3);
    const auto w = omega_weights(Y, n);
    WsgdWeights out;
    out.lambda = lambda;
    out.Y = Y;
    out.g.resize(static_cast<std::size_t>(n) + 1);
    const double hl = h * lambda;
    out.g[0] = g1 * w[0] * std::exp(hl);
    out.g[1] = g1 * w[1] + g2 * w[0];
    for (int l = 2; l <= n; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        out.g[ul] = (g1 * w[ul] + g2 * w[ul - 1] + g3 * w[ul - 2]) * std::exp(-(l - 1) * hl);
    }
    out.phi = shift_coefficient(Y, lambda, h, gamma3);
    return out;
}

/// Left operator at interior nodes 1..N-1 of v (size N+1):
///   h^{-Y} [ sum_{l=0}^{n+1} g_l v_{n-l+1} - phi v_n ].
inline std::vector<double> apply_left_operator(const WsgdWeights& w, std::span<const double> v, double h) {
    const int N = static_cast<int>(v.size()) - 1;
    if (N < 2 || static_cast<int>(w.g.size()) < N + 1) throw DomainError("weights shorter than grid");
    const double scale = std::pow(h, -w.Y);
    std::vector<double> out(static_cast<std::size_t>(N) - 1);
    for (int n = 1; n <= N - 1; ++n) {
        double acc = -w.phi * v[static_cast<std::size_t>(n)];
        for (int l = 0; l <= n + 1; ++l) acc += w.g[static_cast<std::size_t>(l)] * v[static_cast<std::size_t>(n - l + 1)];
        out[static_cast<std::size_t>(n) - 1] = scale * acc;
    }
    return out;
}

/// Right operator at interior nodes 1..N-1 of v (size N+1):
///   h^{-Y} [ sum_{l=0}^{N-n+1} g_l v_{n+l-1} - phi v_n ].
inline std::vector<double> apply_right_operator(const WsgdWeights& w, std::span<const double> v, double h) {
    const int N = static_cast<int>(v.size()) - 1;
    if (N < 2 || static_cast<int>(w.g.size()) < N + 1) throw DomainError("weights shorter than grid");
    const double scale = std::pow(h, -w.Y);
    std::vector<double> out(static_cast<std::size_t>(N) - 1);
    for (int n = 1; n <= N - 1; ++n) {
        double acc = -w.phi * v[static_cast<std::size_t>(n)];
        for (int l = 0; l <= N - n + 1; ++l) acc += w.g[static_cast<std::size_t>(l)] * v[static_cast<std::size_t>(n + l - 1)];
        out[static_cast<std::size_t>(n) - 1] = scale * acc;
    }
    return out;
}

/// Outside (x_L, x_R) the value is continued as a(t) e^x + b(t) on each side; the boundary node
/// carries the same expression, which is the Dirichlet data. An empty tail means zero.
struct BoundaryData {
    using Tail = std::function<std::pair<double, double>(double t)>;
    Tail left;
    Tail right;

    static double eval(const Tail& tail, double t, double x) {
        if (!tail) return 0.0;
        const auto [a, b] = tail(t);
        return a * std::exp(x) + b;
    }
};

inline BoundaryData option_boundaries(const ContractSpec& c, double r) {
    const double K = c.strike;
    const double T = c.expiry;
    if (c.kind == OptionKind::Call) {
        return {{}, [=](double t) { return std::pair<double, double>{1.0, -K * std::exp(-r * (T - t))}; }};
    }
    return {[=](double t) { return std::pair<double, double>{-1.0, K * std::exp(-r * (T - t))}; }, {}};
}

/// Crank-Nicolson system over interior unknowns u (size N-1):
///   lhs u^{j+1} = rhs u^j + sum over sides of  side_exp (a^j + a^{j+1}) + side_one (b^j + b^{j+1}),
/// where j counts steps backward from expiry and (a, b) are the boundary tails.
struct CnSystem {
    Eigen::MatrixXd lhs;
    Eigen::MatrixXd rhs;
    Eigen::VectorXd left_exp;
    Eigen::VectorXd left_one;
    Eigen::VectorXd right_exp;
    Eigen::VectorXd right_one;
};

/// Spatial operator L over interior rows and all N+1 columns, so that the semi-discrete
/// backward equation reads v_t + L v = 0 when the value vanishes outside the domain.
inline Eigen::MatrixXd spatial_operator(const CgmyParams& p, const MarketSpec& market, const WsgdConfig& cfg) {
    const int N = cfg.grid_n;
    const double h = cfg.h();
    const double drift = market.r - convexity_adjustment(p);
    const auto wl = tempered_weights(p.Y, p.G, h, cfg.gamma3, N);
    const auto wr = tempered_weights(p.Y, p.M, h, cfg.gamma3, N);
    const double scale = p.C * std::tgamma(-p.Y) * std::pow(h, -p.Y);

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N - 1, N + 1);
    for (int n = 1; n <= N - 1; ++n) {
        const int row = n - 1;
        for (int k = 0; k <= n + 1; ++k) L(row, k) += scale * wl.g[static_cast<std::size_t>(n - k + 1)];
        for (int k = n - 1; k <= N; ++k) L(row, k) += scale * wr.g[static_cast<std::size_t>(k - n + 1)];
        L(row, n) -= scale * (wl.phi + wr.phi) + market.r;
        L(row, n + 1) += drift / (2.0 * h);
        L(row, n - 1) -= drift / (2.0 * h);
    }
    return L;
}

/// L applied to e^x and to 1 restricted to the boundary node and the nodes beyond it, per side.
struct ExteriorColumns {
    Eigen::VectorXd left_exp;
    Eigen::VectorXd left_one;
    Eigen::VectorXd right_exp;
    Eigen::VectorXd right_one;
};

inline ExteriorColumns exterior_columns(const CgmyParams& p, const WsgdConfig& cfg, const Eigen::MatrixXd& L) {
    const int N = cfg.grid_n;
    const double h = cfg.h();
    const double scale = p.C * std::tgamma(-p.Y) * std::pow(h, -p.Y);
    // Number of exterior nodes until the tempered weights (times e^x growth) fall below e^{-40}.
    auto reach = [&](double rate) {
        const double n = std::ceil(40.0 / (h * std::max(rate, 1e-3)));
        return static_cast<int>(std::min(n, 64.0 * N));
    };
    const int JL = reach(p.G);
    const int JR = reach(p.M - 1.0);
    const auto wl = tempered_weights(p.Y, p.G, h, cfg.gamma3, N + JL + 1);
    const auto wr = tempered_weights(p.Y, p.M, h, cfg.gamma3, N + JR + 1);

    ExteriorColumns out{L.col(0) * std::exp(cfg.x_left), L.col(0), L.col(N) * std::exp(cfg.x_right), L.col(N)};
    for (int n = 1; n <= N - 1; ++n) {
        double le = 0.0, lo = 0.0, re = 0.0, ro = 0.0;
        for (int j = JL; j >= 1; --j) {
            const double g = wl.g[static_cast<std::size_t>(n + j + 1)];
            lo += g;
            le += g * std::exp(cfg.x_left - j * h);
        }
        for (int j = JR; j >= 1; --j) {
            const double g = wr.g[static_cast<std::size_t>(N + j - n + 1)];
            ro += g;
            re += g * std::exp(cfg.x_right + j * h);
        }
        out.left_exp(n - 1) += scale * le;
        out.left_one(n - 1) += scale * lo;
        out.right_exp(n - 1) += scale * re;
        out.right_one(n - 1) += scale * ro;
    }
    return out;
}

inline CnSystem assemble_cn_system(const CgmyParams& p, const MarketSpec& market, const WsgdConfig& cfg, double tau) {
    if (!(tau > 0.0)) throw DomainError("time step must be > 0");
    cfg.validate(p, market.S0);
    const int N = cfg.grid_n;
    const Eigen::MatrixXd L = spatial_operator(p, market, cfg);
    const Eigen::MatrixXd interior = L.block(0, 1, N - 1, N - 1);
    const auto ext = exterior_columns(p, cfg, L);
    CnSystem sys;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(N - 1, N - 1);
    sys.lhs = identity - 0.5 * tau * interior;
    sys.rhs = identity + 0.5 * tau * interior;
    sys.left_exp = 0.5 * tau * ext.left_exp;
    sys.left_one = 0.5 * tau * ext.left_one;
    sys.right_exp = 0.5 * tau * ext.right_exp;
    sys.right_one = 0.5 * tau * ext.right_one;
    return sys;
}

/// Marches a factorised Crank-Nicolson system backward in time.
class CnStepper {
public:
    CnStepper(const CgmyParams& p, const MarketSpec& market, const WsgdConfig& cfg, double tau)
        : tau_(tau) {
        auto sys = assemble_cn_system(p, market, cfg, tau);
        left_exp_ = std::move(sys.left_exp);
        left_one_ = std::move(sys.left_one);
        right_exp_ = std::move(sys.right_exp);
        right_one_ = std::move(sys.right_one);
        lu_.compute(sys.lhs);
        const double rc = lu_.rcond();
        if (!(rc > 1e-14)) throw NumericalError("Crank-Nicolson matrix is singular (rcond " + std::to_string(rc) + ")");
    }

    double tau() const { return tau_; }

    /// u holds interior values at time t; on return it holds interior values at t - tau.
    /// Uses rhs = 2I - lhs: lhs (u_new + u) = 2 u + boundary terms.
    void step(Eigen::VectorXd& u, double t, const BoundaryData& bc) const {
        const double t_new = t - tau_;
        Eigen::VectorXd rhs = 2.0 * u;
        auto add = [&](const BoundaryData::Tail& tail, const Eigen::VectorXd& e, const Eigen::VectorXd& o) {
            if (!tail) return;
            const auto [a0, b0] = tail(t);
            const auto [a1, b1] = tail(t_new);
            rhs += (a0 + a1) * e + (b0 + b1) * o;
        };
        add(bc.left, left_exp_, left_one_);
        add(bc.right, right_exp_, right_one_);
        u = lu_.solve(rhs) - u;
    }

private:
    double tau_;
    Eigen::VectorXd left_exp_;
    Eigen::VectorXd left_one_;
    Eigen::VectorXd right_exp_;
    Eigen::VectorXd right_one_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

struct GridSolution {
    std::vector<double> x;                        ///< N+1 log-price nodes
    std::vector<std::vector<double>> cont_values;   ///< (M+1) x (N+1), before exercise projection
    std::vector<std::vector<double>> option_values; ///< (M+1) x (N+1), after projection
    std::vector<double> times;                    ///< t_0..t_M
    double x_left = 0.0;
    double h = 0.0;
    double strike = 0.0;
    double rate = 0.0;
    double expiry = 0.0;
    OptionKind kind = OptionKind::Call;
    BoundaryData boundaries;  ///< continuation of the value outside the grid
};

inline void require_finite(const Eigen::VectorXd& u) {
    if (!u.allFinite()) {
        throw NumericalError("FPDE solution is not finite; the scheme is unstable for this configuration");
    }
}

inline std::vector<double> grid_nodes(const WsgdConfig& cfg) {
    std::vector<double> x(static_cast<std::size_t>(cfg.grid_n) + 1);
    const double h = cfg.h();
    for (int n = 0; n <= cfg.grid_n; ++n) x[static_cast<std::size_t>(n)] = cfg.x_left + n * h;
    x.back() = cfg.x_right;
    return x;
}

inline GridSolution solve_bermudan_grid(const CgmyParams& p, const MarketSpec& market, const ContractSpec& contract,
                                        const ExerciseSchedule& schedule, const WsgdConfig& cfg) {
    market.validate();
    contract.validate();
    cfg.validate(p, market.S0);
    const int N = cfg.grid_n;
    const int M = schedule.num_exercises();
    const double tau = schedule.dt() / cfg.substeps;
    const CnStepper stepper(p, market, cfg, tau);
    const BoundaryData bc = option_boundaries(contract, market.r);

    GridSolution sol;
    sol.x = grid_nodes(cfg);
    sol.times = schedule.times();
    sol.x_left = cfg.x_left;
    sol.h = cfg.h();
    sol.strike = contract.strike;
    sol.rate = market.r;
    sol.expiry = contract.expiry;
    sol.kind = contract.kind;
    sol.boundaries = bc;
    sol.cont_values.assign(static_cast<std::size_t>(M) + 1, {});
    sol.option_values.assign(static_cast<std::size_t>(M) + 1, {});

    std::vector<double> exercise(static_cast<std::size_t>(N) + 1);
    for (int n = 0; n <= N; ++n) exercise[static_cast<std::size_t>(n)] = payoff(contract, std::exp(sol.x[static_cast<std::size_t>(n)]));
    sol.cont_values[static_cast<std::size_t>(M)] = exercise;
    sol.option_values[static_cast<std::size_t>(M)] = exercise;

    Eigen::VectorXd u(N - 1);
    for (int n = 1; n <= N - 1; ++n) u(n - 1) = exercise[static_cast<std::size_t>(n)];

    for (int m = M - 1; m >= 0; --m) {
        double t = schedule.time(m + 1);
        for (int s = 0; s < cfg.substeps; ++s) {
            stepper.step(u, t, bc);
            t -= tau;
        }
        require_finite(u);
        const double tm = schedule.time(m);
        std::vector<double> slice(static_cast<std::size_t>(N) + 1);
        slice.front() = BoundaryData::eval(bc.left, tm, cfg.x_left);
        slice.back() = BoundaryData::eval(bc.right, tm, cfg.x_right);
        for (int n = 1; n <= N - 1; ++n) slice[static_cast<std::size_t>(n)] = u(n - 1);
        sol.cont_values[static_cast<std::size_t>(m)] = slice;
        if (m >= 1) {
            for (std::size_t n = 0; n < slice.size(); ++n) slice[n] = std::max(slice[n], exercise[n]);
            for (int n = 1; n <= N - 1; ++n) u(n - 1) = slice[static_cast<std::size_t>(n)];
        }
        sol.option_values[static_cast<std::size_t>(m)] = std::move(slice);
    }
    return sol;
}

struct ContinuationLookup {
    double value;
    bool clamped;
};

/// Linear interpolation of the pre-exercise slice at date m in x = log S.
/// Prices outside (e^{x_L}, e^{x_R}) are valued with the boundary continuation used by the
/// scheme, a(t) e^x + b(t), and flagged.
inline ContinuationLookup continuation_at(const GridSolution& grid, int m, double S) {
    const auto& slice = grid.cont_values.at(static_cast<std::size_t>(m));
    const std::size_t N = slice.size() - 1;
    if (!(S > 0.0)) throw DomainError("continuation value needs S > 0");
    const double pos = (std::log(S) - grid.x_left) / grid.h;
    const double tm = grid.times.at(static_cast<std::size_t>(m));
    if (pos < 0.0) return {BoundaryData::eval(grid.boundaries.left, tm, std::log(S)), true};
    if (pos > static_cast<double>(N)) return {BoundaryData::eval(grid.boundaries.right, tm, std::log(S)), true};
    if (pos == static_cast<double>(N)) return {slice.back(), false};
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    if (w == 0.0) return {slice[i], false};
    return {(1.0 - w) * slice[i] + w * slice[i + 1], false};
}

/// Option value at t_0 for spot S.
inline double value_at(const GridSolution& grid, double S) { return continuation_at(grid, 0, S).value; }

/// European solve on [0, T] with general terminal data; returns the t = 0 slice (N+1 nodes).
inline std::vector<double> solve_european(const CgmyParams& p, const MarketSpec& market, const WsgdConfig& cfg,
                                          double expiry, int time_steps,
                                          const std::function<double(double x)>& terminal,
                                          const BoundaryData& bc) {
    cfg.validate(p, market.S0);
    if (time_steps < 1) throw DomainError("time_steps must be >= 1");
    const int N = cfg.grid_n;
    const double tau = expiry / time_steps;
    const CnStepper stepper(p, market, cfg, tau);
    const auto x = grid_nodes(cfg);
    Eigen::VectorXd u(N - 1);
    for (int n = 1; n <= N - 1; ++n) u(n - 1) = terminal(x[static_cast<std::size_t>(n)]);
    double t = expiry;
    for (int j = 0; j < time_steps; ++j) {
        stepper.step(u, t, bc);
        t -= tau;
    }
    require_finite(u);
    std::vector<double> out(static_cast<std::size_t>(N) + 1);
    out.front() = BoundaryData::eval(bc.left, 0.0, cfg.x_left);
    out.back() = BoundaryData::eval(bc.right, 0.0, cfg.x_right);
    for (int n = 1; n <= N - 1; ++n) out[static_cast<std::size_t>(n)] = u(n - 1);
    return out;
}

struct ConvergenceRow {
    int grid_n;
    int time_steps;
    double h;
    double tau;
    double error;  ///< discrete L2 distance to the reference solution
    double order;  ///< log2(e_{k-1} / e_k); NaN on the first row
};

/// Terminal data for a convergence study: the contract payoff, or a caller-supplied smooth profile
/// (with zero Dirichlet data).
struct ConvergenceProblem {
    std::function<double(double x)> terminal;
    BoundaryData boundaries;
};

inline ConvergenceProblem european_payoff_problem(const ContractSpec& c, double r) {
    return {[c](double x) { return payoff(c, std::exp(x)); }, option_boundaries(c, r)};
}

/// Dyadic refinement from cfg.grid_n with base_time_steps steps, tau proportional to h.
/// The reference solution sits two refinement levels above the finest studied level; errors are
/// measured on each level's own nodes (which are nested in the reference grid) in
/// ||v|| = sqrt(h sum_{interior} v^2).
inline std::vector<ConvergenceRow> convergence_study(const CgmyParams& p, const MarketSpec& market, double expiry,
                                                     const WsgdConfig& cfg, int base_time_steps, int levels,
                                                     const ConvergenceProblem& problem) {
    if (levels < 3) throw DomainError("convergence study needs at least 3 levels");
    const int ref_shift = levels - 1 + 2;
    WsgdConfig ref_cfg = cfg;
    ref_cfg.grid_n = cfg.grid_n << ref_shift;
    const auto reference = solve_european(p, market, ref_cfg, expiry, base_time_steps << ref_shift,
                                          problem.terminal, problem.boundaries);
    std::vector<ConvergenceRow> rows;
    for (int k = 0; k < levels; ++k) {
        WsgdConfig level = cfg;
        level.grid_n = cfg.grid_n << k;
        const int steps = base_time_steps << k;
        const auto v = solve_european(p, market, level, expiry, steps, problem.terminal, problem.boundaries);
        const int stride = 1 << (ref_shift - k);
        double sum = 0.0;
        for (int n = 1; n < level.grid_n; ++n) {
            const double d = v[static_cast<std::size_t>(n)] - reference[static_cast<std::size_t>(n * stride)];
            sum += d * d;
        }
        ConvergenceRow row{level.grid_n, steps, level.h(), expiry / steps, std::sqrt(level.h() * sum),
                           std::numeric_limits<double>::quiet_NaN()};
        if (!rows.empty()) row.order = std::log2(rows.back().error / row.error);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace cgmyxva::fpde
