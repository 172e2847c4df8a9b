#pragma once

// Monte Carlo paths of the underlying on the exercise-date grid.
//
// CGMY increments are drawn through the time-changed Brownian motion
//     X = A * U + W(U),   A = (G - M) / 2,
// where U is a pure-jump subordinator whose Levy density is the (Y/2)-stable density
//     c_s y^{-1-Y/2},   c_s = C sqrt(pi) 2^{-Y/2} / Gamma((Y+1)/2),
// thinned by
//     h(y) = exp(-G M y / 2) * E[(T / (T + B^2 y / 2))^{Y/2}],   T ~ Gamma(1/2, 1),  B = (G + M) / 2.
// Stable jumps are generated in decreasing order by the LePage series; each is kept with
// probability exp(-GMy/2) (T/(T+B^2y/2))^{Y/2} for a fresh T, which thins by exactly h(y).
// Jumps of U below the truncation level are replaced by their exact mean.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cgmyxva/errors.hpp"
#include "cgmyxva/model.hpp"

namespace cgmyxva {

struct SimConfig {
    std::size_t n_paths = 10000;
    std::uint64_t seed = 42;
    double truncation_eps = 1e-4;           ///< smallest retained subordinator jump
    std::size_t max_jump_terms = 1000000;   ///< per increment
    unsigned threads = 0;                   ///< 0 = hardware concurrency

    void validate() const {
        if (n_paths < 1) throw DomainError("sim.paths must be >= 1");
        if (!(truncation_eps > 0.0)) throw DomainError("sim.truncation_eps must be > 0");
        if (max_jump_terms < 1) throw DomainError("sim.max_jump_terms must be >= 1");
    }
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per thread.
template <class Body>
void parallel_for_chunks(std::size_t n, unsigned threads, Body&& body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
}  // namespace detail

using Rng = std::mt19937_64;

/// Independent stream for one path, a pure function of (seed, path index).
inline Rng path_rng(std::uint64_t seed, std::uint64_t path) {
    return Rng(detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(path + 0x632BE59BD9B4E019ULL)));
}

class CgmyIncrementSampler {
public:
    CgmyIncrementSampler(const CgmyParams& p, double dt, double truncation_eps = 1e-4,
                         std::size_t max_jump_terms = 1000000)
        : params_(p), dt_(dt), eps_(truncation_eps), max_terms_(max_jump_terms) {
        p.validate();
        if (!(p.Y > 0.0 && p.Y < 2.0)) throw DomainError("increment sampler requires Y in (0,2)");
        if (!(dt > 0.0)) throw DomainError("increment sampler requires dt > 0");
        if (!(truncation_eps > 0.0)) throw DomainError("truncation_eps must be > 0");
        alpha_ = 0.5 * p.Y;
        drift_coef_ = 0.5 * (p.G - p.M);
        const double b = 0.5 * (p.G + p.M);
        half_b2_ = 0.5 * b * b;
        half_gm_ = 0.5 * p.G * p.M;
        stable_const_ = p.C * std::sqrt(detail::kPi) * std::pow(2.0, -alpha_) / std::tgamma(0.5 * (p.Y + 1.0));
        // LePage series y_j = (alpha Gamma_j / (dt c_s))^{-1/alpha}; y_j >= eps <=> Gamma_j <= gamma_max_.
        series_scale_ = alpha_ / (dt * stable_const_);
        gamma_max_ = dt * stable_const_ * std::pow(eps_, -alpha_) / alpha_;
        small_jump_mean_ = compute_small_jump_mean();
    }

    /// Thinning probability h(y) of the subordinator relative to the stable density.
    double thinning(double y) const {
        const double beta = half_b2_ * y;
        auto f = [&](double u) {
            const double u2 = u * u;
            return std::pow(u2 / (beta + u2), alpha_) * std::exp(-u2);
        };
        const double inf = std::numeric_limits<double>::infinity();
        const double e = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, inf, 10, 1e-14);
        return std::exp(-half_gm_ * y) * 2.0 / std::sqrt(detail::kPi) * e;
    }

    /// Expected total size of subordinator jumps below the truncation level over dt.
    double small_jump_mean() const { return small_jump_mean_; }
    /// Expected number of series terms generated per increment.
    double expected_terms() const { return gamma_max_; }
    double dt() const { return dt_; }

    /// One draw of X(t + dt) - X(t).
    double operator()(Rng& rng) const {
        std::exponential_distribution<double> expo(1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);

        double arrival = 0.0;
        double jumps = 0.0;
        std::size_t terms = 0;
        const double inv_alpha = 1.0 / alpha_;
        while (true) {
            arrival += expo(rng);
            if (arrival > gamma_max_) break;
            if (++terms > max_terms_) {
                throw NumericalError("CGMY jump series hit max_jump_terms before reaching the truncation level");
            }
            const double y = std::pow(series_scale_ * arrival, -inv_alpha);
            const double z = normal(rng);
            const double t = 0.5 * z * z;
            const double keep = std::exp(-half_gm_ * y) * std::pow(t / (t + half_b2_ * y), alpha_);
            if (unif(rng) <= keep) jumps += y;
        }
        const double time_change = jumps + small_jump_mean_;
        return drift_coef_ * time_change + std::sqrt(time_change) * normal(rng);
    }

private:
    double compute_small_jump_mean() const {
        // dt c_s int_0^eps y^{-alpha} h(y) dy with y = eps s^{1/(1-alpha)}.
        const double k = 1.0 / (1.0 - alpha_);
        auto f = [&](double s) { return thinning(eps_ * std::pow(s, k)); };
        const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 8, 1e-13);
        return dt_ * stable_const_ * std::pow(eps_, 1.0 - alpha_) * k * integral;
    }

    CgmyParams params_;
    double dt_;
    double eps_;
    std::size_t max_terms_;
    double alpha_ = 0.0;
    double drift_coef_ = 0.0;
    double half_b2_ = 0.0;
    double half_gm_ = 0.0;
    double stable_const_ = 0.0;
    double series_scale_ = 0.0;
    double gamma_max_ = 0.0;
    double small_jump_mean_ = 0.0;
};

/// Simulated prices, n_paths x (M+1); column 0 is t_0 = 0.
class PathMatrix {
public:
    PathMatrix(std::size_t n_paths, ExerciseSchedule schedule, std::uint64_t seed)
        : n_paths_(n_paths),
          n_cols_(static_cast<std::size_t>(schedule.num_exercises()) + 1),
          schedule_(std::move(schedule)),
          seed_(seed),
          prices_(n_paths_ * n_cols_, 0.0) {}

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_dates() const { return n_cols_; }
    const ExerciseSchedule& schedule() const { return schedule_; }
    std::uint64_t seed() const { return seed_; }

    double operator()(std::size_t path, std::size_t m) const { return prices_[path * n_cols_ + m]; }
    double& operator()(std::size_t path, std::size_t m) { return prices_[path * n_cols_ + m]; }

    std::span<const double> row(std::size_t path) const {
        return {prices_.data() + path * n_cols_, n_cols_};
    }
    std::span<double> row(std::size_t path) { return {prices_.data() + path * n_cols_, n_cols_}; }

    std::vector<double> column(std::size_t m) const {
        std::vector<double> out(n_paths_);
        for (std::size_t i = 0; i < n_paths_; ++i) out[i] = (*this)(i, m);
        return out;
    }

    const std::vector<double>& data() const { return prices_; }

private:
    std::size_t n_paths_;
    std::size_t n_cols_;
    ExerciseSchedule schedule_;
    std::uint64_t seed_;
    std::vector<double> prices_;
};

/// prices[i][m] = prices[i][m-1] exp((r - nu) dt + X_{i,m}), bit-identical for any thread count.
inline PathMatrix simulate_paths(const CgmyParams& params, const MarketSpec& market,
                                 const ExerciseSchedule& schedule, const SimConfig& cfg) {
    params.validate();
    market.validate();
    cfg.validate();
    const double dt = schedule.dt();
    const CgmyIncrementSampler sampler(params, dt, cfg.truncation_eps, cfg.max_jump_terms);
    const double drift = (market.r - convexity_adjustment(params)) * dt;
    PathMatrix paths(cfg.n_paths, schedule, cfg.seed);
    const std::size_t n_dates = paths.n_dates();

    parallel_for_chunks(cfg.n_paths, resolve_threads(cfg.threads), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng = path_rng(cfg.seed, i);
            auto row = paths.row(i);
            row[0] = market.S0;
            for (std::size_t m = 1; m < n_dates; ++m) {
                row[m] = row[m - 1] * std::exp(drift + sampler(rng));
            }
        }
    });
    return paths;
}

struct HistogramBin {
    double left_edge;
    std::size_t count;
};

/// Equal-width histogram of S_T over [lo, hi]; values outside are clamped into the end bins.
inline std::vector<HistogramBin> terminal_histogram(const PathMatrix& paths, std::size_t n_bins, double lo, double hi) {
    if (n_bins < 1) throw DomainError("histogram needs at least one bin");
    if (!(hi >= lo)) throw DomainError("histogram range must satisfy lo <= hi");
    std::vector<HistogramBin> bins(n_bins);
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) bins[b] = {lo + width * static_cast<double>(b), 0};
    const std::size_t last = paths.n_dates() - 1;
    for (std::size_t i = 0; i < paths.n_paths(); ++i) {
        const double s = paths(i, last);
        std::size_t b = 0;
        if (width > 0.0) {
            const double pos = std::floor((s - lo) / width);
            b = pos <= 0.0 ? 0 : std::min(n_bins - 1, static_cast<std::size_t>(pos));
        }
        ++bins[b].count;
    }
    return bins;
}

/// Histogram of S_T over the observed range.
inline std::vector<HistogramBin> terminal_histogram(const PathMatrix& paths, std::size_t n_bins) {
    const auto terminal = paths.column(paths.n_dates() - 1);
    const auto [lo, hi] = std::minmax_element(terminal.begin(), terminal.end());
    return terminal_histogram(paths, n_bins, *lo, *hi);
}

}  // namespace cgmyxva
