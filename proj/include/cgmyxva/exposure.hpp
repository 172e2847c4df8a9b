#pragma once

// Per-path exposures from a continuation-value engine and their aggregation into
// EE / EE* / PFE profiles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "cgmyxva/cos.hpp"
#include "cgmyxva/errors.hpp"
#include "cgmyxva/fpde.hpp"
#include "cgmyxva/model.hpp"
#include "cgmyxva/simulate.hpp"

namespace cgmyxva {

struct ContinuationValue {
    double value;
    bool clamped;
};

/// Continuation values served from an FPDE grid solution.
class FpdeContinuation {
public:
    explicit FpdeContinuation(const fpde::GridSolution& grid) : grid_(&grid) {}
    ContinuationValue operator()(int m, double S) const {
        const auto r = fpde::continuation_at(*grid_, m, S);
        return {r.value, r.clamped};
    }
    double value_at_start(double S0) const { return (*this)(0, S0).value; }

private:
    const fpde::GridSolution* grid_;
};

/// Continuation values served from a COS backward induction.
class CosContinuation {
public:
    explicit CosContinuation(const cos::CosState& state) : state_(&state) {}
    ContinuationValue operator()(int m, double S) const { return {cos::continuation_at(*state_, m, S), false}; }
    double value_at_start(double S0) const { return (*this)(0, S0).value; }

private:
    const cos::CosState* state_;
};

/// Exposure paths, n_paths x (M+1), row-major.
struct ExposureMatrix {
    std::size_t n_paths = 0;
    std::size_t n_dates = 0;
    std::vector<double> values;
    std::vector<int> exercised_at;  ///< first exercise date index, -1 if never
    std::size_t clamped = 0;        ///< continuation lookups outside the engine domain
    double start_value = 0.0;       ///< V^c(S0, t_0)

    double operator()(std::size_t path, std::size_t m) const { return values[path * n_dates + m]; }
};

/// Walks each path forward: exposure at t_0 is V^c(S0, t_0); at t_m (1 <= m < M) the path exercises
/// when payoff >= V^c, after which its exposure is 0; otherwise the exposure is max(V^c, 0).
/// Exposure at t_M is 0.
template <class Engine>
ExposureMatrix path_exposures(const PathMatrix& paths, const Engine& engine, const ContractSpec& contract,
                              unsigned threads = 0) {
    const std::size_t n = paths.n_paths();
    const std::size_t cols = paths.n_dates();
    const int M = static_cast<int>(cols) - 1;
    ExposureMatrix em;
    em.n_paths = n;
    em.n_dates = cols;
    em.values.assign(n * cols, 0.0);
    em.exercised_at.assign(n, -1);
    const auto start = engine(0, paths(0, 0));
    em.start_value = start.value;
    std::atomic<std::size_t> clamped{start.clamped ? n : 0};

    parallel_for_chunks(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
        std::size_t local_clamped = 0;
        for (std::size_t i = begin; i < end; ++i) {
            double* row = em.values.data() + i * cols;
            row[0] = start.value;
            for (int m = 1; m < M; ++m) {
                const double S = paths(i, static_cast<std::size_t>(m));
                const auto vc = engine(m, S);
                if (vc.clamped) ++local_clamped;
                if (payoff(contract, S) >= vc.value) {
                    em.exercised_at[i] = m;
                    break;
                }
                row[m] = std::max(vc.value, 0.0);
            }
        }
        clamped += local_clamped;
    });
    em.clamped = clamped.load();
    return em;
}

struct ExposureProfile {
    std::vector<double> dates;
    std::vector<double> ee;
    std::vector<double> ee_star;
    std::map<double, std::vector<double>> pfe;  ///< alpha -> quantile curve
    std::vector<double> epe;
    std::vector<double> ene;
};

/// Generalised-inverse quantile inf{x : F_n(x) >= alpha}: the ceil(alpha n)-th order statistic.
inline double empirical_quantile(std::vector<double> sample, double alpha) {
    if (sample.empty()) throw DomainError("quantile of an empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level must lie in (0,1)");
    const double n = static_cast<double>(sample.size());
    // Guard alpha n against representation error just above an integer.
    auto k = static_cast<std::size_t>(std::ceil(alpha * n * (1.0 - 1e-12)));
    k = std::clamp<std::size_t>(k, 1, sample.size());
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k - 1), sample.end());
    return sample[k - 1];
}

/// Sample mean computed about the first element, so an all-equal column averages to that value exactly.
inline double shifted_mean(const std::vector<double>& column) {
    if (column.empty()) return 0.0;
    const double pivot = column.front();
    double acc = 0.0;
    for (double v : column) acc += v - pivot;
    return pivot + acc / static_cast<double>(column.size());
}

inline ExposureProfile aggregate(const ExposureMatrix& em, const MarketSpec& market, const ExerciseSchedule& schedule,
                                 const std::vector<double>& alphas = {0.025, 0.975}) {
    if (em.n_dates != static_cast<std::size_t>(schedule.num_exercises()) + 1) {
        throw DomainError("exposure matrix and schedule disagree on the number of dates");
    }
    ExposureProfile out;
    out.dates = schedule.times();
    const std::size_t cols = em.n_dates;
    out.ee.resize(cols);
    out.ee_star.resize(cols);
    out.ene.assign(cols, 0.0);
    for (double a : alphas) out.pfe[a].resize(cols);
    std::vector<double> column(em.n_paths);
    for (std::size_t m = 0; m < cols; ++m) {
        for (std::size_t i = 0; i < em.n_paths; ++i) column[i] = em(i, m);
        out.ee[m] = shifted_mean(column);
        out.ee_star[m] = std::exp(-market.r * out.dates[m]) * out.ee[m];
        for (double a : alphas) out.pfe[a][m] = empirical_quantile(column, a);
    }
    out.epe = out.ee;
    return out;
}

}  // namespace cgmyxva
