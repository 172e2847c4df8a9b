#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cgmyxva/simulate.hpp"
#include "support/density_oracle.hpp"

using namespace cgmyxva;

namespace {

const CgmyParams kDefaults{1.0, 25.0, 26.0, 1.5};

std::vector<double> draws(const CgmyParams& p, double dt, std::size_t n, std::uint64_t seed) {
    CgmyIncrementSampler sampler(p, dt);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = path_rng(seed, i);
        out[i] = sampler(rng);
    }
    return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1));
}

const std::vector<double>& default_draws() {
    static const auto d = draws(kDefaults, 0.02, 100000, 20240611);
    return d;
}

}  // namespace

TEST(Sampler, EmpiricalCharacteristicFunctionMatches) {
    const auto& x = default_draws();
    const double tol = 5.0 / std::sqrt(static_cast<double>(x.size()));
    double worst = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double z = -50.0 + k;
        std::complex<double> acc(0.0, 0.0);
        for (double v : x) acc += std::polar(1.0, z * v);
        acc /= static_cast<double>(x.size());
        worst = std::max(worst, std::abs(acc - characteristic_function(kDefaults, z, 0.02)));
    }
    EXPECT_LE(worst, tol);
}

TEST(Sampler, MeanMatchesAnalyticFirstMoment) {
    const auto& x = default_draws();
    const double e = 1e-4;
    const double analytic =
        0.02 * ((log_characteristic_function(kDefaults, e) - log_characteristic_function(kDefaults, -e)) / (2.0 * e)).imag();
    const double se = stddev(x) / std::sqrt(static_cast<double>(x.size()));
    EXPECT_LE(std::abs(mean(x) - analytic), 3.0 * se);
}

TEST(Sampler, SymmetricLawHasZeroSkew) {
    const auto x = draws({1.0, 25.0, 25.0, 1.5}, 0.02, 100000, 99);
    const double m = mean(x);
    double m2 = 0.0, m3 = 0.0, m6 = 0.0;
    for (double v : x) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m6 += std::pow(d, 6);
    }
    const double n = static_cast<double>(x.size());
    m2 /= n;
    m3 /= n;
    m6 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    // Standard error of the sample skewness for a heavy-tailed symmetric law.
    const double se = std::sqrt(m6 / std::pow(m2, 3) / n);
    EXPECT_LE(std::abs(skew), 3.0 * se);
}

TEST(Sampler, KolmogorovSmirnovAgainstFourierDensity) {
    const auto& x = default_draws();
    const testsupport::CgmyCdf cdf(kDefaults, 0.02, -3.0, 3.0);
    EXPECT_NEAR(cdf.mass(), 1.0, 1e-6);
    const double d = testsupport::ks_statistic(x, cdf);
    EXPECT_LT(d, testsupport::kKsCritical1pct / std::sqrt(static_cast<double>(x.size())));
}

TEST(Sampler, RejectsBadInputsAndSignalsSeriesCap) {
    EXPECT_THROW(CgmyIncrementSampler(kDefaults, 0.0), DomainError);
    EXPECT_THROW(CgmyIncrementSampler(kDefaults, 0.02, 0.0), DomainError);
    CgmyIncrementSampler tiny_cap(kDefaults, 0.02, 1e-4, 3);
    auto rng = path_rng(1, 0);
    EXPECT_THROW(
        {
            for (int i = 0; i < 100; ++i) tiny_cap(rng);
        },
        NumericalError);
}

TEST(Paths, ShapeAnchoringAndPositivity) {
    MarketSpec market;
    SimConfig cfg;
    cfg.n_paths = 1;
    const auto one = simulate_paths(kDefaults, market, ExerciseSchedule(1.0, 1), cfg);
    ASSERT_EQ(one.n_paths(), 1u);
    ASSERT_EQ(one.n_dates(), 2u);
    EXPECT_EQ(one(0, 0), market.S0);

    cfg.n_paths = 500;
    const auto pm = simulate_paths(kDefaults, market, ExerciseSchedule(1.0, 50), cfg);
    for (std::size_t i = 0; i < pm.n_paths(); ++i) {
        EXPECT_EQ(pm(i, 0), market.S0);
        for (double v : pm.row(i)) EXPECT_GT(v, 0.0);
    }
}

TEST(Paths, BitIdenticalAcrossRunsAndThreadCounts) {
    MarketSpec market;
    SimConfig cfg;
    cfg.n_paths = 400;
    cfg.seed = 77;
    cfg.threads = 1;
    const ExerciseSchedule s(0.5, 30);
    const auto a = simulate_paths(kDefaults, market, s, cfg);
    cfg.threads = 3;
    const auto b = simulate_paths(kDefaults, market, s, cfg);
    const auto c = simulate_paths(kDefaults, market, s, cfg);
    EXPECT_EQ(a.data(), b.data());
    EXPECT_EQ(b.data(), c.data());
    cfg.seed = 78;
    EXPECT_NE(simulate_paths(kDefaults, market, s, cfg).data(), a.data());
}

class DefaultPaths : public ::testing::Test {
protected:
    static const PathMatrix& paths() {
        static const PathMatrix pm = [] {
            SimConfig cfg;
            cfg.n_paths = 10000;
            return simulate_paths(kDefaults, MarketSpec{}, ExerciseSchedule(1.0, 50), cfg);
        }();
        return pm;
    }
};

TEST_F(DefaultPaths, DiscountedPriceIsMartingaleAtEveryDate) {
    const auto& pm = paths();
    const MarketSpec market;
    for (std::size_t m = 1; m < pm.n_dates(); ++m) {
        auto col = pm.column(m);
        const double disc = std::exp(-market.r * pm.schedule().time(static_cast<int>(m)));
        for (auto& v : col) v *= disc;
        const double se = stddev(col) / std::sqrt(static_cast<double>(col.size()));
        EXPECT_LE(std::abs(mean(col) - market.S0), 3.0 * se) << "date " << m;
    }
}

TEST_F(DefaultPaths, TerminalMassBelowPriceBoundaries) {
    const auto col = paths().column(paths().n_dates() - 1);
    const auto n = static_cast<double>(col.size());
    const auto below400 = std::count_if(col.begin(), col.end(), [](double v) { return v < 400.0; });
    const auto above200 = std::count_if(col.begin(), col.end(), [](double v) { return v > 200.0; });
    EXPECT_GT(below400 / n, 0.99);
    EXPECT_LT(above200 / n, 0.05);
}

TEST_F(DefaultPaths, IncrementsStationaryAcrossDates) {
    const auto& pm = paths();
    std::vector<double> early, late;
    for (std::size_t i = 0; i < pm.n_paths(); ++i) {
        early.push_back(std::log(pm(i, 1) / pm(i, 0)));
        late.push_back(std::log(pm(i, 40) / pm(i, 39)));
    }
    const double n = static_cast<double>(early.size());
    const double crit = testsupport::kKsCritical1pct * std::sqrt(2.0 / n);
    EXPECT_LT(testsupport::ks_two_sample(early, late), crit);
}

TEST_F(DefaultPaths, HistogramConservesPaths) {
    const auto bins = terminal_histogram(paths(), 40);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    EXPECT_EQ(total, paths().n_paths());
}

TEST(Histogram, ConstantPathsSingleBin) {
    const ExerciseSchedule s(1.0, 1);
    PathMatrix pm(3, s, 0);
    for (std::size_t i = 0; i < 3; ++i) {
        pm(i, 0) = 40.0;
        pm(i, 1) = 40.0;
    }
    const auto bins = terminal_histogram(pm, 1);
    ASSERT_EQ(bins.size(), 1u);
    EXPECT_EQ(bins[0].count, 3u);
}
