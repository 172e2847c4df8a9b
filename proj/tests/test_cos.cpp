#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "cgmyxva/cos.hpp"
#include "cgmyxva/fpde.hpp"

using namespace cgmyxva;
using namespace cgmyxva::cos;

namespace {

const CgmyParams kDefaults{1.0, 25.0, 26.0, 1.5};

ContractSpec contract(double K, double T, int M, OptionKind kind = OptionKind::Call) { return {K, T, M, kind}; }

CosState induct(const ContractSpec& c, CosConfig cfg = {}, MarketSpec market = {}) {
    return backward_induction(kDefaults, market, c, ExerciseSchedule(c), cfg);
}

// Identity transition on [a, b]: evaluate() becomes the plain cosine series.
Transition identity_transition(double a, double b, int N) {
    Transition tr;
    tr.a = a;
    tr.b = b;
    tr.dt = 0.0;
    tr.discount = 1.0;
    tr.phi.assign(static_cast<std::size_t>(N), {1.0, 0.0});
    return tr;
}

}  // namespace

TEST(TruncationRange, DefaultHalfWidth) {
    const auto [a, b] = truncation_range(kDefaults, 0.05, 1.0, 0.0, 8.0);
    EXPECT_NEAR(0.5 * (b - a), 6.8379012559385453387, 1e-13);
    EXPECT_NEAR(0.5 * (a + b), -0.30101503636464512156, 1e-13);
}

TEST(TruncationRange, ContainsConditioningPoint) {
    for (auto [K, T, C] : {std::tuple{50.0, 1.0, 1.0}, {40.0, 1.0, 1.0}, {50.0, 0.5, 0.5}, {40.0, 0.5, 0.5}}) {
        const CgmyParams p{C, 25.0, 26.0, 1.5};
        const double x = std::log(40.0 / K);
        for (double L : {6.0, 8.0, 10.0}) {
            const auto [a, b] = truncation_range(p, 0.05, T, x, L);
            EXPECT_LT(a, x);
            EXPECT_GT(b, x);
            EXPECT_LT(a, 0.0);
            EXPECT_GT(b, 0.0);
        }
    }
}

TEST(Chi, Examples) {
    EXPECT_NEAR(chi_coefficient(0, 0.2, 1.1, -1.0, 3.0), std::exp(1.1) - std::exp(0.2), 1e-15);
    EXPECT_EQ(chi_coefficient(5, 0.7, 0.7, -1.0, 3.0), 0.0);
    EXPECT_NEAR(chi_coefficient(3, 0.0, 1.0, -2.0, 2.0), 1.3442697122355631478, 1e-14);
    EXPECT_NEAR(cosine_integral(0, 0.2, 1.1, -1.0, 3.0), 0.9, 1e-15);
}

TEST(Psi, ZeroContinuation) {
    const auto tr = Transition(kDefaults, 0.05, 0.02, -5.0, 5.0, 32);
    for (double v : psi_coefficients(std::vector<double>(32, 0.0), tr, -1.0, 2.0)) EXPECT_EQ(v, 0.0);
}

TEST(Psi, SingleModeOrthogonality) {
    const double a = -3.0, b = 4.0;
    const int N = 16;
    const auto tr = identity_transition(a, b, N);
    for (int j : {1, 5, 11}) {
        std::vector<double> H(N, 0.0);
        H[static_cast<std::size_t>(j)] = 1.0;
        const auto psi = psi_coefficients(H, tr, a, b);
        for (int k = 0; k < N; ++k) EXPECT_NEAR(psi[static_cast<std::size_t>(k)], k == j ? 0.5 * (b - a) : 0.0, 1e-13);
    }
}

TEST(Psi, MatchesQuadratureOnSubinterval) {
    const double a = -4.0, b = 3.0;
    const int N = 32;
    const auto tr = Transition(kDefaults, 0.05, 0.02, a, b, N);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd;
    std::vector<double> H(N);
    for (int k = 0; k < N; ++k) H[static_cast<std::size_t>(k)] = nd(rng) / (1.0 + k * k);
    const double c = -1.3, d = 0.8;
    const auto psi = psi_coefficients(H, tr, c, d);
    for (int k = 0; k < N; ++k) {
        auto f = [&](double y) { return tr.evaluate(H, y).first * std::cos(tr.u(k) * (y - a)); };
        const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, c, d, 15, 1e-13);
        EXPECT_NEAR(psi[static_cast<std::size_t>(k)], q, 1e-8) << "k=" << k;
    }
}

TEST(Evaluate, FirstTermHalved) {
    const auto tr = Transition(kDefaults, 0.05, 0.02, -5.0, 5.0, 24);
    std::vector<double> H(24);
    for (int k = 0; k < 24; ++k) H[static_cast<std::size_t>(k)] = std::cos(0.3 * k) / (1.0 + k);
    const double x = 0.37;
    double full = 0.0;
    for (int k = 0; k < 24; ++k) {
        const double hk = k == 0 ? 0.5 * H[0] : H[static_cast<std::size_t>(k)];
        full += (tr.phi[static_cast<std::size_t>(k)] * std::polar(1.0, tr.u(k) * (x - tr.a))).real() * hk;
    }
    EXPECT_NEAR(tr.evaluate(H, x).first, tr.discount * full, 1e-14);
}

TEST(Evaluate, SlopeIsDerivative) {
    const auto tr = Transition(kDefaults, 0.05, 0.02, -5.0, 5.0, 64);
    std::vector<double> H(64);
    for (int k = 0; k < 64; ++k) H[static_cast<std::size_t>(k)] = std::sin(0.7 * k + 0.2) / (1.0 + k * k);
    const double x = -0.4, e = 1e-6;
    const double fd = (tr.evaluate(H, x + e).first - tr.evaluate(H, x - e).first) / (2.0 * e);
    EXPECT_NEAR(tr.evaluate(H, x).second, fd, 1e-7);
}

TEST(Continuation, ZeroCoefficientsAndEnvelope) {
    const auto c = contract(50.0, 1.0, 5);
    auto st = induct(c);
    const auto saved = st.hk[2];
    std::fill(st.hk[2].begin(), st.hk[2].end(), 0.0);
    EXPECT_EQ(continuation_at(st, 1, 40.0), 0.0);
    st.hk[2] = saved;
    double env = 0.5 * std::abs(saved[0]);
    for (std::size_t k = 1; k < saved.size(); ++k) env += std::abs(saved[k]);
    for (double S : {5.0, 40.0, 90.0}) EXPECT_LE(std::abs(continuation_at(st, 1, S)), st.transition.discount * env);
    EXPECT_EQ(continuation_at(st, 5, 60.0), 10.0);
    EXPECT_THROW(continuation_at(st, 1, -1.0), DomainError);
    EXPECT_THROW(continuation_at(st, 6, 40.0), DomainError);
}

TEST(Induction, EuropeanMatchesDirectFormula) {
    const auto c = contract(50.0, 1.0, 1);
    const CosConfig cfg;
    const auto [a, b] = truncation_range(kDefaults, 0.05, 1.0, std::log(40.0 / 50.0), cfg.L);
    const double x = std::log(40.0 / 50.0);
    double sum = 0.0;
    for (int k = 0; k < cfg.n_terms; ++k) {
        const double u = k * detail::kPi / (b - a);
        const double vk = 2.0 / (b - a) * 50.0 * (chi_coefficient(k, 0.0, b, a, b) - cosine_integral(k, 0.0, b, a, b));
        const auto term = characteristic_function(kDefaults, u, 1.0) * std::polar(1.0, u * (x - a + 0.05));
        sum += (k == 0 ? 0.5 : 1.0) * term.real() * vk;
    }
    EXPECT_NEAR(european_price(kDefaults, MarketSpec{}, c, cfg), std::exp(-0.05) * sum, 1e-10);
    EXPECT_NEAR(value_at(induct(c), 40.0), std::exp(-0.05) * sum, 1e-10);
}

TEST(Induction, PutCallParity) {
    const CosConfig cfg;
    const double C = european_price(kDefaults, MarketSpec{}, contract(50.0, 1.0, 1), cfg);
    const double P = european_price(kDefaults, MarketSpec{}, contract(50.0, 1.0, 1, OptionKind::Put), cfg);
    EXPECT_NEAR(C - P, 40.0 - 50.0 * std::exp(-0.05), 1e-6);
}

TEST(Induction, NonnegativeAndDominatesEuropean) {
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        const auto c = contract(50.0, 1.0, 50, kind);
        const auto st = induct(c);
        const double euro = european_price(kDefaults, MarketSpec{}, c, CosConfig{});
        const double berm = value_at(st, 40.0);
        EXPECT_GE(berm, 0.0);
        EXPECT_GE(berm, euro - 1e-10);
        if (kind == OptionKind::Put) {
            EXPECT_GT(berm, euro + 1e-3);
        }
    }
}

TEST(Induction, TermRefinement) {
    const auto c = contract(50.0, 1.0, 50);
    CosConfig lo, hi;
    lo.n_terms = 256;
    hi.n_terms = 1024;
    EXPECT_NEAR(value_at(induct(c, lo), 40.0), value_at(induct(c, hi), 40.0), 1e-6);
}

TEST(Induction, TruncationRobustness) {
    const auto c = contract(50.0, 1.0, 50);
    CosConfig l8, l10;
    l10.L = 10.0;
    EXPECT_NEAR(value_at(induct(c, l8), 40.0), value_at(induct(c, l10), 40.0), 1e-5);
}

TEST(ExercisePoint, TerminalAndNeverExerciseCall) {
    // Without dividends early exercise of a call is never optimal; the root found near the upper
    // truncation edge, where the cosine series loses accuracy, sits far outside the price range.
    const auto c = contract(50.0, 1.0, 50);
    const auto st = induct(c);
    EXPECT_EQ(st.x_star[50], 0.0);
    for (int m = 1; m < 50; ++m) {
        EXPECT_GT(st.x_star[static_cast<std::size_t>(m)], std::log(4000.0 / 50.0)) << "m=" << m;
        EXPECT_LE(st.x_star[static_cast<std::size_t>(m)], st.b);
    }
}

TEST(ExercisePoint, PutBoundaryMatchesFpdeWithinTwoCells) {
    const auto c = contract(50.0, 1.0, 50, OptionKind::Put);
    const auto st = induct(c);
    // The boundary gap shrinks like h^2; two cells are reached from N = 4096.
    fpde::WsgdConfig fine;
    fine.grid_n = 4096;
    const auto grid = fpde::solve_bermudan_grid(kDefaults, MarketSpec{}, c, ExerciseSchedule(c), fine);
    for (int m : {1, 25, 49}) {
        const auto& slice = grid.cont_values[static_cast<std::size_t>(m)];
        std::size_t n = 0;
        while (n < slice.size() && payoff(c, std::exp(grid.x[n])) >= slice[n]) ++n;
        ASSERT_GT(n, 0u);
        const double fpde_boundary = grid.x[n - 1] - std::log(50.0);
        EXPECT_NEAR(st.x_star[static_cast<std::size_t>(m)], fpde_boundary, 2.0 * grid.h) << "m=" << m;
    }
}

TEST(ExercisePoint, NoSignChangeFallbacks) {
    const CosConfig cfg;
    const auto tr = Transition(kDefaults, 0.05, 0.02, -4.0, 4.0, 16);
    // Continuation identically zero: a call exercises on all of [0, b], a put on [a, 0].
    const std::vector<double> zero(16, 0.0);
    EXPECT_EQ(find_exercise_point(zero, tr, OptionKind::Call, 50.0, 0.0, cfg), 0.0);
    EXPECT_EQ(find_exercise_point(zero, tr, OptionKind::Put, 50.0, 0.0, cfg), 0.0);
    // Continuation far above any payoff: never exercise.
    std::vector<double> huge(16, 0.0);
    huge[0] = 1e9;
    EXPECT_EQ(find_exercise_point(huge, tr, OptionKind::Call, 50.0, 0.0, cfg), tr.b);
    EXPECT_EQ(find_exercise_point(huge, tr, OptionKind::Put, 50.0, 0.0, cfg), tr.a);
}

TEST(CosConfigCheck, Validation) {
    CosConfig c;
    EXPECT_NO_THROW(c.validate());
    c.n_terms = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = CosConfig{};
    c.L = -1.0;
    EXPECT_THROW(c.validate(), DomainError);
}
