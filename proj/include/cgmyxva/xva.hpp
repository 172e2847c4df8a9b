#pragma once

// Credit and funding value adjustments from a discounted exposure profile.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgmyxva/errors.hpp"
#include "cgmyxva/exposure.hpp"
#include "cgmyxva/model.hpp"

namespace cgmyxva {

/// Marginal default probabilities PD(t_{m-1}, t_m); pd[m-1] belongs to interval m.
struct PdCurve {
    std::vector<double> pd;
};

/// PD(t_{m-1}, t_m) = exp(-s(t_{m-1}) t_{m-1} / LGD) - exp(-s(t_m) t_m / LGD).
inline PdCurve default_probabilities(const MarketSpec& market, const ExerciseSchedule& schedule) {
    const double lgd = market.lgd();
    if (!(lgd > 0.0)) throw DomainError("loss given default must be > 0");
    const auto& t = schedule.times();
    auto survival = [&](double u) { return u == 0.0 ? 1.0 : std::exp(-market.credit_spread(u) * u / lgd); };
    PdCurve out;
    out.pd.resize(t.size() - 1);
    for (std::size_t m = 1; m < t.size(); ++m) out.pd[m - 1] = survival(t[m - 1]) - survival(t[m]);
    return out;
}

/// CVA = -LGD sum_m EE*(t_m) PD(t_{m-1}, t_m).
inline double cva(const ExposureProfile& profile, const PdCurve& pd, const MarketSpec& market) {
    if (pd.pd.size() + 1 != profile.ee_star.size()) throw DomainError("PD curve and exposure profile disagree");
    double acc = 0.0;
    for (std::size_t m = 1; m < profile.ee_star.size(); ++m) acc += profile.ee_star[m] * pd.pd[m - 1];
    return -market.lgd() * acc;
}

/// FVA = -sum_m EE*(t_m) (exp(-s_f(t_{m-1}) t_{m-1}) - exp(-s_f(t_m) t_m)).
inline double fva(const ExposureProfile& profile, const MarketSpec& market) {
    const auto& t = profile.dates;
    auto discount = [&](double u) { return u == 0.0 ? 1.0 : std::exp(-market.funding_spread(u) * u); };
    double acc = 0.0;
    for (std::size_t m = 1; m < t.size(); ++m) acc += profile.ee_star[m] * (discount(t[m - 1]) - discount(t[m]));
    return -acc;
}

struct XvaReport {
    double cva_abs = 0.0;
    double fva_abs = 0.0;
    double xva_abs = 0.0;
    double base_value = 0.0;  ///< engine value at t_0, the percentage basis
    double strike = 0.0;      ///< alternative percentage basis
    std::string engine;
    std::uint64_t seed = 0;

    /// Percent of the t_0 option value.
    double cva_pct() const { return 100.0 * cva_abs / base_value; }
    double fva_pct() const { return 100.0 * fva_abs / base_value; }
    double xva_pct() const { return 100.0 * xva_abs / base_value; }
    /// Percent of the strike.
    double cva_pct_strike() const { return 100.0 * cva_abs / strike; }
    double fva_pct_strike() const { return 100.0 * fva_abs / strike; }
    double xva_pct_strike() const { return 100.0 * xva_abs / strike; }
};

inline XvaReport total_xva(double cva_value, double fva_value, double base_value, double strike, std::string engine,
                           std::uint64_t seed) {
    if (!(base_value > 0.0)) throw NumericalError("t_0 option value must be > 0 to express adjustments in percent");
    XvaReport r;
    r.cva_abs = cva_value;
    r.fva_abs = fva_value;
    r.xva_abs = cva_value + fva_value;
    r.base_value = base_value;
    r.strike = strike;
    r.engine = std::move(engine);
    r.seed = seed;
    return r;
}

}  // namespace cgmyxva
