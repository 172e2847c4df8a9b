#pragma once

// CGMY increment CDF from the characteristic function by FFT inversion, and KS helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "cgmyxva/model.hpp"

namespace testsupport {

class CgmyCdf {
public:
    /// Density of X_dt on [x0, x0 + n dx) by inverse FFT, then cumulative trapezoid sums.
    CgmyCdf(const cgmyxva::CgmyParams& p, double dt, double x0, double x1, int n = 1 << 16)
        : x0_(x0), dx_((x1 - x0) / n), cdf_(static_cast<std::size_t>(n)) {
        const double dz = 2.0 * cgmyxva::detail::kPi / (n * dx_);
        auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)));
        if (!buf) throw std::bad_alloc();
        for (int k = 0; k < n; ++k) {
            const double z = (k - n / 2) * dz;
            const std::complex<double> v = cgmyxva::characteristic_function(p, z, dt) * std::polar(1.0, -z * x0);
            buf[k][0] = v.real();
            buf[k][1] = v.imag();
        }
        fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
        std::vector<double> density(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const double sign = (j % 2 == 0) ? 1.0 : -1.0;
            density[static_cast<std::size_t>(j)] = std::max(0.0, sign * buf[j][0] * dz / (2.0 * cgmyxva::detail::kPi));
        }
        fftw_free(buf);
        double acc = 0.0;
        cdf_[0] = 0.0;
        for (std::size_t j = 1; j < density.size(); ++j) {
            acc += 0.5 * (density[j - 1] + density[j]) * dx_;
            cdf_[j] = acc;
        }
        mass_ = acc;
        for (auto& v : cdf_) v /= acc;
    }

    double operator()(double x) const {
        const double pos = (x - x0_) / dx_;
        if (pos <= 0.0) return 0.0;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= cdf_.size()) return 1.0;
        const double w = pos - static_cast<double>(i);
        return (1.0 - w) * cdf_[i] + w * cdf_[i + 1];
    }

    double mass() const { return mass_; }

private:
    double x0_;
    double dx_;
    double mass_ = 0.0;
    std::vector<double> cdf_;
};

/// One-sample KS statistic sup |F_n - F|.
template <class Cdf>
double ks_statistic(std::vector<double> sample, const Cdf& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

/// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

/// Asymptotic 1% critical value coefficient of the Kolmogorov distribution.
inline constexpr double kKsCritical1pct = 1.628;

}  // namespace testsupport
