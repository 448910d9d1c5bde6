#pragma once

#include "ecgqa/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ecgqa::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

/// Percentile with linear interpolation between order statistics
/// (index = p/100 * (n-1), the numpy default).
inline double percentile(std::span<const double> v, double p) {
    if (v.empty()) throw EcgError(ErrorKind::InvalidMetric, "percentile of empty range");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    if (p <= 0.0) return s.front();
    if (p >= 100.0) return s.back();
    const double idx = p / 100.0 * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const double frac = idx - static_cast<double>(lo);
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] * (1.0 - frac) + s[lo + 1] * frac;
}

inline double median(std::span<const double> v) { return percentile(v, 50.0); }

inline double iqr(std::span<const double> v) {
    return percentile(v, 75.0) - percentile(v, 25.0);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw EcgError(ErrorKind::UndefinedCorrelation, "pearson needs two equal-length series");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0)
        throw EcgError(ErrorKind::UndefinedCorrelation, "zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

/// Standardized third moment.
inline double skewness(std::span<const double> v) {
    if (v.size() < 3) throw EcgError(ErrorKind::InsufficientSignal, "skewness needs >= 3 samples");
    const double m = mean(v);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    if (m2 <= 0.0) throw EcgError(ErrorKind::UndefinedAmplitude, "constant signal");
    return m3 / std::pow(m2, 1.5);
}

/// Fisher excess kurtosis (Gaussian -> 0).
inline double excess_kurtosis(std::span<const double> v) {
    if (v.size() < 4) throw EcgError(ErrorKind::InsufficientSignal, "kurtosis needs >= 4 samples");
    const double m = mean(v);
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m4 /= n;
    if (m2 <= 0.0) throw EcgError(ErrorKind::UndefinedAmplitude, "constant signal");
    return m4 / (m2 * m2) - 3.0;
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Monotone piecewise-linear map through (x, y) anchor points sorted by x.
/// Clamps outside the anchor range.
inline double piecewise_linear(double x, std::span<const std::pair<double, double>> anchors) {
    if (anchors.empty()) throw EcgError(ErrorKind::InvalidMetric, "no anchors");
    if (x <= anchors.front().first) return anchors.front().second;
    if (x >= anchors.back().first) return anchors.back().second;
    for (std::size_t i = 1; i < anchors.size(); ++i) {
        if (x <= anchors[i].first) {
            const auto& [x0, y0] = anchors[i - 1];
            const auto& [x1, y1] = anchors[i];
            if (x1 <= x0) return y1;
            const double t = (x - x0) / (x1 - x0);
            return y0 + t * (y1 - y0);
        }
    }
    return anchors.back().second;
}

} // namespace ecgqa::stats
