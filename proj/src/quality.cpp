#include "ecgqa/quality.hpp"

#include "ecgqa/stats.hpp"

#include <cmath>

namespace ecgqa {

double seconds_per_pixel(const Calibration& calib, int column_width_px) {
    calib.validate();
    if (column_width_px <= 0)
        throw EcgError(ErrorKind::InvalidGeometry, "column width must be positive");
    return kColumnSeconds / static_cast<double>(column_width_px);
}

double jitter_ratio(std::span<const double> lead) {
    if (lead.size() < 3)
        throw EcgError(ErrorKind::InsufficientSignal, "jitter ratio needs >= 3 samples");
    const double span = stats::percentile(lead, 95.0) - stats::percentile(lead, 5.0);
    if (span <= 0.0)
        throw EcgError(ErrorKind::UndefinedAmplitude, "constant signal has no amplitude span");
    std::vector<double> second_diff;
    second_diff.reserve(lead.size() - 2);
    for (std::size_t i = 1; i + 1 < lead.size(); ++i)
        second_diff.push_back(std::abs(lead[i + 1] - 2.0 * lead[i] + lead[i - 1]));
    return stats::median(second_diff) / span;
}

double reversal_rate(std::span<const double> lead) {
    if (lead.size() < 3)
        throw EcgError(ErrorKind::InsufficientSignal, "reversal rate needs >= 3 samples");
    const std::size_t interior = lead.size() - 2;
    int prev_sign = 0;
    std::size_t flips = 0;
    for (std::size_t i = 0; i + 1 < lead.size(); ++i) {
        const double d = lead[i + 1] - lead[i];
        const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
        if (sign == 0) continue;
        if (prev_sign != 0 && sign != prev_sign) ++flips;
        prev_sign = sign;
    }
    return static_cast<double>(flips) / static_cast<double>(interior);
}

QualityTier quality_tier(double median_jitter, const QualityCuts& cuts) {
    if (median_jitter < 0.0 || !std::isfinite(median_jitter))
        throw EcgError(ErrorKind::InvalidMetric, "jitter must be a finite non-negative ratio");
    if (median_jitter < cuts.excellent) return QualityTier::Excellent;
    if (median_jitter < cuts.good) return QualityTier::Good;
    if (median_jitter < cuts.fair) return QualityTier::Fair;
    return QualityTier::Poor;
}

} // namespace ecgqa
