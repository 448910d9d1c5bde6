#pragma once

#include "ecgqa/types.hpp"

#include <span>

namespace ecgqa {

/// Temporal scale of one 2.5 s layout column: sec/pixel = 2.5 / w_col.
/// The calibration is carried along so callers can cross-check against the
/// nominal paper-speed scale.
double seconds_per_pixel(const Calibration& calib, int column_width_px);

/// Normalized high-frequency roughness: median |y[i+1] - 2 y[i] + y[i-1]|
/// divided by the P5..P95 amplitude span. Scale- and shift-invariant.
double jitter_ratio(std::span<const double> lead);

/// Fraction of interior samples where the sign of the first difference flips
/// relative to the previous nonzero step. Always in [0, 1].
double reversal_rate(std::span<const double> lead);

struct QualityCuts {
    double excellent = 0.005; // the published cut
    double good = 0.010;
    double fair = 0.020;
};

QualityTier quality_tier(double median_jitter, const QualityCuts& cuts = {});

} // namespace ecgqa
