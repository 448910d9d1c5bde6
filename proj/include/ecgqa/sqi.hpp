#pragma once

#include <span>

namespace ecgqa {

struct SqiVector {
    double pSQI = 0.0;   // 5-15 Hz band power fraction, in [0,1]
    double kSQI = 0.0;   // excess kurtosis
    double basSQI = 0.0; // beat-template correlation, in [-1,1]
    double snrSQI = 0.0; // 2-40 Hz in-band vs out-of-band power, dB
    double sSQI = 0.0;   // skewness
};

struct SqiConfig {
    // Alternative pSQI denominator: 5-40 Hz instead of total power.
    bool psqi_qrs_band_denominator = false;
};

/// Five signal quality indices over >= 2 s of signal.
SqiVector compute_sqis(std::span<const double> lead, double rate, const SqiConfig& cfg = {});

/// Band diagnostics used by routing and action selection.
struct BandDiagnostics {
    double wander_power_ratio = 0.0;    // power below 1 Hz / total
    double powerline_power_ratio = 0.0; // power in 45-65 Hz / total
    double dominant_wander_hz = 0.0;    // strongest bin below 1.5 Hz
    double dominant_powerline_hz = 0.0; // 50 or 60, the stronger band
};

BandDiagnostics band_diagnostics(std::span<const double> lead, double rate);

} // namespace ecgqa
