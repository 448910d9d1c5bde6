#pragma once

#include <span>

namespace ecgqa {

struct FidelityMetrics {
    double pcc = 0.0;
    double rmse = 0.0;          // mV
    double snr = 0.0;           // dB
    double dtw = 0.0;           // mV * samples
    double ssim = 0.0;          // 1-D adaptation
    double alignment_lag = 0.0; // seconds, positive = extracted is delayed
};

/// Classic dynamic-programming DTW with |a - b| step cost, full window.
double dtw_distance(std::span<const double> a, std::span<const double> b);

/// Aligns by cross-correlation within +-0.5 s, truncates to the overlap, and
/// computes the five fidelity metrics. Both series must cover >= 2 s at the
/// shared rate; zero-variance input raises undefined-correlation.
FidelityMetrics compute_fidelity(std::span<const double> extracted,
                                 std::span<const double> reference, double rate);

} // namespace ecgqa
