#include "ecgqa/sqi.hpp"

#include "ecgqa/dsp.hpp"
#include "ecgqa/error.hpp"
#include "ecgqa/morphology.hpp"
#include "ecgqa/stats.hpp"

#include <algorithm>
#include <cmath>

namespace ecgqa {

namespace {

// Mean Pearson correlation of beat-centered windows against their mean
// template; 0 when fewer than 2 usable beats.
double template_correlation(std::span<const double> lead, double rate) {
    std::vector<int> beats;
    try {
        beats = detect_beats(lead, rate);
    } catch (const EcgError&) {
        return 0.0;
    }
    const int half = static_cast<int>(0.3 * rate);
    std::vector<std::vector<double>> windows;
    for (int b : beats) {
        if (b - half < 0 || b + half >= static_cast<int>(lead.size())) continue;
        windows.emplace_back(lead.begin() + b - half, lead.begin() + b + half + 1);
    }
    if (windows.size() < 2) return 0.0;

    std::vector<double> tmpl(windows.front().size(), 0.0);
    for (const auto& w : windows)
        for (std::size_t i = 0; i < w.size(); ++i) tmpl[i] += w[i];
    for (double& v : tmpl) v /= static_cast<double>(windows.size());

    double best = -1.0;
    for (const auto& w : windows) {
        try {
            best = std::max(best, stats::pearson(w, tmpl));
        } catch (const EcgError&) {
        }
    }
    return best < -1.0 ? 0.0 : std::clamp(best, -1.0, 1.0);
}

} // namespace

SqiVector compute_sqis(std::span<const double> lead, double rate, const SqiConfig& cfg) {
    if (rate <= 0) throw EcgError(ErrorKind::ParameterError, "rate must be positive");
    if (static_cast<double>(lead.size()) / rate < 2.0)
        throw EcgError(ErrorKind::InsufficientSignal, "SQI computation needs >= 2 s");

    const auto ps = dsp::power_spectrum(lead, rate);
    const double nyquist = rate / 2.0;
    const double total = ps.band(0.0, nyquist + ps.bin_hz);
    const double qrs_band = ps.band(5.0, 15.0);
    const double inband = ps.band(2.0, 40.0);
    const double outband = std::max(total - inband, 0.0);

    SqiVector sqi;
    const double denom = cfg.psqi_qrs_band_denominator ? ps.band(5.0, 40.0) : total;
    sqi.pSQI = denom > 0 ? std::clamp(qrs_band / denom, 0.0, 1.0) : 0.0;
    sqi.snrSQI = 10.0 * std::log10(std::max(inband, 1e-30) / std::max(outband, 1e-30));
    sqi.kSQI = stats::excess_kurtosis(lead);
    sqi.sSQI = stats::skewness(lead);
    sqi.basSQI = template_correlation(lead, rate);
    return sqi;
}

BandDiagnostics band_diagnostics(std::span<const double> lead, double rate) {
    if (rate <= 0) throw EcgError(ErrorKind::ParameterError, "rate must be positive");
    if (lead.size() < 8) throw EcgError(ErrorKind::InsufficientSignal, "too few samples");
    const auto ps = dsp::power_spectrum(lead, rate);
    const double total = std::max(ps.total(), 1e-30);

    BandDiagnostics d;
    d.wander_power_ratio = ps.band(ps.bin_hz * 0.5, 1.0) / total;
    d.powerline_power_ratio = ps.band(45.0, 65.0) / total;

    double best = 0.0;
    for (std::size_t k = 1; k < ps.power.size(); ++k) {
        const double f = k * ps.bin_hz;
        if (f >= 1.5) break;
        if (ps.power[k] > best) {
            best = ps.power[k];
            d.dominant_wander_hz = f;
        }
    }
    d.dominant_powerline_hz = ps.band(45.0, 55.0) >= ps.band(55.0, 65.0) ? 50.0 : 60.0;
    return d;
}

} // namespace ecgqa
