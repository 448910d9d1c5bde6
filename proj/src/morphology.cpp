#include "ecgqa/morphology.hpp"

#include "ecgqa/dsp.hpp"
#include "ecgqa/error.hpp"
#include "ecgqa/stats.hpp"

#include <algorithm>
#include <cmath>

namespace ecgqa {

namespace {

std::vector<double> moving_average(std::span<const double> x, int window) {
    const int n = static_cast<int>(x.size());
    std::vector<double> out(n, 0.0);
    double acc = 0.0;
    int count = 0;
    const int r = window / 2;
    for (int i = 0; i < std::min(n, r); ++i) {
        acc += x[i];
        ++count;
    }
    for (int i = 0; i < n; ++i) {
        if (i + r < n) {
            acc += x[i + r];
            ++count;
        }
        if (i - r - 1 >= 0) {
            acc -= x[i - r - 1];
            --count;
        }
        out[i] = acc / std::max(1, count);
    }
    return out;
}

std::vector<int> local_maxima(const std::vector<double>& x, int min_sep) {
    std::vector<int> peaks;
    const int n = static_cast<int>(x.size());
    for (int i = 1; i + 1 < n; ++i) {
        if (x[i] > x[i - 1] && x[i] >= x[i + 1]) {
            if (!peaks.empty() && i - peaks.back() < min_sep) {
                if (x[i] > x[peaks.back()]) peaks.back() = i;
            } else {
                peaks.push_back(i);
            }
        }
    }
    return peaks;
}

} // namespace

std::vector<int> detect_beats(std::span<const double> lead, double rate) {
    if (rate <= 0) throw EcgError(ErrorKind::ParameterError, "rate must be positive");
    if (static_cast<double>(lead.size()) / rate < 2.0)
        throw EcgError(ErrorKind::InsufficientSignal, "beat detection needs >= 2 s");

    // QRS energy band.
    auto bp = dsp::highpass_zero_phase(lead, rate, 8.0, 2);
    bp = dsp::lowpass_zero_phase(bp, rate, 16.0, 2);

    const int n = static_cast<int>(bp.size());
    std::vector<double> rect(n, 0.0);
    for (int i = 1; i + 1 < n; ++i) rect[i] = std::abs((bp[i + 1] - bp[i - 1]) / 2.0);
    const auto ma = moving_average(rect, std::max(3, static_cast<int>(0.08 * rate)));

    const int refractory = static_cast<int>(0.2 * rate);
    const auto peaks = local_maxima(ma, refractory);
    if (peaks.empty()) return {};

    // Adaptive dual thresholds seeded from the head of the recording.
    const int head = std::min(n, static_cast<int>(2.0 * rate));
    double spk = *std::max_element(ma.begin(), ma.begin() + head);
    double npk =
        stats::mean(std::span<const double>(ma.data(), static_cast<std::size_t>(head))) * 0.5;
    auto threshold = [&]() { return npk + 0.25 * (spk - npk); };

    std::vector<int> beats;
    std::vector<int> noise_peaks;
    for (int p : peaks) {
        if (!beats.empty() && p - beats.back() < refractory) continue;
        if (ma[p] >= threshold()) {
            spk = 0.125 * ma[p] + 0.875 * spk;
            beats.push_back(p);
        } else {
            npk = 0.125 * ma[p] + 0.875 * npk;
            noise_peaks.push_back(p);
        }
        // Search-back: a gap of more than 1.66x the running RR re-examines
        // skipped peaks at half threshold.
        if (beats.size() >= 2) {
            const std::size_t m = std::min<std::size_t>(8, beats.size() - 1);
            double rr_sum = 0.0;
            for (std::size_t i = beats.size() - m; i < beats.size(); ++i)
                rr_sum += beats[i] - beats[i - 1];
            const double rr_avg = rr_sum / static_cast<double>(m);
            if (p - beats.back() > 1.66 * rr_avg) {
                int best = -1;
                for (int q : noise_peaks)
                    if (q > beats.back() + refractory && q < p - refractory &&
                        ma[q] >= 0.5 * threshold() && (best < 0 || ma[q] > ma[best]))
                        best = q;
                if (best >= 0) {
                    auto pos = std::lower_bound(beats.begin(), beats.end(), best);
                    beats.insert(pos, best);
                    spk = 0.125 * ma[best] + 0.875 * spk;
                }
            }
        }
    }

    // Refine each fiducial to the strongest bandpassed deflection nearby.
    const int half = static_cast<int>(0.06 * rate);
    for (int& b : beats) {
        int best = b;
        for (int i = std::max(0, b - half); i <= std::min(n - 1, b + half); ++i)
            if (std::abs(bp[i]) > std::abs(bp[best])) best = i;
        b = best;
    }
    std::sort(beats.begin(), beats.end());
    beats.erase(std::unique(beats.begin(), beats.end()), beats.end());
    return beats;
}

double bazett_qtc(double qt_ms, double rr_ms) {
    if (qt_ms <= 0 || rr_ms <= 0)
        throw EcgError(ErrorKind::ParameterError, "intervals must be positive");
    return qt_ms / std::sqrt(rr_ms / 1000.0);
}

namespace {

struct BeatIntervals {
    std::optional<double> pr_ms;
    std::optional<double> qt_ms;
};

BeatIntervals measure_beat(std::span<const double> smoothed, double rate, int r, double rr_s) {
    BeatIntervals out;
    const int n = static_cast<int>(smoothed.size());
    auto idx = [&](double seconds_from_r) {
        return r + static_cast<int>(std::lround(seconds_from_r * rate));
    };

    // Local baseline from the quiet stretch before the P wave.
    const int b0 = std::clamp(idx(-0.34), 0, n - 1), b1 = std::clamp(idx(-0.26), 0, n - 1);
    if (b1 <= b0) return out;
    std::vector<double> seg(smoothed.begin() + b0, smoothed.begin() + b1 + 1);
    const double baseline = stats::median(seg);
    const double r_amp = smoothed[r] - baseline;
    if (std::abs(r_amp) < 1e-6) return out;
    const double polarity = r_amp > 0 ? 1.0 : -1.0;

    // QRS onset: walk back until the deflection settles near baseline.
    int qrs_on = -1;
    {
        const int lo = std::clamp(idx(-0.10), 0, n - 1);
        int quiet = 0;
        for (int i = r; i >= lo; --i) {
            if (std::abs(smoothed[i] - baseline) < 0.05 * std::abs(r_amp)) {
                if (++quiet >= 3) {
                    qrs_on = i + 2;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    if (qrs_on < 0) return out;

    // P wave: dominant same-polarity deflection before the QRS.
    {
        const int lo = std::clamp(idx(-0.25), 0, n - 1);
        const int hi = std::clamp(qrs_on - static_cast<int>(0.03 * rate), 0, n - 1);
        if (hi > lo) {
            int p_peak = lo;
            for (int i = lo; i <= hi; ++i)
                if (polarity * (smoothed[i] - baseline) >
                    polarity * (smoothed[p_peak] - baseline))
                    p_peak = i;
            const double p_amp = polarity * (smoothed[p_peak] - baseline);
            if (p_amp > 0.03 * std::abs(r_amp)) {
                int p_on = p_peak;
                const int plo = std::max(0, p_peak - static_cast<int>(0.12 * rate));
                for (int i = p_peak; i >= plo; --i) {
                    if (polarity * (smoothed[i] - baseline) < 0.1 * p_amp) {
                        p_on = i;
                        break;
                    }
                    p_on = i;
                }
                out.pr_ms = (qrs_on - p_on) / rate * 1000.0;
            }
        }
    }

    // T wave and its end.
    {
        const int lo = std::clamp(idx(0.15), 0, n - 1);
        const int hi = std::clamp(idx(std::min(0.45, std::max(0.2, rr_s * 0.8))), 0, n - 1);
        if (hi > lo) {
            int t_peak = lo;
            for (int i = lo; i <= hi; ++i)
                if (polarity * (smoothed[i] - baseline) >
                    polarity * (smoothed[t_peak] - baseline))
                    t_peak = i;
            const double t_amp = polarity * (smoothed[t_peak] - baseline);
            if (t_amp > 0.03 * std::abs(r_amp)) {
                int t_end = t_peak;
                const int thi = std::min(n - 1, t_peak + static_cast<int>(0.20 * rate));
                for (int i = t_peak; i <= thi; ++i) {
                    t_end = i;
                    if (polarity * (smoothed[i] - baseline) < 0.1 * t_amp) break;
                }
                out.qt_ms = (t_end - qrs_on) / rate * 1000.0;
            }
        }
    }
    return out;
}

} // namespace

MorphologyReport analyze_morphology(std::span<const double> lead, double rate) {
    if (rate <= 0) throw EcgError(ErrorKind::ParameterError, "rate must be positive");
    if (static_cast<double>(lead.size()) / rate < 5.0)
        throw EcgError(ErrorKind::InsufficientSignal, "morphology analysis needs >= 5 s");

    MorphologyReport report;
    const std::vector<int> beats = detect_beats(lead, rate);
    report.beat_count = static_cast<int>(beats.size());
    if (beats.size() < 2) return report;

    std::vector<double> rrs;
    for (std::size_t i = 1; i < beats.size(); ++i)
        rrs.push_back((beats[i] - beats[i - 1]) / rate * 1000.0);
    report.rr_ms = stats::median(rrs);
    report.heart_rate_bpm = 60000.0 / *report.rr_ms;

    const auto smoothed = dsp::gaussian_smooth(lead, 0.010 * rate);
    std::vector<double> prs, qts;
    const double rr_s = *report.rr_ms / 1000.0;
    for (int r : beats) {
        const BeatIntervals bi = measure_beat(smoothed, rate, r, rr_s);
        if (bi.pr_ms) prs.push_back(*bi.pr_ms);
        if (bi.qt_ms) qts.push_back(*bi.qt_ms);
    }
    if (prs.size() * 2 >= beats.size()) report.pr_ms = stats::median(prs);
    if (qts.size() * 2 >= beats.size()) report.qt_ms = stats::median(qts);
    if (report.qt_ms) report.qtc_ms = bazett_qtc(*report.qt_ms, *report.rr_ms);

    report.flags.heart_rate =
        *report.heart_rate_bpm < 30.0 || *report.heart_rate_bpm > 220.0;
    if (report.pr_ms) report.flags.pr = *report.pr_ms < 120.0 || *report.pr_ms > 200.0;
    if (report.qtc_ms) report.flags.qtc = *report.qtc_ms < 340.0 || *report.qtc_ms > 500.0;
    return report;
}

} // namespace ecgqa
