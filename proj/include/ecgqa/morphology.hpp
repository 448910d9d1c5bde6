#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ecgqa {

struct MorphologyFlags {
    bool heart_rate = false; // outside 30..220 bpm
    bool pr = false;         // outside 120..200 ms
    bool qtc = false;        // outside 340..500 ms

    int count() const { return int(heart_rate) + int(pr) + int(qtc); }
};

struct MorphologyReport {
    int beat_count = 0;
    std::optional<double> heart_rate_bpm;
    std::optional<double> rr_ms;
    std::optional<double> pr_ms;
    std::optional<double> qt_ms;
    std::optional<double> qtc_ms; // Bazett
    MorphologyFlags flags;
};

/// Hamilton-style QRS detection: bandpass, differentiate, rectify, moving
/// average, adaptive dual thresholds with a 200 ms refractory and RR-gap
/// search-back. Returns R-peak sample indices. Works on >= 2 s of signal.
std::vector<int> detect_beats(std::span<const double> lead, double rate);

/// QTc = QT / sqrt(RR seconds).
double bazett_qtc(double qt_ms, double rr_ms);

/// Full interval measurement and plausibility screen; requires >= 5 s.
/// With fewer than 2 beats the report carries the count and no intervals.
MorphologyReport analyze_morphology(std::span<const double> lead, double rate);

} // namespace ecgqa
