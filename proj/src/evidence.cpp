#include "ecgqa/evidence.hpp"

#include "ecgqa/dsp.hpp"
#include "ecgqa/quality.hpp"
#include "ecgqa/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace ecgqa {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> number_or_null(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

} // namespace

std::string ToolEvidence::to_json() const {
    json j;
    j["lead"] = to_string(lead);
    j["valid"] = valid;
    j["duration_s"] = duration_s;
    if (sqi) {
        j["sqi"] = {{"pSQI", sqi->pSQI},
                    {"kSQI", sqi->kSQI},
                    {"basSQI", sqi->basSQI},
                    {"snrSQI", sqi->snrSQI},
                    {"sSQI", sqi->sSQI}};
    } else {
        j["sqi"] = nullptr;
    }
    j["morphology"] = {
        {"beat_count", morphology.beat_count},
        {"heart_rate_bpm", optional_number(morphology.heart_rate_bpm)},
        {"rr_ms", optional_number(morphology.rr_ms)},
        {"pr_ms", optional_number(morphology.pr_ms)},
        {"qt_ms", optional_number(morphology.qt_ms)},
        {"qtc_ms", optional_number(morphology.qtc_ms)},
        {"flags",
         {{"heart_rate", morphology.flags.heart_rate},
          {"pr", morphology.flags.pr},
          {"qtc", morphology.flags.qtc}}},
    };
    j["morphology_full"] = morphology_full;
    if (fidelity) {
        j["fidelity"] = {{"pcc", fidelity->pcc},     {"rmse", fidelity->rmse},
                         {"snr", fidelity->snr},     {"dtw", fidelity->dtw},
                         {"ssim", fidelity->ssim},   {"alignment_lag", fidelity->alignment_lag}};
    } else {
        j["fidelity"] = nullptr;
    }
    if (bands) {
        j["bands"] = {{"wander_power_ratio", bands->wander_power_ratio},
                      {"powerline_power_ratio", bands->powerline_power_ratio},
                      {"dominant_wander_hz", bands->dominant_wander_hz},
                      {"dominant_powerline_hz", bands->dominant_powerline_hz}};
    } else {
        j["bands"] = nullptr;
    }
    j["jitter_ratio"] = optional_number(jitter_ratio);
    j["reversal_rate"] = reversal_rate;
    j["amplitude_span_mv"] = amplitude_span_mv;
    j["gap_fraction"] = gap_fraction;
    j["spike_count"] = spike_count;
    j["step_count"] = step_count;
    j["strategy"] = strategy;
    j["strategy_confidence"] = strategy_confidence;
    return j.dump();
}

ToolEvidence ToolEvidence::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw EcgError(ErrorKind::SchemaViolation, "evidence record is not a JSON object");
    ToolEvidence e;
    const auto lead = lead_from_string(j.value("lead", ""));
    if (!lead) throw EcgError(ErrorKind::SchemaViolation, "evidence record lacks a valid lead");
    e.lead = *lead;
    e.valid = j.value("valid", false);
    e.duration_s = j.value("duration_s", 0.0);
    if (j.contains("sqi") && !j["sqi"].is_null()) {
        const json& s = j["sqi"];
        SqiVector v;
        v.pSQI = s.value("pSQI", 0.0);
        v.kSQI = s.value("kSQI", 0.0);
        v.basSQI = s.value("basSQI", 0.0);
        v.snrSQI = s.value("snrSQI", 0.0);
        v.sSQI = s.value("sSQI", 0.0);
        e.sqi = v;
    }
    if (j.contains("morphology") && j["morphology"].is_object()) {
        const json& m = j["morphology"];
        e.morphology.beat_count = m.value("beat_count", 0);
        e.morphology.heart_rate_bpm = number_or_null(m, "heart_rate_bpm");
        e.morphology.rr_ms = number_or_null(m, "rr_ms");
        e.morphology.pr_ms = number_or_null(m, "pr_ms");
        e.morphology.qt_ms = number_or_null(m, "qt_ms");
        e.morphology.qtc_ms = number_or_null(m, "qtc_ms");
        if (m.contains("flags") && m["flags"].is_object()) {
            e.morphology.flags.heart_rate = m["flags"].value("heart_rate", false);
            e.morphology.flags.pr = m["flags"].value("pr", false);
            e.morphology.flags.qtc = m["flags"].value("qtc", false);
        }
    }
    e.morphology_full = j.value("morphology_full", false);
    if (j.contains("fidelity") && !j["fidelity"].is_null()) {
        const json& f = j["fidelity"];
        FidelityMetrics fm;
        fm.pcc = f.value("pcc", 0.0);
        fm.rmse = f.value("rmse", 0.0);
        fm.snr = f.value("snr", 0.0);
        fm.dtw = f.value("dtw", 0.0);
        fm.ssim = f.value("ssim", 0.0);
        fm.alignment_lag = f.value("alignment_lag", 0.0);
        e.fidelity = fm;
    }
    if (j.contains("bands") && !j["bands"].is_null()) {
        const json& b = j["bands"];
        BandDiagnostics d;
        d.wander_power_ratio = b.value("wander_power_ratio", 0.0);
        d.powerline_power_ratio = b.value("powerline_power_ratio", 0.0);
        d.dominant_wander_hz = b.value("dominant_wander_hz", 0.0);
        d.dominant_powerline_hz = b.value("dominant_powerline_hz", 0.0);
        e.bands = d;
    }
    e.jitter_ratio = number_or_null(j, "jitter_ratio");
    e.reversal_rate = j.value("reversal_rate", 0.0);
    e.amplitude_span_mv = j.value("amplitude_span_mv", 0.0);
    e.gap_fraction = j.value("gap_fraction", 1.0);
    e.spike_count = j.value("spike_count", 0);
    e.step_count = j.value("step_count", 0);
    e.strategy = j.value("strategy", "unknown");
    e.strategy_confidence = j.value("strategy_confidence", 0.5);
    return e;
}

namespace {

// Fraction of samples sitting in long constant runs; proxy for gap filling
// when no extraction report is available.
double flat_run_fraction(std::span<const double> s, double rate) {
    const int min_run = std::max(3, static_cast<int>(0.05 * rate));
    const int n = static_cast<int>(s.size());
    int flat_samples = 0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && std::abs(s[j + 1] - s[j]) < 1e-9) ++j;
        const int run = j - i + 1;
        if (run >= min_run) flat_samples += run;
        i = j + 1;
    }
    return static_cast<double>(flat_samples) / std::max(1, n);
}

} // namespace

std::map<LeadId, ToolEvidence> build_evidence(const DigitalEcg& signal, const EcgRaster* raster,
                                              const DigitizeResult* report,
                                              const DigitalEcg* reference,
                                              const PipelineConfig& cfg) {
    std::string strategy_name = "unknown";
    double strategy_conf = 0.5;
    if (report && report->ok) {
        strategy_name = to_string(report->strategy.strategy);
        strategy_conf = report->strategy.confidence;
    } else if (raster) {
        try {
            const GridStrategy s = detect_area(*raster, cfg);
            strategy_name = to_string(s.strategy);
            strategy_conf = s.confidence;
        } catch (const EcgError&) {
            strategy_name = "none";
            strategy_conf = 0.0;
        }
    }

    std::map<LeadId, ToolEvidence> evidence;
    const double rate = signal.sample_rate_hz;

    for (const auto& [lead, samples] : signal.leads) {
        ToolEvidence e;
        e.lead = lead;
        e.duration_s = static_cast<double>(samples.size()) / rate;
        e.strategy = strategy_name;
        e.strategy_confidence = strategy_conf;

        if (report) {
            auto it = report->leads.find(lead);
            if (it != report->leads.end()) {
                e.valid = it->second.valid;
                e.gap_fraction = it->second.gap_fraction;
                e.spike_count = it->second.spike_count;
                e.step_count = it->second.step_count;
            }
        } else {
            e.valid = samples.size() >= 3 && stats::variance(samples) > 1e-12;
            e.gap_fraction = e.valid ? flat_run_fraction(samples, rate) : 1.0;
        }

        if (e.valid && e.duration_s < 2.0) e.valid = false; // too short for the tools
        if (e.valid) {
            try {
                e.sqi = compute_sqis(samples, rate);
                e.bands = band_diagnostics(samples, rate);
            } catch (const EcgError&) {
                e.sqi.reset();
                e.bands.reset();
            }
            if (!e.sqi || !e.bands) e.valid = false;
        }
        if (e.valid) {
            e.amplitude_span_mv =
                stats::percentile(samples, 98.0) - stats::percentile(samples, 2.0);
            if (e.duration_s >= 5.0) {
                try {
                    e.morphology = analyze_morphology(samples, rate);
                    e.morphology_full = true;
                } catch (const EcgError&) {
                }
            } else {
                try {
                    e.morphology.beat_count =
                        static_cast<int>(detect_beats(samples, rate).size());
                } catch (const EcgError&) {
                }
            }
            try {
                e.jitter_ratio = jitter_ratio(samples);
            } catch (const EcgError&) {
            }
            try {
                e.reversal_rate = reversal_rate(samples);
            } catch (const EcgError&) {
            }
        }

        if (reference && e.valid) {
            auto rit = reference->leads.find(lead == LeadId::RHYTHM ? LeadId::II : lead);
            if (rit != reference->leads.end()) {
                const double t0 = lead_window_start_s(lead);
                const double ref_rate = reference->sample_rate_hz;
                const int start = static_cast<int>(std::lround(t0 * ref_rate));
                const int want = static_cast<int>(
                    std::lround(e.duration_s * ref_rate));
                if (start >= 0 && start < static_cast<int>(rit->second.size())) {
                    const int avail = static_cast<int>(rit->second.size()) - start;
                    const int len = std::min(want, avail);
                    std::vector<double> window(rit->second.begin() + start,
                                               rit->second.begin() + start + len);
                    std::vector<double> ref_resampled =
                        ref_rate == rate ? window
                                         : dsp::resample_linear(window, ref_rate, rate);
                    try {
                        e.fidelity = compute_fidelity(samples, ref_resampled, rate);
                    } catch (const EcgError&) {
                    }
                }
            }
        }
        evidence[lead] = std::move(e);
    }
    return evidence;
}

} // namespace ecgqa
