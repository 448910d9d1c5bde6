#pragma once

#include "ecgqa/fidelity.hpp"
#include "ecgqa/morphology.hpp"
#include "ecgqa/pipeline.hpp"
#include "ecgqa/sqi.hpp"
#include "ecgqa/types.hpp"

#include <map>
#include <optional>
#include <string>

namespace ecgqa {

/// Bundled quantitative outputs of the grounding tools for one lead, plus the
/// extraction statistics the grounded judge anchors on. Serialized one JSON
/// record per lead; these records are embedded verbatim in judge requests.
struct ToolEvidence {
    LeadId lead = LeadId::I;
    bool valid = false;
    double duration_s = 0.0;
    std::optional<SqiVector> sqi;
    MorphologyReport morphology;
    bool morphology_full = false; // interval analysis ran (needs >= 5 s)
    std::optional<FidelityMetrics> fidelity;
    std::optional<BandDiagnostics> bands;
    std::optional<double> jitter_ratio;
    double reversal_rate = 0.0;
    double amplitude_span_mv = 0.0; // P98 - P2
    double gap_fraction = 1.0;
    int spike_count = 0;
    int step_count = 0;
    std::string strategy = "unknown";
    double strategy_confidence = 0.5;

    std::string to_json() const;
    static ToolEvidence from_json(const std::string& text);
};

/// Evidence computed from what the plug-in interface provides: the extracted
/// signal and (optionally) the original image. A digitizer report, when the
/// backend is our own pipeline, supplies exact extraction statistics;
/// otherwise they are estimated from the signal, and grid strategy comes from
/// running area detection on the raster.
std::map<LeadId, ToolEvidence> build_evidence(const DigitalEcg& signal,
                                              const EcgRaster* raster,
                                              const DigitizeResult* report,
                                              const DigitalEcg* reference,
                                              const PipelineConfig& cfg = {});

} // namespace ecgqa
