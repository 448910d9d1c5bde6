#pragma once

#include "ecgqa/image.hpp"
#include "ecgqa/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ecgqa {

enum class GridStyle { RedPink, Gray };

const char* to_string(GridStyle style);

/// Clinical-format rendering parameters: 4 columns x 3 rows of 2.5 s
/// segments plus a full-width rhythm strip of lead II.
struct RenderSpec {
    Calibration calib;
    GridStyle grid_style = GridStyle::RedPink;
    double grid_minor_mm = 1.0;
    double grid_major_mm = 5.0;
    double margin_mm = 8.0;
    double row_height_mm = 30.0;
    Rgb ink_color = {40, 40, 40};
    Rgb background = {255, 255, 255};
    double trace_width_px = 2.0;

    std::string to_json() const;
    static RenderSpec from_json(const std::string& text);
};

/// Controlled artifact injection, applied in the fixed order
/// skew -> fade -> grid_residual -> bleed -> wander -> noise.
struct DegradationSpec {
    double skew_degrees = 0.0;
    double fade = 1.0;                // ink intensity multiplier, 1 = none
    double grid_residual_boost = 1.0; // grid contrast multiplier, 1 = none
    double bleed_through = 0.0;       // ghost-trace opacity [0,1]
    double baseline_wander_mv = 0.0;
    double baseline_wander_hz = 0.5;
    double noise_sigma = 0.0; // additive Gaussian pixel noise
    std::uint64_t noise_seed = 0;

    bool is_identity() const;
    std::string to_json() const;
    static DegradationSpec from_json(const std::string& text);
};

/// Ground-truth geometry of a render, for oracle checks.
struct RenderTruth {
    struct LeadTrace {
        int x0 = 0;                // first raster column of the lead's cell
        std::vector<double> y_px;  // true sub-pixel trace y per column
        double baseline_y = 0.0;
        double t0_s = 0.0;         // record time at the first column
    };
    std::map<LeadId, LeadTrace> traces;
    std::vector<std::uint8_t> trace_mask; // >= 50% ink coverage
    std::vector<std::uint8_t> grid_mask;  // grid-colored, not under trace
    int width = 0, height = 0;
    int plot_x0 = 0, plot_y0 = 0, plot_w = 0, plot_h = 0;
    double px_per_sec = 0.0, px_per_mv = 0.0;

    bool trace_at(int x, int y) const {
        return trace_mask[static_cast<std::size_t>(y) * width + x] != 0;
    }
    bool grid_at(int x, int y) const {
        return grid_mask[static_cast<std::size_t>(y) * width + x] != 0;
    }
};

enum class SynthKind { Sinus, Noise, Flat };

/// Deterministic test-signal generator; 12 standard leads at 500 Hz with a
/// shared beat train and per-lead amplitude factors. The provenance string in
/// metadata.source_id is parseable by synth_from_source.
DigitalEcg synth_signal(SynthKind kind, double heart_rate_bpm, double duration_s,
                        double amplitude_mv, std::uint64_t seed);

/// Regenerate a synthetic signal from its provenance string.
DigitalEcg synth_from_source(const std::string& source_id);

EcgRaster render(const DigitalEcg& signal, const RenderSpec& spec);
EcgRaster render_with_truth(const DigitalEcg& signal, const RenderSpec& spec, RenderTruth* truth);

EcgRaster degrade(const EcgRaster& raster, const DegradationSpec& deg);

/// Rebuild a raster (render + recorded degradations) from its provenance.
EcgRaster regenerate_from_provenance(const std::string& provenance_json);

} // namespace ecgqa
