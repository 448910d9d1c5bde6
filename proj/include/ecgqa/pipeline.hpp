#pragma once

#include "ecgqa/image.hpp"
#include "ecgqa/types.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ecgqa {

/// All tunable pipeline parameters, defaults matching the published table.
struct PipelineConfig {
    // Stage 1: rotation correction
    int hough_threshold = 1200;
    double hough_angle_window_deg = 30.0;
    double hough_angle_step_deg = 0.25;

    // Stage 2: recording area detection
    double red_excess_threshold = 20.0;
    double red_coverage_fraction = 0.05;

    // Stage 3: grid suppression
    int grid_median_kernel = 21;
    double desat_divisor_min = 25.0;
    double desat_divisor_max = 80.0;

    // Stage 4: binarization and trace extraction
    double density_cap_gray = 0.05;
    double density_cap_red = 0.08;
    double scoring_decay_scale = 10.0;
    int history_window = 15;
    double outlier_reject_factor = 3.0; // times P75 of recent deviations
    double search_band_fraction = 0.20; // of ROI height

    // Stage 5: six-stage conditioning
    std::array<double, 3> median_cascade_breakpoints = {0.08, 0.15, 0.25};
    double gaussian_sigma_mild = 1.5;
    double gaussian_sigma_heavy_max = 5.5;
    double baseline_gradient_percentile = 85.0;
    double butterworth_cutoff_hz = 0.5;
    int butterworth_order = 2;
    double spike_threshold_fraction = 0.012;
    int short_spike_max = 3;
    int long_cluster_min = 4;
    int long_cluster_max = 25;
    double step_spike_iqr_factor = 4.0;
    int step_spike_max_len = 2;

    // Amplitude/rate conversion
    double assumed_mm_per_mv = 10.0;
    double target_rate_hz = 500.0;

    std::string to_json() const;
    static PipelineConfig from_json(const std::string& text);
    static PipelineConfig load(const std::string& path);
};

struct GrayImage {
    int width = 0, height = 0;
    std::vector<std::uint8_t> v; // row-major, darker = trace

    std::uint8_t at(int x, int y) const {
        return v[static_cast<std::size_t>(y) * width + x];
    }
};

enum class GridStrategyKind { A_color_projection, B_intensity, C_margin_trim };

const char* to_string(GridStrategyKind kind);

struct GridStrategy {
    GridStrategyKind strategy = GridStrategyKind::C_margin_trim;
    int roi_x0 = 0, roi_y0 = 0, roi_w = 0, roi_h = 0;
    int column_width_px = 0; // roi_w / 4
    int row_height_px = 0;   // roi_h / 4
    double confidence = 0.0;
};

struct RotationResult {
    EcgRaster raster;
    double angle_deg = 0.0;   // measured skew; image was rotated by -angle
    bool no_grid_warning = false;
};

struct TraceExtraction {
    std::vector<double> y_px;        // one sub-pixel y per raster column
    std::vector<double> score;       // winning predictive score
    std::vector<std::uint8_t> gap;   // 1 where passes 1-2 found nothing
    std::vector<std::uint8_t> pass;  // provenance: 1, 2 or 3
    bool valid = false;
    double gap_fraction = 0.0;       // columns resolved only by pass 3
};

struct ConditioningStats {
    int step_count = 0;   // stage-5 step artifacts interpolated
    int spike_count = 0;  // stage-6 residual spikes replaced
    std::vector<int> median_kernels; // cascade kernels actually applied
};

// --- Stage operations -------------------------------------------------------

RotationResult correct_rotation(const EcgRaster& raster, const PipelineConfig& cfg);

GridStrategy detect_area(const EcgRaster& raster, const PipelineConfig& cfg);

GrayImage suppress_grid(const EcgRaster& raster, const GridStrategy& strategy,
                        const PipelineConfig& cfg);

struct CellRect {
    int x0 = 0, y0 = 0, w = 0, h = 0;
};

TraceExtraction extract_trace(const GrayImage& suppressed, const CellRect& cell,
                              const GridStrategy& strategy, const PipelineConfig& cfg);

/// Six-stage conditioning chain on a millivolt series sampled at `rate`.
std::vector<double> condition_signal(std::span<const double> raw_mv, double rate,
                                     const PipelineConfig& cfg,
                                     ConditioningStats* stats = nullptr);

// --- Whole-image pipeline ----------------------------------------------------

struct LeadOutcome {
    bool valid = false;
    double jitter = 0.0; // post-conditioning; 0 when not computable
    bool jitter_defined = false;
    double gap_fraction = 1.0;
    int spike_count = 0;
    int step_count = 0;
    double t0_s = 0.0; // record time of the lead's first sample
};

struct DigitizeResult {
    bool ok = false;
    std::string failure_reason;
    DigitalEcg signal;
    std::map<LeadId, LeadOutcome> leads;
    GridStrategy strategy;
    double rotation_angle_deg = 0.0;
    bool no_grid_warning = false;
    double seconds_per_pixel = 0.0;
    double median_jitter = 0.0; // over valid standard leads
    int valid_lead_count = 0;

    std::string report_json() const;
};

DigitizeResult digitize(const EcgRaster& raster, const PipelineConfig& cfg);

} // namespace ecgqa
