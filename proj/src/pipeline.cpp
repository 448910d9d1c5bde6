#include "ecgqa/pipeline.hpp"

#include "ecgqa/dsp.hpp"
#include "ecgqa/quality.hpp"
#include "ecgqa/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

namespace ecgqa {

using nlohmann::json;

const char* to_string(GridStrategyKind kind) {
    switch (kind) {
        case GridStrategyKind::A_color_projection: return "A_color_projection";
        case GridStrategyKind::B_intensity: return "B_intensity";
        case GridStrategyKind::C_margin_trim: return "C_margin_trim";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Config (de)serialization, field names mirroring the parameter table
// ---------------------------------------------------------------------------

std::string PipelineConfig::to_json() const {
    json j{
        {"hough_threshold", hough_threshold},
        {"hough_angle_window_deg", hough_angle_window_deg},
        {"hough_angle_step_deg", hough_angle_step_deg},
        {"red_excess_threshold", red_excess_threshold},
        {"red_coverage_fraction", red_coverage_fraction},
        {"grid_median_kernel", grid_median_kernel},
        {"desat_divisor_min", desat_divisor_min},
        {"desat_divisor_max", desat_divisor_max},
        {"density_cap_gray", density_cap_gray},
        {"density_cap_red", density_cap_red},
        {"scoring_decay_scale", scoring_decay_scale},
        {"history_window", history_window},
        {"outlier_reject_factor", outlier_reject_factor},
        {"search_band_fraction", search_band_fraction},
        {"median_cascade_breakpoints", median_cascade_breakpoints},
        {"gaussian_sigma_mild", gaussian_sigma_mild},
        {"gaussian_sigma_heavy_max", gaussian_sigma_heavy_max},
        {"baseline_gradient_percentile", baseline_gradient_percentile},
        {"butterworth_cutoff_hz", butterworth_cutoff_hz},
        {"butterworth_order", butterworth_order},
        {"spike_threshold_fraction", spike_threshold_fraction},
        {"short_spike_max", short_spike_max},
        {"long_cluster_min", long_cluster_min},
        {"long_cluster_max", long_cluster_max},
        {"step_spike_iqr_factor", step_spike_iqr_factor},
        {"step_spike_max_len", step_spike_max_len},
        {"assumed_mm_per_mv", assumed_mm_per_mv},
        {"target_rate_hz", target_rate_hz},
    };
    return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw EcgError(ErrorKind::ConfigError, "pipeline config is not a JSON object");
    PipelineConfig c;
    c.hough_threshold = j.value("hough_threshold", c.hough_threshold);
    c.hough_angle_window_deg = j.value("hough_angle_window_deg", c.hough_angle_window_deg);
    c.hough_angle_step_deg = j.value("hough_angle_step_deg", c.hough_angle_step_deg);
    c.red_excess_threshold = j.value("red_excess_threshold", c.red_excess_threshold);
    c.red_coverage_fraction = j.value("red_coverage_fraction", c.red_coverage_fraction);
    c.grid_median_kernel = j.value("grid_median_kernel", c.grid_median_kernel);
    c.desat_divisor_min = j.value("desat_divisor_min", c.desat_divisor_min);
    c.desat_divisor_max = j.value("desat_divisor_max", c.desat_divisor_max);
    c.density_cap_gray = j.value("density_cap_gray", c.density_cap_gray);
    c.density_cap_red = j.value("density_cap_red", c.density_cap_red);
    c.scoring_decay_scale = j.value("scoring_decay_scale", c.scoring_decay_scale);
    c.history_window = j.value("history_window", c.history_window);
    c.outlier_reject_factor = j.value("outlier_reject_factor", c.outlier_reject_factor);
    c.search_band_fraction = j.value("search_band_fraction", c.search_band_fraction);
    if (j.contains("median_cascade_breakpoints")) {
        auto arr = j["median_cascade_breakpoints"];
        if (!arr.is_array() || arr.size() != 3)
            throw EcgError(ErrorKind::ConfigError, "median_cascade_breakpoints needs 3 values");
        for (int i = 0; i < 3; ++i) c.median_cascade_breakpoints[i] = arr[i].get<double>();
    }
    c.gaussian_sigma_mild = j.value("gaussian_sigma_mild", c.gaussian_sigma_mild);
    c.gaussian_sigma_heavy_max = j.value("gaussian_sigma_heavy_max", c.gaussian_sigma_heavy_max);
    c.baseline_gradient_percentile =
        j.value("baseline_gradient_percentile", c.baseline_gradient_percentile);
    c.butterworth_cutoff_hz = j.value("butterworth_cutoff_hz", c.butterworth_cutoff_hz);
    c.butterworth_order = j.value("butterworth_order", c.butterworth_order);
    c.spike_threshold_fraction = j.value("spike_threshold_fraction", c.spike_threshold_fraction);
    c.short_spike_max = j.value("short_spike_max", c.short_spike_max);
    c.long_cluster_min = j.value("long_cluster_min", c.long_cluster_min);
    c.long_cluster_max = j.value("long_cluster_max", c.long_cluster_max);
    c.step_spike_iqr_factor = j.value("step_spike_iqr_factor", c.step_spike_iqr_factor);
    c.step_spike_max_len = j.value("step_spike_max_len", c.step_spike_max_len);
    c.assumed_mm_per_mv = j.value("assumed_mm_per_mv", c.assumed_mm_per_mv);
    c.target_rate_hz = j.value("target_rate_hz", c.target_rate_hz);
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EcgError(ErrorKind::ConfigError, "cannot read config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

// ---------------------------------------------------------------------------
// Stage 1: Hough-based rotation correction
// ---------------------------------------------------------------------------

namespace {

struct HoughEstimate {
    bool found = false;
    double median_angle_deg = 0.0;
};

HoughEstimate hough_dominant_angle(const Image& img, const PipelineConfig& cfg) {
    const auto lum = to_luminance(img);
    const int bg = estimate_background_level(img);
    const int w = img.width(), h = img.height();

    std::vector<std::pair<int, int>> points;
    points.reserve(lum.size() / 8);
    const int dark_cut = bg - 8;
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = lum.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x)
            if (row[x] < dark_cut) points.emplace_back(x, y);
    }
    if (points.empty()) return {};

    // A near-horizontal line at angle phi satisfies y*cos(phi) - x*sin(phi) = rho.
    const double window = cfg.hough_angle_window_deg;
    const double step = cfg.hough_angle_step_deg;
    const int n_angles = static_cast<int>(std::lround(2.0 * window / step)) + 1;
    const int rho_offset = w; // rho in [-w*sin30, h + w*sin30] roughly
    const int n_rho = h + 2 * w;

    std::vector<double> qualifying_angles;
    std::vector<int> acc(n_rho);
    for (int ai = 0; ai < n_angles; ++ai) {
        const double phi = (-window + ai * step) * M_PI / 180.0;
        const double c = std::cos(phi), s = std::sin(phi);
        std::fill(acc.begin(), acc.end(), 0);
        for (const auto& [x, y] : points) {
            const int rho = static_cast<int>(std::lround(y * c - x * s)) + rho_offset;
            if (rho >= 0 && rho < n_rho) ++acc[rho];
        }
        const double phi_deg = -window + ai * step;
        for (int r = 0; r < n_rho; ++r)
            if (acc[r] >= cfg.hough_threshold) qualifying_angles.push_back(phi_deg);
    }
    if (qualifying_angles.empty()) return {};
    HoughEstimate est;
    est.found = true;
    est.median_angle_deg = stats::median(qualifying_angles);
    return est;
}

} // namespace

RotationResult correct_rotation(const EcgRaster& raster, const PipelineConfig& cfg) {
    raster.validate();
    RotationResult result;
    const HoughEstimate est = hough_dominant_angle(raster.pixels, cfg);
    if (!est.found) {
        result.raster = raster;
        result.angle_deg = 0.0;
        result.no_grid_warning = true;
        return result;
    }
    result.angle_deg = est.median_angle_deg;
    result.no_grid_warning = false;
    if (std::abs(est.median_angle_deg) < 0.05) {
        result.raster = raster; // below the accumulator's own quantization
        return result;
    }
    const int bg = estimate_background_level(raster.pixels);
    result.raster = raster;
    result.raster.pixels =
        rotate(raster.pixels, -est.median_angle_deg,
               Rgb{static_cast<std::uint8_t>(bg), static_cast<std::uint8_t>(bg),
                   static_cast<std::uint8_t>(bg)});
    return result;
}

// ---------------------------------------------------------------------------
// Stage 2: recording area detection (three-strategy cascade)
// ---------------------------------------------------------------------------

namespace {

// Trimmed bounding range of a per-index count histogram: [first, last] index
// between the 0.5% and 99.5% cumulative mass.
std::pair<int, int> trimmed_extent(const std::vector<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) return {0, -1};
    const std::int64_t lo_cut = total / 200, hi_cut = total - total / 200;
    std::int64_t cum = 0;
    int first = 0, last = static_cast<int>(counts.size()) - 1;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        cum += counts[i];
        if (cum >= lo_cut) {
            first = static_cast<int>(i);
            break;
        }
    }
    cum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        cum += counts[i];
        if (cum >= hi_cut) {
            last = static_cast<int>(i);
            break;
        }
    }
    return {first, last};
}

// Normalized autocorrelation of a projection profile at a grid-pitch lag.
double grid_autocorrelation(const std::vector<double>& profile, int lag) {
    const int n = static_cast<int>(profile.size());
    if (lag <= 0 || lag >= n / 2) return 0.0;
    auto smoothed = dsp::gaussian_smooth(profile, 1.5);
    const double m = stats::mean(smoothed);
    double var = 0.0;
    for (double v : smoothed) var += (v - m) * (v - m);
    if (var <= 0.0) return 0.0;
    double best = 0.0;
    for (int l = std::max(1, lag - 2); l <= lag + 2; ++l) {
        double acc = 0.0;
        for (int i = 0; i + l < n; ++i) acc += (smoothed[i] - m) * (smoothed[i + l] - m);
        best = std::max(best, acc / var);
    }
    return best;
}

GridStrategy finalize_roi(GridStrategy s) {
    if (s.roi_w < 64 || s.roi_h < 64)
        throw EcgError(ErrorKind::DetectionError, "detected recording area is degenerate");
    s.column_width_px = s.roi_w / kLayoutColumns;
    s.row_height_px = s.roi_h / 4;
    return s;
}

} // namespace

GridStrategy detect_area(const EcgRaster& raster, const PipelineConfig& cfg) {
    raster.validate();
    const Image& img = raster.pixels;
    const int w = img.width(), h = img.height();

    // Strategy A: red-excess projection.
    std::vector<std::int64_t> col_red(w, 0), row_red(h, 0);
    std::int64_t red_count = 0;
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* p = img.row(y);
        for (int x = 0; x < w; ++x, p += 3) {
            const double excess = p[0] - (p[1] + p[2]) / 2.0;
            if (excess > cfg.red_excess_threshold) {
                ++col_red[x];
                ++row_red[y];
                ++red_count;
            }
        }
    }
    const double coverage = static_cast<double>(red_count) / (static_cast<double>(w) * h);
    if (coverage > cfg.red_coverage_fraction) {
        auto [x0, x1] = trimmed_extent(col_red);
        auto [y0, y1] = trimmed_extent(row_red);
        GridStrategy s;
        s.strategy = GridStrategyKind::A_color_projection;
        s.roi_x0 = x0;
        s.roi_y0 = y0;
        s.roi_w = x1 - x0 + 1;
        s.roi_h = y1 - y0 + 1;
        s.confidence = std::min(1.0, coverage / (3.0 * cfg.red_coverage_fraction));
        return finalize_roi(s);
    }

    // Strategy B: grid-periodic intensity structure.
    const auto lum = to_luminance(img);
    const int bg = estimate_background_level(img);
    std::vector<double> col_dark(w, 0.0), row_dark(h, 0.0);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = lum.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const double d = std::max(0, bg - row[x]);
            col_dark[x] += d;
            row_dark[y] += d;
        }
    }
    const int lag = std::max(2, static_cast<int>(std::lround(raster.dpi / 25.4)));
    const double ac_col = grid_autocorrelation(col_dark, lag);
    const double ac_row = grid_autocorrelation(row_dark, lag);
    if (std::min(ac_col, ac_row) > 0.2) {
        std::vector<std::int64_t> ci(w), ri(h);
        const double cmax = *std::max_element(col_dark.begin(), col_dark.end());
        const double rmax = *std::max_element(row_dark.begin(), row_dark.end());
        for (int x = 0; x < w; ++x) ci[x] = col_dark[x] > 0.15 * cmax ? 1000 : 0;
        for (int y = 0; y < h; ++y) ri[y] = row_dark[y] > 0.15 * rmax ? 1000 : 0;
        auto [x0, x1] = trimmed_extent(ci);
        auto [y0, y1] = trimmed_extent(ri);
        GridStrategy s;
        s.strategy = GridStrategyKind::B_intensity;
        s.roi_x0 = x0;
        s.roi_y0 = y0;
        s.roi_w = x1 - x0 + 1;
        s.roi_h = y1 - y0 + 1;
        s.confidence = std::clamp((std::min(ac_col, ac_row) - 0.2) / 0.6, 0.1, 1.0);
        return finalize_roi(s);
    }

    // Strategy C: conservative margin trim.
    GridStrategy s;
    s.strategy = GridStrategyKind::C_margin_trim;
    s.roi_x0 = w / 20;
    s.roi_y0 = h / 20;
    s.roi_w = w - 2 * (w / 20);
    s.roi_h = h - 2 * (h / 20);
    s.confidence = 0.25;
    return finalize_roi(s);
}

// ---------------------------------------------------------------------------
// Stage 3: adaptive grid suppression
// ---------------------------------------------------------------------------

namespace {

// Sliding-window 2D median of an 8-bit plane using a two-level histogram
// (16 coarse buckets of 16 bins). Border handling clamps coordinates.
std::vector<std::uint8_t> median2d(const std::vector<std::uint8_t>& src, int w, int h, int k) {
    const int r = k / 2;
    std::vector<std::uint8_t> out(src.size());
    std::array<int, 16> coarse{};
    std::array<int, 256> fine{};

    auto clampx = [&](int x) { return std::clamp(x, 0, w - 1); };
    auto clampy = [&](int y) { return std::clamp(y, 0, h - 1); };
    auto val = [&](int x, int y) {
        return src[static_cast<std::size_t>(clampy(y)) * w + clampx(x)];
    };

    const int win = k * k;
    const int half = win / 2;
    for (int y = 0; y < h; ++y) {
        coarse.fill(0);
        fine.fill(0);
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const std::uint8_t v = val(dx, y + dy);
                ++coarse[v >> 4];
                ++fine[v];
            }
        for (int x = 0; x < w; ++x) {
            if (x > 0) {
                for (int dy = -r; dy <= r; ++dy) {
                    const std::uint8_t vout = val(x - 1 - r, y + dy);
                    --coarse[vout >> 4];
                    --fine[vout];
                    const std::uint8_t vin = val(x + r, y + dy);
                    ++coarse[vin >> 4];
                    ++fine[vin];
                }
            }
            int cum = 0, bucket = 0;
            while (bucket < 16 && cum + coarse[bucket] <= half) cum += coarse[bucket++];
            int v = bucket * 16;
            while (v < 255 && cum + fine[v] <= half) cum += fine[v++];
            out[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(v);
        }
    }
    return out;
}

} // namespace

GrayImage suppress_grid(const EcgRaster& raster, const GridStrategy& strategy,
                        const PipelineConfig& cfg) {
    const Image& img = raster.pixels;
    GrayImage out;
    out.width = img.width();
    out.height = img.height();
    out.v.resize(static_cast<std::size_t>(out.width) * out.height);

    if (strategy.strategy == GridStrategyKind::A_color_projection) {
        // Median saturation of the red grid picks the desaturation divisor.
        std::vector<double> grid_sats;
        grid_sats.reserve(4096);
        for (int y = 0; y < img.height(); y += 4) {
            const std::uint8_t* p = img.row(y);
            for (int x = 0; x < img.width(); x += 4, p += 12) {
                if (p[0] - (p[1] + p[2]) / 2.0 > cfg.red_excess_threshold) {
                    const int mx = std::max({p[0], p[1], p[2]});
                    const int mn = std::min({p[0], p[1], p[2]});
                    grid_sats.push_back(mx - mn);
                }
            }
        }
        const double sat50 = grid_sats.empty() ? 40.0 : stats::median(grid_sats);
        const double divisor =
            std::clamp(cfg.desat_divisor_max -
                           (cfg.desat_divisor_max - cfg.desat_divisor_min) * sat50 / 120.0,
                       cfg.desat_divisor_min, cfg.desat_divisor_max);
        for (int y = 0; y < img.height(); ++y) {
            const std::uint8_t* p = img.row(y);
            std::uint8_t* o = out.v.data() + static_cast<std::size_t>(y) * out.width;
            for (int x = 0; x < img.width(); ++x, p += 3) {
                const int mn = std::min({p[0], p[1], p[2]});
                const int mx = std::max({p[0], p[1], p[2]});
                const double sat = mx - mn;
                const double darkness = (255.0 - mn) / (1.0 + sat / divisor);
                o[x] = static_cast<std::uint8_t>(std::clamp(255.0 - darkness, 0.0, 255.0));
            }
        }
        return out;
    }

    // Gray path: grayscale minus local median background.
    const auto lum = to_luminance(img);
    const auto bgplane = median2d(lum, img.width(), img.height(), cfg.grid_median_kernel);
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const int residual = std::max(0, static_cast<int>(bgplane[i]) - static_cast<int>(lum[i]));
        out.v[i] = static_cast<std::uint8_t>(std::clamp(255 - residual, 0, 255));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage 4: adaptive Otsu binarization + three-pass trace extraction
// ---------------------------------------------------------------------------

namespace {

// Otsu threshold over a 256-bin histogram; ink = values <= threshold.
int otsu_threshold(const std::array<std::int64_t, 256>& hist) {
    std::int64_t total = 0;
    double sum_all = 0.0;
    for (int v = 0; v < 256; ++v) {
        total += hist[v];
        sum_all += static_cast<double>(v) * hist[v];
    }
    if (total == 0) return 0;
    double sum_b = 0.0;
    std::int64_t w_b = 0;
    double best_var = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        w_b += hist[t];
        if (w_b == 0) continue;
        const std::int64_t w_f = total - w_b;
        if (w_f == 0) break;
        sum_b += static_cast<double>(t) * hist[t];
        const double m_b = sum_b / w_b;
        const double m_f = (sum_all - sum_b) / w_f;
        const double between = static_cast<double>(w_b) * w_f * (m_b - m_f) * (m_b - m_f);
        if (between > best_var) {
            best_var = between;
            best_t = t;
        }
    }
    return best_t;
}

} // namespace

TraceExtraction extract_trace(const GrayImage& suppressed, const CellRect& cell,
                              const GridStrategy& strategy, const PipelineConfig& cfg) {
    if (cell.w <= 0 || cell.h <= 0 || cell.x0 < 0 || cell.y0 < 0 ||
        cell.x0 + cell.w > suppressed.width || cell.y0 + cell.h > suppressed.height)
        throw EcgError(ErrorKind::InvalidGeometry, "cell rectangle outside image");

    // Binarization with the density cap: back off toward darker thresholds
    // until no more than the cap fraction of cell pixels is classified ink.
    std::array<std::int64_t, 256> hist{};
    for (int y = 0; y < cell.h; ++y)
        for (int x = 0; x < cell.w; ++x) ++hist[suppressed.at(cell.x0 + x, cell.y0 + y)];
    const double cap = strategy.strategy == GridStrategyKind::A_color_projection
                           ? cfg.density_cap_red
                           : cfg.density_cap_gray;
    int threshold = otsu_threshold(hist);
    const std::int64_t cell_px = static_cast<std::int64_t>(cell.w) * cell.h;
    auto ink_fraction = [&](int t) {
        std::int64_t n = 0;
        for (int v = 0; v <= t; ++v) n += hist[v];
        return static_cast<double>(n) / static_cast<double>(cell_px);
    };
    while (threshold > 0 && ink_fraction(threshold) > cap) --threshold;

    // The pass-2 relaxed threshold accepts half the binarization darkness.
    const int relaxed = threshold + (255 - threshold) / 2;

    TraceExtraction tr;
    tr.y_px.assign(cell.w, 0.0);
    tr.score.assign(cell.w, 0.0);
    tr.gap.assign(cell.w, 1);
    tr.pass.assign(cell.w, 3);

    const double baseline = cell.h / 2.0;
    const int band_half =
        std::max(4, static_cast<int>(std::lround(cfg.search_band_fraction * strategy.roi_h)));

    std::deque<double> y_history;
    std::deque<double> dev_history;

    auto predicted = [&]() {
        if (y_history.empty()) return baseline;
        std::vector<double> ys(y_history.begin(), y_history.end());
        return stats::median(ys);
    };

    // Darkness-weighted centroid of the ink run containing y (sub-pixel).
    auto refine = [&](int x, int y, int thr) {
        double wsum = 0.0, ysum = 0.0;
        for (int dy = -3; dy <= 3; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= cell.h) continue;
            const int g = suppressed.at(cell.x0 + x, cell.y0 + yy);
            if (g > thr) continue;
            const double dark = 255.0 - g;
            wsum += dark;
            ysum += dark * yy;
        }
        return wsum > 0 ? ysum / wsum : static_cast<double>(y);
    };

    for (int x = 0; x < cell.w; ++x) {
        const double y_hat = predicted();

        // Pass 1: best predictive score among binarized ink pixels.
        int best_y = -1;
        double best_score = -1.0, best_d = 0.0;
        for (int y = 0; y < cell.h; ++y) {
            const int g = suppressed.at(cell.x0 + x, cell.y0 + y);
            if (g > threshold) continue;
            const double intensity = 255.0 - g;
            const double d = std::abs(y - y_hat);
            const double score = intensity / (1.0 + d / cfg.scoring_decay_scale);
            if (score > best_score || (score == best_score && d < best_d)) {
                best_score = score;
                best_y = y;
                best_d = d;
            }
        }

        bool accepted = false;
        if (best_y >= 0) {
            bool outlier = false;
            if (static_cast<int>(dev_history.size()) >= cfg.history_window) {
                std::vector<double> devs(dev_history.begin(), dev_history.end());
                const double cut =
                    std::max(cfg.outlier_reject_factor * stats::percentile(devs, 75.0), 6.0);
                outlier = best_d > cut;
            }
            if (!outlier) {
                tr.y_px[x] = refine(x, best_y, threshold);
                tr.score[x] = best_score;
                tr.gap[x] = 0;
                tr.pass[x] = 1;
                accepted = true;
            }
        }

        // Pass 2: rejected or empty columns re-searched in a band around the
        // prediction with the relaxed threshold.
        if (!accepted) {
            const int lo = std::max(0, static_cast<int>(y_hat) - band_half);
            const int hi = std::min(cell.h - 1, static_cast<int>(y_hat) + band_half);
            int b2_y = -1;
            double b2_score = -1.0, b2_d = 0.0;
            for (int y = lo; y <= hi; ++y) {
                const int g = suppressed.at(cell.x0 + x, cell.y0 + y);
                if (g > relaxed) continue;
                const double intensity = 255.0 - g;
                const double d = std::abs(y - y_hat);
                const double score = intensity / (1.0 + d / cfg.scoring_decay_scale);
                if (score > b2_score || (score == b2_score && d < b2_d)) {
                    b2_score = score;
                    b2_y = y;
                    b2_d = d;
                }
            }
            if (b2_y >= 0 && 255 - suppressed.at(cell.x0 + x, cell.y0 + b2_y) >= 10) {
                tr.y_px[x] = refine(x, b2_y, relaxed);
                tr.score[x] = b2_score;
                tr.gap[x] = 0;
                tr.pass[x] = 2;
                best_d = b2_d;
                accepted = true;
            }
        }

        if (accepted) {
            y_history.push_back(tr.y_px[x]);
            dev_history.push_back(best_d);
            if (static_cast<int>(y_history.size()) > cfg.history_window) y_history.pop_front();
            if (static_cast<int>(dev_history.size()) > cfg.history_window) dev_history.pop_front();
        }
    }

    // Pass 3: linear interpolation across remaining gaps.
    int gaps = 0;
    for (int x = 0; x < cell.w; ++x)
        if (tr.gap[x]) ++gaps;
    tr.gap_fraction = static_cast<double>(gaps) / std::max(1, cell.w);
    tr.valid = tr.gap_fraction <= 0.5;

    int x = 0;
    while (x < cell.w) {
        if (!tr.gap[x]) {
            ++x;
            continue;
        }
        int run_end = x;
        while (run_end < cell.w && tr.gap[run_end]) ++run_end;
        const int left = x - 1;
        const int right = run_end;
        double y_left = left >= 0 ? tr.y_px[left] : (right < cell.w ? tr.y_px[right] : baseline);
        double y_right = right < cell.w ? tr.y_px[right] : y_left;
        const int span = right - left;
        for (int i = x; i < run_end; ++i) {
            const double t = span > 0 ? static_cast<double>(i - left) / span : 0.0;
            tr.y_px[i] = y_left + t * (y_right - y_left);
            tr.pass[i] = 3;
        }
        x = run_end;
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Stage 5: six-stage conditioning chain
// ---------------------------------------------------------------------------

namespace {

double jitter_over_amplitude(std::span<const double> y) {
    if (y.size() < 3) return 0.0;
    const double span = stats::percentile(y, 95.0) - stats::percentile(y, 5.0);
    if (span <= 1e-12) return 0.0;
    std::vector<double> sd;
    sd.reserve(y.size() - 2);
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        sd.push_back(std::abs(y[i + 1] - 2.0 * y[i] + y[i - 1]));
    return stats::median(sd) / span;
}

std::vector<double> absolute_gradient(std::span<const double> y) {
    std::vector<double> g(y.size(), 0.0);
    for (std::size_t i = 1; i + 1 < y.size(); ++i) g[i] = std::abs(y[i + 1] - y[i - 1]) / 2.0;
    if (y.size() >= 2) {
        g[0] = std::abs(y[1] - y[0]);
        g[y.size() - 1] = std::abs(y[y.size() - 1] - y[y.size() - 2]);
    }
    return g;
}

// Runs of flagged samples; returns [start, end) pairs.
std::vector<std::pair<int, int>> flagged_runs(const std::vector<std::uint8_t>& flag) {
    std::vector<std::pair<int, int>> runs;
    const int n = static_cast<int>(flag.size());
    int i = 0;
    while (i < n) {
        if (!flag[i]) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && flag[j]) ++j;
        runs.emplace_back(i, j);
        i = j;
    }
    return runs;
}

void interpolate_run(std::vector<double>& y, int start, int end) {
    const int n = static_cast<int>(y.size());
    const int left = start - 1, right = end;
    const double yl = left >= 0 ? y[left] : (right < n ? y[right] : 0.0);
    const double yr = right < n ? y[right] : yl;
    const int span = right - left;
    for (int i = start; i < end; ++i) {
        const double t = span > 0 ? static_cast<double>(i - left) / span : 0.0;
        y[i] = yl + t * (yr - yl);
    }
}

} // namespace

std::vector<double> condition_signal(std::span<const double> raw_mv, double rate,
                                     const PipelineConfig& cfg, ConditioningStats* stats_out) {
    std::vector<double> y(raw_mv.begin(), raw_mv.end());
    if (y.size() < 8) return y;
    ConditioningStats local;
    ConditioningStats& st = stats_out ? *stats_out : local;

    // (1) adaptive median cascade
    const double ratio = jitter_over_amplitude(y);
    std::vector<int> kernels = {3};
    if (ratio > cfg.median_cascade_breakpoints[0]) kernels.push_back(5);
    if (ratio > cfg.median_cascade_breakpoints[1]) kernels.push_back(7);
    if (ratio > cfg.median_cascade_breakpoints[2]) kernels.push_back(9);
    for (int k : kernels) y = dsp::median_filter(y, k);
    st.median_kernels = kernels;

    // (2) gradient-adaptive Gaussian blending
    {
        const auto mild = dsp::gaussian_smooth(y, cfg.gaussian_sigma_mild);
        const double t = stats::clamp01((ratio - cfg.median_cascade_breakpoints[0]) /
                                        (cfg.median_cascade_breakpoints[2] -
                                         cfg.median_cascade_breakpoints[0]));
        const double sigma_heavy = 3.0 + (cfg.gaussian_sigma_heavy_max - 3.0) * t;
        const auto heavy = dsp::gaussian_smooth(y, sigma_heavy);
        const auto grad = absolute_gradient(mild);
        const double g_norm = std::max(1e-12, stats::percentile(grad, 90.0));
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double alpha = std::min(1.0, grad[i] / g_norm);
            y[i] = alpha * mild[i] + (1.0 - alpha) * heavy[i];
        }
    }

    // (3) selective baseline smoothing on flat regions, active regions
    // protected +-5 samples
    {
        const auto grad = absolute_gradient(y);
        const double cut = stats::percentile(grad, cfg.baseline_gradient_percentile);
        std::vector<std::uint8_t> active(y.size(), 0);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (grad[i] >= cut) active[i] = 1;
        std::vector<std::uint8_t> protected_mask(y.size(), 0);
        const int guard = 5;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!active[i]) continue;
            const int lo = std::max(0, static_cast<int>(i) - guard);
            const int hi = std::min(static_cast<int>(y.size()) - 1, static_cast<int>(i) + guard);
            for (int j = lo; j <= hi; ++j) protected_mask[j] = 1;
        }
        const auto smooth = dsp::gaussian_smooth(y, 3.0);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (!protected_mask[i]) y[i] = smooth[i];
    }

    // (4) zero-phase Butterworth high-pass
    y = dsp::highpass_zero_phase(y, rate, cfg.butterworth_cutoff_hz, cfg.butterworth_order);

    // (5) step-artifact removal: short spikes above 4x IQR of the local
    // residual are interpolated; longer excursions are preserved
    {
        const auto base = dsp::median_filter(y, 7);
        std::vector<double> resid(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - base[i];
        std::vector<double> absresid(resid.size());
        for (std::size_t i = 0; i < resid.size(); ++i) absresid[i] = std::abs(resid[i]);
        const double cut = std::max(cfg.step_spike_iqr_factor * stats::iqr(absresid), 1e-9);
        std::vector<std::uint8_t> flag(y.size(), 0);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (std::abs(resid[i]) > cut) flag[i] = 1;
        for (const auto& [s, e] : flagged_runs(flag)) {
            if (e - s <= cfg.step_spike_max_len) {
                interpolate_run(y, s, e);
                ++st.step_count;
            }
        }
    }

    // (6) two-pass residual spike removal at the amplitude-relative threshold
    for (int pass = 0; pass < 2; ++pass) {
        const double span =
            stats::percentile(y, 95.0) - stats::percentile(y, 5.0);
        if (span <= 1e-12) break;
        const auto base = dsp::median_filter(y, 9);
        std::vector<std::uint8_t> flag(y.size(), 0);
        bool any = false;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (std::abs(y[i] - base[i]) > cfg.spike_threshold_fraction * span) {
                flag[i] = 1;
                any = true;
            }
        }
        if (!any) break;
        const auto gauss = dsp::gaussian_smooth(y, 2.0);
        const auto med = dsp::median_filter(y, 11);
        for (const auto& [s, e] : flagged_runs(flag)) {
            const int len = e - s;
            if (len <= cfg.short_spike_max) {
                for (int i = s; i < e; ++i) y[i] = gauss[i];
                ++st.spike_count;
            } else if (len >= cfg.long_cluster_min && len <= cfg.long_cluster_max) {
                for (int i = s; i < e; ++i) y[i] = med[i];
                ++st.spike_count;
            }
        }
    }

    return y;
}

// ---------------------------------------------------------------------------
// Whole-image pipeline
// ---------------------------------------------------------------------------

DigitizeResult digitize(const EcgRaster& raster, const PipelineConfig& cfg) {
    DigitizeResult result;
    try {
        RotationResult rot = correct_rotation(raster, cfg);
        result.rotation_angle_deg = rot.angle_deg;
        result.no_grid_warning = rot.no_grid_warning;

        result.strategy = detect_area(rot.raster, cfg);
        const GridStrategy& s = result.strategy;
        result.seconds_per_pixel = seconds_per_pixel(
            Calibration{25.0, cfg.assumed_mm_per_mv, rot.raster.dpi}, s.column_width_px);

        const GrayImage gray = suppress_grid(rot.raster, s, cfg);
        const double px_per_mv = cfg.assumed_mm_per_mv * rot.raster.dpi / 25.4;
        const double pixel_rate = 1.0 / result.seconds_per_pixel;

        const double col_w = static_cast<double>(s.roi_w) / kLayoutColumns;
        const double row_h = static_cast<double>(s.roi_h) / 4.0;

        auto extract_cell = [&](int col, int row, int n_cols, LeadId lead, double t0) {
            CellRect cell;
            cell.x0 = s.roi_x0 + static_cast<int>(std::lround(col * col_w));
            cell.y0 = s.roi_y0 + static_cast<int>(std::lround(row * row_h));
            cell.w = static_cast<int>(std::lround((col + n_cols) * col_w)) -
                     static_cast<int>(std::lround(col * col_w));
            cell.h = static_cast<int>(std::lround((row + 1) * row_h)) -
                     static_cast<int>(std::lround(row * row_h));

            LeadOutcome outcome;
            outcome.t0_s = t0;
            TraceExtraction tr = extract_trace(gray, cell, s, cfg);
            outcome.gap_fraction = tr.gap_fraction;

            const double baseline = cell.h / 2.0;
            std::vector<double> mv(tr.y_px.size());
            for (std::size_t i = 0; i < tr.y_px.size(); ++i)
                mv[i] = (baseline - tr.y_px[i]) / px_per_mv;

            ConditioningStats cstats;
            std::vector<double> conditioned = condition_signal(mv, pixel_rate, cfg, &cstats);
            std::vector<double> resampled =
                dsp::resample_linear(conditioned, pixel_rate, cfg.target_rate_hz);

            outcome.spike_count = cstats.spike_count;
            outcome.step_count = cstats.step_count;
            outcome.valid = tr.valid;
            try {
                outcome.jitter = jitter_ratio(resampled);
                outcome.jitter_defined = true;
            } catch (const EcgError&) {
                outcome.jitter_defined = false;
                outcome.valid = false;
            }
            result.signal.leads[lead] = std::move(resampled);
            result.leads[lead] = outcome;
        };

        for (LeadId lead : standard_leads()) {
            const LayoutCell cell = layout_cell(lead);
            extract_cell(cell.column, cell.row, 1, lead, cell.column * kColumnSeconds);
        }
        extract_cell(0, 3, kLayoutColumns, LeadId::RHYTHM, 0.0);

        result.signal.sample_rate_hz = cfg.target_rate_hz;

        std::vector<double> jitters;
        for (LeadId lead : standard_leads()) {
            const LeadOutcome& o = result.leads.at(lead);
            if (o.valid) {
                ++result.valid_lead_count;
                if (o.jitter_defined) jitters.push_back(o.jitter);
            }
        }
        if (result.leads.count(LeadId::RHYTHM) && result.leads.at(LeadId::RHYTHM).valid)
            ++result.valid_lead_count;

        result.median_jitter = jitters.empty() ? 0.0 : stats::median(jitters);
        if (result.valid_lead_count == 0) {
            result.ok = false;
            result.failure_reason = "no valid leads extracted";
        } else {
            result.ok = true;
        }
    } catch (const EcgError& e) {
        result.ok = false;
        result.failure_reason = e.what();
        result.signal.leads.clear();
        result.valid_lead_count = 0;
    }
    return result;
}

std::string DigitizeResult::report_json() const {
    json leads_json = json::object();
    for (const auto& [lead, o] : leads) {
        leads_json[to_string(lead)] = {
            {"valid", o.valid},
            {"jitter", o.jitter_defined ? json(o.jitter) : json(nullptr)},
            {"gap_fraction", o.gap_fraction},
            {"spike_count", o.spike_count},
            {"step_count", o.step_count},
            {"t0_s", o.t0_s},
        };
    }
    json j{
        {"ok", ok},
        {"failure_reason", failure_reason},
        {"rotation_angle_deg", rotation_angle_deg},
        {"no_grid_warning", no_grid_warning},
        {"strategy", to_string(strategy.strategy)},
        {"strategy_confidence", strategy.confidence},
        {"roi", {strategy.roi_x0, strategy.roi_y0, strategy.roi_w, strategy.roi_h}},
        {"column_width_px", strategy.column_width_px},
        {"seconds_per_pixel", seconds_per_pixel},
        {"median_jitter", median_jitter},
        {"valid_lead_count", valid_lead_count},
        {"leads", leads_json},
    };
    return j.dump(2);
}

} // namespace ecgqa
