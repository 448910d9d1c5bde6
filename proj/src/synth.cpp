#include "ecgqa/synth.hpp"

#include "ecgqa/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ecgqa {

using nlohmann::json;

const char* to_string(GridStyle style) {
    return style == GridStyle::RedPink ? "RedPink" : "Gray";
}

namespace {

GridStyle grid_style_from_string(const std::string& s) {
    if (s == "RedPink") return GridStyle::RedPink;
    if (s == "Gray") return GridStyle::Gray;
    throw EcgError(ErrorKind::ConfigError, "unknown grid style '" + s + "'");
}

json rgb_to_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

Rgb rgb_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw EcgError(ErrorKind::ConfigError, "color must be [r,g,b]");
    return Rgb{j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

json render_spec_to_json(const RenderSpec& s) {
    return json{
        {"calib",
         {{"mm_per_second", s.calib.mm_per_second},
          {"mm_per_millivolt", s.calib.mm_per_millivolt},
          {"dpi", s.calib.dpi}}},
        {"grid_style", to_string(s.grid_style)},
        {"grid_minor_mm", s.grid_minor_mm},
        {"grid_major_mm", s.grid_major_mm},
        {"margin_mm", s.margin_mm},
        {"row_height_mm", s.row_height_mm},
        {"ink_color", rgb_to_json(s.ink_color)},
        {"background", rgb_to_json(s.background)},
        {"trace_width_px", s.trace_width_px},
    };
}

RenderSpec render_spec_from_json(const json& j) {
    RenderSpec s;
    if (j.contains("calib")) {
        const json& c = j["calib"];
        s.calib.mm_per_second = c.value("mm_per_second", s.calib.mm_per_second);
        s.calib.mm_per_millivolt = c.value("mm_per_millivolt", s.calib.mm_per_millivolt);
        s.calib.dpi = c.value("dpi", s.calib.dpi);
    }
    s.grid_style = grid_style_from_string(j.value("grid_style", "RedPink"));
    s.grid_minor_mm = j.value("grid_minor_mm", s.grid_minor_mm);
    s.grid_major_mm = j.value("grid_major_mm", s.grid_major_mm);
    s.margin_mm = j.value("margin_mm", s.margin_mm);
    s.row_height_mm = j.value("row_height_mm", s.row_height_mm);
    if (j.contains("ink_color")) s.ink_color = rgb_from_json(j["ink_color"]);
    if (j.contains("background")) s.background = rgb_from_json(j["background"]);
    s.trace_width_px = j.value("trace_width_px", s.trace_width_px);
    return s;
}

json degradation_to_json(const DegradationSpec& d) {
    return json{
        {"skew_degrees", d.skew_degrees},
        {"fade", d.fade},
        {"grid_residual_boost", d.grid_residual_boost},
        {"bleed_through", d.bleed_through},
        {"baseline_wander_mv", d.baseline_wander_mv},
        {"baseline_wander_hz", d.baseline_wander_hz},
        {"noise_sigma", d.noise_sigma},
        {"noise_seed", d.noise_seed},
    };
}

DegradationSpec degradation_from_json(const json& j) {
    DegradationSpec d;
    d.skew_degrees = j.value("skew_degrees", 0.0);
    d.fade = j.value("fade", 1.0);
    d.grid_residual_boost = j.value("grid_residual_boost", 1.0);
    d.bleed_through = j.value("bleed_through", 0.0);
    d.baseline_wander_mv = j.value("baseline_wander_mv", 0.0);
    d.baseline_wander_hz = j.value("baseline_wander_hz", 0.5);
    d.noise_sigma = j.value("noise_sigma", 0.0);
    d.noise_seed = j.value("noise_seed", std::uint64_t{0});
    return d;
}

} // namespace

std::string RenderSpec::to_json() const { return render_spec_to_json(*this).dump(); }

RenderSpec RenderSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    return render_spec_from_json(j);
}

bool DegradationSpec::is_identity() const {
    return skew_degrees == 0.0 && fade == 1.0 && grid_residual_boost == 1.0 &&
           bleed_through == 0.0 && baseline_wander_mv == 0.0 && noise_sigma == 0.0;
}

std::string DegradationSpec::to_json() const { return degradation_to_json(*this).dump(); }

DegradationSpec DegradationSpec::from_json(const std::string& text) {
    return degradation_from_json(json::parse(text));
}

// ---------------------------------------------------------------------------
// Synthetic signals
// ---------------------------------------------------------------------------

namespace {

struct Wave {
    double amp;      // relative to the R amplitude
    double center_s; // offset from the R peak
    double sigma_s;
};

// Textbook P-QRS-T morphology as a sum of Gaussians.
constexpr Wave kP{0.10, -0.160, 0.022};
constexpr Wave kQ{-0.08, -0.026, 0.009};
constexpr Wave kR{1.00, 0.000, 0.011};
constexpr Wave kS{-0.14, 0.030, 0.010};
constexpr Wave kT{0.28, 0.260, 0.055};

// Per-lead projection factors; aVR is inverted as in a real frontal-plane
// projection, precordials carry the largest amplitudes.
const std::map<LeadId, double>& lead_factors() {
    static const std::map<LeadId, double> f = {
        {LeadId::I, 0.45},  {LeadId::II, 0.75},  {LeadId::III, 0.35},
        {LeadId::aVR, -0.55}, {LeadId::aVL, 0.30}, {LeadId::aVF, 0.55},
        {LeadId::V1, 0.85}, {LeadId::V2, 1.30},  {LeadId::V3, 1.20},
        {LeadId::V4, 1.10}, {LeadId::V5, 0.95},  {LeadId::V6, 0.80},
    };
    return f;
}

double gaussian_bump(double dt, const Wave& w, double t_scale) {
    const double c = w.center_s * t_scale;
    const double s = w.sigma_s * t_scale;
    const double z = (dt - c) / s;
    return w.amp * std::exp(-0.5 * z * z);
}

std::string format_source_id(SynthKind kind, double hr, double dur, double amp,
                             std::uint64_t seed) {
    const char* name = kind == SynthKind::Sinus ? "sinus" : (kind == SynthKind::Noise ? "noise" : "flat");
    std::ostringstream os;
    os << "kind=" << name << ",hr=" << hr << ",dur=" << dur << ",amp=" << amp << ",seed=" << seed;
    return os.str();
}

} // namespace

DigitalEcg synth_signal(SynthKind kind, double heart_rate_bpm, double duration_s,
                        double amplitude_mv, std::uint64_t seed) {
    if (duration_s <= 0)
        throw EcgError(ErrorKind::ParameterError, "duration must be positive");
    if (kind == SynthKind::Sinus && (heart_rate_bpm < 30.0 || heart_rate_bpm > 220.0))
        throw EcgError(ErrorKind::ParameterError, "heart rate must be in 30..220 bpm");

    const double rate = 500.0;
    const int n = static_cast<int>(std::llround(duration_s * rate));
    std::mt19937_64 rng(seed);

    DigitalEcg signal;
    signal.sample_rate_hz = rate;
    RecordMetadata md;
    md.source_id = format_source_id(kind, heart_rate_bpm, duration_s, amplitude_mv, seed);
    md.target_format = "ecgqa-csv-v1";
    signal.metadata = md;

    if (kind == SynthKind::Flat) {
        for (LeadId lead : standard_leads()) signal.leads[lead] = std::vector<double>(n, 0.0);
        return signal;
    }
    if (kind == SynthKind::Noise) {
        std::normal_distribution<double> dist(0.0, amplitude_mv);
        for (LeadId lead : standard_leads()) {
            std::vector<double>& s = signal.leads[lead];
            s.resize(n);
            for (double& v : s) v = dist(rng);
        }
        return signal;
    }

    // Shared beat train with mild RR variability.
    const double mean_rr = 60.0 / heart_rate_bpm;
    std::normal_distribution<double> rr_jitter(0.0, 0.015 * mean_rr);
    std::vector<double> beats;
    double t = 0.35;
    while (t < duration_s + mean_rr) {
        beats.push_back(t);
        t += std::clamp(mean_rr + rr_jitter(rng), 0.7 * mean_rr, 1.3 * mean_rr);
    }
    // Repolarization shortens with rate; atrial and QRS timing stay fixed.
    const double t_scale_t = std::clamp(std::sqrt(mean_rr), 0.55, 1.0);

    for (LeadId lead : standard_leads()) {
        const double factor = lead_factors().at(lead) * amplitude_mv;
        std::vector<double>& s = signal.leads[lead];
        s.resize(n, 0.0);
        for (double beat : beats) {
            const int lo = std::max(0, static_cast<int>((beat - 0.6) * rate));
            const int hi = std::min(n, static_cast<int>((beat + 0.8) * rate));
            for (int i = lo; i < hi; ++i) {
                const double dt = i / rate - beat;
                double v = gaussian_bump(dt, kP, 1.0) + gaussian_bump(dt, kQ, 1.0) +
                           gaussian_bump(dt, kR, 1.0) + gaussian_bump(dt, kS, 1.0);
                v += gaussian_bump(dt, kT, t_scale_t);
                s[i] += factor * v;
            }
        }
    }
    return signal;
}

DigitalEcg synth_from_source(const std::string& source_id) {
    SynthKind kind = SynthKind::Sinus;
    double hr = 60, dur = 10, amp = 1.0;
    std::uint64_t seed = 0;
    std::stringstream ss(source_id);
    std::string part;
    bool kind_seen = false;
    while (std::getline(ss, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = part.substr(0, eq), val = part.substr(eq + 1);
        if (key == "kind") {
            kind_seen = true;
            if (val == "sinus") kind = SynthKind::Sinus;
            else if (val == "noise") kind = SynthKind::Noise;
            else if (val == "flat") kind = SynthKind::Flat;
            else throw EcgError(ErrorKind::ConfigError, "unknown synth kind '" + val + "'");
        } else if (key == "hr") hr = std::stod(val);
        else if (key == "dur") dur = std::stod(val);
        else if (key == "amp") amp = std::stod(val);
        else if (key == "seed") seed = std::stoull(val);
    }
    if (!kind_seen)
        throw EcgError(ErrorKind::ConfigError, "source id is not a synthetic provenance string");
    return synth_signal(kind, hr, dur, amp, seed);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

struct Geometry {
    int width, height;
    int plot_x0, plot_y0, plot_w, plot_h;
    double px_per_sec, px_per_mv, px_per_mm;
    int col_w, row_h;
};

Geometry compute_geometry(const RenderSpec& spec) {
    spec.calib.validate();
    Geometry g;
    g.px_per_mm = spec.calib.pixels_per_mm();
    g.px_per_sec = spec.calib.pixels_per_second();
    g.px_per_mv = spec.calib.pixels_per_millivolt();
    const int margin = static_cast<int>(std::lround(spec.margin_mm * g.px_per_mm));
    g.col_w = static_cast<int>(std::lround(kColumnSeconds * g.px_per_sec));
    g.row_h = static_cast<int>(std::lround(spec.row_height_mm * g.px_per_mm));
    g.plot_x0 = margin;
    g.plot_y0 = margin;
    g.plot_w = kLayoutColumns * g.col_w;
    g.plot_h = 4 * g.row_h; // three lead rows plus the rhythm row
    g.width = g.plot_w + 2 * margin;
    g.height = g.plot_h + 2 * margin;
    return g;
}

void draw_grid(Image& img, const Geometry& g, const RenderSpec& spec,
               std::vector<std::uint8_t>* grid_mask) {
    const bool red = spec.grid_style == GridStyle::RedPink;
    const Rgb minor = red ? Rgb{250, 200, 200} : Rgb{220, 220, 220};
    const Rgb major = red ? Rgb{240, 160, 160} : Rgb{180, 180, 180};

    auto mark = [&](int x, int y) {
        if (grid_mask) (*grid_mask)[static_cast<std::size_t>(y) * img.width() + x] = 1;
    };
    const int x1 = g.plot_x0 + g.plot_w, y1 = g.plot_y0 + g.plot_h;

    const double minor_px = spec.grid_minor_mm * g.px_per_mm;
    const double major_px = spec.grid_major_mm * g.px_per_mm;
    for (int pass = 0; pass < 2; ++pass) {
        const double step = pass == 0 ? minor_px : major_px;
        const Rgb color = pass == 0 ? minor : major;
        if (step < 1.0) continue;
        for (double xd = g.plot_x0; xd <= x1 - 1 + 0.5; xd += step) {
            const int x = static_cast<int>(std::lround(xd));
            if (x < g.plot_x0 || x >= x1) continue;
            for (int y = g.plot_y0; y < y1; ++y) {
                img.set(x, y, color);
                mark(x, y);
            }
        }
        for (double yd = g.plot_y0; yd <= y1 - 1 + 0.5; yd += step) {
            const int y = static_cast<int>(std::lround(yd));
            if (y < g.plot_y0 || y >= y1) continue;
            for (int x = g.plot_x0; x < x1; ++x) {
                img.set(x, y, color);
                mark(x, y);
            }
        }
    }
}

// Accumulates anti-aliased stroke coverage for one polyline segment.
void stroke_segment(std::vector<float>& cov, int width, int height, double x0, double y0,
                    double x1, double y1, double radius) {
    const double pad = radius + 1.0;
    const int xa = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - pad)));
    const int xb = std::min(width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + pad)));
    const int ya = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - pad)));
    const int yb = std::min(height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + pad)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = ya; y <= yb; ++y) {
        for (int x = xa; x <= xb; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double t = len2 > 0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double cx = x0 + t * dx, cy = y0 + t * dy;
            const double dist = std::hypot(px - cx, py - cy);
            const double c = std::clamp(radius + 0.5 - dist, 0.0, 1.0);
            if (c > 0) {
                float& cell = cov[static_cast<std::size_t>(y) * width + x];
                cell = std::max(cell, static_cast<float>(c));
            }
        }
    }
}

double sample_at(const std::vector<double>& s, double rate, double t) {
    const double pos = t * rate;
    const int lo = static_cast<int>(std::floor(pos));
    if (lo < 0) return s.front();
    if (lo + 1 >= static_cast<int>(s.size())) return s.back();
    const double f = pos - lo;
    return s[lo] * (1.0 - f) + s[lo + 1] * f;
}

} // namespace

EcgRaster render_with_truth(const DigitalEcg& signal, const RenderSpec& spec, RenderTruth* truth) {
    signal.validate();
    for (LeadId lead : standard_leads())
        if (!signal.has(lead))
            throw EcgError(ErrorKind::LayoutError,
                           std::string("missing lead ") + to_string(lead));
    const double needed = kColumnSeconds * kLayoutColumns;
    for (LeadId lead : standard_leads())
        if (signal.duration_s(lead) < needed - 1e-9)
            throw EcgError(ErrorKind::InsufficientSignal,
                           "layout needs >= 10 s per lead");

    const Geometry g = compute_geometry(spec);
    Image img(g.width, g.height, spec.background);

    std::vector<std::uint8_t> grid_mask(static_cast<std::size_t>(g.width) * g.height, 0);
    draw_grid(img, g, spec, &grid_mask);

    std::vector<float> cov(static_cast<std::size_t>(g.width) * g.height, 0.0f);
    const double radius = spec.trace_width_px / 2.0;
    const double rate = signal.sample_rate_hz;

    if (truth) {
        truth->traces.clear();
        truth->width = g.width;
        truth->height = g.height;
        truth->plot_x0 = g.plot_x0;
        truth->plot_y0 = g.plot_y0;
        truth->plot_w = g.plot_w;
        truth->plot_h = g.plot_h;
        truth->px_per_sec = g.px_per_sec;
        truth->px_per_mv = g.px_per_mv;
    }

    auto draw_lead = [&](const std::vector<double>& samples, int cell_col, int row, double t0,
                         double t_span, LeadId truth_key) {
        const int x_start = g.plot_x0 + cell_col * g.col_w;
        const int n_cols = static_cast<int>(std::lround(t_span / kColumnSeconds)) * g.col_w;
        const double baseline = g.plot_y0 + row * g.row_h + g.row_h / 2.0;

        RenderTruth::LeadTrace trace;
        trace.x0 = x_start;
        trace.baseline_y = baseline;
        trace.t0_s = t0;
        trace.y_px.resize(n_cols);

        double prev_x = 0, prev_y = 0;
        bool has_prev = false;
        const int steps_per_col = 3; // sub-pixel polyline sampling
        for (int i = 0; i <= n_cols * steps_per_col; ++i) {
            const double fx = static_cast<double>(i) / steps_per_col;
            const double t = t0 + fx / g.px_per_sec;
            if (t > t0 + t_span) break;
            const double v = sample_at(samples, rate, t);
            const double x = x_start + fx;
            const double y = baseline - v * g.px_per_mv;
            if (has_prev) stroke_segment(cov, g.width, g.height, prev_x, prev_y, x, y, radius);
            prev_x = x;
            prev_y = y;
            has_prev = true;
        }
        for (int cx = 0; cx < n_cols; ++cx) {
            const double t = t0 + (cx + 0.5) / g.px_per_sec;
            trace.y_px[cx] = baseline - sample_at(samples, rate, t) * g.px_per_mv;
        }
        if (truth) truth->traces[truth_key] = std::move(trace);
    };

    for (LeadId lead : standard_leads()) {
        const LayoutCell cell = layout_cell(lead);
        draw_lead(signal.leads.at(lead), cell.column, cell.row, cell.column * kColumnSeconds,
                  kColumnSeconds, lead);
    }
    const std::vector<double>& rhythm_src =
        signal.has(LeadId::RHYTHM) ? signal.leads.at(LeadId::RHYTHM) : signal.leads.at(LeadId::II);
    draw_lead(rhythm_src, 0, 3, 0.0, kColumnSeconds * kLayoutColumns, LeadId::RHYTHM);

    // Composite the trace layer over grid and background.
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const float c = cov[static_cast<std::size_t>(y) * g.width + x];
            if (c <= 0) continue;
            const Rgb base = img.get(x, y);
            img.set(x, y, Rgb{static_cast<std::uint8_t>(base.r + (spec.ink_color.r - base.r) * c),
                              static_cast<std::uint8_t>(base.g + (spec.ink_color.g - base.g) * c),
                              static_cast<std::uint8_t>(base.b + (spec.ink_color.b - base.b) * c)});
        }
    }

    if (truth) {
        truth->trace_mask.assign(cov.size(), 0);
        truth->grid_mask.assign(cov.size(), 0);
        for (std::size_t i = 0; i < cov.size(); ++i) {
            truth->trace_mask[i] = cov[i] >= 0.5f ? 1 : 0;
            truth->grid_mask[i] = (grid_mask[i] != 0 && cov[i] < 0.05f) ? 1 : 0;
        }
    }

    EcgRaster raster;
    raster.pixels = std::move(img);
    raster.dpi = spec.calib.dpi;
    raster.provenance_kind = "synthetic";
    json prov;
    prov["render_spec"] = render_spec_to_json(spec);
    prov["signal_source"] =
        signal.metadata ? signal.metadata->source_id : std::string("unknown");
    prov["degradations"] = json::array();
    raster.provenance_json = prov.dump();
    raster.validate();
    return raster;
}

EcgRaster render(const DigitalEcg& signal, const RenderSpec& spec) {
    return render_with_truth(signal, spec, nullptr);
}

// ---------------------------------------------------------------------------
// Degradations
// ---------------------------------------------------------------------------

namespace {

void apply_fade(Image& img, double fade, Rgb bg) {
    fade = std::clamp(fade, 0.0, 1.0);
    const double bgc[3] = {double(bg.r), double(bg.g), double(bg.b)};
    for (int y = 0; y < img.height(); ++y) {
        std::uint8_t* p = img.row(y);
        for (int x = 0; x < img.width(); ++x, p += 3)
            for (int c = 0; c < 3; ++c) {
                const double v = bgc[c] - (bgc[c] - p[c]) * fade;
                p[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
    }
}

void apply_grid_boost(Image& img, double boost, Rgb bg, GridStyle style) {
    for (int y = 0; y < img.height(); ++y) {
        std::uint8_t* p = img.row(y);
        for (int x = 0; x < img.width(); ++x, p += 3) {
            const int lum = static_cast<int>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
            bool is_grid;
            if (style == GridStyle::RedPink) {
                is_grid = p[0] - (p[1] + p[2]) / 2 > 10;
            } else {
                const int mx = std::max({p[0], p[1], p[2]});
                const int mn = std::min({p[0], p[1], p[2]});
                is_grid = (mx - mn) <= 12 && lum > 100 && lum < bg.r - 6;
            }
            if (!is_grid) continue;
            const double bgc[3] = {double(bg.r), double(bg.g), double(bg.b)};
            for (int c = 0; c < 3; ++c) {
                const double v = bgc[c] - (bgc[c] - p[c]) * boost;
                p[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
}

void apply_bleed(Image& img, double alpha, Rgb bg) {
    alpha = std::clamp(alpha, 0.0, 1.0);
    Image mirror = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            mirror.set(x, y, img.get(img.width() - 1 - x, y));
    const double bgc[3] = {double(bg.r), double(bg.g), double(bg.b)};
    for (int y = 0; y < img.height(); ++y) {
        std::uint8_t* p = img.row(y);
        const std::uint8_t* m = mirror.row(y);
        for (int x = 0; x < img.width(); ++x, p += 3, m += 3)
            for (int c = 0; c < 3; ++c) {
                const double ghost = bgc[c] - alpha * (bgc[c] - m[c]);
                p[c] = static_cast<std::uint8_t>(std::min(double(p[c]), ghost));
            }
    }
}

void apply_noise(Image& img, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (int y = 0; y < img.height(); ++y) {
        std::uint8_t* p = img.row(y);
        for (int x = 0; x < img.width() * 3; ++x)
            p[x] = static_cast<std::uint8_t>(std::clamp(p[x] + dist(rng), 0.0, 255.0));
    }
}

} // namespace

EcgRaster degrade(const EcgRaster& raster, const DegradationSpec& deg) {
    if (raster.provenance_kind != "synthetic")
        throw EcgError(ErrorKind::ParameterError,
                       "degrade requires a raster with synthetic provenance");
    if (deg.is_identity()) return raster;

    json prov = json::parse(raster.provenance_json);
    const RenderSpec spec = render_spec_from_json(prov.at("render_spec"));

    EcgRaster out = raster;

    // Baseline wander displaces the ink trace, not the printed grid: the
    // raster is re-rendered from provenance with the wander added to the
    // signal, then the remaining raster-space degradations are applied in
    // order. Only valid on a clean render.
    if (deg.baseline_wander_mv != 0.0) {
        if (!prov.at("degradations").empty())
            throw EcgError(ErrorKind::ParameterError,
                           "wander must be injected on a clean render");
        DigitalEcg signal = synth_from_source(prov.at("signal_source").get<std::string>());
        for (auto& [lead, samples] : signal.leads) {
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const double t = static_cast<double>(i) / signal.sample_rate_hz;
                samples[i] += deg.baseline_wander_mv *
                              std::sin(2.0 * M_PI * deg.baseline_wander_hz * t);
            }
        }
        EcgRaster rewander = render(signal, spec);
        out.pixels = std::move(rewander.pixels);
    }

    if (deg.skew_degrees != 0.0)
        out.pixels = rotate(out.pixels, deg.skew_degrees, spec.background);
    if (deg.fade != 1.0) apply_fade(out.pixels, deg.fade, spec.background);
    if (deg.grid_residual_boost != 1.0)
        apply_grid_boost(out.pixels, deg.grid_residual_boost, spec.background, spec.grid_style);
    if (deg.bleed_through != 0.0) apply_bleed(out.pixels, deg.bleed_through, spec.background);
    if (deg.noise_sigma != 0.0) apply_noise(out.pixels, deg.noise_sigma, deg.noise_seed);

    prov["degradations"].push_back(degradation_to_json(deg));
    out.provenance_json = prov.dump();
    return out;
}

EcgRaster regenerate_from_provenance(const std::string& provenance_json) {
    json prov = json::parse(provenance_json);
    const RenderSpec spec = render_spec_from_json(prov.at("render_spec"));
    DigitalEcg signal = synth_from_source(prov.at("signal_source").get<std::string>());
    EcgRaster raster = render(signal, spec);
    for (const json& d : prov.at("degradations"))
        raster = degrade(raster, degradation_from_json(d));
    return raster;
}

} // namespace ecgqa
