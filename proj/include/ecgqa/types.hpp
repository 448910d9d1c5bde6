#pragma once

#include "ecgqa/error.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecgqa {

/// The 12 standard leads plus the optional rhythm strip (lead II rendered
/// full-width). Enumeration order is the fixed lead order; the 4x3 grid
/// places consecutive leads down each column (I/II/III in column 0, etc.).
enum class LeadId : std::uint8_t {
    I, II, III, aVR, aVL, aVF, V1, V2, V3, V4, V5, V6, RHYTHM
};

inline constexpr int kStandardLeadCount = 12;
inline constexpr int kLayoutColumns = 4;
inline constexpr int kLayoutLeadRows = 3;
inline constexpr double kColumnSeconds = 2.5;

const std::array<LeadId, 12>& standard_leads();
const char* to_string(LeadId lead);
std::optional<LeadId> lead_from_string(const std::string& name);

/// Grid cell of a lead in the 4-column x 3-row layout (rhythm row excluded).
struct LayoutCell {
    int column = 0; // 0..3, each spanning 2.5 s
    int row = 0;    // 0..2
};

LayoutCell layout_cell(LeadId lead);
LeadId lead_at_cell(int column, int row);

/// Start time of a lead's layout column within the 10 s record.
inline double lead_window_start_s(LeadId lead) {
    if (lead == LeadId::RHYTHM) return 0.0;
    return layout_cell(lead).column * kColumnSeconds;
}

/// Paper speed / gain / raster resolution, with the pixel-scale arithmetic
/// used everywhere: pixels = mm * dpi / 25.4.
struct Calibration {
    double mm_per_second = 25.0;
    double mm_per_millivolt = 10.0;
    double dpi = 200.0;

    double pixels_per_mm() const { return dpi / 25.4; }
    double pixels_per_second() const { return mm_per_second * pixels_per_mm(); }
    double pixels_per_millivolt() const { return mm_per_millivolt * pixels_per_mm(); }

    void validate() const {
        if (mm_per_second <= 0 || mm_per_millivolt <= 0 || dpi <= 0)
            throw EcgError(ErrorKind::ParameterError, "calibration values must be positive");
    }
};

enum class QualityTier { Excellent, Good, Fair, Poor };

const char* to_string(QualityTier tier);

struct RecordMetadata {
    std::string source_id;
    std::string scan_date;
    std::string target_format;
};

/// Multi-lead sampled signal in millivolts. All non-rhythm leads share one
/// length; the rhythm strip may be longer.
struct DigitalEcg {
    std::map<LeadId, std::vector<double>> leads;
    double sample_rate_hz = 500.0;
    std::optional<RecordMetadata> metadata;

    bool has(LeadId lead) const { return leads.count(lead) != 0; }

    double duration_s(LeadId lead) const {
        auto it = leads.find(lead);
        if (it == leads.end()) return 0.0;
        return static_cast<double>(it->second.size()) / sample_rate_hz;
    }

    /// Throws on violated invariants: positive rate, finite samples, and a
    /// shared length across the non-rhythm leads.
    void validate() const;
};

} // namespace ecgqa
