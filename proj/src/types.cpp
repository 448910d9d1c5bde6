#include "ecgqa/types.hpp"

#include <cmath>

namespace ecgqa {

const std::array<LeadId, 12>& standard_leads() {
    static const std::array<LeadId, 12> leads = {
        LeadId::I,   LeadId::II,  LeadId::III, LeadId::aVR,
        LeadId::aVL, LeadId::aVF, LeadId::V1,  LeadId::V2,
        LeadId::V3,  LeadId::V4,  LeadId::V5,  LeadId::V6,
    };
    return leads;
}

const char* to_string(LeadId lead) {
    switch (lead) {
        case LeadId::I: return "I";
        case LeadId::II: return "II";
        case LeadId::III: return "III";
        case LeadId::aVR: return "aVR";
        case LeadId::aVL: return "aVL";
        case LeadId::aVF: return "aVF";
        case LeadId::V1: return "V1";
        case LeadId::V2: return "V2";
        case LeadId::V3: return "V3";
        case LeadId::V4: return "V4";
        case LeadId::V5: return "V5";
        case LeadId::V6: return "V6";
        case LeadId::RHYTHM: return "RHYTHM";
    }
    return "?";
}

std::optional<LeadId> lead_from_string(const std::string& name) {
    for (LeadId lead : standard_leads())
        if (name == to_string(lead)) return lead;
    if (name == "RHYTHM") return LeadId::RHYTHM;
    return std::nullopt;
}

LayoutCell layout_cell(LeadId lead) {
    if (lead == LeadId::RHYTHM)
        throw EcgError(ErrorKind::LayoutError, "rhythm strip has no 4x3 cell");
    const int idx = static_cast<int>(lead);
    return LayoutCell{idx / kLayoutLeadRows, idx % kLayoutLeadRows};
}

LeadId lead_at_cell(int column, int row) {
    if (column < 0 || column >= kLayoutColumns || row < 0 || row >= kLayoutLeadRows)
        throw EcgError(ErrorKind::LayoutError, "cell outside the 4x3 layout");
    return static_cast<LeadId>(column * kLayoutLeadRows + row);
}

const char* to_string(QualityTier tier) {
    switch (tier) {
        case QualityTier::Excellent: return "Excellent";
        case QualityTier::Good: return "Good";
        case QualityTier::Fair: return "Fair";
        case QualityTier::Poor: return "Poor";
    }
    return "?";
}

void DigitalEcg::validate() const {
    if (sample_rate_hz <= 0)
        throw EcgError(ErrorKind::ParameterError, "sample rate must be positive");
    std::size_t shared = 0;
    bool first = true;
    for (const auto& [lead, samples] : leads) {
        for (double v : samples)
            if (!std::isfinite(v))
                throw EcgError(ErrorKind::ParameterError,
                               std::string("non-finite sample in lead ") + to_string(lead));
        if (lead == LeadId::RHYTHM) continue;
        if (first) {
            shared = samples.size();
            first = false;
        } else if (samples.size() != shared) {
            throw EcgError(ErrorKind::LayoutError, "non-rhythm leads differ in length");
        }
    }
}

} // namespace ecgqa
