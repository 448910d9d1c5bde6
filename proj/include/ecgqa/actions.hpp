#pragma once

#include "ecgqa/error.hpp"
#include "ecgqa/types.hpp"

#include <string>
#include <vector>

namespace ecgqa {

/// The fixed 12-action space: signal processing (SP1 high-pass, SP2 notch,
/// SP3 Savitzky-Golay, SP4 rescaling, SP5 resampling), re-digitization
/// (RD1 alternate grid detection, RD2 wider segmentation, RD3 different
/// threshold, RD4 alternate backend), lead/metadata (LM1 re-identify leads,
/// LM2 correct calibration, LM3 re-run OCR).
enum class ActionId { SP1, SP2, SP3, SP4, SP5, RD1, RD2, RD3, RD4, LM1, LM2, LM3 };

const char* to_string(ActionId id);
ActionId action_from_string(const std::string& s);

struct CorrectiveAction {
    ActionId id = ActionId::SP1;
    std::string parameters_json = "{}"; // typed per action, validated
    std::vector<LeadId> target;         // empty = whole image

    /// Bounds check per action id; throws ParameterError.
    void validate(double nyquist_hz = 250.0) const;

    /// Stable identity used for never-retry bookkeeping.
    std::string signature() const;

    std::string to_json() const;
    static CorrectiveAction from_json(const std::string& text);

    double param(const char* key, double fallback) const;
};

} // namespace ecgqa
