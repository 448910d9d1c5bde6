#pragma once

#include "ecgqa/evidence.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ecgqa {

enum class Verdict { PASS, BORDERLINE, FAIL };

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

/// Published verdict cuts: PASS at Q >= 75, FAIL below 40.
inline constexpr double kPassCut = 75.0;
inline constexpr double kFailCut = 40.0;

inline Verdict verdict_from_q(double q) {
    if (q >= kPassCut) return Verdict::PASS;
    if (q < kFailCut) return Verdict::FAIL;
    return Verdict::BORDERLINE;
}

/// Five visual rubric dimensions, 0..100 each. artifact_severity is scored so
/// higher means less severe, keeping every dimension co-monotone.
struct RubricScores {
    double trace_continuity = 0.0;
    double morphology_plausibility = 0.0;
    double baseline_stability = 0.0;
    double grid_alignment = 0.0;
    double artifact_severity = 0.0;

    double mean() const {
        return (trace_continuity + morphology_plausibility + baseline_stability +
                grid_alignment + artifact_severity) /
               5.0;
    }
};

struct JudgeVerdict {
    Verdict verdict = Verdict::BORDERLINE;
    double composite_q = 0.0;
    RubricScores rubric;
    double reliability_weight = 0.0;
    std::string rationale;

    std::string to_json() const;
    /// Strict schema: all fields required, unknown fields ignored, verdict
    /// must be consistent with composite_q. Throws SchemaViolation.
    static JudgeVerdict from_json(const std::string& text);
};

/// Versioned rubric instruction text shipped with every request.
const std::string& default_rubric_instructions();

struct JudgeRequest {
    std::string image_ref;          // path, or inline base64 when image_inline
    bool image_inline = false;
    std::vector<ToolEvidence> evidence;
    std::string rubric_instructions = default_rubric_instructions();
    std::string context_profile = "General_Archive";
    std::string request_id;

    std::string to_json() const;
};

/// Tier-3 judge contract shared by the deterministic tool-grounded judge and
/// the remote client. Errors are thrown as EcgError (Transport, Timeout,
/// SchemaViolation, IncompleteEvidence); a malformed remote reply is never
/// silently turned into a default verdict.
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeVerdict judge(const JudgeRequest& request) = 0;
    virtual std::string name() const = 0;
};

/// Reproducible stand-in for the VLM: every rubric dimension is mapped from
/// named evidence fields through fixed monotone piecewise-linear anchors.
class DeterministicJudge : public Judge {
public:
    JudgeVerdict judge(const JudgeRequest& request) override;
    std::string name() const override { return "grounded-deterministic"; }

    /// Rubric anchors over an evidence set; throws IncompleteEvidence when a
    /// valid lead lacks its tool outputs.
    static RubricScores grounded_score(std::span<const ToolEvidence> evidence);

    /// Fraction of leads whose morphology found at least one beat.
    static double beat_coverage(std::span<const ToolEvidence> evidence);
};

/// Degenerate judges for gate calibration tests.
class ConstantJudge : public Judge {
public:
    explicit ConstantJudge(Verdict v) : verdict_(v) {}
    JudgeVerdict judge(const JudgeRequest&) override;
    std::string name() const override { return "constant"; }

private:
    Verdict verdict_;
};

/// Wraps another judge and flips its verdict with a fixed probability per
/// call; simulates an ungrounded judge's run-to-run inconsistency.
class StochasticFlipJudge : public Judge {
public:
    StochasticFlipJudge(Judge& inner, double flip_probability, std::uint64_t seed,
                        std::string label)
        : inner_(inner), flip_p_(flip_probability), rng_(seed), label_(std::move(label)) {}
    JudgeVerdict judge(const JudgeRequest& request) override;
    std::string name() const override { return label_; }

private:
    Judge& inner_;
    double flip_p_;
    std::mt19937_64 rng_;
    std::string label_;
};

// --- Reliability gate ---------------------------------------------------------

struct GateConfig {
    double min_sensitivity = 0.8;  // flagged fraction of injected images
    double min_specificity = 0.8;  // unflagged fraction of clean images
};

struct GateReport {
    bool passed = false;
    double sensitivity = 0.0;
    double specificity = 0.0;
    int clean_total = 0, clean_flagged = 0;
    int injected_total = 0, injected_flagged = 0;
    int error_count = 0; // judge errors; excluded from both denominators
};

/// Pre-deployment check: the judge must flag (BORDERLINE or FAIL) most
/// artifact-injected requests while passing most clean ones.
GateReport reliability_gate(Judge& judge, std::span<const JudgeRequest> clean,
                            std::span<const JudgeRequest> injected,
                            const GateConfig& cfg = {});

// --- Verdict consistency --------------------------------------------------------

struct ConsistencyReport {
    double fraction = 0.0; // identical-verdict pairs / evaluated pairs
    int pairs_total = 0;
    int pairs_identical = 0;
    int error_runs = 0;
};

/// Runs the judge `runs` times on one request and reports the fraction of
/// run pairs with identical three-class verdicts.
ConsistencyReport verdict_consistency(Judge& judge, const JudgeRequest& request, int runs);

} // namespace ecgqa
