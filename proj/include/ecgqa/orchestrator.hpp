#pragma once

#include "ecgqa/actions.hpp"
#include "ecgqa/evidence.hpp"
#include "ecgqa/judge.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecgqa {

enum class Tier { Tier1, Tier2, Tier3 };

const char* to_string(Tier tier);

/// Hard-fail floors (Tier 1) and nominal floors (Tier 2). Deliberately
/// conservative so the SQI screen rarely fires on paper-derived signals.
struct RoutingThresholds {
    // Tier-1 hard-fail predicates, one per SQI
    double hard_psqi = 0.01;
    double hard_snr_db = -20.0;
    double hard_ksqi_min = -1.95;
    double hard_ssqi_abs = 15.0;
    double hard_bassqi = -0.5;
    int hard_fail_min_count = 3; // of the 5 SQIs

    // Tier-2 nominal floors
    double nominal_psqi = 0.05;
    double nominal_snr_db = -5.0;
    double nominal_ksqi = 0.5;
    double nominal_bassqi = 0.4; // applies only when >= 2 beats
    double nominal_ssqi_abs = 8.0;

    double long_lead_s = 10.0; // zero beats on a lead this long is a Tier-2 FAIL
};

struct TierDecision {
    LeadId lead = LeadId::I;
    Tier resolved_at = Tier::Tier3;
    Verdict verdict = Verdict::BORDERLINE;
    bool escalated = false;   // needs the Tier-3 judge
    bool judge_error = false; // escalated but the judge failed
    std::string note;
};

/// Tier 1/2 decision for one lead; `escalated` marks the Tier-3 hand-off.
TierDecision route_lead(const ToolEvidence& evidence, const RoutingThresholds& thresholds = {});

/// Context weights over the four quality dimensions; presets match the
/// published table rows and must sum to 1.
struct ContextProfile {
    std::string name = "General_Archive";
    double w_SF = 0.30;
    double w_MP = 0.25;
    double w_CU = 0.25;
    double w_VAS = 0.20;

    void validate() const;
    static ContextProfile by_name(const std::string& name);
    static ContextProfile from_json(const std::string& text);
    std::string to_json() const;
};

struct DimensionScores {
    double signal_fidelity = 0.0;
    double morphological_preservation = 0.0;
    double clinical_utility = 0.0;
    double visual_artifact_severity = 0.0;
    double q = 0.0;
};

/// Maps the five rubric dimensions (plus reconstruction PCC when a reference
/// exists) onto the four quality dimensions and takes the context-weighted
/// combination.
DimensionScores aggregate(const RubricScores& rubric, std::optional<double> mean_pcc,
                          const ContextProfile& profile);

struct ActionPlan {
    std::vector<CorrectiveAction> actions;
    bool abstain = false; // failure beyond parameter-level correction
};

/// Deterministic diagnosis -> action rule table, ranked; ties break by id.
/// The sample rate drives the SP5 (resampling) rule.
ActionPlan suggest_actions(const std::map<LeadId, ToolEvidence>& evidence);
ActionPlan suggest_actions(const std::map<LeadId, ToolEvidence>& evidence,
                           double sample_rate_hz);

struct Assessment {
    std::vector<TierDecision> decisions;
    Verdict image_verdict = Verdict::BORDERLINE;
    double q = 0.0;
    DimensionScores dimensions;
    RubricScores rubric;
    double reliability_weight = 0.0;
    std::vector<CorrectiveAction> actions;
    bool abstain = false;
    bool judge_unavailable = false;
    int judge_calls = 0;
    std::map<LeadId, ToolEvidence> evidence;

    int count_at(Tier tier) const;
    std::string to_json() const;
};

struct AssessOptions {
    const DigitizeResult* report = nullptr;   // exact extraction stats if ours
    const DigitalEcg* reference = nullptr;    // paired ground truth if any
    RoutingThresholds thresholds;
    PipelineConfig pipeline;
    std::string image_ref; // forwarded to judge requests
};

/// Runs the grounding tools per lead, routes tiers, invokes the judge only
/// for escalated leads, aggregates the image-level assessment and ranks the
/// corrective actions.
Assessment assess(const EcgRaster* raster, const DigitalEcg& signal,
                  const ContextProfile& profile, Judge* judge,
                  const AssessOptions& options = {});

} // namespace ecgqa
