#include "ecgqa/orchestrator.hpp"

#include "ecgqa/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ecgqa {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CorrectiveAction
// ---------------------------------------------------------------------------

const char* to_string(ActionId id) {
    switch (id) {
        case ActionId::SP1: return "SP1";
        case ActionId::SP2: return "SP2";
        case ActionId::SP3: return "SP3";
        case ActionId::SP4: return "SP4";
        case ActionId::SP5: return "SP5";
        case ActionId::RD1: return "RD1";
        case ActionId::RD2: return "RD2";
        case ActionId::RD3: return "RD3";
        case ActionId::RD4: return "RD4";
        case ActionId::LM1: return "LM1";
        case ActionId::LM2: return "LM2";
        case ActionId::LM3: return "LM3";
    }
    return "?";
}

ActionId action_from_string(const std::string& s) {
    static const std::map<std::string, ActionId> names = {
        {"SP1", ActionId::SP1}, {"SP2", ActionId::SP2}, {"SP3", ActionId::SP3},
        {"SP4", ActionId::SP4}, {"SP5", ActionId::SP5}, {"RD1", ActionId::RD1},
        {"RD2", ActionId::RD2}, {"RD3", ActionId::RD3}, {"RD4", ActionId::RD4},
        {"LM1", ActionId::LM1}, {"LM2", ActionId::LM2}, {"LM3", ActionId::LM3},
    };
    auto it = names.find(s);
    if (it == names.end())
        throw EcgError(ErrorKind::ParameterError, "unknown action id '" + s + "'");
    return it->second;
}

double CorrectiveAction::param(const char* key, double fallback) const {
    json j = json::parse(parameters_json, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains(key)) return fallback;
    return j[key].get<double>();
}

void CorrectiveAction::validate(double nyquist_hz) const {
    json j = json::parse(parameters_json, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw EcgError(ErrorKind::ParameterError, "action parameters must be a JSON object");
    switch (id) {
        case ActionId::SP1: {
            const double c = param("cutoff_hz", 0.0);
            if (c <= 0.0 || c >= nyquist_hz)
                throw EcgError(ErrorKind::ParameterError, "SP1 cutoff must be in (0, Nyquist)");
            break;
        }
        case ActionId::SP2: {
            const double f = param("notch_hz", 0.0);
            if (f != 50.0 && f != 60.0)
                throw EcgError(ErrorKind::ParameterError, "SP2 notch must be 50 or 60 Hz");
            if (f >= nyquist_hz)
                throw EcgError(ErrorKind::ParameterError, "SP2 notch above Nyquist");
            break;
        }
        case ActionId::SP3: {
            const int window = static_cast<int>(param("window", 0));
            const int order = static_cast<int>(param("polyorder", -1));
            if (window < 3 || window % 2 == 0)
                throw EcgError(ErrorKind::ParameterError, "SP3 window must be odd and >= 3");
            if (order < 0 || order >= window)
                throw EcgError(ErrorKind::ParameterError, "SP3 polyorder must be < window");
            break;
        }
        case ActionId::SP4: {
            const double f = param("factor", 0.0);
            if (f <= 0.0 || f > 100.0)
                throw EcgError(ErrorKind::ParameterError, "SP4 factor must be in (0, 100]");
            break;
        }
        case ActionId::SP5: {
            const double r = param("target_rate_hz", 0.0);
            if (r < 50.0 || r > 4000.0)
                throw EcgError(ErrorKind::ParameterError, "SP5 rate must be in [50, 4000]");
            break;
        }
        case ActionId::RD2: {
            const double f = param("widening_factor", 0.0);
            if (f < 1.0 || f > 3.0)
                throw EcgError(ErrorKind::ParameterError, "RD2 widening must be in [1, 3]");
            break;
        }
        case ActionId::RD3: {
            const double d = param("threshold_delta", 0.0);
            if (std::abs(d) > 0.2)
                throw EcgError(ErrorKind::ParameterError, "RD3 delta must be within +-0.2");
            break;
        }
        case ActionId::LM2: {
            const double f = param("factor", 0.0);
            if (f <= 0.0 || f > 100.0)
                throw EcgError(ErrorKind::ParameterError, "LM2 factor must be in (0, 100]");
            break;
        }
        case ActionId::RD1:
        case ActionId::RD4:
        case ActionId::LM1:
        case ActionId::LM3:
            break;
    }
}

std::string CorrectiveAction::signature() const {
    std::string s = to_string(id);
    s += '|';
    s += parameters_json;
    s += '|';
    for (LeadId lead : target) {
        s += to_string(lead);
        s += ',';
    }
    return s;
}

std::string CorrectiveAction::to_json() const {
    json t = json::array();
    for (LeadId lead : target) t.push_back(to_string(lead));
    json j{{"id", to_string(id)},
           {"parameters", json::parse(parameters_json)},
           {"target", t}};
    return j.dump();
}

CorrectiveAction CorrectiveAction::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id"))
        throw EcgError(ErrorKind::SchemaViolation, "action record needs an id");
    CorrectiveAction a;
    a.id = action_from_string(j["id"].get<std::string>());
    a.parameters_json = j.contains("parameters") ? j["parameters"].dump() : "{}";
    if (j.contains("target"))
        for (const auto& name : j["target"]) {
            auto lead = lead_from_string(name.get<std::string>());
            if (lead) a.target.push_back(*lead);
        }
    return a;
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

const char* to_string(Tier tier) {
    switch (tier) {
        case Tier::Tier1: return "Tier1";
        case Tier::Tier2: return "Tier2";
        case Tier::Tier3: return "Tier3";
    }
    return "?";
}

TierDecision route_lead(const ToolEvidence& e, const RoutingThresholds& t) {
    TierDecision d;
    d.lead = e.lead;

    if (!e.valid || !e.sqi) {
        d.resolved_at = Tier::Tier3;
        d.escalated = true;
        d.note = "incomplete evidence";
        return d;
    }
    const SqiVector& s = *e.sqi;

    int hard_fails = 0;
    if (s.pSQI < t.hard_psqi) ++hard_fails;
    if (s.snrSQI < t.hard_snr_db) ++hard_fails;
    if (s.kSQI < t.hard_ksqi_min) ++hard_fails;
    if (std::abs(s.sSQI) > t.hard_ssqi_abs) ++hard_fails;
    if (s.basSQI < t.hard_bassqi) ++hard_fails;
    if (hard_fails >= t.hard_fail_min_count) {
        d.resolved_at = Tier::Tier1;
        d.verdict = Verdict::FAIL;
        d.note = "hard SQI failure";
        return d;
    }

    if (e.morphology.beat_count == 0 && e.duration_s >= t.long_lead_s) {
        d.resolved_at = Tier::Tier2;
        d.verdict = Verdict::FAIL;
        d.note = "no beats on a long lead";
        return d;
    }

    const bool sqis_nominal =
        s.pSQI >= t.nominal_psqi && s.snrSQI >= t.nominal_snr_db && s.kSQI >= t.nominal_ksqi &&
        std::abs(s.sSQI) <= t.nominal_ssqi_abs &&
        (e.morphology.beat_count < 2 || s.basSQI == 0.0 || s.basSQI >= t.nominal_bassqi);
    if (e.morphology.flags.count() == 0 && e.morphology.beat_count >= 1 && sqis_nominal) {
        d.resolved_at = Tier::Tier2;
        d.verdict = Verdict::PASS;
        d.note = "morphology and SQIs jointly decisive";
        return d;
    }

    d.resolved_at = Tier::Tier3;
    d.escalated = true;
    d.note = "conflicting evidence";
    return d;
}

// ---------------------------------------------------------------------------
// Context profiles and aggregation
// ---------------------------------------------------------------------------

void ContextProfile::validate() const {
    for (double w : {w_SF, w_MP, w_CU, w_VAS})
        if (w < 0.0 || w > 1.0)
            throw EcgError(ErrorKind::ProfileError, "weights must lie in [0,1]");
    const double sum = w_SF + w_MP + w_CU + w_VAS;
    if (std::abs(sum - 1.0) > 1e-9)
        throw EcgError(ErrorKind::ProfileError, "context weights must sum to 1");
}

ContextProfile ContextProfile::by_name(const std::string& name) {
    ContextProfile p;
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (key == "af_screening") {
        p = {"AF_Screening", 0.15, 0.40, 0.35, 0.10};
    } else if (key == "stemi") {
        p = {"STEMI", 0.15, 0.35, 0.40, 0.10};
    } else if (key == "general_archive") {
        p = {"General_Archive", 0.30, 0.25, 0.25, 0.20};
    } else if (key == "research") {
        p = {"Research", 0.35, 0.30, 0.20, 0.15};
    } else {
        throw EcgError(ErrorKind::ProfileError, "unknown context profile '" + name + "'");
    }
    p.validate();
    return p;
}

ContextProfile ContextProfile::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw EcgError(ErrorKind::ProfileError, "profile is not a JSON object");
    ContextProfile p;
    p.name = j.value("name", "custom");
    p.w_SF = j.value("w_SF", -1.0);
    p.w_MP = j.value("w_MP", -1.0);
    p.w_CU = j.value("w_CU", -1.0);
    p.w_VAS = j.value("w_VAS", -1.0);
    p.validate();
    return p;
}

std::string ContextProfile::to_json() const {
    json j{{"name", name}, {"w_SF", w_SF}, {"w_MP", w_MP}, {"w_CU", w_CU}, {"w_VAS", w_VAS}};
    return j.dump();
}

DimensionScores aggregate(const RubricScores& rubric, std::optional<double> mean_pcc,
                          const ContextProfile& profile) {
    profile.validate();
    DimensionScores d;
    const double sf_visual = 0.5 * (rubric.baseline_stability + rubric.grid_alignment);
    if (mean_pcc) {
        const std::vector<std::pair<double, double>> anchors = {
            {-1.0, 0}, {0.0, 10}, {0.5, 40}, {0.8, 70}, {0.9, 85}, {0.95, 93}, {1.0, 100}};
        const double pcc_score = stats::piecewise_linear(*mean_pcc, anchors);
        d.signal_fidelity = 0.5 * sf_visual + 0.5 * pcc_score;
    } else {
        d.signal_fidelity = sf_visual;
    }
    d.morphological_preservation = rubric.morphology_plausibility;
    d.clinical_utility = 0.5 * (rubric.trace_continuity + rubric.morphology_plausibility);
    d.visual_artifact_severity = rubric.artifact_severity;
    d.q = profile.w_SF * d.signal_fidelity + profile.w_MP * d.morphological_preservation +
          profile.w_CU * d.clinical_utility + profile.w_VAS * d.visual_artifact_severity;
    return d;
}

// ---------------------------------------------------------------------------
// Action suggestion rule table
// ---------------------------------------------------------------------------

namespace {

struct RankedAction {
    int rank;
    CorrectiveAction action;
};

json params(std::initializer_list<std::pair<std::string, double>> kv) {
    json j = json::object();
    for (const auto& [k, v] : kv) j[k] = v;
    return j;
}

} // namespace

ActionPlan suggest_actions(const std::map<LeadId, ToolEvidence>& evidence,
                           double sample_rate_hz);

ActionPlan suggest_actions(const std::map<LeadId, ToolEvidence>& evidence) {
    return suggest_actions(evidence, 500.0);
}

ActionPlan suggest_actions(const std::map<LeadId, ToolEvidence>& evidence,
                           double sample_rate_hz) {
    ActionPlan plan;
    if (evidence.empty()) {
        plan.abstain = true;
        return plan;
    }

    std::vector<LeadId> invalid, valid;
    std::vector<LeadId> limb_missing;
    int precordial_valid = 0;
    std::vector<double> wander, powerline, jitters, spans, wander_hz;
    std::vector<LeadId> wander_leads, powerline_leads, jitter_leads;
    std::string strategy = "unknown";
    double strategy_conf = 0.5;

    const std::vector<LeadId> limb = {LeadId::I,   LeadId::II,  LeadId::III,
                                      LeadId::aVR, LeadId::aVL, LeadId::aVF};
    const std::vector<LeadId> precordial = {LeadId::V1, LeadId::V2, LeadId::V3,
                                            LeadId::V4, LeadId::V5, LeadId::V6};

    for (const auto& [lead, e] : evidence) {
        strategy = e.strategy;
        strategy_conf = e.strategy_confidence;
        if (!e.valid) {
            invalid.push_back(lead);
            continue;
        }
        valid.push_back(lead);
        if (e.bands) {
            wander.push_back(e.bands->wander_power_ratio);
            powerline.push_back(e.bands->powerline_power_ratio);
            if (e.bands->wander_power_ratio > 0.25) {
                wander_leads.push_back(lead);
                wander_hz.push_back(e.bands->dominant_wander_hz);
            }
            if (e.bands->powerline_power_ratio > 0.05) powerline_leads.push_back(lead);
        }
        if (e.jitter_ratio) {
            jitters.push_back(*e.jitter_ratio);
            if (*e.jitter_ratio > 0.01) jitter_leads.push_back(lead);
        }
        spans.push_back(e.amplitude_span_mv);
    }
    for (LeadId lead : limb) {
        auto it = evidence.find(lead);
        if (it == evidence.end() || !it->second.valid) limb_missing.push_back(lead);
    }
    for (LeadId lead : precordial) {
        auto it = evidence.find(lead);
        if (it != evidence.end() && it->second.valid) ++precordial_valid;
    }

    if (valid.empty()) {
        // Total extraction failure is beyond parameter-level correction.
        plan.abstain = true;
        return plan;
    }

    std::vector<RankedAction> ranked;

    if (limb_missing.size() >= 2 && precordial_valid >= 4) {
        CorrectiveAction rd2{ActionId::RD2, params({{"widening_factor", 1.3}}).dump(),
                             limb_missing};
        ranked.push_back({10, rd2});
        ranked.push_back({11, CorrectiveAction{ActionId::LM1, "{}", {}}});
    }
    if (invalid.size() >= 3) {
        ranked.push_back({20, CorrectiveAction{ActionId::RD1, "{}", {}}});
        ranked.push_back(
            {21, CorrectiveAction{ActionId::RD3, params({{"threshold_delta", 0.02}}).dump(), {}}});
    }
    if (strategy == "C_margin_trim" && strategy_conf < 0.3)
        ranked.push_back({25, CorrectiveAction{ActionId::RD4, "{}", {}}});

    if (!wander.empty() && stats::median(wander) > 0.25) {
        const double hz = wander_hz.empty() ? 0.5 : stats::median(wander_hz);
        const double cutoff = std::max(0.67, 1.5 * hz);
        CorrectiveAction sp1{ActionId::SP1, params({{"cutoff_hz", cutoff}}).dump(), wander_leads};
        ranked.push_back({30, sp1});
    }
    if (!powerline.empty() && stats::median(powerline) > 0.05) {
        double hz = 50.0;
        for (const auto& [lead, e] : evidence)
            if (e.valid && e.bands) {
                hz = e.bands->dominant_powerline_hz;
                break;
            }
        ranked.push_back({35, CorrectiveAction{ActionId::SP2, params({{"notch_hz", hz}}).dump(),
                                               powerline_leads}});
    }
    if (!jitters.empty() && stats::median(jitters) > 0.01) {
        ranked.push_back(
            {40, CorrectiveAction{ActionId::SP3,
                                  params({{"window", 11}, {"polyorder", 3}}).dump(),
                                  jitter_leads}});
    }
    if (!spans.empty()) {
        const double med_span = stats::median(spans);
        if (med_span > 1e-6 && (med_span < 0.4 || med_span > 6.0)) {
            const double factor = std::clamp(1.5 / med_span, 0.01, 100.0);
            ranked.push_back(
                {45, CorrectiveAction{ActionId::SP4, params({{"factor", factor}}).dump(), {}}});
            ranked.push_back(
                {46, CorrectiveAction{ActionId::LM2, params({{"factor", factor}}).dump(), {}}});
        }
    }
    if (sample_rate_hz != 500.0) {
        ranked.push_back(
            {50, CorrectiveAction{ActionId::SP5, params({{"target_rate_hz", 500.0}}).dump(), {}}});
    }

    std::sort(ranked.begin(), ranked.end(), [](const RankedAction& a, const RankedAction& b) {
        if (a.rank != b.rank) return a.rank < b.rank;
        return static_cast<int>(a.action.id) < static_cast<int>(b.action.id);
    });
    for (auto& r : ranked) plan.actions.push_back(std::move(r.action));
    return plan;
}

// ---------------------------------------------------------------------------
// Image-level assessment
// ---------------------------------------------------------------------------

int Assessment::count_at(Tier tier) const {
    int n = 0;
    for (const TierDecision& d : decisions)
        if (d.resolved_at == tier) ++n;
    return n;
}

std::string Assessment::to_json() const {
    json decisions_json = json::array();
    for (const TierDecision& d : decisions) {
        decisions_json.push_back({{"lead", to_string(d.lead)},
                                  {"resolved_at", to_string(d.resolved_at)},
                                  {"verdict", to_string(d.verdict)},
                                  {"escalated", d.escalated},
                                  {"judge_error", d.judge_error},
                                  {"note", d.note}});
    }
    json actions_json = json::array();
    for (const CorrectiveAction& a : actions) actions_json.push_back(json::parse(a.to_json()));
    json j{
        {"image_verdict", to_string(image_verdict)},
        {"q", q},
        {"dimensions",
         {{"SF", dimensions.signal_fidelity},
          {"MP", dimensions.morphological_preservation},
          {"CU", dimensions.clinical_utility},
          {"VAS", dimensions.visual_artifact_severity}}},
        {"rubric",
         {{"trace_continuity", rubric.trace_continuity},
          {"morphology_plausibility", rubric.morphology_plausibility},
          {"baseline_stability", rubric.baseline_stability},
          {"grid_alignment", rubric.grid_alignment},
          {"artifact_severity", rubric.artifact_severity}}},
        {"reliability_weight", reliability_weight},
        {"tier_counts",
         {{"Tier1", count_at(Tier::Tier1)},
          {"Tier2", count_at(Tier::Tier2)},
          {"Tier3", count_at(Tier::Tier3)}}},
        {"judge_calls", judge_calls},
        {"judge_unavailable", judge_unavailable},
        {"abstain", abstain},
        {"decisions", decisions_json},
        {"actions", actions_json},
    };
    return j.dump(2);
}

Assessment assess(const EcgRaster* raster, const DigitalEcg& signal,
                  const ContextProfile& profile, Judge* judge, const AssessOptions& options) {
    profile.validate();
    Assessment out;
    out.evidence = build_evidence(signal, raster, options.report, options.reference,
                                  options.pipeline);

    std::vector<RubricScores> lead_rubrics;
    std::vector<double> judge_weights;
    std::vector<double> pccs;

    for (const auto& [lead, e] : out.evidence) {
        TierDecision d = route_lead(e, options.thresholds);
        if (e.fidelity) pccs.push_back(e.fidelity->pcc);

        if (d.escalated) {
            if (judge) {
                JudgeRequest request;
                request.image_ref = options.image_ref;
                request.evidence = {e};
                request.context_profile = profile.name;
                request.request_id = std::string("lead-") + to_string(lead);
                try {
                    ++out.judge_calls;
                    const JudgeVerdict v = judge->judge(request);
                    d.verdict = v.verdict;
                    lead_rubrics.push_back(v.rubric);
                    judge_weights.push_back(v.reliability_weight);
                } catch (const EcgError& err) {
                    d.judge_error = true;
                    d.verdict = Verdict::BORDERLINE;
                    d.note = err.what();
                    out.judge_unavailable = true;
                    lead_rubrics.push_back(DeterministicJudge::grounded_score({&e, 1}));
                }
            } else {
                d.judge_error = true;
                d.verdict = Verdict::BORDERLINE;
                d.note = "no judge configured";
                out.judge_unavailable = true;
                lead_rubrics.push_back(DeterministicJudge::grounded_score({&e, 1}));
            }
        } else {
            lead_rubrics.push_back(DeterministicJudge::grounded_score({&e, 1}));
        }
        out.decisions.push_back(d);
    }

    RubricScores mean_rubric;
    for (const RubricScores& r : lead_rubrics) {
        mean_rubric.trace_continuity += r.trace_continuity;
        mean_rubric.morphology_plausibility += r.morphology_plausibility;
        mean_rubric.baseline_stability += r.baseline_stability;
        mean_rubric.grid_alignment += r.grid_alignment;
        mean_rubric.artifact_severity += r.artifact_severity;
    }
    const double n = std::max<std::size_t>(1, lead_rubrics.size());
    mean_rubric.trace_continuity /= n;
    mean_rubric.morphology_plausibility /= n;
    mean_rubric.baseline_stability /= n;
    mean_rubric.grid_alignment /= n;
    mean_rubric.artifact_severity /= n;
    out.rubric = mean_rubric;

    std::optional<double> mean_pcc;
    if (!pccs.empty()) mean_pcc = stats::mean(pccs);
    out.dimensions = aggregate(mean_rubric, mean_pcc, profile);

    // Clinical usability caps the composite exactly as the judge caps its own.
    std::vector<ToolEvidence> all;
    for (const auto& [lead, e] : out.evidence) all.push_back(e);
    const double coverage = DeterministicJudge::beat_coverage(all);
    const std::vector<std::pair<double, double>> usability_anchors = {
        {0.0, 0.10}, {0.25, 0.25}, {0.5, 0.45}, {0.6, 0.75}, {0.75, 0.92}, {0.9, 1.0}, {1.0, 1.0}};
    out.q = out.dimensions.q * stats::piecewise_linear(coverage, usability_anchors);
    out.dimensions.q = out.q;
    out.image_verdict = verdict_from_q(out.q);

    if (!judge_weights.empty()) {
        out.reliability_weight = stats::mean(judge_weights);
    } else {
        double valid_n = 0;
        for (const auto& [lead, e] : out.evidence)
            if (e.valid) valid_n += 1;
        const double completeness =
            0.5 * valid_n / std::max<std::size_t>(1, out.evidence.size()) + 0.5 * coverage;
        out.reliability_weight = 0.45 + 0.40 * completeness;
    }

    bool any_non_pass = out.image_verdict != Verdict::PASS;
    for (const TierDecision& d : out.decisions)
        if (d.verdict != Verdict::PASS) any_non_pass = true;
    if (any_non_pass) {
        ActionPlan plan = suggest_actions(out.evidence, signal.sample_rate_hz);
        out.actions = std::move(plan.actions);
        out.abstain = plan.abstain;
    }
    return out;
}

} // namespace ecgqa
