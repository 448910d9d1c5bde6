#include "ecgqa/judge.hpp"

#include "ecgqa/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ecgqa {

using nlohmann::json;

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::PASS: return "PASS";
        case Verdict::BORDERLINE: return "BORDERLINE";
        case Verdict::FAIL: return "FAIL";
    }
    return "?";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "PASS") return Verdict::PASS;
    if (s == "BORDERLINE") return Verdict::BORDERLINE;
    if (s == "FAIL") return Verdict::FAIL;
    throw EcgError(ErrorKind::SchemaViolation, "unknown verdict '" + s + "'");
}

const std::string& default_rubric_instructions() {
    static const std::string text =
        "rubric-v1: score five dimensions 0-100 (trace_continuity, "
        "morphology_plausibility, baseline_stability, grid_alignment, "
        "artifact_severity; higher is better on every axis, including artifact "
        "severity where 100 means no artifacts). Anchor every score in the "
        "attached tool evidence; do not contradict a quantitative field. Return "
        "verdict PASS/BORDERLINE/FAIL consistent with composite_q (PASS >= 75, "
        "FAIL < 40).";
    return text;
}

std::string JudgeVerdict::to_json() const {
    json j{
        {"verdict", to_string(verdict)},
        {"composite_q", composite_q},
        {"rubric",
         {{"trace_continuity", rubric.trace_continuity},
          {"morphology_plausibility", rubric.morphology_plausibility},
          {"baseline_stability", rubric.baseline_stability},
          {"grid_alignment", rubric.grid_alignment},
          {"artifact_severity", rubric.artifact_severity}}},
        {"reliability_weight", reliability_weight},
        {"rationale", rationale},
    };
    return j.dump();
}

JudgeVerdict JudgeVerdict::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw EcgError(ErrorKind::SchemaViolation, "verdict is not a JSON object");
    for (const char* key : {"verdict", "composite_q", "rubric", "reliability_weight", "rationale"})
        if (!j.contains(key))
            throw EcgError(ErrorKind::SchemaViolation,
                           std::string("verdict missing required field '") + key + "'");
    if (!j["rubric"].is_object())
        throw EcgError(ErrorKind::SchemaViolation, "rubric must be an object");
    JudgeVerdict v;
    v.verdict = verdict_from_string(j["verdict"].get<std::string>());
    if (!j["composite_q"].is_number())
        throw EcgError(ErrorKind::SchemaViolation, "composite_q must be a number");
    v.composite_q = j["composite_q"].get<double>();
    const json& r = j["rubric"];
    for (const char* key : {"trace_continuity", "morphology_plausibility", "baseline_stability",
                            "grid_alignment", "artifact_severity"})
        if (!r.contains(key) || !r[key].is_number())
            throw EcgError(ErrorKind::SchemaViolation,
                           std::string("rubric missing numeric field '") + key + "'");
    v.rubric.trace_continuity = r["trace_continuity"].get<double>();
    v.rubric.morphology_plausibility = r["morphology_plausibility"].get<double>();
    v.rubric.baseline_stability = r["baseline_stability"].get<double>();
    v.rubric.grid_alignment = r["grid_alignment"].get<double>();
    v.rubric.artifact_severity = r["artifact_severity"].get<double>();
    if (!j["reliability_weight"].is_number())
        throw EcgError(ErrorKind::SchemaViolation, "reliability_weight must be a number");
    v.reliability_weight = j["reliability_weight"].get<double>();
    v.rationale = j["rationale"].is_string() ? j["rationale"].get<std::string>() : std::string();
    if (v.verdict != verdict_from_q(v.composite_q))
        throw EcgError(ErrorKind::SchemaViolation,
                       "verdict is inconsistent with composite_q thresholds");
    return v;
}

std::string JudgeRequest::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["temperature"] = 0;
    if (image_inline)
        j["image"] = {{"base64", image_ref}};
    else
        j["image"] = {{"path", image_ref}};
    j["context_profile"] = context_profile;
    j["rubric_instructions"] = rubric_instructions;
    if (!request_id.empty()) j["request_id"] = request_id;
    json ev = json::array();
    for (const ToolEvidence& e : evidence) ev.push_back(json::parse(e.to_json()));
    j["evidence"] = ev;
    return j.dump();
}

// ---------------------------------------------------------------------------
// Deterministic tool-grounded judge
// ---------------------------------------------------------------------------

namespace {

using Anchor = std::pair<double, double>;

double pw(double x, std::initializer_list<Anchor> anchors) {
    std::vector<Anchor> a(anchors);
    return stats::piecewise_linear(x, a);
}

double median_over(std::span<const ToolEvidence> evidence,
                   double (*field)(const ToolEvidence&), bool valid_only = true) {
    std::vector<double> vals;
    for (const ToolEvidence& e : evidence) {
        if (valid_only && !e.valid) continue;
        vals.push_back(field(e));
    }
    if (vals.empty()) return 0.0;
    return stats::median(vals);
}

} // namespace

double DeterministicJudge::beat_coverage(std::span<const ToolEvidence> evidence) {
    if (evidence.empty()) return 0.0;
    int covered = 0;
    for (const ToolEvidence& e : evidence)
        if (e.valid && e.morphology.beat_count >= 1) ++covered;
    return static_cast<double>(covered) / static_cast<double>(evidence.size());
}

RubricScores DeterministicJudge::grounded_score(std::span<const ToolEvidence> evidence) {
    if (evidence.empty())
        throw EcgError(ErrorKind::IncompleteEvidence, "no evidence records");
    for (const ToolEvidence& e : evidence)
        if (e.valid && (!e.sqi || !e.bands))
            throw EcgError(ErrorKind::IncompleteEvidence,
                           std::string("valid lead ") + to_string(e.lead) +
                               " lacks tool outputs");

    double n = 0, valid_n = 0, gap_sum = 0, flag_sum = 0, spike_sum = 0;
    for (const ToolEvidence& e : evidence) {
        n += 1;
        gap_sum += e.gap_fraction;
        if (e.valid) {
            valid_n += 1;
            flag_sum += e.morphology.flags.count();
            spike_sum += e.spike_count + e.step_count;
        }
    }
    const double valid_fraction = valid_n / n;
    const double mean_gap = gap_sum / n;
    const double mean_flags = valid_n > 0 ? flag_sum / valid_n : 3.0;
    const double mean_spikes = valid_n > 0 ? spike_sum / valid_n : 20.0;
    const double coverage = beat_coverage(evidence);

    const double med_snr = median_over(
        evidence, [](const ToolEvidence& e) { return e.sqi ? e.sqi->snrSQI : -30.0; });
    const double med_wander = median_over(evidence, [](const ToolEvidence& e) {
        return e.bands ? e.bands->wander_power_ratio : 1.0;
    });
    const double med_jitter = median_over(evidence, [](const ToolEvidence& e) {
        return e.jitter_ratio ? *e.jitter_ratio : 0.1;
    });
    const double conf = evidence.front().strategy_confidence;

    RubricScores r;
    r.trace_continuity = std::min(
        pw(mean_gap, {{0.0, 100}, {0.02, 92}, {0.05, 85}, {0.15, 60}, {0.30, 40}, {0.50, 20}, {1.0, 0}}),
        pw(valid_fraction, {{0.0, 0}, {0.25, 15}, {0.5, 35}, {0.75, 65}, {0.9, 85}, {1.0, 100}}));
    r.morphology_plausibility = std::min(
        pw(mean_flags, {{0.0, 100}, {0.5, 80}, {1.0, 60}, {2.0, 30}, {3.0, 10}}),
        pw(coverage, {{0.0, 0}, {0.25, 5}, {0.5, 10}, {0.75, 50}, {0.9, 80}, {0.95, 95}, {1.0, 100}}));
    r.baseline_stability = std::min(
        pw(med_snr, {{-20.0, 0}, {-10.0, 15}, {-5.0, 30}, {0.0, 55}, {5.0, 80}, {10.0, 100}}),
        pw(med_wander, {{0.03, 100}, {0.1, 85}, {0.2, 60}, {0.35, 35}, {0.5, 15}, {0.8, 0}}));
    r.grid_alignment = pw(
        conf, {{0.0, 10}, {0.1, 15}, {0.3, 40}, {0.5, 60}, {0.7, 80}, {0.9, 95}, {1.0, 100}});
    r.artifact_severity = std::min(
        pw(mean_spikes, {{0.0, 100}, {1.0, 85}, {3.0, 60}, {6.0, 35}, {12.0, 10}, {20.0, 0}}),
        pw(med_jitter, {{0.002, 100}, {0.005, 88}, {0.01, 70}, {0.02, 45}, {0.05, 15}, {0.1, 0}}));
    return r;
}

JudgeVerdict DeterministicJudge::judge(const JudgeRequest& request) {
    if (request.evidence.empty())
        throw EcgError(ErrorKind::IncompleteEvidence, "request carries no evidence");

    const RubricScores rubric = grounded_score(request.evidence);
    const double coverage = beat_coverage(request.evidence);

    // A record whose leads mostly lack beats is clinically unusable no matter
    // how clean the raster looks; the composite is capped accordingly.
    const double usability =
        pw(coverage, {{0.0, 0.10}, {0.25, 0.25}, {0.5, 0.45}, {0.6, 0.75}, {0.75, 0.92}, {0.9, 1.0}, {1.0, 1.0}});

    double valid_n = 0;
    for (const ToolEvidence& e : request.evidence)
        if (e.valid) valid_n += 1;
    const double valid_fraction = valid_n / static_cast<double>(request.evidence.size());
    const double completeness = 0.5 * valid_fraction + 0.5 * coverage;

    JudgeVerdict v;
    v.rubric = rubric;
    v.composite_q = rubric.mean() * usability;
    v.verdict = verdict_from_q(v.composite_q);
    v.reliability_weight = 0.45 + 0.40 * completeness;

    std::ostringstream why;
    why.precision(3);
    why << "grounded: gaps/validity -> continuity " << rubric.trace_continuity
        << "; flags+coverage -> morphology " << rubric.morphology_plausibility
        << "; snr/wander -> baseline " << rubric.baseline_stability << "; strategy conf -> grid "
        << rubric.grid_alignment << "; spikes/jitter -> artifacts " << rubric.artifact_severity
        << "; beat coverage " << coverage << " scales Q to " << v.composite_q;
    v.rationale = why.str();
    return v;
}

JudgeVerdict ConstantJudge::judge(const JudgeRequest&) {
    JudgeVerdict v;
    v.verdict = verdict_;
    v.composite_q = verdict_ == Verdict::PASS ? 90.0
                    : verdict_ == Verdict::FAIL ? 20.0
                                                : 60.0;
    v.rubric = {v.composite_q, v.composite_q, v.composite_q, v.composite_q, v.composite_q};
    v.reliability_weight = 0.5;
    v.rationale = "constant";
    return v;
}

JudgeVerdict StochasticFlipJudge::judge(const JudgeRequest& request) {
    JudgeVerdict v = inner_.judge(request);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) < flip_p_) {
        std::uniform_int_distribution<int> pick(0, 1);
        const Verdict others[3][2] = {
            {Verdict::BORDERLINE, Verdict::FAIL},   // from PASS
            {Verdict::PASS, Verdict::FAIL},         // from BORDERLINE
            {Verdict::PASS, Verdict::BORDERLINE},   // from FAIL
        };
        const int row = v.verdict == Verdict::PASS ? 0 : v.verdict == Verdict::BORDERLINE ? 1 : 2;
        v.verdict = others[row][pick(rng_)];
        // Keep the serialized record self-consistent with the flipped class.
        v.composite_q = v.verdict == Verdict::PASS ? 80.0
                        : v.verdict == Verdict::FAIL ? 30.0
                                                     : 60.0;
        v.rationale += " [unstable]";
    }
    return v;
}

// ---------------------------------------------------------------------------
// Reliability gate and consistency
// ---------------------------------------------------------------------------

namespace {

bool flagged(Verdict v) { return v != Verdict::PASS; }

} // namespace

GateReport reliability_gate(Judge& judge, std::span<const JudgeRequest> clean,
                            std::span<const JudgeRequest> injected, const GateConfig& cfg) {
    GateReport report;
    for (const JudgeRequest& r : clean) {
        try {
            const JudgeVerdict v = judge.judge(r);
            ++report.clean_total;
            if (flagged(v.verdict)) ++report.clean_flagged;
        } catch (const EcgError&) {
            ++report.error_count;
        }
    }
    for (const JudgeRequest& r : injected) {
        try {
            const JudgeVerdict v = judge.judge(r);
            ++report.injected_total;
            if (flagged(v.verdict)) ++report.injected_flagged;
        } catch (const EcgError&) {
            ++report.error_count;
        }
    }
    report.sensitivity = report.injected_total > 0
                             ? static_cast<double>(report.injected_flagged) / report.injected_total
                             : 0.0;
    report.specificity =
        report.clean_total > 0
            ? 1.0 - static_cast<double>(report.clean_flagged) / report.clean_total
            : 0.0;
    report.passed =
        report.sensitivity >= cfg.min_sensitivity && report.specificity >= cfg.min_specificity &&
        report.injected_total > 0 && report.clean_total > 0;
    return report;
}

ConsistencyReport verdict_consistency(Judge& judge, const JudgeRequest& request, int runs) {
    if (runs < 2) throw EcgError(ErrorKind::ParameterError, "consistency needs >= 2 runs");
    ConsistencyReport report;
    std::vector<Verdict> verdicts;
    for (int i = 0; i < runs; ++i) {
        try {
            verdicts.push_back(judge.judge(request).verdict);
        } catch (const EcgError&) {
            ++report.error_runs;
        }
    }
    for (std::size_t i = 0; i < verdicts.size(); ++i)
        for (std::size_t j = i + 1; j < verdicts.size(); ++j) {
            ++report.pairs_total;
            if (verdicts[i] == verdicts[j]) ++report.pairs_identical;
        }
    report.fraction = report.pairs_total > 0
                          ? static_cast<double>(report.pairs_identical) / report.pairs_total
                          : 0.0;
    return report;
}

} // namespace ecgqa
