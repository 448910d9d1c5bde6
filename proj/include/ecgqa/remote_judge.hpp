#pragma once

#include "ecgqa/judge.hpp"

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ecgqa {

struct TransportResponse {
    int status = 0;
    std::string body;
};

/// Transport seam for the remote judge: the production implementation POSTs
/// over HTTP, the test double replays a recorded transcript. Implementations
/// throw EcgError(Transport) / EcgError(Timeout).
class JudgeTransport {
public:
    virtual ~JudgeTransport() = default;
    virtual TransportResponse post(const std::string& request_body) = 0;
};

/// HTTP POST of the JudgeRequest JSON. Endpoint and credentials come from
/// ECGQA_JUDGE_URL and ECGQA_JUDGE_TOKEN unless set explicitly.
class HttpJudgeTransport : public JudgeTransport {
public:
    HttpJudgeTransport();
    HttpJudgeTransport(std::string base_url, std::string path, std::string bearer_token,
                       double timeout_s);
    TransportResponse post(const std::string& request_body) override;

private:
    std::string base_url_;
    std::string path_;
    std::string token_;
    double timeout_s_ = 30.0;
};

/// Replays a fixed transcript of responses in order; records every request
/// body it sees. No network involved.
class ReplayJudgeTransport : public JudgeTransport {
public:
    void enqueue(int status, std::string body);
    TransportResponse post(const std::string& request_body) override;

    const std::vector<std::string>& seen_requests() const { return seen_; }

private:
    std::mutex mutex_;
    std::deque<TransportResponse> queue_;
    std::vector<std::string> seen_;
};

/// Remote judge over the wire contract:
///   POST JudgeRequest JSON -> {verdict, composite_q, rubric{5}, reliability_weight, rationale}.
/// Strict schema validation; unknown fields ignored; a missing field or a
/// verdict inconsistent with composite_q raises SchemaViolation. A response
/// echoing a mismatched request_id raises SchemaViolation as well.
class RemoteJudge : public Judge {
public:
    explicit RemoteJudge(JudgeTransport& transport) : transport_(transport) {}

    JudgeVerdict judge(const JudgeRequest& request) override;
    std::string name() const override { return "remote"; }

    /// Concurrent batch with a cap on in-flight requests; results are keyed by
    /// position. Per-request errors surface as entries with ok == false.
    struct BatchEntry {
        bool ok = false;
        JudgeVerdict verdict;
        std::string error;
    };
    std::vector<BatchEntry> judge_batch(const std::vector<JudgeRequest>& requests,
                                        int max_in_flight);

private:
    JudgeTransport& transport_;
};

} // namespace ecgqa
