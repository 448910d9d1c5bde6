#include "ecgqa/remote_judge.hpp"

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS 0
#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace ecgqa {

using nlohmann::json;

HttpJudgeTransport::HttpJudgeTransport() {
    const char* url = std::getenv("ECGQA_JUDGE_URL");
    if (!url || !*url)
        throw EcgError(ErrorKind::ConfigError, "ECGQA_JUDGE_URL is not set");
    base_url_ = url;
    const auto slash = base_url_.find('/', base_url_.find("//") + 2);
    if (slash != std::string::npos) {
        path_ = base_url_.substr(slash);
        base_url_ = base_url_.substr(0, slash);
    } else {
        path_ = "/";
    }
    if (const char* token = std::getenv("ECGQA_JUDGE_TOKEN")) token_ = token;
    if (const char* t = std::getenv("ECGQA_JUDGE_TIMEOUT_S")) timeout_s_ = std::atof(t);
}

HttpJudgeTransport::HttpJudgeTransport(std::string base_url, std::string path,
                                       std::string bearer_token, double timeout_s)
    : base_url_(std::move(base_url)),
      path_(std::move(path)),
      token_(std::move(bearer_token)),
      timeout_s_(timeout_s) {}

TransportResponse HttpJudgeTransport::post(const std::string& request_body) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(static_cast<time_t>(timeout_s_),
                                  static_cast<time_t>((timeout_s_ - int(timeout_s_)) * 1e6));
    client.set_read_timeout(static_cast<time_t>(timeout_s_), 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path_, headers, request_body, "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            throw EcgError(ErrorKind::Timeout, "judge request timed out");
        throw EcgError(ErrorKind::Transport, "judge transport failed: " + httplib::to_string(err));
    }
    return TransportResponse{res->status, res->body};
}

void ReplayJudgeTransport::enqueue(int status, std::string body) {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back(TransportResponse{status, std::move(body)});
}

TransportResponse ReplayJudgeTransport::post(const std::string& request_body) {
    std::lock_guard<std::mutex> lock(mutex_);
    seen_.push_back(request_body);
    if (queue_.empty())
        throw EcgError(ErrorKind::Transport, "replay transcript exhausted");
    TransportResponse r = std::move(queue_.front());
    queue_.pop_front();
    return r;
}

JudgeVerdict RemoteJudge::judge(const JudgeRequest& request) {
    const TransportResponse res = transport_.post(request.to_json());
    if (res.status != 200)
        throw EcgError(ErrorKind::Transport,
                       "judge endpoint returned status " + std::to_string(res.status));
    // Echoed request ids must match when both sides carry one.
    if (!request.request_id.empty()) {
        json j = json::parse(res.body, nullptr, false);
        if (!j.is_discarded() && j.is_object() && j.contains("request_id") &&
            j["request_id"].is_string() &&
            j["request_id"].get<std::string>() != request.request_id)
            throw EcgError(ErrorKind::SchemaViolation, "response correlates to a different request");
    }
    return JudgeVerdict::from_json(res.body);
}

std::vector<RemoteJudge::BatchEntry> RemoteJudge::judge_batch(
    const std::vector<JudgeRequest>& requests, int max_in_flight) {
    if (max_in_flight < 1)
        throw EcgError(ErrorKind::ParameterError, "in-flight cap must be >= 1");
    std::vector<BatchEntry> results(requests.size());
    std::mutex next_mutex;
    std::size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= requests.size()) return;
                i = next++;
            }
            try {
                results[i].verdict = judge(requests[i]);
                results[i].ok = true;
            } catch (const EcgError& e) {
                results[i].ok = false;
                results[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(max_in_flight, static_cast<int>(requests.size()));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

} // namespace ecgqa
