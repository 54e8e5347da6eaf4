#pragma once

#include <chrono>
#include <future>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "vlp/errors.hpp"
#include "vlp/planner.hpp"

namespace vlp {

struct RemoteEndpointConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model_name = "vlp";
    std::chrono::milliseconds timeout{30000}; // per attempt
    int max_retries = 2;                      // attempts = max_retries + 1
    double temperature = 0.0;
};

/// Body of a chat-completions request.
inline nlohmann::json chat_request_body(const RemoteEndpointConfig& cfg, const std::vector<ChatMessage>& messages) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", cfg.model_name}, {"temperature", cfg.temperature}, {"messages", msgs}};
}

/// Minimal OpenAI-compatible chat-completions client. Stateless: each call
/// opens its own connection, so calls may run concurrently.
class ChatCompletionsClient {
public:
    explicit ChatCompletionsClient(RemoteEndpointConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
        if (cfg_.max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
    }

    const RemoteEndpointConfig& config() const { return cfg_; }

    /// Returns choices[0].message.content. Transport errors, timeouts, 429
    /// and 5xx are retried immediately; other statuses fail at once.
    std::string complete(const std::vector<ChatMessage>& messages) const {
        const std::string body = chat_request_body(cfg_, messages).dump();
        const int attempts = cfg_.max_retries + 1;
        PlannerUnavailable::Cause cause = PlannerUnavailable::Cause::transport;
        std::string last;
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            httplib::Client cli(cfg_.base_url);
            cli.set_connection_timeout(cfg_.timeout);
            cli.set_read_timeout(cfg_.timeout);
            cli.set_write_timeout(cfg_.timeout);

            const auto start = std::chrono::steady_clock::now();
            auto res = cli.Post("/v1/chat/completions", body, "application/json");
            const auto elapsed = std::chrono::steady_clock::now() - start;

            if (!res) {
                const auto err = res.error();
                const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                       (err == httplib::Error::Read && elapsed >= cfg_.timeout * 9 / 10);
                cause = timed_out ? PlannerUnavailable::Cause::timeout : PlannerUnavailable::Cause::transport;
                last = timed_out ? "timed out after " + std::to_string(cfg_.timeout.count()) + " ms"
                                 : "transport error: " + httplib::to_string(err);
                continue;
            }
            if (res->status != 200) {
                cause = PlannerUnavailable::Cause::http_status;
                last = "HTTP " + std::to_string(res->status);
                if (res->status == 429 || res->status >= 500) continue;
                throw PlannerUnavailable(cause, attempt, last);
            }
            try {
                auto j = nlohmann::json::parse(res->body);
                const auto& content = j.at("choices").at(0).at("message").at("content");
                return content.is_string() ? content.get<std::string>() : std::string();
            } catch (const nlohmann::json::exception& e) {
                throw PlannerUnavailable(PlannerUnavailable::Cause::http_status, attempt,
                                         std::string("malformed chat-completions reply: ") + e.what());
            }
        }
        throw PlannerUnavailable(cause, attempts, last + " (" + std::to_string(attempts) + " attempts)");
    }

private:
    RemoteEndpointConfig cfg_;
};

/// Planner backed by a served vision-language model.
class RemotePlanner final : public Planner {
public:
    explicit RemotePlanner(RemoteEndpointConfig cfg) : client_(std::move(cfg)) {}

    PlannerResponse plan(const PlannerRequest& request) override {
        const auto start = std::chrono::steady_clock::now();
        PlannerResponse r;
        r.backend = backend();
        r.raw_output = client_.complete(assemble_prompt(request, PromptMode::policy));
        r.policy = extract_policy(r.raw_output);
        r.latency = std::chrono::steady_clock::now() - start;
        return r;
    }

    /// Grounding query issued off the control thread; the caller awaits it.
    std::future<std::string> ground_async(PlannerRequest request, GroundingQuery query) const {
        return std::async(std::launch::async, [client = client_, request = std::move(request),
                                               query = std::move(query)] {
            return client.complete(assemble_prompt(request, PromptMode::grounding, query));
        });
    }

    std::string backend() const override { return "remote:" + client_.config().model_name; }

private:
    ChatCompletionsClient client_;
};

} // namespace vlp
