#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "vlp/remote_planner.hpp"
#include "vlp/vlp.hpp"

namespace vlp::testing {

inline std::vector<ScenarioSpec> corpus() { return load_corpus(VLP_SCENARIO_DIR); }

inline ScenarioSpec scenario(const std::string& id) {
    for (auto& s : corpus()) {
        if (s.id == id) return s;
    }
    throw std::runtime_error("no scenario " + id);
}

inline std::vector<ScenarioSpec> static_corpus() {
    std::vector<ScenarioSpec> out;
    for (auto& s : corpus()) {
        if (!s.dynamic) out.push_back(s);
    }
    return out;
}

/// Replays canned responses in order; the last one repeats.
class ScriptedPlanner final : public Planner {
public:
    explicit ScriptedPlanner(std::vector<std::function<PlannerResponse(const PlannerRequest&)>> script)
        : script_(std::move(script)) {}

    PlannerResponse plan(const PlannerRequest& request) override {
        requests.push_back(request);
        auto& f = script_[std::min(calls_++, script_.size() - 1)];
        auto r = f(request);
        r.backend = backend();
        return r;
    }

    std::string backend() const override { return "scripted"; }

    std::vector<PlannerRequest> requests;

private:
    std::vector<std::function<PlannerResponse(const PlannerRequest&)>> script_;
    std::size_t calls_ = 0;
};

inline std::function<PlannerResponse(const PlannerRequest&)> respond_with(std::optional<Policy> p,
                                                                         std::string raw = "") {
    return [p, raw](const PlannerRequest&) {
        PlannerResponse r;
        r.policy = p;
        r.raw_output = raw;
        return r;
    };
}

inline std::function<PlannerResponse(const PlannerRequest&)> respond_oracle() {
    return [](const PlannerRequest& req) { return OraclePlanner{}.plan(req); };
}

inline BehaviorStep step(std::string id, StepKind kind, std::string name, Params params = {},
                         OnFail on_fail = OnFail::replan) {
    return BehaviorStep{std::move(id), kind, std::move(name), std::move(params), on_fail};
}

inline Policy single_phase(std::vector<BehaviorStep> steps, std::string summary = "test") {
    Policy p;
    p.task_summary = std::move(summary);
    p.phases.push_back({"main", std::move(steps)});
    return p;
}

/// Random policy over arbitrary names and values; structurally valid for
/// parse/serialize but not necessarily executable.
inline Policy random_policy(std::mt19937_64& rng) {
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto real = [&] {
        // Mix of magnitudes, integers and awkward decimals.
        switch (pick(4)) {
        case 0: return static_cast<double>(std::uniform_int_distribution<int>(-5, 5)(rng));
        case 1: return std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        case 2: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
        default: return std::ldexp(std::uniform_real_distribution<double>(0.5, 1.0)(rng), pick(40) - 20);
        }
    };
    static const std::vector<std::string> words = {"cup", "table", "drawer", "a b", "q\"uote", "back\\slash",
                                                   "émoji ✓", "", "x.y", "{brace}", "line\nbreak"};
    static const std::vector<std::string> names = {"wake_up", "grasp", "place", "locate_object", "custom"};
    Policy p;
    p.task_summary = words[pick(words.size())];
    int counter = 0;
    std::vector<std::string> ids;
    const std::size_t phases = pick(4);
    for (std::size_t ph = 0; ph < phases; ++ph) {
        Phase phase;
        phase.name = "phase" + std::to_string(ph) + words[pick(words.size())];
        const std::size_t n = pick(5);
        for (std::size_t i = 0; i < n; ++i) {
            BehaviorStep s;
            s.id = "s" + std::to_string(++counter);
            s.kind = pick(2) ? StepKind::action : StepKind::perception;
            s.name = names[pick(names.size())];
            s.on_fail = pick(3) == 0 ? OnFail::abort : OnFail::replan;
            const std::size_t nparams = pick(4);
            for (std::size_t k = 0; k < nparams; ++k) {
                const std::string key = "k" + std::to_string(k) + (pick(2) ? "" : "_" + words[pick(3)]);
                switch (pick(4)) {
                case 0: s.params[key] = real(); break;
                case 1: s.params[key] = words[pick(words.size())]; break;
                case 2: s.params[key] = Pose{real(), real(), real(), real(), real(), real()}; break;
                default:
                    if (ids.empty()) {
                        s.params[key] = real();
                    } else {
                        s.params[key] = ParamRef{ids[pick(ids.size())], pick(2) ? "pose" : "out_" + std::to_string(k)};
                    }
                }
            }
            ids.push_back(s.id);
            phase.steps.push_back(std::move(s));
        }
        p.phases.push_back(std::move(phase));
    }
    return p;
}

inline std::string chat_reply(const std::string& content) {
    return nlohmann::json{{"id", "cmpl-1"},
                          {"object", "chat.completion"},
                          {"choices", {{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", content}}},
                                        {"finish_reason", "stop"}}}}}
        .dump();
}

/// Local chat-completions endpoint whose behavior is set per test.
class StubChatServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&, int call)>;

    explicit StubChatServer(Handler handler) : handler_(std::move(handler)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int call = ++calls_;
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(req.body);
            }
            handler_(req, res, call);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubChatServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int calls() const { return calls_; }
    std::vector<std::string> bodies() const {
        std::lock_guard lock(mu_);
        return bodies_;
    }

private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
    std::atomic<int> calls_{0};
    mutable std::mutex mu_;
    std::vector<std::string> bodies_;
};

} // namespace vlp::testing
