#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "vlp/executor.hpp"
#include "vlp/oracle_planner.hpp"
#include "vlp/remote_planner.hpp"
#include "vlp/scenario.hpp"

namespace vlp {

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::size_t episode_limit = 4;
    std::chrono::milliseconds step_delay{0};
    std::optional<RemoteEndpointConfig> remote;
    ExecutorOptions executor; // per-episode callbacks and id are set by the gateway
};

/// Client-facing projection of a running or finished episode.
struct EpisodeHandle {
    std::string id;
    std::string status = "planning"; // planning|executing|replanning|done_success|done_failure
    std::optional<std::string> policy_digest;
    std::size_t cursor = 0; // steps of the current policy started so far
};

inline nlohmann::json to_json(const EpisodeHandle& h) {
    return {{"id", h.id},
            {"status", h.status},
            {"policy_digest", h.policy_digest ? nlohmann::json(*h.policy_digest) : nlohmann::json()},
            {"cursor", h.cursor}};
}

namespace detail {

/// Shared between the control thread (single writer) and HTTP readers.
struct LiveEpisode {
    Inbox inbox;
    mutable std::mutex mu;
    std::condition_variable cv;
    EpisodeHandle handle;
    std::vector<std::string> lines; // canonical serialized events, stream order
    std::optional<Observation> snapshot;
    bool done = false;
    std::thread worker;

    void on_event(const EpisodeEvent& e) {
        {
            std::lock_guard lock(mu);
            lines.push_back(serialize_event(e));
            auto& h = handle;
            if (e.kind == "replanned") {
                h.status = "replanning";
            } else if (e.kind == "policy_generated") {
                h.policy_digest = e.details["digest"].is_string()
                                      ? std::optional<std::string>(e.details["digest"].get<std::string>())
                                      : std::nullopt;
                h.cursor = 0;
            } else if (e.kind == "step_started") {
                h.status = "executing";
                ++h.cursor;
            } else if (e.kind == "episode_closed") {
                h.status = e.details.value("status", "") == "success" ? "done_success" : "done_failure";
            }
        }
        cv.notify_all();
    }
};

} // namespace detail

/// HTTP/1.1 service for starting, steering and watching episodes.
class Gateway {
public:
    Gateway(std::vector<ScenarioSpec> corpus, GatewayConfig cfg) : cfg_(std::move(cfg)) {
        for (auto& s : corpus) scenarios_.emplace(s.id, std::move(s));
        if (cfg_.remote) remote_ = std::make_shared<RemotePlanner>(*cfg_.remote);
        routes();
    }

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    ~Gateway() {
        stop();
        std::vector<std::shared_ptr<detail::LiveEpisode>> all;
        {
            std::lock_guard lock(mu_);
            for (auto& [_, ep] : episodes_) all.push_back(ep);
        }
        for (auto& ep : all) {
            if (ep->worker.joinable()) ep->worker.join();
        }
    }

    /// Binds the listening socket; returns the port.
    int bind() {
        if (cfg_.port == 0) {
            port_ = server_.bind_to_any_port(cfg_.host);
        } else if (server_.bind_to_port(cfg_.host, cfg_.port)) {
            port_ = cfg_.port;
        } else {
            port_ = -1;
        }
        if (port_ < 0) throw std::runtime_error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
        return port_;
    }

    /// Serves on the calling thread until stop().
    void listen() { server_.listen_after_bind(); }

    /// Binds and serves on a background thread.
    int start() {
        const int port = bind();
        listener_ = std::thread([this] { listen(); });
        server_.wait_until_ready();
        return port;
    }

    void stop() {
        server_.stop();
        if (listener_.joinable()) listener_.join();
    }

    int port() const { return port_; }

    /// Blocks until the episode has closed. For tests and tooling.
    bool wait_done(const std::string& id, std::chrono::milliseconds timeout) {
        auto ep = find(id);
        if (!ep) return false;
        std::unique_lock lock(ep->mu);
        return ep->cv.wait_for(lock, timeout, [&] { return ep->done; });
    }

private:
    std::shared_ptr<detail::LiveEpisode> find(const std::string& id) {
        std::lock_guard lock(mu_);
        auto it = episodes_.find(id);
        return it == episodes_.end() ? nullptr : it->second;
    }

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void error(httplib::Response& res, int status, const std::string& message) {
        reply(res, status, {{"error", message}});
    }

    static std::optional<nlohmann::json> body_json(const httplib::Request& req, httplib::Response& res) {
        try {
            auto j = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
            if (!j.is_object()) throw std::runtime_error("body must be a JSON object");
            return j;
        } catch (const std::exception& e) {
            error(res, 400, std::string("bad request body: ") + e.what());
            return std::nullopt;
        }
    }

    void routes() {
        server_.Post("/tasks", [this](const httplib::Request& req, httplib::Response& res) { start_task(req, res); });

        server_.Post(R"(/episodes/([^/]+)/instruction)", [this](const httplib::Request& req, httplib::Response& res) {
            auto ep = find(req.matches[1]);
            if (!ep) return error(res, 404, "unknown episode");
            auto body = body_json(req, res);
            if (!body) return;
            if (!body->contains("text") || !(*body)["text"].is_string()) return error(res, 400, "missing text");
            if (!ep->inbox.push_instruction((*body)["text"].get<std::string>())) {
                return error(res, 409, "episode already finished");
            }
            reply(res, 202, {{"queued", true}});
        });

        server_.Post(R"(/episodes/([^/]+)/perturb)", [this](const httplib::Request& req, httplib::Response& res) {
            auto ep = find(req.matches[1]);
            if (!ep) return error(res, 404, "unknown episode");
            auto body = body_json(req, res);
            if (!body) return;
            Perturbation p;
            try {
                p = perturbation_from_json(body->contains("perturbation") ? (*body)["perturbation"] : *body);
            } catch (const std::exception& e) {
                return error(res, 400, e.what());
            }
            if (!ep->inbox.push_perturbation(std::move(p))) return error(res, 409, "episode already finished");
            reply(res, 202, {{"queued", true}});
        });

        server_.Get(R"(/episodes/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            auto ep = find(req.matches[1]);
            if (!ep) return error(res, 404, "unknown episode");
            std::lock_guard lock(ep->mu);
            auto j = to_json(ep->handle);
            j["observation"] = ep->snapshot ? to_json(*ep->snapshot) : nlohmann::json();
            reply(res, 200, j);
        });

        server_.Get(R"(/episodes/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            auto ep = find(req.matches[1]);
            if (!ep) return error(res, 404, "unknown episode");
            res.set_chunked_content_provider(
                "application/x-ndjson", [ep, next = std::size_t{0}](std::size_t, httplib::DataSink& sink) mutable {
                    std::vector<std::string> batch;
                    bool finished = false;
                    {
                        std::unique_lock lock(ep->mu);
                        ep->cv.wait_for(lock, std::chrono::milliseconds(200),
                                        [&] { return next < ep->lines.size() || ep->done; });
                        batch.assign(ep->lines.begin() + static_cast<std::ptrdiff_t>(next), ep->lines.end());
                        next = ep->lines.size();
                        finished = ep->done;
                    }
                    for (auto& line : batch) {
                        line += '\n';
                        if (!sink.write(line.data(), line.size())) return false;
                    }
                    if (finished) sink.done();
                    return sink.is_writable();
                });
        });

        server_.Get("/episodes", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json out = nlohmann::json::array();
            std::lock_guard lock(mu_);
            for (const auto& [_, ep] : episodes_) {
                std::lock_guard inner(ep->mu);
                out.push_back(to_json(ep->handle));
            }
            reply(res, 200, out);
        });

        server_.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& [id, s] : scenarios_) {
                out.push_back({{"id", id},
                               {"family", s.family},
                               {"dynamic", s.dynamic},
                               {"embodiment", s.embodiment},
                               {"instruction", s.instruction}});
            }
            reply(res, 200, out);
        });

        server_.Get("/catalog", [](const httplib::Request& req, httplib::Response& res) {
            const std::string name =
                req.has_param("embodiment") ? req.get_param_value("embodiment") : "quadruped_manipulator";
            try {
                reply(res, 200, catalog_to_json(builtin_catalog(name)));
            } catch (const UnknownEmbodiment& e) {
                error(res, 404, e.what());
            }
        });
    }

    void start_task(const httplib::Request& req, httplib::Response& res) {
        auto body = body_json(req, res);
        if (!body) return;
        const std::string scenario_id = body->value("scenario_id", "");
        auto sc = scenarios_.find(scenario_id);
        if (sc == scenarios_.end()) return error(res, 404, "unknown scenario '" + scenario_id + "'");

        ScenarioSpec spec = sc->second;
        if (auto it = body->find("instruction"); it != body->end() && it->is_string() && !it->get<std::string>().empty()) {
            spec.instruction = it->get<std::string>();
        }
        const std::string planner_name = body->value("planner", "oracle");
        std::shared_ptr<Planner> planner;
        if (planner_name == "oracle") {
            planner = oracle_;
        } else if (planner_name == "remote") {
            if (!remote_) return error(res, 400, "no remote endpoint configured");
            planner = remote_;
        } else {
            return error(res, 400, "planner must be 'oracle' or 'remote'");
        }
        std::uint64_t seed = 0;
        if (auto it = body->find("seed"); it != body->end()) {
            if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
                return error(res, 400, "seed must be a non-negative integer");
            }
            seed = it->get<std::uint64_t>();
        }

        auto ep = std::make_shared<detail::LiveEpisode>();
        std::string id;
        {
            std::lock_guard lock(mu_);
            std::size_t running = 0;
            for (const auto& [_, e] : episodes_) {
                std::lock_guard inner(e->mu);
                if (!e->done) ++running;
            }
            if (running >= cfg_.episode_limit) return error(res, 409, "concurrent-episode limit reached");
            id = "ep-" + std::to_string(++counter_);
            ep->handle.id = id;
            episodes_.emplace(id, ep);
        }

        ExecutorOptions opts = cfg_.executor;
        opts.episode_id = id;
        opts.step_delay = cfg_.step_delay;
        opts.on_event = [ep](const EpisodeEvent& e) { ep->on_event(e); };
        opts.on_snapshot = [ep](const Observation& o) {
            std::lock_guard lock(ep->mu);
            ep->snapshot = o;
        };
        ep->worker = std::thread([ep, spec = std::move(spec), planner, seed, opts] {
            try {
                const auto catalog = builtin_catalog(spec.embodiment);
                run_episode(spec, *planner, catalog, ep->inbox, seed, opts);
            } catch (const std::exception& e) {
                ep->inbox.close();
                EpisodeEvent failed{0, "episode_closed", {{"status", "failure"}, {"error", e.what()}}};
                ep->on_event(failed);
            }
            {
                std::lock_guard lock(ep->mu);
                ep->done = true;
            }
            ep->cv.notify_all();
        });
        reply(res, 202, {{"episode_id", id}});
    }

    GatewayConfig cfg_;
    std::map<std::string, ScenarioSpec> scenarios_;
    std::shared_ptr<Planner> oracle_ = std::make_shared<OraclePlanner>();
    std::shared_ptr<Planner> remote_;
    httplib::Server server_;
    std::thread listener_;
    int port_ = -1;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<detail::LiveEpisode>> episodes_;
    std::size_t counter_ = 0;
};

} // namespace vlp
