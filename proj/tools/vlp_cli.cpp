// vlp: batch evaluation, gateway service and scenario checks.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "vlp/gateway.hpp"
#include "vlp/remote_planner.hpp"
#include "vlp/vlp.hpp"

namespace fs = std::filesystem;

namespace {

struct RemoteFlags {
    std::string base_url;
    std::string model = "vlp";
    int timeout_ms = 30000;
    int max_retries = 2;
    double temperature = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--base-url", base_url, "Chat-completions endpoint root")->envname("VLP_REMOTE_URL");
        cmd->add_option("--model", model, "Model name sent to the endpoint")->envname("VLP_REMOTE_MODEL");
        cmd->add_option("--timeout-ms", timeout_ms, "Per-attempt timeout")->check(CLI::PositiveNumber);
        cmd->add_option("--max-retries", max_retries, "Retries after the first attempt")->check(CLI::NonNegativeNumber);
        cmd->add_option("--temperature", temperature, "Sampling temperature");
    }

    vlp::RemoteEndpointConfig config() const {
        return {base_url, model, std::chrono::milliseconds(timeout_ms), max_retries, temperature};
    }
};

std::string default_corpus() {
    if (const char* env = std::getenv("VLP_SCENARIO_DIR")) return env;
    return VLP_SCENARIO_DIR;
}

vlp::Gateway* g_gateway = nullptr;

void on_signal(int) {
    if (g_gateway) g_gateway->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic policy planning runtime"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run seeded trials over a scenario corpus and report metrics");
    std::string corpus = default_corpus();
    std::string planner_name = "oracle";
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    std::string format = "table";
    std::string out_path;
    std::string embodiment;
    double noise = -1.0;
    std::size_t workers = 1;
    std::string trace_dir;
    RemoteFlags run_remote;
    run->add_option("--corpus", corpus, "Directory of scenario JSON files")->check(CLI::ExistingDirectory);
    run->add_option("--planner", planner_name, "Planner backend")->check(CLI::IsMember({"oracle", "remote"}));
    run->add_option("--trials", trials, "Trials per scenario")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "First seed; trials use seed..seed+N-1");
    run->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv", "table"}));
    run->add_option("--out", out_path, "Write the report here instead of stdout");
    run->add_option("--embodiment", embodiment, "Run every scenario on this embodiment");
    run->add_option("--noise", noise, "Observation noise sigma (m) for every scenario");
    run->add_option("--workers", workers, "Parallel trials")->check(CLI::PositiveNumber);
    run->add_option("--trace-dir", trace_dir, "Write one canonical event trace per trial");
    run_remote.attach(run);

    // serve
    auto* serve = app.add_subcommand("serve", "Start the HTTP gateway");
    vlp::GatewayConfig gw;
    std::string serve_corpus = default_corpus();
    int step_delay_ms = 0;
    RemoteFlags serve_remote;
    serve->add_option("--host", gw.host, "Listen address")->envname("VLP_HOST");
    serve->add_option("--port", gw.port, "Listen port")->envname("VLP_PORT");
    serve->add_option("--scenarios", serve_corpus, "Scenario directory")->check(CLI::ExistingDirectory);
    serve->add_option("--episode-limit", gw.episode_limit, "Concurrent episodes")->envname("VLP_EPISODE_LIMIT");
    serve->add_option("--step-delay-ms", step_delay_ms, "Pause after each step, for live steering");
    serve_remote.attach(serve);

    // scenario validate
    auto* scenario = app.add_subcommand("scenario", "Scenario file utilities");
    scenario->require_subcommand(1);
    auto* validate = scenario->add_subcommand("validate", "Check one scenario file");
    std::string scenario_file;
    validate->add_option("file", scenario_file, "Scenario JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto specs = vlp::load_corpus(corpus);
            std::unique_ptr<vlp::Planner> planner;
            if (planner_name == "remote") {
                if (run_remote.base_url.empty()) throw std::runtime_error("--planner remote needs --base-url");
                planner = std::make_unique<vlp::RemotePlanner>(run_remote.config());
            } else {
                planner = std::make_unique<vlp::OraclePlanner>();
            }
            vlp::BatchOptions opts;
            opts.trials = trials;
            opts.base_seed = seed;
            opts.workers = workers;
            opts.keep_traces = !trace_dir.empty();
            if (!embodiment.empty()) opts.embodiment = vlp::builtin_embodiment(embodiment).name;
            if (noise >= 0.0) opts.observation_noise = noise;

            const auto results = vlp::run_trials(specs, *planner, opts);
            if (!trace_dir.empty()) {
                fs::create_directories(trace_dir);
                for (const auto& t : results) {
                    std::ofstream f(fs::path(trace_dir) / (t.scenario_id + "_seed" + std::to_string(t.seed) + ".ndjson"));
                    f << vlp::serialize_trace(t.trace);
                }
            }
            const auto report = vlp::summarize(results, planner->backend(), seed, trials);
            const auto text = vlp::emit_report(report, vlp::report_format_from_string(format));
            if (out_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream f(out_path);
                if (!f) throw std::runtime_error("cannot write " + out_path);
                f << text;
            }
            return 0;
        }

        if (*serve) {
            gw.step_delay = std::chrono::milliseconds(step_delay_ms);
            if (!serve_remote.base_url.empty()) gw.remote = serve_remote.config();
            vlp::Gateway gateway(vlp::load_corpus(serve_corpus), gw);
            const int port = gateway.bind();
            g_gateway = &gateway;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << gw.host << ':' << port << '\n';
            gateway.listen();
            g_gateway = nullptr;
            return 0;
        }

        if (*validate) {
            const auto spec = vlp::load_scenario_file(scenario_file);
            std::cout << spec.id << ": ok (" << spec.family << ", " << spec.objects.size() << " objects, "
                      << spec.goal.size() << " goal predicates, " << spec.scripted_events.size()
                      << " scripted events)\n";
            return 0;
        }
    } catch (const vlp::Error& e) {
        std::cerr << e.code() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
