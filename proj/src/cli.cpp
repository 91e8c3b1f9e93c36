#include "fieldswarm/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fieldswarm/config.hpp"
#include "fieldswarm/metrics.hpp"
#include "fieldswarm/orchestrator.hpp"
#include "fieldswarm/tcp_bus.hpp"

namespace fieldswarm {

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::filesystem::path self_executable(const char* argv0) {
    std::error_code ec;
    auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (!ec) return p;
    return std::filesystem::absolute(argv0);
}

std::int64_t max_delay_ms(const ExperimentConfig& c) {
    std::int64_t d = 0;
    for (const auto& a : c.agents) d = std::max(d, a.delay_ms);
    if (c.environment) d = std::max(d, c.environment->delay_ms);
    for (const auto& l : c.loggers) d = std::max(d, l.delay_ms);
    return d;
}

struct RunArgs {
    std::string config;
    std::optional<double> duration_s;
    bool sim_clock = false;
    std::optional<std::int64_t> seed;
    std::string output_dir = "runs";
    std::string run_id;
    bool processes = false;
};

int cmd_run(const RunArgs& args, const char* argv0) {
    ExperimentConfig config = load_config(args.config);
    if (args.seed) config.seed = *args.seed;
    if (const char* addr = std::getenv(kBusAddressEnv); addr != nullptr && config.bus.transport == BusTransport::Tcp) {
        auto [host, port] = parse_bus_address(addr);
        config.bus.host = host;
        config.bus.port = port;
    }

    RunOptions options;
    options.output_dir = args.output_dir;
    if (!args.run_id.empty()) options.run_id = args.run_id;
    options.mode = args.processes ? ChildMode::Process : ChildMode::Thread;
    options.executable = self_executable(argv0);

    if (args.sim_clock) {
        if (!args.duration_s) {
            std::cerr << "error: --sim-clock needs --duration-s\n";
            return kExitConfigError;
        }
        const auto duration_ms = static_cast<std::int64_t>(*args.duration_s * 1000.0);
        auto result = run_simulation(config, duration_ms, options);
        std::cout << result.run_dir.string() << "\n";
        for (const auto& [name, ticks] : result.ticks) spdlog::info("{}: {} ticks", name, ticks);
        return kExitOk;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    RunHandle handle = launch(config, options);
    std::cout << handle.run_dir().string() << std::endl;
    if (handle.gateway_port() != 0) spdlog::info("control panel on port {}", handle.gateway_port());

    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        if (args.duration_s &&
            std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(*args.duration_s)) {
            break;
        }
        if (handle.bus()->stop_requested()) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    const auto timeout = std::chrono::milliseconds(2 * max_delay_ms(config) + 1000);
    ExitReport report = shutdown(handle, timeout);
    for (const auto& c : report.children) {
        spdlog::info("{}: {} after {} ticks{}{}", c.name, c.status, c.ticks, c.detail.empty() ? "" : ": ", c.detail);
    }
    return report.all_clean() ? kExitOk : kExitRuntimeFailure;
}

int cmd_metrics(const std::string& trajectory, const std::string& config_path, std::optional<std::int64_t> from_ms,
                std::optional<std::int64_t> to_ms) {
    ExperimentConfig config = load_config(config_path);
    if (!config.environment) {
        std::cerr << "error: metrics need an environment in the config\n";
        return kExitConfigError;
    }
    MetricsOptions options;
    if (from_ms) options.from_ms = *from_ms;
    if (to_ms) options.to_ms = *to_ms;
    if (!config.agents.empty()) options.alignment_tolerance_ms = config.agents.front().delay_ms;
    auto report = compute_metrics(std::filesystem::path(trajectory), *config.environment, options);
    std::cout << to_json(report).dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
    // stdout carries results (run directory, metrics JSON); diagnostics go to stderr.
    auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("fieldswarm", std::move(sink)));

    CLI::App app{"Field-modulation swarm simulator"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run an experiment");
    run->add_option("--config", run_args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--duration-s", run_args.duration_s, "Run length in seconds (default: until interrupted)")
        ->check(CLI::PositiveNumber);
    run->add_flag("--sim-clock", run_args.sim_clock, "Deterministic simulated clock");
    run->add_option("--seed", run_args.seed, "Override the config seed");
    run->add_option("--output-dir", run_args.output_dir, "Parent directory of run directories");
    run->add_option("--run-id", run_args.run_id, "Run directory name (default: <UTC time>-s<seed>)");
    run->add_flag("--processes", run_args.processes, "Spawn OS processes over the TCP bus instead of threads");

    std::string trajectory, metrics_config;
    std::optional<std::int64_t> from_ms, to_ms;
    auto* metrics = app.add_subcommand("metrics", "Offline metrics of a trajectory log");
    metrics->add_option("--trajectory", trajectory, "Trajectory file (JSON lines)")->required()->check(CLI::ExistingFile);
    metrics->add_option("--config", metrics_config, "Experiment config")->required()->check(CLI::ExistingFile);
    metrics->add_option("--from-ms", from_ms, "Window start (inclusive)");
    metrics->add_option("--to-ms", to_ms, "Window end (exclusive)");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a config file");
    validate->add_option("--config", validate_config, "Experiment config")->required()->check(CLI::ExistingFile);

    std::string child_config, child_role, child_run_dir;
    std::string child_bus = std::getenv(kBusAddressEnv) != nullptr ? std::getenv(kBusAddressEnv) : "";
    std::int64_t child_epoch = 0;
    auto* child = app.add_subcommand("child", "Internal: run one role of a launched experiment");
    child->group("");
    child->add_option("--config", child_config)->required();
    child->add_option("--role", child_role)->required();
    child->add_option("--bus", child_bus);
    child->add_option("--epoch-ms", child_epoch)->required();
    child->add_option("--run-dir", child_run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (*run) return cmd_run(run_args, argc > 0 ? argv[0] : "fieldswarm");
        if (*metrics) return cmd_metrics(trajectory, metrics_config, from_ms, to_ms);
        if (*validate) {
            auto config = load_config(validate_config);
            std::cout << "ok: " << config.name << " (" << config.agents.size() << " agents)\n";
            return kExitOk;
        }
        if (*child) {
            if (child_bus.empty()) {
                std::cerr << "error: child needs --bus or " << kBusAddressEnv << "\n";
                return kExitConfigError;
            }
            return run_child_process(child_config, child_role, child_bus, child_epoch, child_run_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeFailure;
    }
    return kExitConfigError;
}

}  // namespace fieldswarm
