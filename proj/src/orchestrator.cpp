#include "fieldswarm/orchestrator.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "fieldswarm/agent.hpp"
#include "fieldswarm/environment.hpp"
#include "fieldswarm/gateway.hpp"
#include "fieldswarm/hello_world.hpp"
#include "fieldswarm/loggers.hpp"
#include "fieldswarm/tcp_bus.hpp"

extern char** environ;

namespace fieldswarm {

namespace {

constexpr std::chrono::milliseconds kEnvironmentStartupTimeout{5000};

std::filesystem::path resolve_output(const std::filesystem::path& run_dir, const std::string& output) {
    std::filesystem::path p(output);
    return p.is_absolute() ? p : run_dir / p;
}

std::filesystem::path prepare_run_dir(const ExperimentConfig& resolved, const RunOptions& options,
                                      std::string& run_id) {
    run_id = options.run_id.value_or(make_run_id(resolved.seed));
    std::filesystem::path run_dir = options.output_dir / run_id;
    std::filesystem::create_directories(run_dir);
    std::ofstream out(run_dir / "config.resolved.json", std::ios::trunc);
    out << serialize_config(resolved).dump(2) << '\n';
    if (!out) throw LaunchError("cannot write " + (run_dir / "config.resolved.json").string());
    return run_dir;
}

std::string_view environment_ready_key(const ExperimentConfig& config) {
    return config.environment->kind == EnvironmentKind::FieldModulation ? topics::kEnvironmentState
                                                                        : topics::kEnvironmentMessage;
}

}  // namespace

std::string make_run_id(std::int64_t seed) {
    std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream os;
    os << std::put_time(&utc, "%Y%m%dT%H%M%SZ") << "-s" << seed;
    return os.str();
}

std::vector<std::string> process_roles(const ExperimentConfig& config) {
    std::vector<std::string> roles;
    if (config.environment) roles.emplace_back("environment");
    for (std::size_t i = 0; i < config.loggers.size(); ++i) roles.push_back("logger:" + std::to_string(i));
    for (const auto& a : config.agents) roles.push_back("agent:" + a.agent_id);
    return roles;
}

std::unique_ptr<AppProcess> make_process(const ExperimentConfig& config, const std::string& role, Bus& bus,
                                         const std::filesystem::path& run_dir) {
    if (role == "environment") {
        if (!config.environment) throw std::invalid_argument("config has no environment");
        if (config.environment->kind == EnvironmentKind::HelloWorld) {
            return std::make_unique<HelloWorldEnvironment>(*config.environment, bus);
        }
        return std::make_unique<FieldModulationEnvironment>(*config.environment, bus);
    }
    if (role.starts_with("agent:")) {
        const AgentConfig* agent = config.find_agent(role.substr(6));
        if (agent == nullptr) throw std::invalid_argument("unknown agent role " + role);
        if (agent->kind == AgentKind::HelloWorld) return std::make_unique<HelloWorldAgent>(*agent, bus);
        return std::make_unique<VirtualDrone2D>(*agent, bus, derive_agent_seed(config.seed, agent->agent_id));
    }
    if (role.starts_with("logger:")) {
        const std::size_t index = std::stoul(role.substr(7));
        if (index >= config.loggers.size()) throw std::invalid_argument("unknown logger role " + role);
        const LoggerConfig& l = config.loggers[index];
        const auto path = resolve_output(run_dir, l.output);
        switch (l.kind) {
            case LoggerKind::Position: return std::make_unique<PositionLogger>(bus, path, l.delay_ms);
            case LoggerKind::Field: return std::make_unique<FieldLogger>(bus, l.target, path, l.delay_ms);
            case LoggerKind::HelloWorld: return std::make_unique<HelloWorldLogger>(l, bus, path);
        }
    }
    throw std::invalid_argument("unknown process role " + role);
}

// ---------------------------------------------------------------------------
// Simulated clock

SimulationResult run_simulation(const ExperimentConfig& config, std::int64_t duration_ms, const RunOptions& options) {
    if (duration_ms <= 0) throw LaunchError("simulated runs need a positive duration");
    const ExperimentConfig resolved = resolve_initial_positions(config);

    SimulationResult result;
    result.run_dir = prepare_run_dir(resolved, options, result.run_id);
    if (resolved.gateway) spdlog::warn("gateway ignored: the control panel needs a wall-clock run");

    auto clock = RunClock::simulated();
    InProcessBus bus(RunClock::bus_clock(clock));

    // Tick order within one instant: environment, agents, monitor, loggers.
    std::vector<std::unique_ptr<AppProcess>> processes;
    if (resolved.environment) processes.push_back(make_process(resolved, "environment", bus, result.run_dir));
    for (const auto& a : resolved.agents) {
        processes.push_back(make_process(resolved, "agent:" + a.agent_id, bus, result.run_dir));
    }
    MinDistanceMonitor* monitor = nullptr;
    if (options.monitor_from_ms) {
        std::int64_t delay = resolved.agents.empty() ? 100 : resolved.agents.front().delay_ms;
        for (const auto& a : resolved.agents) delay = std::gcd(delay, a.delay_ms);
        auto m = std::make_unique<MinDistanceMonitor>(bus, delay, *options.monitor_from_ms);
        monitor = m.get();
        processes.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < resolved.loggers.size(); ++i) {
        processes.push_back(make_process(resolved, "logger:" + std::to_string(i), bus, result.run_dir));
    }

    SimScheduler scheduler(clock, bus);
    for (auto& p : processes) scheduler.add(*p);
    scheduler.run(duration_ms);

    clock->advance_to(duration_ms);
    for (auto& p : processes) p->finish(duration_ms);
    bus.raise_stop();

    for (const auto& p : processes) result.ticks[p->name()] = p->ticks();
    if (monitor != nullptr) result.monitored_min_distance = monitor->min_distance();
    return result;
}

// ---------------------------------------------------------------------------
// Wall clock

namespace {

struct ThreadStatus {
    std::mutex mutex;
    std::condition_variable cv;
    bool finished = false;
    bool failed = false;
    std::string error;
    std::uint64_t ticks = 0;
};

struct Child {
    ChildDescriptor desc;
    std::shared_ptr<AppProcess> process;
    std::shared_ptr<ThreadStatus> status;
    std::thread thread;
};

}  // namespace

bool ExitReport::all_clean() const {
    return std::all_of(children.begin(), children.end(), [](const ChildExit& c) { return c.status == "clean"; });
}

struct RunHandle::State {
    std::string run_id;
    std::filesystem::path run_dir;
    std::chrono::system_clock::time_point start_time;
    std::shared_ptr<RunClock> clock;
    std::shared_ptr<Bus> bus;
    std::unique_ptr<BusServer> server;
    std::unique_ptr<Gateway> gateway;
    std::vector<Child> children;
    bool shut_down = false;
};

RunHandle::RunHandle() : state(std::make_unique<State>()) {}
RunHandle::~RunHandle() {
    if (state && !state->shut_down) shutdown(*this, std::chrono::milliseconds(2000));
}
RunHandle::RunHandle(RunHandle&&) noexcept = default;
RunHandle& RunHandle::operator=(RunHandle&&) noexcept = default;

const std::string& RunHandle::run_id() const { return state->run_id; }
const std::filesystem::path& RunHandle::run_dir() const { return state->run_dir; }
std::chrono::system_clock::time_point RunHandle::start_time() const { return state->start_time; }
std::shared_ptr<Bus> RunHandle::bus() const { return state->bus; }
std::shared_ptr<RunClock> RunHandle::clock() const { return state->clock; }
std::uint16_t RunHandle::bus_port() const { return state->server ? state->server->port() : 0; }
std::uint16_t RunHandle::gateway_port() const { return state->gateway ? state->gateway->port() : 0; }

std::vector<ChildDescriptor> RunHandle::children() const {
    std::vector<ChildDescriptor> out;
    for (const auto& c : state->children) out.push_back(c.desc);
    return out;
}

namespace {

void start_thread_child(RunHandle::State& st, const std::string& role, std::shared_ptr<AppProcess> process,
                        bool skip_first_tick) {
    Child child;
    child.desc = ChildDescriptor{process->name(), role, ChildMode::Thread, -1};
    child.process = process;
    child.status = std::make_shared<ThreadStatus>();
    child.thread = std::thread([process, status = child.status, bus = st.bus, clock = st.clock, skip_first_tick] {
        std::string error;
        try {
            run_loop(*process, *bus, *clock, skip_first_tick);
        } catch (const std::exception& e) {
            error = e.what();
            spdlog::error("{} failed: {}", process->name(), error);
            try {
                bus->raise_stop();
            } catch (const std::exception&) {
            }
        }
        std::lock_guard lock(status->mutex);
        status->finished = true;
        status->failed = !error.empty();
        status->error = error;
        status->ticks = process->ticks();
        status->cv.notify_all();
    });
    st.children.push_back(std::move(child));
}

int spawn_child_process(const RunOptions& options, const RunHandle::State& st, const std::string& role) {
    if (options.executable.empty()) throw LaunchError("process mode needs the executable path");
    const std::string bus_address = st.server->host() + ":" + std::to_string(st.server->port());
    std::vector<std::string> args = {options.executable.string(),
                                     "child",
                                     "--config",
                                     (st.run_dir / "config.resolved.json").string(),
                                     "--role",
                                     role,
                                     "--bus",
                                     bus_address,
                                     "--epoch-ms",
                                     std::to_string(st.clock->epoch_ms()),
                                     "--run-dir",
                                     st.run_dir.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    int rc = posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
    if (rc != 0) throw LaunchError("cannot spawn child for " + role + ": " + std::strerror(rc));
    return pid;
}

bool wait_for_key(Bus& bus, std::string_view key, std::chrono::milliseconds timeout, int pid) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (bus.read(key)) return true;
        if (pid > 0) {
            int status = 0;
            if (waitpid(pid, &status, WNOHANG) == pid) return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return false;
}

ChildExit wait_process(Child& c, std::chrono::steady_clock::time_point deadline) {
    ChildExit exit{c.desc.name, "clean", 0, ""};
    int status = 0;
    for (;;) {
        pid_t r = waitpid(c.desc.pid, &status, WNOHANG);
        if (r == c.desc.pid) break;
        if (r < 0) {
            exit.status = "failed";
            exit.detail = "child already reaped";
            return exit;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(c.desc.pid, SIGKILL);
            waitpid(c.desc.pid, &status, 0);
            exit.status = "forced";
            exit.detail = "killed after shutdown timeout";
            return exit;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return exit;
    exit.status = "failed";
    exit.detail = WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status))
                                    : "signal " + std::to_string(WTERMSIG(status));
    return exit;
}

ChildExit wait_thread(Child& c, std::chrono::steady_clock::time_point deadline) {
    ChildExit exit{c.desc.name, "clean", 0, ""};
    std::unique_lock lock(c.status->mutex);
    if (!c.status->cv.wait_until(lock, deadline, [&] { return c.status->finished; })) {
        lock.unlock();
        // The thread co-owns everything it touches, so it may outlive the run.
        c.thread.detach();
        exit.status = "forced";
        exit.detail = "abandoned after shutdown timeout";
        return exit;
    }
    exit.ticks = c.status->ticks;
    if (c.status->failed) {
        exit.status = "failed";
        exit.detail = c.status->error;
    }
    lock.unlock();
    c.thread.join();
    return exit;
}

}  // namespace

RunHandle launch(const ExperimentConfig& config, const RunOptions& options) {
    RunHandle handle;
    auto& st = *handle.state;
    const ExperimentConfig resolved = resolve_initial_positions(config);
    try {
        st.run_dir = prepare_run_dir(resolved, options, st.run_id);
        st.start_time = std::chrono::system_clock::now();
        st.clock = RunClock::wall_from_now();

        auto local = std::make_shared<InProcessBus>(RunClock::bus_clock(st.clock));
        st.bus = local;
        if (resolved.bus.transport == BusTransport::Tcp || options.mode == ChildMode::Process) {
            try {
                st.server = std::make_unique<BusServer>(local, resolved.bus.host, resolved.bus.port);
            } catch (const TransportError& e) {
                throw LaunchError(e.what());
            }
        }

        std::vector<std::string> roles = process_roles(resolved);
        auto start_role = [&](const std::string& role) {
            const bool is_env = role == "environment";
            if (options.mode == ChildMode::Process) {
                Child child;
                child.desc = ChildDescriptor{role, role, ChildMode::Process, spawn_child_process(options, st, role)};
                const int pid = child.desc.pid;
                st.children.push_back(std::move(child));
                if (is_env && !wait_for_key(*st.bus, environment_ready_key(resolved), kEnvironmentStartupTimeout, pid)) {
                    throw LaunchError("environment process did not publish its first state");
                }
                return;
            }
            std::shared_ptr<AppProcess> process = make_process(resolved, role, *st.bus, st.run_dir);
            if (is_env) {
                // First environment state lands before any other child exists.
                process->step(st.clock->now_ms());
            }
            start_thread_child(st, role, std::move(process), is_env);
        };

        for (const auto& role : roles) {
            if (role.starts_with("agent:")) continue;
            start_role(role);
        }
        if (resolved.gateway) {
            st.gateway = std::make_unique<Gateway>(st.bus, *resolved.gateway, st.clock);
            try {
                st.gateway->start();
            } catch (const std::exception& e) {
                throw LaunchError(std::string("gateway: ") + e.what());
            }
        }
        for (const auto& role : roles) {
            if (role.starts_with("agent:")) start_role(role);
        }
    } catch (const std::exception& e) {
        spdlog::error("launch failed: {}; tearing down", e.what());
        if (st.bus) shutdown(handle, std::chrono::milliseconds(2000));
        st.shut_down = true;
        if (dynamic_cast<const LaunchError*>(&e) != nullptr) throw;
        throw LaunchError(e.what());
    }
    spdlog::info("run {} started with {} children", st.run_id, st.children.size());
    return handle;
}

ExitReport shutdown(RunHandle& handle, std::chrono::milliseconds timeout) {
    ExitReport report;
    auto& st = *handle.state;
    if (st.shut_down) {
        report.already_shut_down = true;
        return report;
    }
    st.shut_down = true;
    if (st.bus) {
        try {
            st.bus->raise_stop();
        } catch (const std::exception& e) {
            spdlog::warn("raise_stop failed: {}", e.what());
        }
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (auto& c : st.children) {
        report.children.push_back(c.desc.mode == ChildMode::Process ? wait_process(c, deadline)
                                                                    : wait_thread(c, deadline));
    }
    if (st.gateway) {
        st.gateway->stop();
        report.children.push_back(ChildExit{"gateway", "clean", 0, ""});
    }
    if (st.server) st.server->close();
    return report;
}

void attach_thread_child(RunHandle& handle, std::shared_ptr<AppProcess> process) {
    std::string name = "extra:" + process->name();
    start_thread_child(*handle.state, name, std::move(process), false);
}

int run_child_process(const std::filesystem::path& resolved_config, const std::string& role,
                      const std::string& bus_address, std::int64_t epoch_ms, const std::filesystem::path& run_dir) {
    try {
        ExperimentConfig config = load_config(resolved_config);
        auto [host, port] = parse_bus_address(bus_address);
        TcpBusClient bus(host, port);
        auto clock = RunClock::wall(epoch_ms);
        auto process = make_process(config, role, bus, run_dir);
        run_loop(*process, bus, *clock);
        return 0;
    } catch (const std::exception& e) {
        spdlog::error("child {} failed: {}", role, e.what());
        return 2;
    }
}

}  // namespace fieldswarm
