#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fieldswarm/geometry.hpp"
#include "fieldswarm/messages.hpp"

namespace fieldswarm {

/// Raised for any schema or validation problem. `path()` names the offending
/// key, e.g. "agents[1].agent_id".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const { return path_; }

private:
    std::string path_;
};

enum class ControllerKind { HillClimbing, GoToPoint, Remote, HelloWorld };
enum class AgentKind { VirtualDrone2D, HelloWorld };
enum class EnvironmentKind { FieldModulation, HelloWorld };
enum class LoggerKind { Position, Field, HelloWorld };
enum class BusTransport { InProcess, Tcp };

struct ControllerSpec {
    ControllerKind kind = ControllerKind::HillClimbing;
    std::string reward_function = "sum";
    std::optional<Position2D> target;       // go_to_point only
    std::optional<double> epsilon;          // go_to_point arrival; defaults to half a cell
    std::int64_t staleness_ms = 500;        // remote only

    friend bool operator==(const ControllerSpec&, const ControllerSpec&) = default;
};

struct AgentConfig {
    std::string agent_id;
    AgentKind kind = AgentKind::VirtualDrone2D;
    ControllerSpec controller;
    std::int64_t delay_ms = 100;
    std::optional<Position2D> initial_position;  // absent: drawn from the run seed
    double vicinity = 0.5;
    std::size_t field_size = 84;
    double clip_factor = 2.0;
    double velocity = 0.35;        // m/s
    double default_height = 0.55;  // metadata only, the simulation is 2D
    bool clamp_to_limits = false;
    bool publish_field = true;

    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

struct EnvironmentConfig {
    EnvironmentKind kind = EnvironmentKind::FieldModulation;
    std::int64_t delay_ms = 100;
    SpaceLimits limits{-2.5, 1.5, -1.0, 2.0};
    std::vector<Position2D> modulation_points;
    Position2D rotation_center;
    double theta_degrees = 0.0;

    friend bool operator==(const EnvironmentConfig&, const EnvironmentConfig&) = default;
};

struct LoggerConfig {
    LoggerKind kind = LoggerKind::Position;
    std::int64_t delay_ms = 100;
    std::string target;  // agent id for field loggers
    std::string output;  // relative paths resolve under the run directory

    friend bool operator==(const LoggerConfig&, const LoggerConfig&) = default;
};

struct BusConfig {
    BusTransport transport = BusTransport::InProcess;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0: ephemeral

    friend bool operator==(const BusConfig&, const BusConfig&) = default;
};

struct GatewayConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 8080;
    double snapshot_hz = 10.0;
    std::optional<std::string> field_agent;
    std::string static_dir;

    friend bool operator==(const GatewayConfig&, const GatewayConfig&) = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::int64_t seed = 0;
    std::vector<AgentConfig> agents;
    std::optional<EnvironmentConfig> environment;
    std::vector<LoggerConfig> loggers;
    BusConfig bus;
    std::optional<GatewayConfig> gateway;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    [[nodiscard]] const AgentConfig* find_agent(std::string_view id) const;
};

/// Parses and validates a JSON experiment description. Unknown keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig parse_config(const Json& document);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Writes every field explicitly so that parse_config(serialize_config(c)) == c.
Json serialize_config(const ExperimentConfig& config);

std::string_view to_string(ControllerKind k);
std::string_view to_string(AgentKind k);
std::string_view to_string(EnvironmentKind k);
std::string_view to_string(LoggerKind k);
std::string_view to_string(BusTransport t);

}  // namespace fieldswarm
