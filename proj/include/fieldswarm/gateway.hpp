#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/bus.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

struct AgentSnapshot {
    std::string agent_id;
    Position2D position;
    Action last_action = Action::Stop;
};

/// Everything the control panel draws, taken from one scan of the bus.
struct ArenaSnapshot {
    std::int64_t t_ms = 0;
    std::optional<SpaceLimits> limits;
    std::vector<AgentSnapshot> agents;
    std::vector<Position2D> points;
};

ArenaSnapshot take_snapshot(Bus& bus, std::int64_t t_ms);

/// {"type":"snapshot","t_ms","limits","agents":[{"agent_id","x","y","last_action"}],"points":[[x,y]]}
Json snapshot_frame(const ArenaSnapshot& snapshot);

/// {"type":"field","t_ms","agent_id","size","values"} for the agent's latest
/// map, or nothing if it never published one.
std::optional<Json> field_frame(Bus& bus, std::string_view agent_id);

/// Per-connection view state changed by inbound frames.
struct ClientState {
    std::optional<std::string> field_agent;
};

/// Applies one inbound frame. Steering frames
/// {"type":"steer","agent_id","action"} are validated against the 9-action
/// vocabulary and republished to control/agent/{id}/action stamped with
/// now_ms; {"type":"select","agent_id":string|null} switches the field
/// subscription. Returns an error frame for anything rejected.
std::optional<Json> handle_inbound_frame(Bus& bus, ClientState& client, const Json& frame, std::int64_t now_ms);

/// Bridges the bus and browser clients: WebSocket endpoint /ws plus static
/// files from static_dir. Only ever writes control/agent/*/action keys. Runs
/// on its own thread and shuts itself down once the stop flag is raised.
class Gateway {
public:
    Gateway(std::shared_ptr<Bus> bus, GatewayConfig config, std::shared_ptr<RunClock> clock);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and starts serving; throws TransportError if the address is taken.
    void start();
    /// Closes every connection and joins the worker. Idempotent.
    void stop();
    /// Blocks until the gateway stopped (on its own after the stop flag, or via stop()).
    void wait();

    [[nodiscard]] std::uint16_t port() const;
    [[nodiscard]] std::size_t client_count() const;

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

/// Blocking form: serves until the bus stop flag is raised.
void run_gateway(std::shared_ptr<Bus> bus, const GatewayConfig& config, std::shared_ptr<RunClock> clock);

}  // namespace fieldswarm
