#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/config.hpp"
#include "fieldswarm/controllers.hpp"
#include "fieldswarm/field_modulation.hpp"

namespace fieldswarm {

struct AgentRuntimeState {
    Position2D position;
    std::uint64_t tick = 0;
    Action last_action = Action::Stop;
    std::uint64_t rng_seed = 0;
    std::uint64_t published = 0;  // states successfully published so far

    friend bool operator==(const AgentRuntimeState&, const AgentRuntimeState&) = default;
};

/// Per-agent seed mixed from the run seed and the agent id (stable across
/// platforms and runs).
std::uint64_t derive_agent_seed(std::int64_t run_seed, std::string_view agent_id);

/// Uniform draw inside the limits from a seed.
Position2D draw_initial_position(const SpaceLimits& limits, std::uint64_t seed);

/// Fills every missing drone initial_position by drawing uniformly inside the
/// environment limits from the run seed.
ExperimentConfig resolve_initial_positions(ExperimentConfig config);

ModulationParams modulation_params_for(const AgentConfig& agent);

/// One sense / build field / decide / act / integrate cycle:
///  1. publish own state to agent/{id}/state
///  2. scan agent/ (excluding self) and read env/main/state
///  3. build the perception map
///  4. publish it to agent/{id}/field
///  5. ask the controller for an action
///  6. integrate position += unit(action) * velocity * delay
///  7. increment tick
/// Any bus failure skips the rest of the cycle and keeps the previous state
/// (only the publish counter advances if the state publish went through).
AgentRuntimeState agent_tick(const AgentRuntimeState& state, Bus& bus, const AgentConfig& config,
                             Controller& controller, std::int64_t now_ms);

/// The virtual 2D drone AppProcess.
class VirtualDrone2D final : public AppProcess {
public:
    VirtualDrone2D(AgentConfig config, Bus& bus, std::uint64_t rng_seed);

    [[nodiscard]] std::string name() const override { return "agent/" + config_.agent_id; }
    [[nodiscard]] std::int64_t delay_ms() const override { return config_.delay_ms; }
    void step(std::int64_t now_ms) override;
    /// Publishes {"tick", "t_ms", "terminal": true} to agent/{id}/exit. Skipped
    /// silently once the bus has stopped accepting publishes.
    void finish(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return state_.tick; }

    [[nodiscard]] const AgentRuntimeState& state() const { return state_; }
    [[nodiscard]] const AgentConfig& config() const { return config_; }

private:
    AgentConfig config_;
    Bus& bus_;
    std::unique_ptr<Controller> controller_;
    AgentRuntimeState state_;
};

/// Runs a drone on the wall clock until the stop flag is raised.
void run_agent_loop(const AgentConfig& config, Bus& bus, const RunClock& clock, std::int64_t run_seed);

}  // namespace fieldswarm
