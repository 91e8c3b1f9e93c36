#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fieldswarm/action.hpp"
#include "fieldswarm/field_map.hpp"
#include "fieldswarm/geometry.hpp"

namespace fieldswarm {

class Bus;
struct ControllerSpec;
struct AgentConfig;

/// 3x3 pooled rewards, indexed [row][col] like the FieldMap: row 2 is front,
/// column 2 is left, (1,1) is the agent's own block.
using RewardGrid3x3 = std::array<std::array<double, 3>, 3>;

/// Reduces one (size/3)x(size/3) block to a scalar. `block` is row-major.
using RewardFunction = std::function<double(std::span<const double> block)>;

class UnknownRewardError : public std::invalid_argument {
public:
    explicit UnknownRewardError(std::string_view name)
        : std::invalid_argument("unknown reward function \"" + std::string(name) + "\"") {}
};

/// Global reward registry. "sum" is always present.
void register_reward(std::string name, RewardFunction fn);
bool is_reward_registered(std::string_view name);

RewardGrid3x3 pool_field(const FieldMap& map, std::string_view reward);

/// Action for a pooled-grid cell.
Action action_for_block(std::size_t row, std::size_t col);

/// Argmax of the pooled grid. Exact ties resolve in Action declaration order
/// (STOP, then cardinals, then diagonals).
Action hill_climb(const FieldMap& map, std::string_view reward);

/// Moves along the single axis with the larger remaining delta (X wins ties);
/// STOP once both deltas are within epsilon.
Action go_to_point(const Position2D& current, const Position2D& target, double epsilon);

/// Latest steering command for `agent_id` if it is at most staleness_ms old,
/// otherwise STOP. Never throws: bus failures and malformed payloads fail safe.
Action remote_action(Bus& bus, std::string_view agent_id, std::int64_t now_ms, std::int64_t staleness_ms);

/// What a controller gets to see on each tick.
struct Perception {
    std::string_view agent_id;
    Position2D position;
    const FieldMap* field = nullptr;
    std::int64_t now_ms = 0;
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual Action predict(const Perception& perception) = 0;
};

class HillClimbingController final : public Controller {
public:
    explicit HillClimbingController(std::string reward) : reward_(std::move(reward)) {}
    Action predict(const Perception& p) override;

private:
    std::string reward_;
};

class GoToPointController final : public Controller {
public:
    GoToPointController(Position2D target, double epsilon) : target_(target), epsilon_(epsilon) {}
    Action predict(const Perception& p) override;

private:
    Position2D target_;
    double epsilon_;
};

/// Fed by the UI gateway through "control/agent/{id}/action".
class RemoteController final : public Controller {
public:
    RemoteController(Bus& bus, std::int64_t staleness_ms) : bus_(bus), staleness_ms_(staleness_ms) {}
    Action predict(const Perception& p) override;

private:
    Bus& bus_;
    std::int64_t staleness_ms_;
};

/// Builds the controller an agent config asks for. Any drone agent can be
/// driven by any of the drone controller kinds.
std::unique_ptr<Controller> make_controller(const AgentConfig& agent, Bus& bus);

}  // namespace fieldswarm
