#include "fieldswarm/controllers.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <vector>

#include "fieldswarm/bus.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

namespace {

struct RewardRegistry {
    std::mutex mutex;
    std::map<std::string, RewardFunction, std::less<>> functions;

    RewardRegistry() {
        functions.emplace("sum", [](std::span<const double> block) {
            double total = 0.0;
            for (double v : block) total += v;
            return total;
        });
    }

    static RewardRegistry& instance() {
        static RewardRegistry registry;
        return registry;
    }

    RewardFunction find(std::string_view name) {
        std::lock_guard lock(mutex);
        auto it = functions.find(name);
        if (it == functions.end()) throw UnknownRewardError(name);
        return it->second;
    }
};

// Rows follow X (front = 2), columns follow Y (left = 2).
constexpr std::array<std::array<Action, 3>, 3> kBlockActions = {{
    {Action::BackRight, Action::Back, Action::BackLeft},
    {Action::Right, Action::Stop, Action::Left},
    {Action::FrontRight, Action::Front, Action::FrontLeft},
}};

}  // namespace

void register_reward(std::string name, RewardFunction fn) {
    auto& reg = RewardRegistry::instance();
    std::lock_guard lock(reg.mutex);
    reg.functions.insert_or_assign(std::move(name), std::move(fn));
}

bool is_reward_registered(std::string_view name) {
    auto& reg = RewardRegistry::instance();
    std::lock_guard lock(reg.mutex);
    return reg.functions.contains(name);
}

RewardGrid3x3 pool_field(const FieldMap& map, std::string_view reward) {
    RewardFunction fn = RewardRegistry::instance().find(reward);
    if (map.size() == 0 || map.size() % 3 != 0) {
        throw std::invalid_argument("field size must be a positive multiple of 3 to pool");
    }
    const std::size_t block = map.size() / 3;
    std::vector<double> scratch(block * block);
    RewardGrid3x3 grid{};
    for (std::size_t bi = 0; bi < 3; ++bi) {
        for (std::size_t bj = 0; bj < 3; ++bj) {
            for (std::size_t r = 0; r < block; ++r) {
                auto row = map.values().subspan((bi * block + r) * map.size() + bj * block, block);
                std::copy(row.begin(), row.end(), scratch.begin() + static_cast<std::ptrdiff_t>(r * block));
            }
            grid[bi][bj] = fn(scratch);
        }
    }
    return grid;
}

Action action_for_block(std::size_t row, std::size_t col) {
    return kBlockActions.at(row).at(col);
}

Action hill_climb(const FieldMap& map, std::string_view reward) {
    const RewardGrid3x3 grid = pool_field(map, reward);
    auto reward_of = [&](Action a) -> double {
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                if (kBlockActions[r][c] == a) return grid[r][c];
            }
        }
        return -INFINITY;
    };
    Action best = kAllActions.front();
    double best_value = reward_of(best);
    for (Action a : kAllActions) {
        double v = reward_of(a);
        if (v > best_value) {
            best = a;
            best_value = v;
        }
    }
    return best;
}

Action go_to_point(const Position2D& current, const Position2D& target, double epsilon) {
    const double dx = target.x - current.x;
    const double dy = target.y - current.y;
    if (std::max(std::abs(dx), std::abs(dy)) <= epsilon) return Action::Stop;
    if (std::abs(dx) >= std::abs(dy)) return dx > 0.0 ? Action::Front : Action::Back;
    return dy > 0.0 ? Action::Left : Action::Right;
}

Action remote_action(Bus& bus, std::string_view agent_id, std::int64_t now_ms, std::int64_t staleness_ms) {
    try {
        auto env = bus.read(topics::agent_action(agent_id));
        if (!env) return Action::Stop;
        const Json& payload = env->payload();
        const auto published_at = payload.at("published_at").get<std::int64_t>();
        if (now_ms - published_at > staleness_ms) return Action::Stop;
        return parse_action(payload.at("action").get<std::string>()).value_or(Action::Stop);
    } catch (const std::exception&) {
        return Action::Stop;
    }
}

Action HillClimbingController::predict(const Perception& p) {
    if (p.field == nullptr) return Action::Stop;
    return hill_climb(*p.field, reward_);
}

Action GoToPointController::predict(const Perception& p) {
    return go_to_point(p.position, target_, epsilon_);
}

Action RemoteController::predict(const Perception& p) {
    return remote_action(bus_, p.agent_id, p.now_ms, staleness_ms_);
}

std::unique_ptr<Controller> make_controller(const AgentConfig& agent, Bus& bus) {
    const ControllerSpec& spec = agent.controller;
    switch (spec.kind) {
        case ControllerKind::HillClimbing:
            if (!is_reward_registered(spec.reward_function)) throw UnknownRewardError(spec.reward_function);
            return std::make_unique<HillClimbingController>(spec.reward_function);
        case ControllerKind::GoToPoint: {
            if (!spec.target) throw std::invalid_argument("go_to_point controller requires a target");
            double eps = spec.epsilon.value_or(agent.vicinity / static_cast<double>(agent.field_size));
            return std::make_unique<GoToPointController>(*spec.target, eps);
        }
        case ControllerKind::Remote:
            return std::make_unique<RemoteController>(bus, spec.staleness_ms);
        case ControllerKind::HelloWorld:
            break;
    }
    throw std::invalid_argument("controller kind \"" + std::string(to_string(spec.kind)) +
                                "\" cannot drive a virtual drone");
}

}  // namespace fieldswarm
