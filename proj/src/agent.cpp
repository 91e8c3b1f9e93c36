#include "fieldswarm/agent.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <spdlog/spdlog.h>

namespace fieldswarm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double unit_interval(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::uint64_t derive_agent_seed(std::int64_t run_seed, std::string_view agent_id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : agent_id) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(static_cast<std::uint64_t>(run_seed) ^ splitmix64(h));
}

Position2D draw_initial_position(const SpaceLimits& limits, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double u = unit_interval(rng);
    const double v = unit_interval(rng);
    return {limits.x_min + u * (limits.x_max - limits.x_min), limits.y_min + v * (limits.y_max - limits.y_min)};
}

ExperimentConfig resolve_initial_positions(ExperimentConfig config) {
    for (auto& agent : config.agents) {
        if (agent.kind != AgentKind::VirtualDrone2D || agent.initial_position) continue;
        if (!config.environment) throw ConfigError("agents", "cannot draw a position without environment limits");
        agent.initial_position =
            draw_initial_position(config.environment->limits, derive_agent_seed(config.seed, agent.agent_id));
    }
    return config;
}

ModulationParams modulation_params_for(const AgentConfig& agent) {
    ModulationParams p;
    p.vicinity = agent.vicinity;
    p.field_size = agent.field_size;
    p.clip_factor = agent.clip_factor;
    return p;
}

AgentRuntimeState agent_tick(const AgentRuntimeState& state, Bus& bus, const AgentConfig& config,
                             Controller& controller, std::int64_t now_ms) {
    AgentRuntimeState next = state;
    try {
        AgentState own{config.agent_id, state.position, state.last_action, now_ms, state.published + 1};
        bus.publish(topics::agent_state(config.agent_id), to_json(own));
        next.published = own.sequence;
    } catch (const BusError& e) {
        spdlog::debug("agent {}: state publish failed: {}", config.agent_id, e.what());
        return state;
    }

    try {
        std::vector<Position2D> neighbors;
        for (const auto& env : bus.scan(topics::kAgentPrefix)) {
            std::string_view id = topics::agent_id_of(env.key, "state");
            if (id.empty() || id == config.agent_id) continue;
            try {
                neighbors.push_back(agent_state_from_json(env.payload()).position);
            } catch (const std::exception& ex) {
                spdlog::warn("agent {}: ignoring malformed state on {}: {}", config.agent_id, env.key, ex.what());
            }
        }

        SpaceLimits limits{-kInf, kInf, -kInf, kInf};
        std::vector<Position2D> points;
        if (auto env = bus.read(topics::kEnvironmentState)) {
            EnvironmentState es = environment_state_from_json(env->payload());
            limits = es.limits;
            points = std::move(es.modulation_points);
        }

        FieldMap field = build_field(state.position, neighbors, points, limits, modulation_params_for(config));
        if (config.publish_field) bus.publish(topics::agent_field(config.agent_id), to_json(field));

        Perception perception{config.agent_id, state.position, &field, now_ms};
        const Action action = controller.predict(perception);

        const UnitVector u = action_to_unit_vector(action);
        const double step = config.velocity * (static_cast<double>(config.delay_ms) / 1000.0);
        next.position = {state.position.x + u.dx * step, state.position.y + u.dy * step};
        if (config.clamp_to_limits && std::isfinite(limits.x_min)) {
            next.position.x = std::clamp(next.position.x, limits.x_min, limits.x_max);
            next.position.y = std::clamp(next.position.y, limits.y_min, limits.y_max);
        }
        next.last_action = action;
        next.tick = state.tick + 1;
        return next;
    } catch (const BusError& e) {
        spdlog::debug("agent {}: cycle skipped: {}", config.agent_id, e.what());
    } catch (const Json::exception& e) {
        spdlog::warn("agent {}: cycle skipped, malformed environment state: {}", config.agent_id, e.what());
    }
    AgentRuntimeState held = state;
    held.published = next.published;
    return held;
}

VirtualDrone2D::VirtualDrone2D(AgentConfig config, Bus& bus, std::uint64_t rng_seed)
    : config_(std::move(config)), bus_(bus), controller_(make_controller(config_, bus)) {
    if (!config_.initial_position) {
        throw std::invalid_argument("agent " + config_.agent_id + " has no resolved initial position");
    }
    state_.position = *config_.initial_position;
    state_.rng_seed = rng_seed;
}

void VirtualDrone2D::step(std::int64_t now_ms) {
    state_ = agent_tick(state_, bus_, config_, *controller_, now_ms);
}

void VirtualDrone2D::finish(std::int64_t now_ms) {
    try {
        bus_.publish(topics::agent_exit(config_.agent_id),
                     Json{{"tick", state_.tick}, {"t_ms", now_ms}, {"terminal", true}});
    } catch (const BusError&) {
    }
}

void run_agent_loop(const AgentConfig& config, Bus& bus, const RunClock& clock, std::int64_t run_seed) {
    VirtualDrone2D drone(config, bus, derive_agent_seed(run_seed, config.agent_id));
    run_loop(drone, bus, clock);
}

}  // namespace fieldswarm
