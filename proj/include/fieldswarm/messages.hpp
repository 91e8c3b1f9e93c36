#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldswarm/action.hpp"
#include "fieldswarm/field_map.hpp"
#include "fieldswarm/geometry.hpp"

namespace fieldswarm {

using Json = nlohmann::json;

/// Published by each agent on "agent/{id}/state".
struct AgentState {
    std::string agent_id;
    Position2D position;
    Action last_action = Action::Stop;
    std::int64_t timestamp_ms = 0;  // relative to run start
    std::uint64_t sequence = 0;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Published by the environment on "env/main/state".
struct EnvironmentState {
    SpaceLimits limits;
    std::vector<Position2D> modulation_points;
    std::int64_t timestamp_ms = 0;
    std::uint64_t sequence = 0;

    friend bool operator==(const EnvironmentState&, const EnvironmentState&) = default;
};

// Bus payload codecs. Decoders throw nlohmann::json::exception on shape errors.
Json to_json(const Position2D& p);
Position2D position_from_json(const Json& j);

Json to_json(const SpaceLimits& l);
SpaceLimits limits_from_json(const Json& j);

Json to_json(const AgentState& s);
AgentState agent_state_from_json(const Json& j);

Json to_json(const EnvironmentState& s);
EnvironmentState environment_state_from_json(const Json& j);

/// {"size":int, "extent":float, "values":[...row-major...]}
Json to_json(const FieldMap& f);
FieldMap field_map_from_json(const Json& j);

}  // namespace fieldswarm
