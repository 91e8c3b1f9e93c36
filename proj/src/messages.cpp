#include "fieldswarm/messages.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldswarm {

FieldMap::FieldMap(std::size_t size, double extent, std::vector<double> values)
    : size_(size), extent_(extent), values_(std::move(values)) {
    if (values_.size() != size_ * size_) {
        throw std::invalid_argument("field map values length must equal size squared");
    }
}

bool FieldMap::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Json to_json(const Position2D& p) {
    return Json::array({p.x, p.y});
}

Position2D position_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw std::invalid_argument("position must be a two-element array [x, y]");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

Json to_json(const SpaceLimits& l) {
    return Json{{"x_min", l.x_min}, {"x_max", l.x_max}, {"y_min", l.y_min}, {"y_max", l.y_max}};
}

SpaceLimits limits_from_json(const Json& j) {
    return {j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
            j.at("y_max").get<double>()};
}

Json to_json(const AgentState& s) {
    return Json{{"agent_id", s.agent_id},
                {"x", s.position.x},
                {"y", s.position.y},
                {"last_action", to_string(s.last_action)},
                {"timestamp_ms", s.timestamp_ms},
                {"sequence", s.sequence}};
}

AgentState agent_state_from_json(const Json& j) {
    AgentState s;
    s.agent_id = j.at("agent_id").get<std::string>();
    s.position = {j.at("x").get<double>(), j.at("y").get<double>()};
    auto action = parse_action(j.at("last_action").get<std::string>());
    if (!action) throw std::invalid_argument("unknown action in agent state");
    s.last_action = *action;
    s.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    s.sequence = j.at("sequence").get<std::uint64_t>();
    return s;
}

Json to_json(const EnvironmentState& s) {
    Json points = Json::array();
    for (const auto& p : s.modulation_points) points.push_back(to_json(p));
    return Json{{"limits", to_json(s.limits)},
                {"points", std::move(points)},
                {"timestamp_ms", s.timestamp_ms},
                {"sequence", s.sequence}};
}

EnvironmentState environment_state_from_json(const Json& j) {
    EnvironmentState s;
    s.limits = limits_from_json(j.at("limits"));
    for (const auto& p : j.at("points")) s.modulation_points.push_back(position_from_json(p));
    s.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    s.sequence = j.value("sequence", std::uint64_t{0});
    return s;
}

Json to_json(const FieldMap& f) {
    return Json{{"size", f.size()}, {"extent", f.extent()}, {"values", std::vector<double>(f.values().begin(), f.values().end())}};
}

FieldMap field_map_from_json(const Json& j) {
    return FieldMap(j.at("size").get<std::size_t>(), j.at("extent").get<double>(),
                    j.at("values").get<std::vector<double>>());
}

}  // namespace fieldswarm
