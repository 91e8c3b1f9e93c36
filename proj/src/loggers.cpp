#include "fieldswarm/loggers.hpp"

#include <set>

#include <spdlog/spdlog.h>

#include "fieldswarm/geometry.hpp"

namespace fieldswarm {

namespace {

std::ofstream open_append(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::out | std::ios::app);
    if (!out) throw LogWriteError("cannot open " + path.string() + " for writing");
    return out;
}

void write_line(std::ofstream& out, const std::string& line, const std::filesystem::path& path, Bus& bus) {
    out << line << '\n';
    out.flush();
    if (!out) {
        try {
            bus.raise_stop();
        } catch (const BusError&) {
        }
        throw LogWriteError("write to " + path.string() + " failed");
    }
}

void require_keys(const Json& j, std::initializer_list<const char*> keys) {
    if (!j.is_object() || j.size() != keys.size()) {
        throw std::invalid_argument("record must be an object with exactly " + std::to_string(keys.size()) + " keys");
    }
    for (const char* k : keys) {
        if (!j.contains(k)) throw std::invalid_argument(std::string("record is missing \"") + k + "\"");
    }
}

}  // namespace

Json to_json(const TrajectoryRecord& r) {
    return Json{{"t_ms", r.t_ms}, {"agent_id", r.agent_id}, {"x", r.x}, {"y", r.y}, {"action", to_string(r.action)}};
}

TrajectoryRecord trajectory_record_from_json(const Json& j) {
    require_keys(j, {"t_ms", "agent_id", "x", "y", "action"});
    TrajectoryRecord r;
    r.t_ms = j.at("t_ms").get<std::int64_t>();
    r.agent_id = j.at("agent_id").get<std::string>();
    r.x = j.at("x").get<double>();
    r.y = j.at("y").get<double>();
    auto a = parse_action(j.at("action").get<std::string>());
    if (!a) throw std::invalid_argument("unknown action");
    r.action = *a;
    return r;
}

Json to_json(const FieldRecord& r) {
    return Json{{"t_ms", r.t_ms}, {"agent_id", r.agent_id}, {"size", r.size}, {"values", r.values}};
}

FieldRecord field_record_from_json(const Json& j) {
    require_keys(j, {"t_ms", "agent_id", "size", "values"});
    FieldRecord r;
    r.t_ms = j.at("t_ms").get<std::int64_t>();
    r.agent_id = j.at("agent_id").get<std::string>();
    r.size = j.at("size").get<std::size_t>();
    r.values = j.at("values").get<std::vector<double>>();
    if (r.values.size() != r.size * r.size) throw std::invalid_argument("values length must equal size squared");
    return r;
}

PositionLogger::PositionLogger(Bus& bus, const std::filesystem::path& output, std::int64_t delay_ms)
    : bus_(bus), path_(output), out_(open_append(output)), delay_ms_(delay_ms) {}

void PositionLogger::step(std::int64_t) {
    ++ticks_;
    std::vector<Envelope> envelopes;
    try {
        envelopes = bus_.scan(topics::kAgentPrefix);
    } catch (const BusError& e) {
        spdlog::debug("position logger: scan failed: {}", e.what());
        return;
    }
    for (const auto& env : envelopes) {
        std::string_view id = topics::agent_id_of(env.key, "state");
        if (id.empty()) continue;
        auto& last = last_sequence_[std::string(id)];
        if (env.sequence == last) continue;
        last = env.sequence;
        AgentState s;
        try {
            s = agent_state_from_json(env.payload());
        } catch (const std::exception& e) {
            spdlog::warn("position logger: malformed state on {}: {}", env.key, e.what());
            continue;
        }
        TrajectoryRecord rec{s.timestamp_ms, s.agent_id, s.position.x, s.position.y, s.last_action};
        write_line(out_, to_json(rec).dump(), path_, bus_);
        ++records_;
    }
}

void PositionLogger::finish(std::int64_t) { out_.flush(); }

FieldLogger::FieldLogger(Bus& bus, std::string agent_id, const std::filesystem::path& output, std::int64_t delay_ms)
    : bus_(bus), agent_id_(std::move(agent_id)), path_(output), out_(open_append(output)), delay_ms_(delay_ms) {}

void FieldLogger::step(std::int64_t) {
    ++ticks_;
    std::optional<Envelope> env;
    try {
        env = bus_.read(topics::agent_field(agent_id_));
    } catch (const BusError& e) {
        spdlog::debug("field logger: read failed: {}", e.what());
        return;
    }
    if (!env || env->sequence == last_sequence_) return;
    last_sequence_ = env->sequence;
    FieldRecord rec;
    try {
        FieldMap map = field_map_from_json(env->payload());
        rec = FieldRecord{env->published_at, agent_id_, map.size(),
                          std::vector<double>(map.values().begin(), map.values().end())};
    } catch (const std::exception& e) {
        spdlog::warn("field logger: malformed field for {}: {}", agent_id_, e.what());
        return;
    }
    write_line(out_, to_json(rec).dump(), path_, bus_);
    ++records_;
}

void FieldLogger::finish(std::int64_t) { out_.flush(); }

void MinDistanceMonitor::step(std::int64_t now_ms) {
    ++ticks_;
    std::map<std::int64_t, std::vector<Position2D>> by_time;
    for (const auto& env : bus_.scan(topics::kAgentPrefix)) {
        if (topics::agent_id_of(env.key, "state").empty()) continue;
        AgentState s = agent_state_from_json(env.payload());
        if (s.timestamp_ms < from_ms_ || s.timestamp_ms > now_ms) continue;
        by_time[s.timestamp_ms].push_back(s.position);
    }
    for (const auto& [t, positions] : by_time) {
        for (std::size_t a = 0; a < positions.size(); ++a) {
            for (std::size_t b = a + 1; b < positions.size(); ++b) {
                min_distance_ = std::min(min_distance_, distance(positions[a], positions[b]));
            }
        }
    }
}

void run_position_logger(Bus& bus, const std::filesystem::path& output, std::int64_t delay_ms, const RunClock& clock) {
    PositionLogger logger(bus, output, delay_ms);
    run_loop(logger, bus, clock);
}

void run_field_logger(Bus& bus, const std::string& agent_id, const std::filesystem::path& output,
                      std::int64_t delay_ms, const RunClock& clock) {
    FieldLogger logger(bus, agent_id, output, delay_ms);
    run_loop(logger, bus, clock);
}

}  // namespace fieldswarm
