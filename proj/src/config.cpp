#include "fieldswarm/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "fieldswarm/controllers.hpp"

namespace fieldswarm {

namespace {

template <typename Enum, std::size_t N>
struct EnumTable {
    std::array<std::pair<Enum, std::string_view>, N> entries;

    std::string_view name(Enum e) const {
        for (const auto& [v, n] : entries) {
            if (v == e) return n;
        }
        return "?";
    }
    std::optional<Enum> find(std::string_view s) const {
        for (const auto& [v, n] : entries) {
            if (n == s) return v;
        }
        return std::nullopt;
    }
};

constexpr EnumTable<ControllerKind, 4> kControllerKinds{{{
    {ControllerKind::HillClimbing, "hill_climbing"},
    {ControllerKind::GoToPoint, "go_to_point"},
    {ControllerKind::Remote, "remote"},
    {ControllerKind::HelloWorld, "hello_world"},
}}};
constexpr EnumTable<AgentKind, 2> kAgentKinds{{{
    {AgentKind::VirtualDrone2D, "virtual_drone_2d"},
    {AgentKind::HelloWorld, "hello_world"},
}}};
constexpr EnumTable<EnvironmentKind, 2> kEnvironmentKinds{{{
    {EnvironmentKind::FieldModulation, "field_modulation"},
    {EnvironmentKind::HelloWorld, "hello_world"},
}}};
constexpr EnumTable<LoggerKind, 3> kLoggerKinds{{{
    {LoggerKind::Position, "position"},
    {LoggerKind::Field, "field"},
    {LoggerKind::HelloWorld, "hello_world"},
}}};
constexpr EnumTable<BusTransport, 2> kTransports{{{
    {BusTransport::InProcess, "in_process"},
    {BusTransport::Tcp, "tcp"},
}}};

// Thin cursor over one JSON object that records which keys were consumed and
// reports errors with their full path.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[nodiscard]] std::string child(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    [[noreturn]] void fail(std::string_view key, const std::string& msg) const {
        throw ConfigError(key.empty() ? path_ : child(key), msg);
    }

    bool has(std::string_view key) const { return j_.contains(key); }

    const Json& raw(std::string_view key) {
        seen_.insert(std::string(key));
        if (!j_.contains(key)) fail(key, "required key missing");
        return j_.at(key);
    }

    double number(std::string_view key) {
        const Json& v = raw(key);
        if (!v.is_number()) fail(key, "expected a number");
        double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "expected a finite number");
        return d;
    }
    double number(std::string_view key, double fallback) { return has(key) ? number(key) : fallback; }

    std::int64_t integer(std::string_view key) {
        const Json& v = raw(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(std::string_view key, std::int64_t fallback) {
        return has(key) ? integer(key) : fallback;
    }

    std::string string(std::string_view key) {
        const Json& v = raw(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }
    std::string string(std::string_view key, std::string fallback) {
        return has(key) ? string(key) : fallback;
    }

    bool boolean(std::string_view key, bool fallback) {
        if (!has(key)) return fallback;
        const Json& v = raw(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    Position2D position(std::string_view key) { return position_at(raw(key), child(key)); }

    template <typename Enum, std::size_t N>
    Enum enumeration(std::string_view key, const EnumTable<Enum, N>& table) {
        std::string s = string(key);
        auto e = table.find(s);
        if (!e) fail(key, "unknown value \"" + s + "\"");
        return *e;
    }
    template <typename Enum, std::size_t N>
    Enum enumeration(std::string_view key, const EnumTable<Enum, N>& table, Enum fallback) {
        return has(key) ? enumeration(key, table) : fallback;
    }

    void reject_unknown_keys() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.contains(k)) throw ConfigError(child(k), "unknown key");
        }
    }

    static Position2D position_at(const Json& v, const std::string& path) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            throw ConfigError(path, "expected [x, y]");
        }
        Position2D p{v[0].get<double>(), v[1].get<double>()};
        if (!p.finite()) throw ConfigError(path, "coordinates must be finite");
        return p;
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::int64_t positive_delay(ObjectReader& r, std::int64_t fallback) {
    std::int64_t d = r.integer("delay_ms", fallback);
    if (d <= 0) r.fail("delay_ms", "delay must be positive");
    return d;
}

SpaceLimits parse_limits(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    SpaceLimits l{r.number("x_min"), r.number("x_max"), r.number("y_min"), r.number("y_max")};
    r.reject_unknown_keys();
    if (!(l.x_min < l.x_max)) throw ConfigError(path, "x_min must be below x_max");
    if (!(l.y_min < l.y_max)) throw ConfigError(path, "y_min must be below y_max");
    return l;
}

ControllerSpec parse_controller(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    ControllerSpec c;
    c.kind = r.enumeration("kind", kControllerKinds);
    c.reward_function = r.string("reward_function", "sum");
    if (!is_reward_registered(c.reward_function)) {
        r.fail("reward_function", "reward function \"" + c.reward_function + "\" is not registered");
    }
    if (r.has("target")) c.target = r.position("target");
    if (r.has("epsilon")) {
        c.epsilon = r.number("epsilon");
        if (*c.epsilon < 0.0) r.fail("epsilon", "epsilon must be non-negative");
    }
    c.staleness_ms = r.integer("staleness_ms", 500);
    if (c.staleness_ms < 0) r.fail("staleness_ms", "staleness must be non-negative");
    r.reject_unknown_keys();
    if (c.kind == ControllerKind::GoToPoint && !c.target) {
        throw ConfigError(r.child("target"), "go_to_point controller requires a target");
    }
    return c;
}

AgentConfig parse_agent(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    AgentConfig a;
    a.agent_id = r.string("agent_id");
    if (a.agent_id.empty()) r.fail("agent_id", "agent id must be non-empty");
    for (char ch : a.agent_id) {
        if (ch == '/' || std::isspace(static_cast<unsigned char>(ch))) {
            r.fail("agent_id", "agent id must not contain '/' or whitespace");
        }
    }
    a.kind = r.enumeration("kind", kAgentKinds, AgentKind::VirtualDrone2D);
    a.delay_ms = positive_delay(r, 100);
    if (r.has("controller")) {
        a.controller = parse_controller(r.raw("controller"), r.child("controller"));
    } else if (a.kind == AgentKind::HelloWorld) {
        a.controller.kind = ControllerKind::HelloWorld;
    }
    if (r.has("initial_position")) a.initial_position = r.position("initial_position");
    a.vicinity = r.number("vicinity", 0.5);
    if (a.vicinity <= 0.0) r.fail("vicinity", "vicinity must be positive");
    std::int64_t size = r.integer("field_size", 84);
    if (size <= 0) r.fail("field_size", "field size must be positive");
    if (size % 3 != 0) r.fail("field_size", "field size must be divisible by 3");
    a.field_size = static_cast<std::size_t>(size);
    a.clip_factor = r.number("clip_factor", 2.0);
    if (a.clip_factor < 1.0) r.fail("clip_factor", "clip factor must be at least 1");
    a.velocity = r.number("velocity", 0.35);
    if (a.velocity < 0.0) r.fail("velocity", "velocity must be non-negative");
    a.default_height = r.number("default_height", 0.55);
    a.clamp_to_limits = r.boolean("clamp_to_limits", false);
    a.publish_field = r.boolean("publish_field", true);
    r.reject_unknown_keys();

    bool hello_pair = (a.kind == AgentKind::HelloWorld) == (a.controller.kind == ControllerKind::HelloWorld);
    if (!hello_pair) {
        throw ConfigError(r.child("controller.kind"),
                          "hello_world agents and controllers can only be paired with each other");
    }
    return a;
}

EnvironmentConfig parse_environment(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    EnvironmentConfig e;
    e.kind = r.enumeration("kind", kEnvironmentKinds, EnvironmentKind::FieldModulation);
    e.delay_ms = positive_delay(r, 100);
    if (r.has("limits")) e.limits = parse_limits(r.raw("limits"), r.child("limits"));
    if (r.has("modulation_points")) {
        const Json& pts = r.raw("modulation_points");
        if (!pts.is_array()) r.fail("modulation_points", "expected a list of [x, y]");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            e.modulation_points.push_back(
                ObjectReader::position_at(pts[i], r.child("modulation_points") + "[" + std::to_string(i) + "]"));
        }
    }
    if (r.has("rotation_center")) e.rotation_center = r.position("rotation_center");
    e.theta_degrees = r.number("theta_degrees", 0.0);
    r.reject_unknown_keys();
    return e;
}

LoggerConfig parse_logger(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    LoggerConfig l;
    l.kind = r.enumeration("kind", kLoggerKinds, LoggerKind::Position);
    l.delay_ms = positive_delay(r, 100);
    l.target = r.string("target", "");
    l.output = r.string("output");
    if (l.output.empty()) r.fail("output", "output path must be non-empty");
    r.reject_unknown_keys();
    if (l.kind == LoggerKind::Field && l.target.empty()) {
        throw ConfigError(r.child("target"), "field logger requires a target agent id");
    }
    return l;
}

std::uint16_t parse_port(ObjectReader& r, std::string_view key, std::int64_t fallback) {
    std::int64_t port = r.integer(key, fallback);
    if (port < 0 || port > 65535) r.fail(key, "port out of range");
    return static_cast<std::uint16_t>(port);
}

BusConfig parse_bus(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    BusConfig b;
    b.transport = r.has("transport") ? r.enumeration("transport", kTransports) : BusTransport::InProcess;
    b.host = r.string("host", "127.0.0.1");
    b.port = parse_port(r, "port", 0);
    r.reject_unknown_keys();
    return b;
}

GatewayConfig parse_gateway(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    GatewayConfig g;
    g.host = r.string("host", "127.0.0.1");
    g.port = parse_port(r, "port", 8080);
    g.snapshot_hz = r.number("snapshot_hz", 10.0);
    if (g.snapshot_hz <= 0.0) r.fail("snapshot_hz", "snapshot rate must be positive");
    if (r.has("field_agent")) g.field_agent = r.string("field_agent");
    g.static_dir = r.string("static_dir", "");
    r.reject_unknown_keys();
    return g;
}

Json position_json(const Position2D& p) {
    return Json::array({p.x, p.y});
}

}  // namespace

const AgentConfig* ExperimentConfig::find_agent(std::string_view id) const {
    for (const auto& a : agents) {
        if (a.agent_id == id) return &a;
    }
    return nullptr;
}

ExperimentConfig parse_config(const Json& document) {
    ObjectReader r(document, "");
    ExperimentConfig cfg;
    cfg.name = r.string("name", "experiment");
    cfg.seed = r.integer("seed", 0);

    if (r.has("agents")) {
        const Json& agents = r.raw("agents");
        if (!agents.is_array()) r.fail("agents", "expected a list");
        std::set<std::string> ids;
        for (std::size_t i = 0; i < agents.size(); ++i) {
            std::string path = "agents[" + std::to_string(i) + "]";
            AgentConfig a = parse_agent(agents[i], path);
            if (!ids.insert(a.agent_id).second) {
                throw ConfigError(path + ".agent_id", "duplicate agent id \"" + a.agent_id + "\"");
            }
            cfg.agents.push_back(std::move(a));
        }
    }
    if (r.has("environment") && !r.raw("environment").is_null()) {
        cfg.environment = parse_environment(r.raw("environment"), "environment");
    }
    if (r.has("loggers")) {
        const Json& loggers = r.raw("loggers");
        if (!loggers.is_array()) r.fail("loggers", "expected a list");
        for (std::size_t i = 0; i < loggers.size(); ++i) {
            cfg.loggers.push_back(parse_logger(loggers[i], "loggers[" + std::to_string(i) + "]"));
        }
    }
    if (r.has("bus")) cfg.bus = parse_bus(r.raw("bus"), "bus");
    if (r.has("gateway") && !r.raw("gateway").is_null()) {
        cfg.gateway = parse_gateway(r.raw("gateway"), "gateway");
    }
    r.reject_unknown_keys();

    for (const auto& a : cfg.agents) {
        if (a.kind == AgentKind::VirtualDrone2D && !a.initial_position &&
            !(cfg.environment && cfg.environment->kind == EnvironmentKind::FieldModulation)) {
            throw ConfigError("agents", "agent \"" + a.agent_id +
                                            "\" has no initial_position and there are no environment "
                                            "limits to draw one from");
        }
    }
    return cfg;
}

ExperimentConfig parse_config(std::istream& in) {
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON document: ") + e.what());
    }
    return parse_config(doc);
}

ExperimentConfig parse_config(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    return parse_config(in);
}

Json serialize_config(const ExperimentConfig& cfg) {
    Json agents = Json::array();
    for (const auto& a : cfg.agents) {
        Json c{{"kind", to_string(a.controller.kind)},
               {"reward_function", a.controller.reward_function},
               {"staleness_ms", a.controller.staleness_ms}};
        if (a.controller.target) c["target"] = position_json(*a.controller.target);
        if (a.controller.epsilon) c["epsilon"] = *a.controller.epsilon;
        Json aj{{"agent_id", a.agent_id},
                {"kind", to_string(a.kind)},
                {"controller", std::move(c)},
                {"delay_ms", a.delay_ms},
                {"vicinity", a.vicinity},
                {"field_size", a.field_size},
                {"clip_factor", a.clip_factor},
                {"velocity", a.velocity},
                {"default_height", a.default_height},
                {"clamp_to_limits", a.clamp_to_limits},
                {"publish_field", a.publish_field}};
        if (a.initial_position) aj["initial_position"] = position_json(*a.initial_position);
        agents.push_back(std::move(aj));
    }
    Json loggers = Json::array();
    for (const auto& l : cfg.loggers) {
        loggers.push_back(Json{{"kind", to_string(l.kind)},
                               {"delay_ms", l.delay_ms},
                               {"target", l.target},
                               {"output", l.output}});
    }
    Json doc{{"name", cfg.name},
             {"seed", cfg.seed},
             {"agents", std::move(agents)},
             {"loggers", std::move(loggers)},
             {"bus", Json{{"transport", to_string(cfg.bus.transport)},
                          {"host", cfg.bus.host},
                          {"port", cfg.bus.port}}}};
    if (cfg.environment) {
        const auto& e = *cfg.environment;
        Json pts = Json::array();
        for (const auto& p : e.modulation_points) pts.push_back(position_json(p));
        doc["environment"] = Json{{"kind", to_string(e.kind)},
                                  {"delay_ms", e.delay_ms},
                                  {"limits", to_json(e.limits)},
                                  {"modulation_points", std::move(pts)},
                                  {"rotation_center", position_json(e.rotation_center)},
                                  {"theta_degrees", e.theta_degrees}};
    }
    if (cfg.gateway) {
        const auto& g = *cfg.gateway;
        Json gj{{"host", g.host}, {"port", g.port}, {"snapshot_hz", g.snapshot_hz}, {"static_dir", g.static_dir}};
        if (g.field_agent) gj["field_agent"] = *g.field_agent;
        doc["gateway"] = std::move(gj);
    }
    return doc;
}

std::string_view to_string(ControllerKind k) { return kControllerKinds.name(k); }
std::string_view to_string(AgentKind k) { return kAgentKinds.name(k); }
std::string_view to_string(EnvironmentKind k) { return kEnvironmentKinds.name(k); }
std::string_view to_string(LoggerKind k) { return kLoggerKinds.name(k); }
std::string_view to_string(BusTransport t) { return kTransports.name(t); }

}  // namespace fieldswarm
