#include <doctest.h>

#include <random>

#include "fieldswarm/config.hpp"
#include "test_util.hpp"

using namespace fieldswarm;

namespace {

std::string path_of(const std::string& text) {
    try {
        parse_config(std::string_view(text));
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

const char* kMinimal = R"({"agents":[{"agent_id":"A","initial_position":[0,0]}]})";

}  // namespace

TEST_CASE("circle_around_center config carries the experiment values") {
    auto c = load_config(testutil::config_path("circle_around_center.json"));
    REQUIRE(c.agents.size() == 5);
    REQUIRE(c.environment.has_value());
    const auto& env = *c.environment;
    CHECK(env.theta_degrees == 2.5);
    CHECK(env.rotation_center == Position2D{-0.5, 0.5});
    CHECK(env.delay_ms == 100);
    CHECK(env.limits.x_min == -2.5);
    CHECK(env.limits.x_max == 1.5);
    CHECK(env.limits.y_min == -1.0);
    CHECK(env.limits.y_max == 2.0);
    CHECK(env.modulation_points ==
          std::vector<Position2D>{{-1, 1}, {0, 1}, {0, 0}, {-1, 0}, {-0.5, 0.5}});
    for (const auto& a : c.agents) {
        CHECK(a.delay_ms == 100);
        CHECK(a.vicinity == 0.5);
        CHECK(a.field_size == 84);
        CHECK(a.clip_factor == 2.0);
        CHECK(a.controller.reward_function == "sum");
        CHECK(a.default_height == 0.55);
        CHECK(a.velocity == 0.35);
        CHECK(a.controller.kind == ControllerKind::HillClimbing);
        CHECK_FALSE(a.initial_position.has_value());
    }
}

TEST_CASE("circle_spin differs only in the rotation center") {
    auto a = load_config(testutil::config_path("circle_around_center.json"));
    auto b = load_config(testutil::config_path("circle_spin.json"));
    CHECK(b.environment->rotation_center == Position2D{-0.5, 0.25});
    b.environment->rotation_center = a.environment->rotation_center;
    b.name = a.name;
    CHECK(a == b);
}

TEST_CASE("defaults are applied") {
    auto c = parse_config(std::string_view(kMinimal));
    REQUIRE(c.agents.size() == 1);
    const auto& a = c.agents[0];
    CHECK(a.field_size == 84);
    CHECK(a.clip_factor == 2.0);
    CHECK(a.controller.reward_function == "sum");
    CHECK(a.controller.kind == ControllerKind::HillClimbing);
    CHECK(a.kind == AgentKind::VirtualDrone2D);
    CHECK(a.vicinity == 0.5);
    CHECK_FALSE(a.clamp_to_limits);
    CHECK(c.bus.transport == BusTransport::InProcess);
}

TEST_CASE("empty agent list with an environment is valid") {
    auto c = parse_config(std::string_view(R"({"agents":[],"environment":{"kind":"field_modulation"}})"));
    CHECK(c.agents.empty());
    CHECK(c.environment.has_value());
}

TEST_CASE("errors name the offending key") {
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0]},{"agent_id":"A","initial_position":[1,0]}]})") ==
          "agents[1].agent_id");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"field_size":85}]})") ==
          "agents[0].field_size");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"delay_ms":0}]})") ==
          "agents[0].delay_ms");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"delay_ms":-5}]})") ==
          "agents[0].delay_ms");
    CHECK(path_of(R"({"environment":{"kind":"field_modulation","delay_ms":0}})") == "environment.delay_ms");
    CHECK(path_of(R"({"loggers":[{"kind":"position","output":"t.jsonl","delay_ms":0}]})") == "loggers[0].delay_ms");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"colour":"red"}]})") ==
          "agents[0].colour");
    CHECK(path_of(R"({"agents":[],"extra":1})") == "extra");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"velocity":-1}]})") ==
          "agents[0].velocity");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],
                      "controller":{"kind":"hill_climbing","reward_function":"max"}}]})") ==
          "agents[0].controller.reward_function");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"controller":{"kind":"go_to_point"}}]})") ==
          "agents[0].controller.target");
    CHECK(path_of(R"({"agents":[{"agent_id":"A","initial_position":[0,0],"controller":{"kind":"teleport"}}]})") ==
          "agents[0].controller.kind");
    CHECK(path_of(R"({"loggers":[{"kind":"field","output":"f.jsonl"}]})") == "loggers[0].target");
}

TEST_CASE("malformed documents are config errors") {
    CHECK_THROWS_AS(parse_config(std::string_view("{")), ConfigError);
    CHECK_THROWS_AS(parse_config(std::string_view("[]")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("random drones need an environment to draw from") {
    CHECK_THROWS_AS(parse_config(std::string_view(R"({"agents":[{"agent_id":"A"}]})")), ConfigError);
    CHECK_NOTHROW(parse_config(std::string_view(R"({"agents":[{"agent_id":"A"}],"environment":{}})")));
}

TEST_CASE("parse after serialize is the identity on valid configs") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    std::uniform_int_distribution<int> small(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentConfig c;
        c.name = "trial-" + std::to_string(trial);
        c.seed = static_cast<std::int64_t>(rng() >> 2);
        EnvironmentConfig env;
        env.delay_ms = 1 + small(rng) * 50;
        env.limits = {-3.0 + coord(rng) * 0.1, 2.0 + coord(rng) * 0.1, -2.0 + coord(rng) * 0.1, 3.0 + coord(rng) * 0.1};
        for (int k = small(rng); k > 0; --k) env.modulation_points.push_back({coord(rng), coord(rng)});
        env.rotation_center = {coord(rng), coord(rng)};
        env.theta_degrees = coord(rng);
        c.environment = env;
        const int n = small(rng);
        for (int i = 0; i < n; ++i) {
            AgentConfig a;
            a.agent_id = "agent" + std::to_string(i);
            a.delay_ms = 10 + small(rng) * 10;
            a.vicinity = 0.1 + std::abs(coord(rng));
            a.field_size = 3 * static_cast<std::size_t>(1 + small(rng) * 7);
            a.clip_factor = 1.0 + std::abs(coord(rng)) / 5.0;
            a.velocity = std::abs(coord(rng));
            a.default_height = std::abs(coord(rng));
            a.clamp_to_limits = small(rng) % 2 == 0;
            a.publish_field = small(rng) % 2 == 0;
            if (small(rng) % 2 == 0) a.initial_position = Position2D{coord(rng), coord(rng)};
            switch (small(rng) % 3) {
            case 0:
                a.controller.kind = ControllerKind::HillClimbing;
                break;
            case 1:
                a.controller.kind = ControllerKind::GoToPoint;
                a.controller.target = Position2D{coord(rng), coord(rng)};
                if (small(rng) % 2 == 0) a.controller.epsilon = std::abs(coord(rng)) / 10.0;
                break;
            default:
                a.controller.kind = ControllerKind::Remote;
                a.controller.staleness_ms = small(rng) * 250;
                break;
            }
            c.agents.push_back(a);
        }
        if (small(rng) % 2 == 0) c.loggers.push_back({LoggerKind::Position, 100, "", "trajectory.jsonl"});
        if (n > 0 && small(rng) % 2 == 0) c.loggers.push_back({LoggerKind::Field, 50, "agent0", "field.jsonl"});
        if (small(rng) % 2 == 0) c.bus = {BusTransport::Tcp, "127.0.0.1", static_cast<std::uint16_t>(small(rng) * 1000)};
        if (small(rng) % 2 == 0) {
            GatewayConfig g;
            g.port = static_cast<std::uint16_t>(small(rng) * 1000);
            g.snapshot_hz = 1.0 + small(rng);
            if (n > 0) g.field_agent = "agent0";
            g.static_dir = "panel";
            c.gateway = g;
        }

        const Json doc = serialize_config(c);
        CHECK(parse_config(doc) == c);
        CHECK(parse_config(std::string_view(doc.dump())) == c);
    }
}
