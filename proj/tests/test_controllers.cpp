#include <doctest.h>

#include <random>

#include "fieldswarm/bus.hpp"
#include "fieldswarm/config.hpp"
#include "fieldswarm/controllers.hpp"
#include "fieldswarm/field_modulation.hpp"
#include "oracle.hpp"

using namespace fieldswarm;

namespace {

const SpaceLimits kHuge{-1e6, 1e6, -1e6, 1e6};

FieldMap map_of(const oracle::Scene& s) { return build_field(s.self, s.neighbors, s.pois, s.limits, {}); }

FieldMap random_map(std::mt19937_64& rng, std::size_t size = 84) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(size * size);
    for (auto& x : v) x = n(rng);
    return FieldMap(size, 0.5, std::move(v));
}

}  // namespace

TEST_CASE("pooling") {
    FieldMap zero(84, 0.5);
    for (const auto& row : pool_field(zero, "sum")) {
        for (double v : row) CHECK(v == 0.0);
    }
    FieldMap one(84, 0.5);
    one.at(40, 50) = 1.0;
    auto g = pool_field(one, "sum");
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(g[r][c] == (r == 1 && c == 1 ? 1.0 : 0.0));
    }
    CHECK_THROWS_AS(pool_field(zero, "median"), UnknownRewardError);
    CHECK_THROWS(pool_field(FieldMap(10, 0.5), "sum"));
}

TEST_CASE("sum pooling equals the naive block loop exactly") {
    std::mt19937_64 rng(17);
    for (std::size_t size : {3u, 9u, 84u, 90u}) {
        for (int trial = 0; trial < 10; ++trial) {
            FieldMap m = random_map(rng, size);
            std::vector<double> v(m.values().begin(), m.values().end());
            auto expect = oracle::naive_pool_sum(v, size);
            auto got = pool_field(m, "sum");
            for (std::size_t r = 0; r < 3; ++r) {
                for (std::size_t c = 0; c < 3; ++c) CHECK(got[r][c] == expect[r][c]);
            }
        }
    }
}

TEST_CASE("custom rewards can be registered") {
    register_reward("test_max", [](std::span<const double> b) { return *std::max_element(b.begin(), b.end()); });
    CHECK(is_reward_registered("test_max"));
    CHECK(is_reward_registered("sum"));
    CHECK_FALSE(is_reward_registered("nope"));
    FieldMap m(84, 0.5);
    m.at(0, 0) = 5.0;
    m.at(1, 0) = -50.0;
    CHECK(pool_field(m, "test_max")[0][0] == 5.0);
    CHECK(pool_field(m, "sum")[0][0] == -45.0);
}

TEST_CASE("block layout follows the body frame") {
    CHECK(action_for_block(1, 1) == Action::Stop);
    CHECK(action_for_block(2, 1) == Action::Front);
    CHECK(action_for_block(0, 1) == Action::Back);
    CHECK(action_for_block(1, 2) == Action::Left);
    CHECK(action_for_block(1, 0) == Action::Right);
    CHECK(action_for_block(2, 2) == Action::FrontLeft);
    CHECK(action_for_block(2, 0) == Action::FrontRight);
    CHECK(action_for_block(0, 2) == Action::BackLeft);
    CHECK(action_for_block(0, 0) == Action::BackRight);
    for (Action a : kAllActions) {
        auto [r, c] = oracle::block_of(a);
        CHECK(action_for_block(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) == a);
    }
}

TEST_CASE("ties break in the fixed preference order") {
    CHECK(hill_climb(FieldMap(84, 0.5), "sum") == Action::Stop);
    // Equal bumps in every outer block except the center pick FRONT first.
    FieldMap m(84, 0.5, -1.0);
    for (std::size_t i = 0; i < 84; ++i) {
        for (std::size_t j = 0; j < 84; ++j) {
            if (i / 28 != 1 || j / 28 != 1) m.at(i, j) = 0.0;
        }
    }
    CHECK(hill_climb(m, "sum") == Action::Front);
    // Only diagonals high: FRONT_LEFT precedes the others.
    FieldMap d(84, 0.5, 0.0);
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 0}, {0, 83}, {83, 0}, {83, 83}}) d.at(i, j) = 1.0;
    CHECK(hill_climb(d, "sum") == Action::FrontLeft);
}

TEST_CASE("hill climbing agrees with the oracle on random maps") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        FieldMap m = random_map(rng);
        std::vector<double> v(m.values().begin(), m.values().end());
        CHECK(hill_climb(m, "sum") == oracle::naive_argmax(oracle::naive_pool_sum(v, 84)));
    }
}

TEST_CASE("hill climbing ignores a constant offset") {
    std::mt19937_64 rng(29);
    // Dyadic values keep the shifted sums exact.
    std::uniform_int_distribution<int> q(-64, 64);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(84 * 84);
        for (auto& x : v) x = q(rng) / 16.0;
        FieldMap m(84, 0.5, v);
        const double c = q(rng) / 4.0;
        for (auto& x : v) x += c;
        CHECK(hill_climb(m, "sum") == hill_climb(FieldMap(84, 0.5, v), "sum"));
    }
}

TEST_CASE("a dominant center block means STOP") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        FieldMap m = random_map(rng);
        for (std::size_t i = 28; i < 56; ++i) {
            for (std::size_t j = 28; j < 56; ++j) m.at(i, j) += 10.0;
        }
        CHECK(hill_climb(m, "sum") == Action::Stop);
    }
}

TEST_CASE("neighbor on the agent: center block is the strict minimum") {
    oracle::Scene s;
    s.neighbors = {{0, 0}};
    s.limits = kHuge;
    auto g = pool_field(map_of(s), "sum");
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            if (r != 1 || c != 1) CHECK(g[1][1] < g[r][c]);
        }
    }
    const Action a = hill_climb(map_of(s), "sum");
    CHECK(a != Action::Stop);
    CHECK(a == oracle::naive_hill_climb(s));
    CHECK(a == Action::BackRight);
}

TEST_CASE("point of interest on the agent: STOP") {
    oracle::Scene s;
    s.pois = {{0, 0}};
    s.limits = kHuge;
    CHECK(hill_climb(map_of(s), "sum") == Action::Stop);
    CHECK(oracle::naive_hill_climb(s) == Action::Stop);
}

TEST_CASE("point of interest ahead with neighbors behind on both sides: FRONT") {
    oracle::Scene s;
    s.pois = {{0.35, 0.0}};
    s.neighbors = {{-0.35, 0.35}, {-0.35, -0.35}};
    s.limits = kHuge;
    CHECK(hill_climb(map_of(s), "sum") == Action::Front);
    CHECK(oracle::naive_hill_climb(s) == Action::Front);
}

TEST_CASE("go to point") {
    CHECK(go_to_point({0, 0}, {1.0, 0.2}, 0.0) == Action::Front);
    CHECK(go_to_point({0, 0}, {0, 0}, 0.0) == Action::Stop);
    CHECK(go_to_point({0, 0}, {0, -0.5}, 0.0) == Action::Right);
    CHECK(go_to_point({0, 0}, {0, 0.5}, 0.0) == Action::Left);
    CHECK(go_to_point({0, 0}, {-0.3, 0.1}, 0.0) == Action::Back);
    CHECK(go_to_point({0, 0}, {0.5, 0.5}, 0.0) == Action::Front);
    CHECK(go_to_point({0, 0}, {0.005, -0.004}, 0.006) == Action::Stop);
}

TEST_CASE("go to point never moves diagonally and closes in") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const double step = 0.035;
    for (int trial = 0; trial < 100; ++trial) {
        Position2D p{u(rng), u(rng)};
        const Position2D target{u(rng), u(rng)};
        auto cheb = [&](Position2D q) { return std::max(std::abs(target.x - q.x), std::abs(target.y - q.y)); };
        for (int k = 0; k < 1000 && cheb(p) > step; ++k) {
            Action a = go_to_point(p, target, 0.0);
            CHECK(a != Action::FrontLeft);
            CHECK(a != Action::FrontRight);
            CHECK(a != Action::BackLeft);
            CHECK(a != Action::BackRight);
            auto v = action_to_unit_vector(a);
            Position2D next{p.x + v.dx * step, p.y + v.dy * step};
            // Chebyshev distance never grows; the dominant axis shrinks.
            CHECK(cheb(next) <= cheb(p));
            const double before = std::abs(target.x - p.x) + std::abs(target.y - p.y);
            const double after = std::abs(target.x - next.x) + std::abs(target.y - next.y);
            CHECK(after < before);
            p = next;
        }
        CHECK(cheb(p) <= step);
    }
}

TEST_CASE("remote steering with staleness") {
    InProcessBus bus;
    CHECK(remote_action(bus, "A", 1000, 500) == Action::Stop);
    bus.publish(topics::agent_action("A"), Json{{"action", "FRONT_LEFT"}, {"published_at", 900}});
    CHECK(remote_action(bus, "A", 1000, 500) == Action::FrontLeft);
    CHECK(remote_action(bus, "A", 1400, 500) == Action::FrontLeft);
    CHECK(remote_action(bus, "A", 1500, 500) == Action::Stop);
    CHECK(remote_action(bus, "B", 1000, 500) == Action::Stop);
    bus.publish(topics::agent_action("A"), Json{{"action", "JUMP"}, {"published_at", 1000}});
    CHECK(remote_action(bus, "A", 1000, 500) == Action::Stop);
    bus.publish(topics::agent_action("A"), Json{{"verb", 3}});
    CHECK(remote_action(bus, "A", 1000, 500) == Action::Stop);
    bus.publish(topics::agent_action("A"), "FRONT");
    CHECK(remote_action(bus, "A", 1000, 500) == Action::Stop);
}

namespace {

class BrokenBus final : public Bus {
public:
    std::uint64_t publish(std::string_view, Json) override { throw TransportError("down"); }
    std::optional<Envelope> read(std::string_view) override { throw TransportError("down"); }
    std::vector<Envelope> scan(std::string_view) override { throw TransportError("down"); }
    void raise_stop() override { throw TransportError("down"); }
    bool stop_requested() override { throw TransportError("down"); }
};

}  // namespace

TEST_CASE("remote steering fails safe when the bus is down") {
    BrokenBus bus;
    CHECK(remote_action(bus, "A", 0, 500) == Action::Stop);
}

TEST_CASE("every drone controller kind can be built from config") {
    InProcessBus bus;
    AgentConfig a;
    a.agent_id = "A";
    FieldMap field(84, 0.5);
    Perception p{"A", {0, 0}, &field, 0};

    a.controller.kind = ControllerKind::HillClimbing;
    CHECK(make_controller(a, bus)->predict(p) == Action::Stop);

    a.controller.kind = ControllerKind::GoToPoint;
    a.controller.target = Position2D{1.0, 0.0};
    CHECK(make_controller(a, bus)->predict(p) == Action::Front);
    a.controller.target = Position2D{0.005, 0.0};
    // Default arrival tolerance is half a cell: vicinity / field_size.
    CHECK(make_controller(a, bus)->predict(p) == Action::Stop);

    a.controller.kind = ControllerKind::Remote;
    bus.publish(topics::agent_action("A"), Json{{"action", "LEFT"}, {"published_at", 0}});
    CHECK(make_controller(a, bus)->predict(p) == Action::Left);

    a.controller.kind = ControllerKind::HelloWorld;
    CHECK_THROWS(make_controller(a, bus));
}
