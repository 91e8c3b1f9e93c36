#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "bus_script.hpp"
#include "fieldswarm/bus.hpp"
#include "fieldswarm/tcp_bus.hpp"

using namespace fieldswarm;

namespace {

/// Runs the same checks against the in-process bus and a TCP client.
struct Transports {
    std::shared_ptr<InProcessBus> local = std::make_shared<InProcessBus>();
    std::shared_ptr<InProcessBus> backing = std::make_shared<InProcessBus>();
    BusServer server{backing, "127.0.0.1", 0};
    TcpBusClient remote{"127.0.0.1", server.port()};

    std::vector<Bus*> all() { return {local.get(), &remote}; }
};

}  // namespace

TEST_CASE("topic keys") {
    CHECK(topics::valid("agent/A/state"));
    CHECK(topics::valid("control/agent/A/action"));
    CHECK_FALSE(topics::valid(""));
    CHECK_FALSE(topics::valid("agent/A state"));
    CHECK_FALSE(topics::valid("agent//state"));
    CHECK_FALSE(topics::valid("/agent"));
    CHECK_FALSE(topics::valid("agent/"));
    CHECK(topics::agent_state("A") == "agent/A/state");
    CHECK(topics::agent_action("A") == "control/agent/A/action");
    CHECK(topics::agent_id_of("agent/A/state", "state") == "A");
    CHECK(topics::agent_id_of("agent/A/field", "state").empty());
    CHECK(topics::agent_id_of("agent/A/B/state", "state").empty());
    CHECK(topics::agent_id_of("env/main/state", "state").empty());
}

TEST_CASE("bus semantics hold on both transports") {
    Transports t;
    for (Bus* bus : t.all()) {
        CAPTURE(bus == t.local.get() ? "in-process" : "tcp");

        CHECK_FALSE(bus->read("agent/A/state").has_value());
        CHECK_FALSE(bus->stop_requested());

        CHECK(bus->publish("agent/A/state", Json{{"x", 1}}) == 1);
        auto e = bus->read("agent/A/state");
        REQUIRE(e.has_value());
        CHECK(e->payload() == Json{{"x", 1}});
        CHECK(e->sequence == 1);

        CHECK(bus->publish("agent/A/state", Json{{"x", 2}}) == 2);
        CHECK(bus->read("agent/A/state")->payload() == Json{{"x", 2}});

        for (int i = 3; i <= 7; ++i) bus->publish("agent/A/state", Json{{"x", i}});
        CHECK(bus->read("agent/A/state")->sequence == 7);

        bus->publish("agent/B/state", Json{{"x", 0}});
        bus->publish("env/main/state", Json::object());
        auto agents = bus->scan("agent/");
        REQUIRE(agents.size() == 2);
        CHECK(agents[0].key == "agent/A/state");
        CHECK(agents[1].key == "agent/B/state");
        CHECK(bus->scan("zzz/").empty());
        CHECK(bus->scan("").size() == 3);

        CHECK_THROWS_AS(bus->publish("bad key", 1), BusError);
        CHECK_THROWS_AS(bus->publish("control/stop", true), BusError);

        bus->raise_stop();
        CHECK(bus->stop_requested());
        bus->raise_stop();
        CHECK(bus->stop_requested());
        CHECK_THROWS_AS(bus->publish("agent/A/state", 1), BusStopped);
        // Reads keep working after stop.
        CHECK(bus->read("agent/A/state")->sequence == 7);
    }
}

TEST_CASE("scan equals key-by-key reads") {
    InProcessBus bus;
    const std::vector<std::string> keys = {"agent/A/state", "agent/A/field", "agent/B/state", "agent/BC/state",
                                           "env/main/state", "control/agent/A/action"};
    for (std::size_t i = 0; i < keys.size(); ++i) bus.publish(keys[i], static_cast<int>(i));
    for (std::string prefix : {"", "agent/", "agent/A", "agent/B", "env/", "control/", "q"}) {
        std::vector<Envelope> expected;
        std::set<std::string> sorted(keys.begin(), keys.end());
        for (const auto& k : sorted) {
            if (k.starts_with(prefix)) expected.push_back(*bus.read(k));
        }
        CHECK(bus.scan(prefix) == expected);
    }
}

TEST_CASE("concurrent publishers keep per-key sequences increasing") {
    InProcessBus bus;
    constexpr int kThreads = 4;
    constexpr int kEach = 500;
    std::atomic<bool> done{false};
    std::atomic<bool> monotone{true};
    std::thread reader([&] {
        std::uint64_t last = 0;
        while (!done) {
            if (auto e = bus.read("shared/k/v")) {
                if (e->sequence < last) monotone = false;
                last = e->sequence;
            }
        }
    });
    std::vector<std::thread> writers;
    for (int t = 0; t < kThreads; ++t) {
        writers.emplace_back([&, t] {
            for (int i = 0; i < kEach; ++i) bus.publish("shared/k/v", Json{{"t", t}, {"i", i}});
        });
    }
    for (auto& w : writers) w.join();
    done = true;
    reader.join();
    CHECK(monotone);
    auto last = bus.read("shared/k/v");
    REQUIRE(last.has_value());
    CHECK(last->sequence == kThreads * kEach);
}

TEST_CASE("concurrent TCP clients share one bus") {
    auto backing = std::make_shared<InProcessBus>();
    BusServer server(backing, "127.0.0.1", 0);
    std::vector<std::thread> clients;
    for (int t = 0; t < 3; ++t) {
        clients.emplace_back([&, t] {
            TcpBusClient c("127.0.0.1", server.port());
            for (int i = 0; i < 100; ++i) c.publish("agent/" + std::to_string(t) + "/state", i);
        });
    }
    for (auto& c : clients) c.join();
    CHECK(backing->scan("agent/").size() == 3);
    for (const auto& e : backing->scan("agent/")) CHECK(e.sequence == 100);
}

TEST_CASE("wire protocol handles malformed requests") {
    InProcessBus bus;
    CHECK(handle_bus_request(bus, Json::array())["ok"] == false);
    CHECK(handle_bus_request(bus, Json{{"op", "teleport"}})["ok"] == false);
    CHECK(handle_bus_request(bus, Json{{"op", "set"}, {"key", "a/b/c"}})["ok"] == false);
    auto r = handle_bus_request(bus, Json{{"op", "set"}, {"key", "a/b/c"}, {"payload", {{"v", 1}}}});
    CHECK(r["ok"] == true);
    CHECK(r["seq"] == 1);
    auto g = handle_bus_request(bus, Json{{"op", "get"}, {"key", "a/b/c"}});
    CHECK(g["ok"] == true);
    REQUIRE(g["envelopes"].size() == 1);
    CHECK(g["envelopes"][0]["payload"]["v"] == 1);
    CHECK(handle_bus_request(bus, Json{{"op", "get"}, {"key", "never/set/key"}})["envelopes"].empty());
    CHECK(handle_bus_request(bus, Json{{"op", "stop"}})["ok"] == true);
    CHECK(bus.stop_requested());
    CHECK(handle_bus_request(bus, Json{{"op", "set"}, {"key", "a/b/c"}, {"payload", 1}})["error"] == "bus stopped");
}

TEST_CASE("client reports transport errors") {
    std::uint16_t port = 0;
    {
        auto backing = std::make_shared<InProcessBus>();
        BusServer probe(backing, "127.0.0.1", 0);
        port = probe.port();
    }
    CHECK_THROWS_AS(TcpBusClient("127.0.0.1", port), TransportError);

    auto backing = std::make_shared<InProcessBus>();
    auto server = std::make_unique<BusServer>(backing, "127.0.0.1", 0);
    TcpBusClient client("127.0.0.1", server->port());
    client.publish("a/b/c", 1);
    server->close();
    server->close();
    CHECK_THROWS_AS(client.read("a/b/c"), TransportError);
}

TEST_CASE("server refuses a taken port") {
    auto backing = std::make_shared<InProcessBus>();
    BusServer first(backing, "127.0.0.1", 0);
    CHECK_THROWS_AS(BusServer(backing, "127.0.0.1", first.port()), TransportError);
}

TEST_CASE("bus address parsing") {
    auto [h, p] = parse_bus_address("127.0.0.1:7000");
    CHECK(h == "127.0.0.1");
    CHECK(p == 7000);
    CHECK_THROWS(parse_bus_address("localhost"));
    CHECK_THROWS(parse_bus_address("host:notaport"));
    CHECK_THROWS(parse_bus_address("host:70000"));
}

TEST_CASE("randomized scripts observe the same traces on both transports") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        std::atomic<std::int64_t> t_local{0}, t_remote{0};
        InProcessBus local([&] { return t_local.load(); });
        auto backing = std::make_shared<InProcessBus>([&] { return t_remote.load(); });
        BusServer server(backing, "127.0.0.1", 0);
        TcpBusClient remote("127.0.0.1", server.port());

        auto script = busscript::random_script(seed, 60);
        auto a = busscript::run_script(local, t_local, script);
        auto b = busscript::run_script(remote, t_remote, script);
        CAPTURE(seed);
        CHECK(a == b);
    }
}
