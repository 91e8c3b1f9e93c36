#include <doctest.h>

#include <sys/socket.h>
#include <sys/time.h>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fieldswarm/gateway.hpp"
#include "fieldswarm/orchestrator.hpp"
#include "test_util.hpp"

using namespace fieldswarm;
using namespace std::chrono_literals;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

void set_receive_timeout(tcp::socket& s, int ms) {
    timeval tv{ms / 1000, (ms % 1000) * 1000};
    setsockopt(s.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

class WsClient {
public:
    explicit WsClient(std::uint16_t port) : ws_(io_) {
        ws_.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
        ws_.handshake("127.0.0.1", "/ws");
    }

    /// Next frame, or nothing on timeout/close.
    std::optional<Json> next(std::chrono::milliseconds timeout = 3000ms) {
        if (dead_) return std::nullopt;
        beast::flat_buffer buf;
        std::optional<beast::error_code> result;
        ws_.async_read(buf, [&](beast::error_code ec, std::size_t) { result = ec; });
        io_.restart();
        io_.run_for(timeout);
        if (!result) {
            beast::error_code ignored;
            ws_.next_layer().close(ignored);
            io_.restart();
            io_.run();
        }
        if (!result || *result) {
            dead_ = true;
            return std::nullopt;
        }
        return Json::parse(beast::buffers_to_string(buf.data()));
    }

    std::optional<Json> next_of(const std::string& type, int max_frames = 50) {
        for (int i = 0; i < max_frames; ++i) {
            auto f = next();
            if (!f) return std::nullopt;
            if (f->value("type", "") == type) return f;
        }
        return std::nullopt;
    }

    void send(const Json& j) { ws_.write(asio::buffer(j.dump())); }
    void send_text(const std::string& s) { ws_.write(asio::buffer(s)); }

private:
    asio::io_context io_;
    websocket::stream<tcp::socket> ws_;
    bool dead_ = false;
};

std::pair<int, std::string> http_get(std::uint16_t port, const std::string& target) {
    asio::io_context io;
    tcp::socket s(io);
    s.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
    set_receive_timeout(s, 3000);
    http::request<http::empty_body> req(http::verb::get, target, 11);
    req.set(http::field::host, "127.0.0.1");
    http::write(s, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(s, buf, res);
    return {res.result_int(), res.body()};
}

/// Counts writes so a test can assert the gateway stays read-only.
class CountingBus final : public Bus {
public:
    std::uint64_t publish(std::string_view key, Json payload) override {
        ++publishes;
        return inner.publish(key, std::move(payload));
    }
    std::optional<Envelope> read(std::string_view key) override { return inner.read(key); }
    std::vector<Envelope> scan(std::string_view prefix) override { return inner.scan(prefix); }
    void raise_stop() override { inner.raise_stop(); }
    bool stop_requested() override { return inner.stop_requested(); }

    InProcessBus inner;
    std::atomic<int> publishes{0};
};

void seed_arena(Bus& bus) {
    bus.publish(topics::kEnvironmentState,
                to_json(EnvironmentState{{-2.5, 1.5, -1.0, 2.0}, {{0, 0}, {-1, 1}}, 0, 1}));
    bus.publish(topics::agent_state("A"), to_json(AgentState{"A", {0.1, 0.2}, Action::Left, 0, 1}));
    bus.publish(topics::agent_state("B"), to_json(AgentState{"B", {-0.3, 0.4}, Action::Stop, 0, 1}));
    bus.publish(topics::agent_field("A"), Json{{"ignored", true}});  // not a state key
}

GatewayConfig test_config(double hz = 20.0) {
    GatewayConfig g;
    g.port = 0;
    g.snapshot_hz = hz;
    return g;
}

}  // namespace

TEST_CASE("snapshot frames carry agents, points and limits") {
    InProcessBus bus;
    auto empty = snapshot_frame(take_snapshot(bus, 5));
    CHECK(empty.at("limits").is_null());
    CHECK(empty.at("agents").empty());

    seed_arena(bus);
    auto f = snapshot_frame(take_snapshot(bus, 42));
    CHECK(f.at("type") == "snapshot");
    CHECK(f.at("t_ms") == 42);
    CHECK(f.at("limits") == Json{{"x_min", -2.5}, {"x_max", 1.5}, {"y_min", -1.0}, {"y_max", 2.0}});
    REQUIRE(f.at("agents").size() == 2);
    CHECK(f.at("agents")[0] == Json{{"agent_id", "A"}, {"x", 0.1}, {"y", 0.2}, {"last_action", "LEFT"}});
    CHECK(f.at("points") == Json::parse("[[0.0,0.0],[-1.0,1.0]]"));
}

TEST_CASE("inbound frames steer, select, or come back as errors") {
    InProcessBus bus;
    ClientState client;
    CHECK_FALSE(handle_inbound_frame(bus, client, {{"type", "steer"}, {"agent_id", "A"}, {"action", "LEFT"}}, 120));
    auto e = bus.read(topics::agent_action("A"));
    REQUIRE(e.has_value());
    CHECK(e->payload() == Json{{"action", "LEFT"}, {"published_at", 120}});

    CHECK_FALSE(handle_inbound_frame(bus, client, {{"agent_id", "B"}, {"action", "FRONT_LEFT"}}, 130));
    CHECK(bus.read(topics::agent_action("B"))->payload().at("action") == "FRONT_LEFT");

    for (const Json& bad : {Json{{"agent_id", "A"}, {"action", "JUMP"}}, Json{{"agent_id", "A"}, {"action", "left"}},
                            Json{{"agent_id", "A/x"}, {"action", "LEFT"}}, Json{{"agent_id", ""}, {"action", "LEFT"}},
                            Json{{"agent_id", "A"}}, Json{{"type", "dance"}}, Json{{"type", 3}},
                            Json::array({1, 2}), Json{{"type", "select"}, {"agent_id", 4}}}) {
        auto reply = handle_inbound_frame(bus, client, bad, 0);
        REQUIRE(reply.has_value());
        CHECK(reply->at("type") == "error");
        CHECK(reply->at("message").is_string());
    }
    CHECK(bus.read(topics::agent_action("A"))->sequence == 1);

    CHECK_FALSE(handle_inbound_frame(bus, client, {{"type", "select"}, {"agent_id", "C"}}, 0));
    CHECK(client.field_agent == "C");
    CHECK_FALSE(handle_inbound_frame(bus, client, {{"type", "select"}, {"agent_id", nullptr}}, 0));
    CHECK_FALSE(client.field_agent.has_value());

    bus.raise_stop();
    auto stopped = handle_inbound_frame(bus, client, {{"agent_id", "A"}, {"action", "LEFT"}}, 0);
    REQUIRE(stopped.has_value());
    CHECK(stopped->at("type") == "error");
}

TEST_CASE("websocket clients get snapshots, steer agents and stream fields") {
    auto bus = std::make_shared<InProcessBus>();
    seed_arena(*bus);
    auto clock = RunClock::wall_from_now();
    Gateway gw(bus, test_config(), clock);
    gw.start();
    REQUIRE(gw.port() != 0);

    WsClient c(gw.port());
    auto snap = c.next();
    REQUIRE(snap.has_value());
    CHECK(snap->at("type") == "snapshot");
    CHECK(snap->at("agents").size() == 2);
    CHECK(gw.client_count() == 1);

    c.send({{"type", "steer"}, {"agent_id", "A"}, {"action", "BACK"}});
    c.send({{"agent_id", "B"}, {"action", "RIGHT"}});
    std::optional<Envelope> steer;
    for (int i = 0; i < 100; ++i) {
        steer = bus->read(topics::agent_action("B"));
        if (steer) break;
        std::this_thread::sleep_for(10ms);
    }
    REQUIRE(steer.has_value());
    CHECK(steer->payload().at("action") == "RIGHT");
    CHECK(bus->read(topics::agent_action("A"))->payload().at("action") == "BACK");

    c.send({{"agent_id", "A"}, {"action", "UP"}});
    auto err = c.next_of("error");
    REQUIRE(err.has_value());
    c.send_text("{this is not json");
    CHECK(c.next_of("error").has_value());
    CHECK(c.next_of("snapshot").has_value());  // still connected

    FieldMap f(4, 0.5, 0.25);
    bus->publish(topics::agent_field("A"), to_json(f));
    c.send({{"type", "select"}, {"agent_id", "A"}});
    auto field = c.next_of("field");
    REQUIRE(field.has_value());
    CHECK(field->at("agent_id") == "A");
    CHECK(field->at("size") == 4);
    CHECK(field->at("values").size() == 16);
    CHECK(field->at("t_ms") == bus->read(topics::agent_field("A"))->published_at);
    // Same map is not resent; a new one is.
    for (int i = 0; i < 5; ++i) CHECK(c.next()->at("type") == "snapshot");
    bus->publish(topics::agent_field("A"), to_json(FieldMap(4, 0.5, -1.0)));
    auto second = c.next_of("field");
    REQUIRE(second.has_value());
    CHECK(second->at("values")[0] == -1.0);

    gw.stop();
    CHECK_FALSE(c.next_of("snapshot", 100).has_value());
}

TEST_CASE("snapshot cadence follows the configured rate") {
    auto bus = std::make_shared<InProcessBus>();
    seed_arena(*bus);
    Gateway gw(bus, test_config(20.0), RunClock::wall_from_now());
    gw.start();
    WsClient c(gw.port());
    REQUIRE(c.next().has_value());
    const auto t0 = std::chrono::steady_clock::now();
    const int n = 20;
    for (int i = 0; i < n; ++i) REQUIRE(c.next().has_value());
    const double mean_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / n;
    CHECK(mean_ms > 50.0 * 0.8);
    CHECK(mean_ms < 50.0 * 1.2);
    gw.stop();
}

TEST_CASE("an idle gateway never writes to the bus") {
    auto bus = std::make_shared<CountingBus>();
    seed_arena(*bus);
    bus->publishes = 0;
    Gateway gw(bus, test_config(50.0), RunClock::wall_from_now());
    gw.start();
    WsClient c(gw.port());
    for (int i = 0; i < 10; ++i) REQUIRE(c.next().has_value());
    c.send({{"type", "select"}, {"agent_id", "A"}});
    for (int i = 0; i < 5; ++i) REQUIRE(c.next().has_value());
    CHECK(bus->publishes == 0);
    c.send({{"agent_id", "A"}, {"action", "STOP"}});
    for (int i = 0; i < 100 && bus->publishes == 0; ++i) std::this_thread::sleep_for(5ms);
    CHECK(bus->publishes == 1);
    CHECK(bus->scan("control/agent/").size() == 1);
    gw.stop();
}

TEST_CASE("static files are served beside the websocket route") {
    testutil::TempDir dir("static");
    testutil::write_file(dir.path() / "index.html", "<html>panel</html>");
    std::filesystem::create_directories(dir.path() / "js");
    testutil::write_file(dir.path() / "js" / "app.js", "console.log(1);");
    auto bus = std::make_shared<InProcessBus>();
    auto cfg = test_config();
    cfg.static_dir = dir.path().string();
    Gateway gw(bus, cfg, RunClock::wall_from_now());
    gw.start();

    auto [code, body] = http_get(gw.port(), "/");
    CHECK(code == 200);
    CHECK(body == "<html>panel</html>");
    std::tie(code, body) = http_get(gw.port(), "/js/app.js?v=2");
    CHECK(code == 200);
    CHECK(body == "console.log(1);");
    CHECK(http_get(gw.port(), "/missing.css").first == 404);
    CHECK(http_get(gw.port(), "/../etc/passwd").first == 404);
    CHECK(http_get(gw.port(), "/ws").first == 404);  // plain GET, no upgrade
    gw.stop();
}

TEST_CASE("the gateway shuts itself down once stop is raised") {
    auto bus = std::make_shared<InProcessBus>();
    Gateway gw(bus, test_config(), RunClock::wall_from_now());
    gw.start();
    WsClient c(gw.port());
    REQUIRE(c.next().has_value());
    const auto t0 = std::chrono::steady_clock::now();
    bus->raise_stop();
    gw.wait();
    CHECK(std::chrono::steady_clock::now() - t0 < 1000ms);
    CHECK_FALSE(c.next_of("snapshot", 100).has_value());
    gw.stop();
    gw.stop();
}

TEST_CASE("a taken gateway port is a transport error") {
    auto bus = std::make_shared<InProcessBus>();
    Gateway first(bus, test_config(), RunClock::wall_from_now());
    first.start();
    auto cfg = test_config();
    cfg.port = first.port();
    Gateway second(bus, cfg, RunClock::wall_from_now());
    CHECK_THROWS_AS(second.start(), TransportError);
    first.stop();
}

TEST_CASE("a launched circle run is visible through the gateway") {
    testutil::TempDir dir("gw_circle");
    auto cfg = load_config(testutil::config_path("circle_around_center.json"));
    cfg.gateway = test_config();
    RunOptions o;
    o.output_dir = dir.path();
    o.run_id = "g";
    auto run = launch(cfg, o);
    REQUIRE(run.gateway_port() != 0);
    WsClient c(run.gateway_port());
    std::this_thread::sleep_for(300ms);
    std::optional<Json> snap;
    for (int i = 0; i < 20; ++i) {
        snap = c.next_of("snapshot");
        REQUIRE(snap.has_value());
        if (snap->at("agents").size() == 5) break;
    }
    CHECK(snap->at("agents").size() == 5);
    CHECK(snap->at("points").size() == 5);
    CHECK(limits_from_json(snap->at("limits")) == cfg.environment->limits);
    auto report = shutdown(run, 2000ms);
    CHECK(report.all_clean());
    CHECK(report.children.back().name == "gateway");
}
