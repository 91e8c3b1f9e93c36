#include "fieldswarm/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace fieldswarm {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

ArenaSnapshot take_snapshot(Bus& bus, std::int64_t t_ms) {
    ArenaSnapshot snap;
    snap.t_ms = t_ms;
    // One scan keeps agents and environment from the same instant.
    for (const auto& env : bus.scan("")) {
        if (env.key == topics::kEnvironmentState) {
            try {
                auto state = environment_state_from_json(env.payload());
                snap.limits = state.limits;
                snap.points = std::move(state.modulation_points);
            } catch (const std::exception& e) {
                spdlog::debug("gateway: skipping malformed environment state: {}", e.what());
            }
            continue;
        }
        if (topics::agent_id_of(env.key, "state").empty()) continue;
        try {
            auto state = agent_state_from_json(env.payload());
            snap.agents.push_back({state.agent_id, state.position, state.last_action});
        } catch (const std::exception& e) {
            spdlog::debug("gateway: skipping malformed state at {}: {}", env.key, e.what());
        }
    }
    return snap;
}

Json snapshot_frame(const ArenaSnapshot& snapshot) {
    Json agents = Json::array();
    for (const auto& a : snapshot.agents) {
        agents.push_back({{"agent_id", a.agent_id},
                          {"x", a.position.x},
                          {"y", a.position.y},
                          {"last_action", to_string(a.last_action)}});
    }
    Json points = Json::array();
    for (const auto& p : snapshot.points) points.push_back(to_json(p));
    return Json{{"type", "snapshot"},
                {"t_ms", snapshot.t_ms},
                {"limits", snapshot.limits ? to_json(*snapshot.limits) : Json(nullptr)},
                {"agents", std::move(agents)},
                {"points", std::move(points)}};
}

std::optional<Json> field_frame(Bus& bus, std::string_view agent_id) {
    auto env = bus.read(topics::agent_field(agent_id));
    if (!env) return std::nullopt;
    const Json& p = env->payload();
    if (!p.is_object() || !p.contains("size") || !p.contains("values")) return std::nullopt;
    return Json{{"type", "field"},
                {"t_ms", env->published_at},
                {"agent_id", std::string(agent_id)},
                {"size", p.at("size")},
                {"values", p.at("values")}};
}

namespace {

Json error_frame(std::string message) { return Json{{"type", "error"}, {"message", std::move(message)}}; }

bool valid_agent_id(const Json& v) {
    if (!v.is_string()) return false;
    const auto& s = v.get_ref<const std::string&>();
    return !s.empty() && s.find('/') == std::string::npos && topics::valid("agent/" + s + "/state");
}

}  // namespace

std::optional<Json> handle_inbound_frame(Bus& bus, ClientState& client, const Json& frame, std::int64_t now_ms) {
    if (!frame.is_object()) return error_frame("frame must be a JSON object");
    // A bare {"agent_id","action"} is a steering frame too.
    std::string type = "steer";
    if (frame.contains("type")) {
        if (!frame.at("type").is_string()) return error_frame("\"type\" must be a string");
        type = frame.at("type").get<std::string>();
    }
    if (type == "steer") {
        if (!frame.contains("agent_id") || !valid_agent_id(frame.at("agent_id"))) {
            return error_frame("steer: invalid agent_id");
        }
        if (!frame.contains("action") || !frame.at("action").is_string()) {
            return error_frame("steer: action must be a string");
        }
        auto action = parse_action(frame.at("action").get_ref<const std::string&>());
        if (!action) return error_frame("steer: unknown action " + frame.at("action").get<std::string>());
        const auto id = frame.at("agent_id").get<std::string>();
        try {
            bus.publish(topics::agent_action(id), Json{{"action", to_string(*action)}, {"published_at", now_ms}});
        } catch (const BusError& e) {
            return error_frame(std::string("steer: ") + e.what());
        }
        return std::nullopt;
    }
    if (type == "select") {
        if (!frame.contains("agent_id")) return error_frame("select: missing agent_id");
        const Json& id = frame.at("agent_id");
        if (id.is_null()) {
            client.field_agent.reset();
            return std::nullopt;
        }
        if (!valid_agent_id(id)) return error_frame("select: invalid agent_id");
        client.field_agent = id.get<std::string>();
        return std::nullopt;
    }
    return error_frame("unknown frame type " + type);
}

// ---------------------------------------------------------------------------
// Server

namespace {

std::string mime_type(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    return "application/octet-stream";
}

/// Maps a request target onto static_dir, refusing anything that escapes it.
std::optional<std::filesystem::path> resolve_static(const std::string& root, std::string_view target) {
    if (root.empty()) return std::nullopt;
    auto query = target.find('?');
    if (query != std::string_view::npos) target = target.substr(0, query);
    if (target.empty() || target.front() != '/') return std::nullopt;
    std::filesystem::path rel(std::string(target.substr(1)));
    for (const auto& part : rel) {
        if (part == "..") return std::nullopt;
    }
    std::filesystem::path full = std::filesystem::path(root) / rel;
    std::error_code ec;
    if (std::filesystem::is_directory(full, ec)) full /= "index.html";
    if (!std::filesystem::is_regular_file(full, ec)) return std::nullopt;
    return full;
}

}  // namespace

class WsSession;

struct Gateway::Impl : std::enable_shared_from_this<Gateway::Impl> {
    Impl(std::shared_ptr<Bus> b, GatewayConfig c, std::shared_ptr<RunClock> k)
        : bus(std::move(b)), config(std::move(c)), clock(std::move(k)), acceptor(io), stop_timer(io) {}

    void accept();
    void watch_stop();
    void close_all();
    void register_session(const std::shared_ptr<WsSession>& s);

    std::shared_ptr<Bus> bus;
    GatewayConfig config;
    std::shared_ptr<RunClock> clock;

    asio::io_context io;
    tcp::acceptor acceptor;
    asio::steady_timer stop_timer;
    std::thread worker;
    std::uint16_t bound_port = 0;
    bool closing = false;  // io thread only
    std::vector<std::weak_ptr<WsSession>> sessions;  // io thread only
    std::atomic<std::size_t> clients{0};

    std::once_flag stop_once;
    std::mutex done_mutex;
    std::condition_variable done_cv;
    bool done = false;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, std::shared_ptr<Gateway::Impl> gw)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), gw_(std::move(gw)) {
        client_.field_agent = gw_->config.field_agent;
        const double hz = gw_->config.snapshot_hz > 0 ? gw_->config.snapshot_hz : 10.0;
        period_ = std::chrono::microseconds(static_cast<std::int64_t>(1e6 / hz));
    }

    ~WsSession() {
        if (counted_) --gw_->clients;
    }

    void start(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

    void close() {
        if (closed_) return;
        closed_ = true;
        timer_.cancel();
        if (!accepted_) return;
        ws_.async_close(websocket::close_code::going_away,
                        [self = shared_from_this()](beast::error_code) { self->timer_.cancel(); });
        // A client that never answers the close frame gets cut off.
        timer_.expires_after(std::chrono::milliseconds(500));
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->force_close();
        });
    }

    /// Drops the connection without a close handshake.
    void force_close() {
        closed_ = true;
        timer_.cancel();
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
        beast::get_lowest_layer(ws_).socket().close(ignored);
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) {
            spdlog::debug("gateway: websocket handshake failed: {}", ec.message());
            return;
        }
        accepted_ = true;
        counted_ = true;
        ++gw_->clients;
        if (closed_) {
            closed_ = false;
            close();
            return;
        }
        read();
        next_ = std::chrono::steady_clock::now();
        tick(beast::error_code{});
    }

    void read() {
        ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            closed_ = true;
            timer_.cancel();
            return;
        }
        const std::string text = beast::buffers_to_string(in_.data());
        in_.consume(in_.size());
        Json frame = Json::parse(text, nullptr, false);
        std::optional<Json> reply;
        if (frame.is_discarded()) {
            reply = Json{{"type", "error"}, {"message", "malformed JSON"}};
        } else {
            const auto before = client_.field_agent;
            reply = handle_inbound_frame(*gw_->bus, client_, frame, gw_->clock->now_ms());
            if (client_.field_agent != before) last_field_seq_ = 0;
        }
        if (reply) enqueue(reply->dump());
        read();
    }

    // Snapshot (and field) push at the configured rate.
    void tick(beast::error_code ec) {
        if (ec || closed_) return;
        try {
            if (gw_->bus->stop_requested()) {
                close();
                return;
            }
            enqueue(snapshot_frame(take_snapshot(*gw_->bus, gw_->clock->now_ms())).dump());
            if (client_.field_agent) {
                auto env = gw_->bus->read(topics::agent_field(*client_.field_agent));
                if (env && env->sequence != last_field_seq_) {
                    last_field_seq_ = env->sequence;
                    if (auto f = field_frame(*gw_->bus, *client_.field_agent)) enqueue(f->dump());
                }
            }
        } catch (const BusError& e) {
            spdlog::warn("gateway: bus unavailable: {}", e.what());
        }
        // Fixed cadence: the next deadline does not drift with the work above.
        next_ = std::max(next_ + period_, std::chrono::steady_clock::now());
        timer_.expires_at(next_);
        timer_.async_wait([self = shared_from_this()](beast::error_code e) { self->tick(e); });
    }

    void enqueue(std::string text) {
        // A slow client only ever holds a couple of frames; older snapshots are dropped.
        if (outbox_.size() >= 8) outbox_.erase(outbox_.begin() + 1, outbox_.end());
        outbox_.push_back(std::move(text));
        if (outbox_.size() == 1) write();
    }

    void write() {
        ws_.text(true);
        ws_.async_write(asio::buffer(outbox_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
    }

    void on_write(beast::error_code ec) {
        if (ec) {
            closed_ = true;
            timer_.cancel();
            return;
        }
        outbox_.pop_front();
        if (!outbox_.empty()) write();
    }

    websocket::stream<beast::tcp_stream> ws_;
    asio::steady_timer timer_;
    std::shared_ptr<Gateway::Impl> gw_;
    beast::flat_buffer in_;
    std::deque<std::string> outbox_;
    ClientState client_;
    std::uint64_t last_field_seq_ = 0;
    std::chrono::microseconds period_{100000};
    std::chrono::steady_clock::time_point next_;
    bool accepted_ = false;
    bool counted_ = false;
    bool closed_ = false;
};

namespace {

/// Plain HTTP: either upgrades /ws or serves a static file.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, std::shared_ptr<Gateway::Impl> gw) : stream_(std::move(socket)), gw_(std::move(gw)) {}

    void start() { read(); }

private:
    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) return;
        if (websocket::is_upgrade(req_)) {
            std::string_view target(req_.target().data(), req_.target().size());
            if (target != "/ws" || gw_->closing) {
                respond(http::status::not_found, "text/plain", "not found\n");
                return;
            }
            stream_.expires_never();
            auto ws = std::make_shared<WsSession>(stream_.release_socket(), gw_);
            gw_->register_session(ws);
            ws->start(std::move(req_));
            return;
        }
        if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
            respond(http::status::method_not_allowed, "text/plain", "method not allowed\n");
            return;
        }
        std::string_view target(req_.target().data(), req_.target().size());
        auto path = resolve_static(gw_->config.static_dir, target);
        if (!path) {
            respond(http::status::not_found, "text/plain", "not found\n");
            return;
        }
        std::ifstream in(*path, std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        respond(http::status::ok, mime_type(*path), body.str());
    }

    void respond(http::status status, const std::string& type, std::string body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::server, "fieldswarm");
        res->set(http::field::content_type, type);
        res->keep_alive(false);
        if (req_.method() == http::verb::head) {
            res->content_length(body.size());
        } else {
            res->body() = std::move(body);
            res->prepare_payload();
        }
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    std::shared_ptr<Gateway::Impl> gw_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

}  // namespace

void Gateway::Impl::register_session(const std::shared_ptr<WsSession>& s) {
    sessions.erase(std::remove_if(sessions.begin(), sessions.end(), [](const auto& w) { return w.expired(); }),
                   sessions.end());
    sessions.push_back(s);
}

void Gateway::Impl::accept() {
    acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
        if (ec || self->closing) return;
        std::make_shared<HttpSession>(std::move(socket), self)->start();
        self->accept();
    });
}

void Gateway::Impl::watch_stop() {
    stop_timer.expires_after(std::chrono::milliseconds(100));
    stop_timer.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (ec || self->closing) return;
        bool stop = false;
        try {
            stop = self->bus->stop_requested();
        } catch (const BusError&) {
        }
        if (stop) {
            spdlog::info("gateway: stop flag seen, closing");
            self->close_all();
            return;
        }
        self->watch_stop();
    });
}

void Gateway::Impl::close_all() {
    if (closing) return;
    closing = true;
    beast::error_code ignored;
    acceptor.close(ignored);
    stop_timer.cancel();
    for (auto& w : sessions) {
        if (auto s = w.lock()) s->close();
    }
}

Gateway::Gateway(std::shared_ptr<Bus> bus, GatewayConfig config, std::shared_ptr<RunClock> clock)
    : impl_(std::make_shared<Impl>(std::move(bus), std::move(config), std::move(clock))) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
    auto& im = *impl_;
    try {
        tcp::endpoint ep(asio::ip::make_address(im.config.host), im.config.port);
        im.acceptor.open(ep.protocol());
        im.acceptor.set_option(asio::socket_base::reuse_address(true));
        im.acceptor.bind(ep);
        im.acceptor.listen();
        im.bound_port = im.acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
        throw TransportError("gateway: cannot listen on " + im.config.host + ":" + std::to_string(im.config.port) +
                             ": " + e.what());
    }
    im.accept();
    im.watch_stop();
    spdlog::info("gateway: listening on {}:{}", im.config.host, im.bound_port);
    im.worker = std::thread([impl = impl_] {
        try {
            impl->io.run();
        } catch (const std::exception& e) {
            spdlog::error("gateway: {}", e.what());
        }
        std::lock_guard lock(impl->done_mutex);
        impl->done = true;
        impl->done_cv.notify_all();
    });
}

void Gateway::stop() {
    if (!impl_) return;
    std::call_once(impl_->stop_once, [this] {
        if (!impl_->worker.joinable()) return;
        asio::post(impl_->io, [impl = impl_] { impl->close_all(); });
        {
            // Give clients a moment to see the close frame, then force.
            std::unique_lock lock(impl_->done_mutex);
            impl_->done_cv.wait_for(lock, std::chrono::seconds(2), [this] { return impl_->done; });
        }
        impl_->io.stop();
        impl_->worker.join();
        // Whatever is still open goes now; draining the aborted handlers
        // releases the sessions and their sockets.
        impl_->closing = true;
        beast::error_code ignored;
        impl_->acceptor.close(ignored);
        impl_->stop_timer.cancel();
        for (auto& w : impl_->sessions) {
            if (auto s = w.lock()) s->force_close();
        }
        impl_->sessions.clear();
        impl_->io.restart();
        impl_->io.poll();
    });
}

void Gateway::wait() {
    if (!impl_->worker.joinable()) return;
    std::unique_lock lock(impl_->done_mutex);
    impl_->done_cv.wait(lock, [this] { return impl_->done; });
}

std::uint16_t Gateway::port() const { return impl_->bound_port; }

std::size_t Gateway::client_count() const { return impl_->clients.load(); }

void run_gateway(std::shared_ptr<Bus> bus, const GatewayConfig& config, std::shared_ptr<RunClock> clock) {
    Gateway gw(std::move(bus), config, std::move(clock));
    gw.start();
    gw.wait();
    gw.stop();
}

}  // namespace fieldswarm
