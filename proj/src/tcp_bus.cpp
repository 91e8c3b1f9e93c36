#include "fieldswarm/tcp_bus.hpp"

#include <charconv>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <spdlog/spdlog.h>

namespace fieldswarm {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

constexpr std::size_t kMaxFrameBytes = 64 * 1024 * 1024;
constexpr std::string_view kStoppedMessage = "bus stopped";

Json error_frame(std::string_view message) {
    return Json{{"ok", false}, {"error", message}};
}

std::string require_string(const Json& request, const char* field) {
    auto it = request.find(field);
    if (it == request.end() || !it->is_string()) {
        throw std::invalid_argument(std::string("missing string field \"") + field + "\"");
    }
    return it->get<std::string>();
}

}  // namespace

Json handle_bus_request(Bus& bus, const Json& request) {
    try {
        if (!request.is_object()) return error_frame("request must be a JSON object");
        const std::string op = require_string(request, "op");
        if (op == "set") {
            auto payload = request.find("payload");
            if (payload == request.end()) return error_frame("set requires a payload");
            return Json{{"ok", true}, {"seq", bus.publish(require_string(request, "key"), *payload)}};
        }
        if (op == "get") {
            Json envelopes = Json::array();
            if (auto e = bus.read(require_string(request, "key"))) envelopes.push_back(to_json(*e));
            return Json{{"ok", true}, {"envelopes", std::move(envelopes)}};
        }
        if (op == "scan") {
            std::string prefix = request.contains("prefix") ? require_string(request, "prefix") : std::string();
            Json envelopes = Json::array();
            for (const auto& e : bus.scan(prefix)) envelopes.push_back(to_json(e));
            return Json{{"ok", true}, {"envelopes", std::move(envelopes)}};
        }
        if (op == "stop") {
            bus.raise_stop();
            return Json{{"ok", true}};
        }
        return error_frame("unknown op \"" + op + "\"");
    } catch (const BusStopped&) {
        return error_frame(kStoppedMessage);
    } catch (const std::exception& e) {
        return error_frame(e.what());
    }
}

// ---------------------------------------------------------------------------
// Server

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, std::shared_ptr<Bus> bus, std::function<void(Connection*)> on_close)
        : socket_(std::move(socket)), bus_(std::move(bus)), buffer_(kMaxFrameBytes), on_close_(std::move(on_close)) {}

    void start() { read_next(); }

    void close() {
        boost::system::error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
    }

private:
    void read_next() {
        asio::async_read_until(socket_, buffer_, '\n',
                               [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
                                   self->on_line(ec, n);
                               });
    }

    void on_line(boost::system::error_code ec, std::size_t n) {
        if (ec) {
            finish();
            return;
        }
        std::string line(asio::buffers_begin(buffer_.data()), asio::buffers_begin(buffer_.data()) + n - 1);
        buffer_.consume(n);

        Json response;
        Json request = Json::parse(line, nullptr, false);
        if (request.is_discarded()) {
            response = error_frame("malformed JSON frame");
        } else {
            response = handle_bus_request(*bus_, request);
        }
        bool idle = outbox_.empty();
        outbox_.push_back(response.dump() + "\n");
        if (idle) write_next();
        read_next();
    }

    void write_next() {
        asio::async_write(socket_, asio::buffer(outbox_.front()),
                          [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                              if (ec) {
                                  self->finish();
                                  return;
                              }
                              self->outbox_.pop_front();
                              if (!self->outbox_.empty()) self->write_next();
                          });
    }

    void finish() {
        close();
        if (on_close_) {
            auto cb = std::move(on_close_);
            on_close_ = nullptr;
            cb(this);
        }
    }

    tcp::socket socket_;
    std::shared_ptr<Bus> bus_;
    asio::streambuf buffer_;
    std::deque<std::string> outbox_;
    std::function<void(Connection*)> on_close_;
};

}  // namespace

struct BusServer::Impl {
    std::shared_ptr<Bus> bus;
    std::string host;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::set<std::shared_ptr<Connection>> connections;
    std::thread worker;
    std::once_flag closed;

    void accept_next() {
        acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto conn = std::make_shared<Connection>(std::move(socket), bus, [this](Connection* c) {
                std::erase_if(connections, [c](const auto& p) { return p.get() == c; });
            });
            connections.insert(conn);
            conn->start();
            accept_next();
        });
    }
};

BusServer::BusServer(std::shared_ptr<Bus> backing, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
    impl_->bus = std::move(backing);
    impl_->host = host;
    try {
        tcp::endpoint endpoint(asio::ip::make_address(host), port);
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw TransportError("cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what());
    }
    impl_->accept_next();
    impl_->worker = std::thread([this] { impl_->io.run(); });
    spdlog::debug("bus server listening on {}:{}", host, this->port());
}

BusServer::~BusServer() { close(); }

std::uint16_t BusServer::port() const {
    boost::system::error_code ec;
    auto ep = impl_->acceptor.local_endpoint(ec);
    return ec ? 0 : ep.port();
}

const std::string& BusServer::host() const { return impl_->host; }

void BusServer::close() {
    std::call_once(impl_->closed, [this] {
        asio::post(impl_->io, [this] {
            boost::system::error_code ignored;
            impl_->acceptor.close(ignored);
            auto conns = impl_->connections;
            for (const auto& c : conns) c->close();
        });
        // Pending handlers observe the closed sockets and drain.
        if (impl_->worker.joinable()) impl_->worker.join();
        impl_->connections.clear();
    });
}

// ---------------------------------------------------------------------------
// Client

struct TcpBusClient::Impl {
    asio::io_context io;
    tcp::socket socket{io};
    asio::streambuf buffer{kMaxFrameBytes};
    std::mutex mutex;
};

TcpBusClient::TcpBusClient(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
    try {
        tcp::resolver resolver(impl_->io);
        asio::connect(impl_->socket, resolver.resolve(host, std::to_string(port)));
        impl_->socket.set_option(tcp::no_delay(true));
    } catch (const boost::system::system_error& e) {
        throw TransportError("cannot connect to bus at " + host + ":" + std::to_string(port) + ": " + e.what());
    }
}

TcpBusClient::~TcpBusClient() {
    boost::system::error_code ignored;
    impl_->socket.shutdown(tcp::socket::shutdown_both, ignored);
    impl_->socket.close(ignored);
}

Json TcpBusClient::roundtrip(const Json& request) {
    std::lock_guard lock(impl_->mutex);
    try {
        std::string frame = request.dump() + "\n";
        asio::write(impl_->socket, asio::buffer(frame));
        std::size_t n = asio::read_until(impl_->socket, impl_->buffer, '\n');
        std::string line(asio::buffers_begin(impl_->buffer.data()), asio::buffers_begin(impl_->buffer.data()) + n - 1);
        impl_->buffer.consume(n);
        Json response = Json::parse(line, nullptr, false);
        if (response.is_discarded() || !response.is_object()) throw TransportError("malformed response frame");
        if (!response.value("ok", false)) {
            std::string error = response.value("error", std::string("unknown bus error"));
            if (error == kStoppedMessage) throw BusStopped();
            throw BusError(error);
        }
        return response;
    } catch (const boost::system::system_error& e) {
        throw TransportError(std::string("bus transport failure: ") + e.what());
    }
}

std::uint64_t TcpBusClient::publish(std::string_view key, Json payload) {
    return roundtrip(Json{{"op", "set"}, {"key", key}, {"payload", std::move(payload)}}).at("seq").get<std::uint64_t>();
}

std::optional<Envelope> TcpBusClient::read(std::string_view key) {
    Json response = roundtrip(Json{{"op", "get"}, {"key", key}});
    const Json& envs = response.at("envelopes");
    if (envs.empty()) return std::nullopt;
    return envelope_from_json(envs.at(0));
}

std::vector<Envelope> TcpBusClient::scan(std::string_view prefix) {
    Json response = roundtrip(Json{{"op", "scan"}, {"prefix", prefix}});
    std::vector<Envelope> out;
    for (const auto& e : response.at("envelopes")) out.push_back(envelope_from_json(e));
    return out;
}

void TcpBusClient::raise_stop() { roundtrip(Json{{"op", "stop"}}); }

bool TcpBusClient::stop_requested() {
    auto e = read(topics::kStop);
    return e && e->payload() == Json(true);
}

std::pair<std::string, std::uint16_t> parse_bus_address(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) throw std::invalid_argument("bus address must be host:port");
    const std::string digits = address.substr(colon + 1);
    int port = 0;
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || end != digits.data() + digits.size()) {
        throw std::invalid_argument("bus port must be a number: " + address);
    }
    if (port <= 0 || port > 65535) throw std::invalid_argument("bus port out of range");
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace fieldswarm
