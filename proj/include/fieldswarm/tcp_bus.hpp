#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fieldswarm/bus.hpp"

namespace fieldswarm {

/// Serves a bus over TCP using newline-delimited JSON frames:
///   request  {"op":"set"|"get"|"scan"|"stop", "key"?, "prefix"?, "payload"?}
///   response {"ok":bool, "seq"?, "envelopes"?, "error"?}
/// One response per request, in request order, so clients may pipeline.
/// A "get" of "control/stop" reports the sticky stop flag like any other key.
class BusServer {
public:
    /// Binds immediately; throws TransportError if the address is unavailable.
    /// Port 0 picks an ephemeral port.
    BusServer(std::shared_ptr<Bus> backing, const std::string& host, std::uint16_t port);
    ~BusServer();

    BusServer(const BusServer&) = delete;
    BusServer& operator=(const BusServer&) = delete;

    [[nodiscard]] std::uint16_t port() const;
    [[nodiscard]] const std::string& host() const;

    /// Closes the listener and every open connection. Idempotent.
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Handles one decoded request against a bus and produces the response frame.
/// Exposed so the protocol can be exercised without sockets.
Json handle_bus_request(Bus& bus, const Json& request);

/// Blocking client for BusServer. Requests are serialized over one connection.
class TcpBusClient final : public Bus {
public:
    /// Connects immediately; throws TransportError on failure.
    TcpBusClient(const std::string& host, std::uint16_t port);
    ~TcpBusClient() override;

    std::uint64_t publish(std::string_view key, Json payload) override;
    std::optional<Envelope> read(std::string_view key) override;
    std::vector<Envelope> scan(std::string_view prefix) override;
    void raise_stop() override;
    bool stop_requested() override;

private:
    Json roundtrip(const Json& request);

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Parses "host:port".
std::pair<std::string, std::uint16_t> parse_bus_address(const std::string& address);

}  // namespace fieldswarm
