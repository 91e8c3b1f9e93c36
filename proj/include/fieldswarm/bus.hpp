#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fieldswarm/messages.hpp"

namespace fieldswarm {

namespace topics {

inline constexpr std::string_view kStop = "control/stop";
inline constexpr std::string_view kEnvironmentState = "env/main/state";
inline constexpr std::string_view kEnvironmentMessage = "env/main/message";
inline constexpr std::string_view kAgentPrefix = "agent/";

inline std::string agent_state(std::string_view id) { return "agent/" + std::string(id) + "/state"; }
inline std::string agent_field(std::string_view id) { return "agent/" + std::string(id) + "/field"; }
inline std::string agent_message(std::string_view id) { return "agent/" + std::string(id) + "/message"; }
inline std::string agent_exit(std::string_view id) { return "agent/" + std::string(id) + "/exit"; }
inline std::string agent_action(std::string_view id) { return "control/agent/" + std::string(id) + "/action"; }

/// "<namespace>/<id>/<facet>"-style key: non-empty segments, no whitespace.
bool valid(std::string_view key);

/// The agent id of an "agent/<id>/<facet>" key, empty when the key has a different shape.
std::string_view agent_id_of(std::string_view key, std::string_view facet);

}  // namespace topics

class BusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Publish attempted after the stop flag was raised.
class BusStopped : public BusError {
public:
    BusStopped() : BusError("bus stopped") {}
};

/// Network or protocol failure on a remote transport. Callers may retry.
class TransportError : public BusError {
public:
    using BusError::BusError;
};

/// Latest retained value of one key.
struct Envelope {
    std::string key;
    std::shared_ptr<const Json> payload_ptr;
    std::uint64_t sequence = 0;
    std::int64_t published_at = 0;

    [[nodiscard]] const Json& payload() const { return *payload_ptr; }

    friend bool operator==(const Envelope& a, const Envelope& b) {
        return a.key == b.key && a.sequence == b.sequence && a.published_at == b.published_at &&
               *a.payload_ptr == *b.payload_ptr;
    }
};

Json to_json(const Envelope& e);
Envelope envelope_from_json(const Json& j);

/// Topic-keyed, last-value-retained store. Every implementation is safe for
/// concurrent use and keeps per-key sequence numbers strictly increasing.
class Bus {
public:
    virtual ~Bus() = default;

    /// Returns the per-key sequence number assigned to this payload.
    virtual std::uint64_t publish(std::string_view key, Json payload) = 0;
    virtual std::optional<Envelope> read(std::string_view key) = 0;
    /// Latest envelope of every key starting with prefix, ordered by key.
    virtual std::vector<Envelope> scan(std::string_view prefix) = 0;
    /// Sticky: once raised, stays raised for the lifetime of the bus.
    virtual void raise_stop() = 0;
    virtual bool stop_requested() = 0;
};

using BusClock = std::function<std::int64_t()>;

/// In-memory bus. Also the backing store behind the TCP server.
class InProcessBus final : public Bus {
public:
    using ChangeListener = std::function<void(const Envelope&)>;

    /// Without a clock, published_at is milliseconds since construction.
    explicit InProcessBus(BusClock clock = {});

    std::uint64_t publish(std::string_view key, Json payload) override;
    std::optional<Envelope> read(std::string_view key) override;
    std::vector<Envelope> scan(std::string_view prefix) override;
    void raise_stop() override;
    bool stop_requested() override;

    /// Invoked after every accepted publish, outside the store lock.
    void set_change_listener(ChangeListener listener);

private:
    std::uint64_t store(std::string_view key, Json payload, bool honor_stop);

    BusClock clock_;
    std::mutex mutex_;
    std::map<std::string, Envelope, std::less<>> entries_;
    bool stopped_ = false;
    ChangeListener listener_;
};

}  // namespace fieldswarm
