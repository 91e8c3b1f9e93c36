#include "fieldswarm/bus.hpp"

#include <cctype>
#include <chrono>

namespace fieldswarm {

namespace topics {

bool valid(std::string_view key) {
    if (key.empty() || key.front() == '/' || key.back() == '/') return false;
    char prev = '\0';
    for (char c : key) {
        if (std::isspace(static_cast<unsigned char>(c)) || std::iscntrl(static_cast<unsigned char>(c))) return false;
        if (c == '/' && prev == '/') return false;
        prev = c;
    }
    return true;
}

std::string_view agent_id_of(std::string_view key, std::string_view facet) {
    if (!key.starts_with(kAgentPrefix)) return {};
    key.remove_prefix(kAgentPrefix.size());
    auto slash = key.find('/');
    if (slash == std::string_view::npos || slash == 0) return {};
    if (key.substr(slash + 1) != facet) return {};
    return key.substr(0, slash);
}

}  // namespace topics

Json to_json(const Envelope& e) {
    return Json{{"key", e.key}, {"payload", e.payload()}, {"seq", e.sequence}, {"published_at", e.published_at}};
}

Envelope envelope_from_json(const Json& j) {
    return Envelope{j.at("key").get<std::string>(), std::make_shared<const Json>(j.at("payload")),
                    j.at("seq").get<std::uint64_t>(), j.at("published_at").get<std::int64_t>()};
}

InProcessBus::InProcessBus(BusClock clock) : clock_(std::move(clock)) {
    if (!clock_) {
        clock_ = [start = std::chrono::steady_clock::now()] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                .count();
        };
    }
}

std::uint64_t InProcessBus::store(std::string_view key, Json payload, bool honor_stop) {
    Envelope snapshot;
    ChangeListener listener;
    {
        std::lock_guard lock(mutex_);
        if (honor_stop && stopped_) throw BusStopped();
        auto it = entries_.find(key);
        std::uint64_t seq = it == entries_.end() ? 1 : it->second.sequence + 1;
        Envelope env{std::string(key), std::make_shared<const Json>(std::move(payload)), seq, clock_()};
        if (it == entries_.end()) {
            std::string k = env.key;
            it = entries_.emplace(std::move(k), std::move(env)).first;
        } else {
            it->second = std::move(env);
        }
        snapshot = it->second;
        listener = listener_;
    }
    if (listener) listener(snapshot);
    return snapshot.sequence;
}

std::uint64_t InProcessBus::publish(std::string_view key, Json payload) {
    if (!topics::valid(key)) throw BusError("invalid topic key \"" + std::string(key) + "\"");
    if (key == topics::kStop) throw BusError("\"control/stop\" is reserved; use raise_stop");
    return store(key, std::move(payload), true);
}

std::optional<Envelope> InProcessBus::read(std::string_view key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<Envelope> InProcessBus::scan(std::string_view prefix) {
    std::lock_guard lock(mutex_);
    std::vector<Envelope> out;
    for (auto it = entries_.lower_bound(prefix); it != entries_.end() && it->first.starts_with(prefix); ++it) {
        out.push_back(it->second);
    }
    return out;
}

void InProcessBus::raise_stop() {
    {
        std::lock_guard lock(mutex_);
        if (stopped_) return;
        stopped_ = true;
    }
    store(topics::kStop, Json(true), false);
}

bool InProcessBus::stop_requested() {
    std::lock_guard lock(mutex_);
    return stopped_;
}

void InProcessBus::set_change_listener(ChangeListener listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

}  // namespace fieldswarm
