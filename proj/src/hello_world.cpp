#include "fieldswarm/hello_world.hpp"

#include <iostream>

#include <spdlog/spdlog.h>

#include "fieldswarm/loggers.hpp"

namespace fieldswarm {

std::string HelloWorldController::predict() {
    return "[HelloWorldController says hello " + std::to_string(++counter_) + "]";
}

void HelloWorldAgent::step(std::int64_t) {
    ++counter_;
    std::string message =
        "[" + controller_.predict() + " | [HelloWorldAgent says hello " + std::to_string(counter_) + "]]";
    try {
        bus_.publish(topics::agent_message(config_.agent_id), Json{{"message", message}});
    } catch (const BusError& e) {
        spdlog::debug("hello agent {}: {}", config_.agent_id, e.what());
    }
}

void HelloWorldEnvironment::step(std::int64_t) {
    ++counter_;
    std::string combined;
    try {
        for (const auto& env : bus_.scan(topics::kAgentPrefix)) {
            if (topics::agent_id_of(env.key, "message").empty()) continue;
            if (!combined.empty()) combined += " | ";
            combined += env.payload().value("message", std::string());
        }
        if (!combined.empty()) combined += " | ";
        combined += "[HelloWorldEnvironment says hello " + std::to_string(counter_) + "]";
        bus_.publish(topics::kEnvironmentMessage, Json{{"message", combined}});
    } catch (const BusError& e) {
        spdlog::debug("hello environment: {}", e.what());
    }
}

HelloWorldLogger::HelloWorldLogger(LoggerConfig config, Bus& bus, const std::filesystem::path& output)
    : config_(std::move(config)), bus_(bus), out_(output, std::ios::app) {
    if (!out_) throw LogWriteError("cannot open " + output.string());
}

void HelloWorldLogger::step(std::int64_t) {
    ++ticks_;
    std::optional<Envelope> env;
    try {
        env = bus_.read(topics::kEnvironmentMessage);
    } catch (const BusError& e) {
        spdlog::debug("hello logger: {}", e.what());
        return;
    }
    if (!env || env->sequence == last_sequence_) return;
    last_sequence_ = env->sequence;
    std::string line = env->payload().value("message", std::string());
    spdlog::info("{}", line);
    out_ << line << '\n' << std::flush;
    if (!out_) {
        try {
            bus_.raise_stop();
        } catch (const BusError&) {
        }
        throw LogWriteError("hello logger: write failed");
    }
}

void HelloWorldLogger::finish(std::int64_t) { out_.flush(); }

}  // namespace fieldswarm
