#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "fieldswarm/app_process.hpp"
#include "fieldswarm/config.hpp"

namespace fieldswarm {

// Minimal wiring example: the controller says hello, the agent appends its
// own hello and publishes, the environment collects every agent message and
// appends its hello, the logger prints and stores what the environment wrote.

class HelloWorldController {
public:
    /// "[HelloWorldController says hello N]", N counting from 1.
    std::string predict();

private:
    std::uint64_t counter_ = 0;
};

class HelloWorldAgent final : public AppProcess {
public:
    HelloWorldAgent(AgentConfig config, Bus& bus) : config_(std::move(config)), bus_(bus) {}

    [[nodiscard]] std::string name() const override { return "agent/" + config_.agent_id; }
    [[nodiscard]] std::int64_t delay_ms() const override { return config_.delay_ms; }
    /// Publishes "[<controller hello> | [HelloWorldAgent says hello N]]" to agent/{id}/message.
    void step(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return counter_; }

private:
    AgentConfig config_;
    Bus& bus_;
    HelloWorldController controller_;
    std::uint64_t counter_ = 0;
};

class HelloWorldEnvironment final : public AppProcess {
public:
    HelloWorldEnvironment(EnvironmentConfig config, Bus& bus) : config_(std::move(config)), bus_(bus) {}

    [[nodiscard]] std::string name() const override { return "environment/main"; }
    [[nodiscard]] std::int64_t delay_ms() const override { return config_.delay_ms; }
    /// Joins every agent message with " | ", appends
    /// " | [HelloWorldEnvironment says hello N]" and publishes to env/main/message.
    void step(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return counter_; }

private:
    EnvironmentConfig config_;
    Bus& bus_;
    std::uint64_t counter_ = 0;
};

class HelloWorldLogger final : public AppProcess {
public:
    HelloWorldLogger(LoggerConfig config, Bus& bus, const std::filesystem::path& output);

    [[nodiscard]] std::string name() const override { return "logger/hello_world"; }
    [[nodiscard]] std::int64_t delay_ms() const override { return config_.delay_ms; }
    /// Writes each new environment message as one line.
    void step(std::int64_t now_ms) override;
    void finish(std::int64_t now_ms) override;
    [[nodiscard]] std::uint64_t ticks() const override { return ticks_; }

private:
    LoggerConfig config_;
    Bus& bus_;
    std::ofstream out_;
    std::uint64_t last_sequence_ = 0;
    std::uint64_t ticks_ = 0;
};

}  // namespace fieldswarm
