#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fieldswarm/bus.hpp"

namespace fieldswarm {

/// Milliseconds since run start. Either follows the wall clock from a shared
/// epoch or is advanced explicitly by the simulated-clock scheduler.
class RunClock {
public:
    /// Wall clock relative to `epoch_ms` (milliseconds since the Unix epoch).
    static std::shared_ptr<RunClock> wall(std::int64_t epoch_ms);
    static std::shared_ptr<RunClock> wall_from_now();
    static std::shared_ptr<RunClock> simulated();

    [[nodiscard]] std::int64_t now_ms() const;
    [[nodiscard]] bool is_simulated() const { return simulated_; }
    [[nodiscard]] std::int64_t epoch_ms() const { return epoch_ms_; }

    /// Simulated clocks only.
    void advance_to(std::int64_t t_ms);

    /// Adapter for InProcessBus timestamps; shares ownership of the clock.
    static BusClock bus_clock(std::shared_ptr<const RunClock> clock);

private:
    RunClock(bool simulated, std::int64_t epoch_ms) : simulated_(simulated), epoch_ms_(epoch_ms) {}

    bool simulated_;
    std::int64_t epoch_ms_;
    std::atomic<std::int64_t> sim_now_{0};
};

std::int64_t unix_now_ms();

/// An independently scheduled unit of work with its own loop delay.
class AppProcess {
public:
    virtual ~AppProcess() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::int64_t delay_ms() const = 0;
    /// One loop iteration at run time `now_ms`.
    virtual void step(std::int64_t now_ms) = 0;
    /// Called once after the last iteration.
    virtual void finish(std::int64_t /*now_ms*/) {}
    [[nodiscard]] virtual std::uint64_t ticks() const = 0;
};

/// Free-running loop: steps every delay_ms on the wall clock until the bus
/// stop flag is raised. Checks the flag before every iteration and sleeps in
/// short slices so it exits promptly. Returns the number of iterations.
std::uint64_t run_loop(AppProcess& process, Bus& bus, const RunClock& clock, bool skip_first_tick = false);

/// Deterministic lockstep scheduler. Time jumps to the next due deadline; a
/// process with delay d steps at t = 0, d, 2d, ... while t + d <= duration_ms,
/// so each one completes exactly floor(duration_ms / d) iterations. Processes
/// due at the same instant step in the order given.
class SimScheduler {
public:
    SimScheduler(std::shared_ptr<RunClock> clock, Bus& bus) : clock_(std::move(clock)), bus_(bus) {}

    void add(AppProcess& process) { processes_.push_back(&process); }

    /// Runs until duration_ms or until stop is raised. Does not call finish().
    void run(std::int64_t duration_ms);

private:
    std::shared_ptr<RunClock> clock_;
    Bus& bus_;
    std::vector<AppProcess*> processes_;
};

}  // namespace fieldswarm
