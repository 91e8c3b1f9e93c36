#include "fieldswarm/app_process.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

namespace fieldswarm {

namespace {

constexpr std::int64_t kSleepSliceMs = 10;
// A bus that stays unreachable this many checks in a row counts as stopped.
constexpr int kMaxStopCheckFailures = 200;

}  // namespace

std::int64_t unix_now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::shared_ptr<RunClock> RunClock::wall(std::int64_t epoch_ms) {
    return std::shared_ptr<RunClock>(new RunClock(false, epoch_ms));
}

std::shared_ptr<RunClock> RunClock::wall_from_now() { return wall(unix_now_ms()); }

std::shared_ptr<RunClock> RunClock::simulated() { return std::shared_ptr<RunClock>(new RunClock(true, 0)); }

std::int64_t RunClock::now_ms() const {
    if (simulated_) return sim_now_.load();
    return unix_now_ms() - epoch_ms_;
}

void RunClock::advance_to(std::int64_t t_ms) {
    if (!simulated_) throw std::logic_error("cannot advance a wall clock");
    sim_now_.store(t_ms);
}

BusClock RunClock::bus_clock(std::shared_ptr<const RunClock> clock) {
    return [clock = std::move(clock)] { return clock->now_ms(); };
}

std::uint64_t run_loop(AppProcess& process, Bus& bus, const RunClock& clock, bool skip_first_tick) {
    const std::int64_t delay = process.delay_ms();
    std::int64_t next = clock.now_ms() + (skip_first_tick ? delay : 0);
    std::uint64_t iterations = 0;
    int failures = 0;
    for (;;) {
        bool stop = false;
        try {
            stop = bus.stop_requested();
            failures = 0;
        } catch (const BusError& e) {
            if (++failures == 1) spdlog::warn("{}: cannot read stop flag: {}", process.name(), e.what());
            if (failures >= kMaxStopCheckFailures) {
                spdlog::error("{}: bus unreachable, leaving loop", process.name());
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(kSleepSliceMs));
            continue;
        }
        if (stop) break;

        std::int64_t now = clock.now_ms();
        if (now < next) {
            std::this_thread::sleep_for(std::chrono::milliseconds(std::min(kSleepSliceMs, next - now)));
            continue;
        }
        process.step(now);
        ++iterations;
        next += delay;
        // Fell behind by more than a period: resynchronize instead of bursting.
        if (clock.now_ms() > next + delay) next = clock.now_ms();
    }
    process.finish(clock.now_ms());
    return iterations;
}

void SimScheduler::run(std::int64_t duration_ms) {
    std::vector<std::int64_t> due(processes_.size(), 0);
    for (;;) {
        std::int64_t t = std::numeric_limits<std::int64_t>::max();
        for (std::size_t k = 0; k < processes_.size(); ++k) {
            if (due[k] + processes_[k]->delay_ms() <= duration_ms) t = std::min(t, due[k]);
        }
        if (t == std::numeric_limits<std::int64_t>::max()) return;
        if (bus_.stop_requested()) return;

        clock_->advance_to(t);
        for (std::size_t k = 0; k < processes_.size(); ++k) {
            if (due[k] == t && due[k] + processes_[k]->delay_ms() <= duration_ms) {
                processes_[k]->step(t);
                due[k] += processes_[k]->delay_ms();
            }
        }
    }
}

}  // namespace fieldswarm
