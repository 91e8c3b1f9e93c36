#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace fieldswarm {

// Declaration order doubles as the hill-climbing tie-break preference.
enum class Action : std::uint8_t {
    Stop,
    Front,
    Back,
    Left,
    Right,
    FrontLeft,
    FrontRight,
    BackLeft,
    BackRight,
};

inline constexpr std::array<Action, 9> kAllActions = {
    Action::Stop,     Action::Front,     Action::Back,     Action::Left,     Action::Right,
    Action::FrontLeft, Action::FrontRight, Action::BackLeft, Action::BackRight,
};

struct UnitVector {
    double dx = 0.0;
    double dy = 0.0;
};

/// Body-frame direction of travel. STOP is the zero vector; diagonals are
/// normalized so every move has the same speed.
UnitVector action_to_unit_vector(Action a);

/// Canonical wire name ("STOP", "FRONT_LEFT", ...).
std::string_view to_string(Action a);

/// Inverse of to_string. Only the 9 canonical names are accepted.
std::optional<Action> parse_action(std::string_view name);

}  // namespace fieldswarm
