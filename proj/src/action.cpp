#include "fieldswarm/action.hpp"

#include <numbers>

namespace fieldswarm {

namespace {

constexpr double kDiag = 1.0 / std::numbers::sqrt2;

constexpr std::array<std::string_view, 9> kNames = {
    "STOP",       "FRONT",       "BACK",      "LEFT",       "RIGHT",
    "FRONT_LEFT", "FRONT_RIGHT", "BACK_LEFT", "BACK_RIGHT",
};

}  // namespace

UnitVector action_to_unit_vector(Action a) {
    switch (a) {
        case Action::Stop: return {0.0, 0.0};
        case Action::Front: return {1.0, 0.0};
        case Action::Back: return {-1.0, 0.0};
        case Action::Left: return {0.0, 1.0};
        case Action::Right: return {0.0, -1.0};
        case Action::FrontLeft: return {kDiag, kDiag};
        case Action::FrontRight: return {kDiag, -kDiag};
        case Action::BackLeft: return {-kDiag, kDiag};
        case Action::BackRight: return {-kDiag, -kDiag};
    }
    return {0.0, 0.0};
}

std::string_view to_string(Action a) {
    return kNames[static_cast<std::size_t>(a)];
}

std::optional<Action> parse_action(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return static_cast<Action>(i);
    }
    return std::nullopt;
}

}  // namespace fieldswarm
