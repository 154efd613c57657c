#pragma once

#include <numbers>

namespace rpcompass::units {

// CODATA 2018.
inline constexpr double kBohrMagneton = 9.2740100783e-24;   // J/T
inline constexpr double kHbar = 1.054571817e-34;            // J s
inline constexpr double kMu0Over4Pi = 1.00000000055e-7;     // T^2 m^3 / J

inline constexpr double kDefaultGFactor = 2.0013;

/// Electron gyromagnetic ratio g*mu_B/hbar in rad us^-1 mT^-1.
/// Internal angular frequencies are rad/us; fields and tensors are read in mT.
constexpr double gyromagnetic_ratio(double g_factor) {
  return g_factor * kBohrMagneton / kHbar * 1e-9;
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace rpcompass::units
