#pragma once

// Working unit system: length in micrometres, time in milliseconds, mass in
// unified atomic mass units. Energies are then u*um^2/ms^2 and angular momenta
// u*um^2/ms. Atom-optics parameters stay O(1)..O(1e3) in these units.

namespace gaussrot::units {

namespace codata {
inline constexpr double hbar_si = 1.054571817e-34;        // J s
inline constexpr double atomic_mass_si = 1.66053906660e-27;  // kg
inline constexpr double electron_volt_si = 1.602176634e-19;  // J
}  // namespace codata

/// One energy unit (u*um^2/ms^2) expressed in joules.
inline constexpr double energy_unit_si = codata::atomic_mass_si * 1e-12 / 1e-6;

/// Reduced Planck constant in u*um^2/ms (~63.5078).
inline constexpr double hbar = codata::hbar_si / (codata::atomic_mass_si * 1e-12 / 1e-3);

/// Number of native energy units in one electronvolt (~0.96485e14).
inline constexpr double electron_volt = codata::electron_volt_si / energy_unit_si;

inline constexpr double ev_to_native(double ev) { return ev * electron_volt; }
inline constexpr double native_to_ev(double e) { return e / electron_volt; }

/// Frequencies quoted per second -> per millisecond.
inline constexpr double per_second_to_native(double f) { return f * 1e-3; }
inline constexpr double native_to_per_second(double f) { return f * 1e3; }

inline constexpr double mm_to_um(double x) { return x * 1e3; }

/// Mass of a 7Li atom in u.
inline constexpr double lithium7_mass = 7.016003;

}  // namespace gaussrot::units
