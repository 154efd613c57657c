#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rpcompass/spin_system.hpp"

namespace rpcompass {

/// Reads a spin-system description.
///
/// The format is a small TOML subset:
///
///     name = "fad_z_1n"
///     g_factor = 2.0013              # optional
///     [rates]                        # optional, both default to 1.0
///     k_b_per_us = 1.0
///     k_f_per_us = 1.0
///     [[nuclei]]                     # repeated, zero or more
///     label = "N5"
///     radical = "A"
///     multiplicity = 3
///     tensor_mT = [9 numbers, row-major]
///     [eed]                          # optional, exactly one of:
///     tensor_mT = [9 numbers]
///     point_dipole_r_nm = [3 numbers]
///
/// Arrays may span lines. Throws ParseError for syntax problems and
/// ValidationError / CapacityError when the parsed system is invalid.
SpinSystem load_spin_system(const std::filesystem::path& path, std::size_t dimension_cap = kDefaultDimensionCap);

/// Same as load_spin_system on in-memory text; `source` labels error messages.
SpinSystem parse_spin_system(std::string_view text, const std::string& source = "<string>",
                             std::size_t dimension_cap = kDefaultDimensionCap);

/// Writes `system` in the format accepted by parse_spin_system.
std::string format_spin_system(const SpinSystem& system);

}  // namespace rpcompass
