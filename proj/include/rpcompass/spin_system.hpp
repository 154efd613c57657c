#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rpcompass/types.hpp"
#include "rpcompass/units.hpp"

namespace rpcompass {

inline constexpr std::size_t kDefaultDimensionCap = 4096;

enum class Radical { A, B };

struct Nucleus {
  std::string label;
  int multiplicity = 2;   // 2I + 1
  Matrix3 hyperfine_mT = Matrix3::Zero();
  Radical radical = Radical::A;
};

/// Applied field in the molecular frame. Angles in radians.
struct FieldOrientation {
  double b0_mT = 0.05;
  double theta = 0.0;
  double phi = 0.0;

  /// (sin t cos p, sin t sin p, cos t) scaled by b0.
  Vector3 field_vector_mT() const;

  /// b0 >= 0, theta in [0, pi], phi in [0, 2 pi).
  void validate() const;
};

/// Two radicals with their hyperfine-coupled nuclei.
///
/// Hilbert space sites are ordered electron A, electron B, nuclei on A in list
/// order, then nuclei on B in list order. Every operator, vectorization and
/// partial trace in the library uses this ordering.
struct SpinSystem {
  std::string name;
  std::vector<Nucleus> nuclei;
  std::optional<Matrix3> eed_mT;
  double k_b = 1.0;   // singlet recombination, us^-1
  double k_f = 1.0;   // product formation, us^-1
  double g_factor = units::kDefaultGFactor;

  /// Z, the product of nuclear multiplicities.
  std::size_t nuclear_dimension() const;
  /// d = 4 Z.
  std::size_t hilbert_dimension() const;

  /// Local dimension of every site in global site order.
  std::vector<std::size_t> site_dimensions() const;
  /// Site index (in global order) of nuclei[i].
  std::vector<std::size_t> nucleus_sites() const;

  double gyromagnetic_ratio() const { return units::gyromagnetic_ratio(g_factor); }

  /// Throws ValidationError on a broken invariant and CapacityError when the
  /// Hilbert dimension exceeds `dimension_cap`.
  void validate(std::size_t dimension_cap = kDefaultDimensionCap) const;
};

bool operator==(const Nucleus& a, const Nucleus& b);
bool operator==(const SpinSystem& a, const SpinSystem& b);

/// Keeps the `n_keep` nuclei whose hyperfine tensors have the largest
/// max |eigenvalue|. Kept nuclei retain their original relative order; ties
/// go to the earlier list index.
SpinSystem rank_and_truncate(const SpinSystem& system, std::size_t n_keep);

/// max |eigenvalue| of a hyperfine tensor (complex eigenvalues allowed for
/// non-symmetric tensors).
double hyperfine_strength(const Matrix3& tensor_mT);

/// Axial point-dipole EED tensor for an inter-radical vector r (nm), in mT:
/// (mu0/4pi) g mu_B / r^3 (1 - 3 r r^T). Throws InvalidArgument for |r| <= 0.1 nm.
Matrix3 point_dipole_tensor(const Vector3& r_nm, double g_factor = units::kDefaultGFactor);

/// Fast degenerate hopping of the B-radical between two sites.
///
/// Nuclei on A are taken from `first` (both inputs must agree on them). The
/// B-radical nuclei of `first` and `second` are merged with tensors scaled by
/// their residence weights, and the EED tensors are averaged with the same
/// weights. Rates and g-factor come from `first`.
SpinSystem composite_average(const SpinSystem& first, const SpinSystem& second, double weight_first = 0.5,
                             std::string name = {});

}  // namespace rpcompass
