#include "rpcompass/spin_system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "rpcompass/errors.hpp"

namespace rpcompass {

Vector3 FieldOrientation::field_vector_mT() const {
  return b0_mT * Vector3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
}

void FieldOrientation::validate() const {
  if (!(b0_mT >= 0.0) || !std::isfinite(b0_mT)) throw InvalidArgument("field magnitude must be >= 0");
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw InvalidArgument("theta must lie in [0, pi]");
  if (!(phi >= 0.0 && phi < 2.0 * std::numbers::pi)) throw InvalidArgument("phi must lie in [0, 2 pi)");
}

std::size_t SpinSystem::nuclear_dimension() const {
  std::size_t z = 1;
  for (const auto& n : nuclei) z *= static_cast<std::size_t>(n.multiplicity);
  return z;
}

std::size_t SpinSystem::hilbert_dimension() const { return 4 * nuclear_dimension(); }

std::vector<std::size_t> SpinSystem::site_dimensions() const {
  std::vector<std::size_t> dims{2, 2};
  for (Radical r : {Radical::A, Radical::B})
    for (const auto& n : nuclei)
      if (n.radical == r) dims.push_back(static_cast<std::size_t>(n.multiplicity));
  return dims;
}

std::vector<std::size_t> SpinSystem::nucleus_sites() const {
  std::vector<std::size_t> sites(nuclei.size());
  std::size_t next = 2;
  for (Radical r : {Radical::A, Radical::B})
    for (std::size_t i = 0; i < nuclei.size(); ++i)
      if (nuclei[i].radical == r) sites[i] = next++;
  return sites;
}

void SpinSystem::validate(std::size_t dimension_cap) const {
  if (!(k_b > 0.0) || !std::isfinite(k_b)) throw ValidationError("k_b > 0", "recombination rate k_b must be positive");
  if (!(k_f > 0.0) || !std::isfinite(k_f)) throw ValidationError("k_f > 0", "product formation rate k_f must be positive");
  if (!(g_factor > 0.0) || !std::isfinite(g_factor)) throw ValidationError("g_factor > 0", "g-factor must be positive");

  std::size_t z = 1;
  for (const auto& n : nuclei) {
    if (n.multiplicity < 2)
      throw ValidationError("multiplicity >= 2", "nucleus '" + n.label + "' has multiplicity " +
                                                     std::to_string(n.multiplicity));
    if (!n.hyperfine_mT.allFinite())
      throw ValidationError("finite hyperfine", "nucleus '" + n.label + "' has a non-finite tensor entry");
    // Guard the product before it can overflow.
    if (z > dimension_cap) break;
    z *= static_cast<std::size_t>(n.multiplicity);
  }
  if (4 * z > dimension_cap)
    throw CapacityError("Hilbert dimension " + (z > dimension_cap ? std::string("> ") + std::to_string(dimension_cap)
                                                                  : std::to_string(4 * z)) +
                        " exceeds the cap of " + std::to_string(dimension_cap));

  if (eed_mT) {
    const Matrix3& d = *eed_mT;
    if (!d.allFinite()) throw ValidationError("finite EED", "EED tensor has a non-finite entry");
    const double scale = std::max(d.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw ValidationError("EED symmetric", "EED tensor is not symmetric");
    if (std::abs(d.trace()) > 1e-10 * scale)
      throw ValidationError("EED traceless", "EED tensor is not traceless (trace " + std::to_string(d.trace()) + " mT)");
  }
}

bool operator==(const Nucleus& a, const Nucleus& b) {
  return a.label == b.label && a.multiplicity == b.multiplicity && a.radical == b.radical &&
         a.hyperfine_mT == b.hyperfine_mT;
}

bool operator==(const SpinSystem& a, const SpinSystem& b) {
  if (a.eed_mT.has_value() != b.eed_mT.has_value()) return false;
  if (a.eed_mT && *a.eed_mT != *b.eed_mT) return false;
  return a.name == b.name && a.nuclei == b.nuclei && a.k_b == b.k_b && a.k_f == b.k_f && a.g_factor == b.g_factor;
}

double hyperfine_strength(const Matrix3& tensor_mT) {
  Eigen::EigenSolver<Matrix3> solver(tensor_mT, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SpinSystem rank_and_truncate(const SpinSystem& system, std::size_t n_keep) {
  if (n_keep > system.nuclei.size())
    throw InvalidArgument("n_keep = " + std::to_string(n_keep) + " exceeds the nucleus count " +
                          std::to_string(system.nuclei.size()));

  std::vector<std::size_t> order(system.nuclei.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> strength(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) strength[i] = hyperfine_strength(system.nuclei[i].hyperfine_mT);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return strength[a] > strength[b]; });
  order.resize(n_keep);
  std::sort(order.begin(), order.end());

  SpinSystem out = system;
  out.nuclei.clear();
  for (std::size_t i : order) out.nuclei.push_back(system.nuclei[i]);
  return out;
}

Matrix3 point_dipole_tensor(const Vector3& r_nm, double g_factor) {
  const double r = r_nm.norm();
  if (!(r > 0.1)) throw InvalidArgument("point-dipole separation must exceed 0.1 nm");
  const Vector3 u = r_nm / r;
  const double r_m = r * 1e-9;
  // (mu0/4pi) gamma^2 hbar / r^3 in angular frequency, divided by gamma and
  // expressed in mT.
  const double prefactor_mT = units::kMu0Over4Pi * g_factor * units::kBohrMagneton / (r_m * r_m * r_m) * 1e3;
  return prefactor_mT * (Matrix3::Identity() - 3.0 * u * u.transpose());
}

SpinSystem composite_average(const SpinSystem& first, const SpinSystem& second, double weight_first,
                             std::string name) {
  if (!(weight_first >= 0.0 && weight_first <= 1.0)) throw InvalidArgument("residence weight must lie in [0, 1]");
  const double weight_second = 1.0 - weight_first;

  std::vector<Nucleus> a_first, a_second;
  for (const auto& n : first.nuclei)
    if (n.radical == Radical::A) a_first.push_back(n);
  for (const auto& n : second.nuclei)
    if (n.radical == Radical::A) a_second.push_back(n);
  if (a_first.size() != a_second.size())
    throw InvalidArgument("composite models must share the A-radical nuclei");
  for (std::size_t i = 0; i < a_first.size(); ++i) {
    if (a_first[i].multiplicity != a_second[i].multiplicity ||
        (a_first[i].hyperfine_mT - a_second[i].hyperfine_mT).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("composite models disagree on A-radical nucleus '" + a_first[i].label + "'");
  }

  SpinSystem out = first;
  out.name = name.empty() ? first.name + "/" + second.name : std::move(name);
  out.nuclei = a_first;
  for (auto [source, weight] : {std::pair{&first, weight_first}, std::pair{&second, weight_second}}) {
    for (const auto& n : source->nuclei) {
      if (n.radical != Radical::B) continue;
      Nucleus scaled = n;
      scaled.hyperfine_mT *= weight;
      out.nuclei.push_back(std::move(scaled));
    }
  }

  if (first.eed_mT || second.eed_mT) {
    const Matrix3 d1 = first.eed_mT.value_or(Matrix3::Zero());
    const Matrix3 d2 = second.eed_mT.value_or(Matrix3::Zero());
    out.eed_mT = weight_first * d1 + weight_second * d2;
  } else {
    out.eed_mT.reset();
  }
  return out;
}

}  // namespace rpcompass
