#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rpcompass/model_io.hpp"
#include "rpcompass/spin_system.hpp"
#include "rpcompass/types.hpp"

namespace rptest {

inline std::filesystem::path model_path(const std::string& name) {
  return std::filesystem::path(RPCOMPASS_MODEL_DIR) / (name + ".tomlish");
}

inline rpcompass::SpinSystem load_model(const std::string& name) {
  return rpcompass::load_spin_system(model_path(name));
}

inline rpcompass::Matrix3 random_tensor(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  rpcompass::Matrix3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = u(rng);
  return m;
}

inline rpcompass::Matrix3 random_traceless_symmetric(std::mt19937_64& rng, double scale) {
  rpcompass::Matrix3 m = random_tensor(rng, scale);
  m = 0.5 * (m + m.transpose()).eval();
  m.diagonal().array() -= m.trace() / 3.0;
  return m;
}

/// Random valid system with `n` nuclei of multiplicity 2 or 3 spread over both radicals.
inline rpcompass::SpinSystem random_system(std::mt19937_64& rng, std::size_t n, std::size_t max_dim = 48) {
  using namespace rpcompass;
  for (;;) {
    SpinSystem s;
    s.name = "random";
    std::uniform_int_distribution<int> mult(2, 3), side(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      Nucleus nuc;
      nuc.label = "X" + std::to_string(i);
      nuc.multiplicity = mult(rng);
      nuc.radical = side(rng) ? Radical::B : Radical::A;
      nuc.hyperfine_mT = random_tensor(rng, 1.0);
      s.nuclei.push_back(nuc);
    }
    if (side(rng)) s.eed_mT = random_traceless_symmetric(rng, 0.5);
    if (s.hilbert_dimension() <= max_dim) return s;
  }
}

inline rpcompass::DenseMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  rpcompass::DenseMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
  return 0.5 * (a + a.adjoint());
}

/// Random full-rank density matrix.
inline rpcompass::DenseMatrix random_density(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  rpcompass::DenseMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
  rpcompass::DenseMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

}  // namespace rptest
