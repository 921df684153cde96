#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgax/numeric.hpp"
#include "kgax/rng.hpp"

namespace kgax::test {

inline Matrix<double> random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix<double> m(rows, cols);
  for (auto& v : m.values()) v = scale * (2.0 * uniform_unit(rng) - 1.0);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * uniform_unit(rng) - 1.0);
  return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kgax_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kgax::test
