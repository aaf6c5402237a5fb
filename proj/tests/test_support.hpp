#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "hagen/random.hpp"
#include "hagen/tensor.hpp"

namespace hagen::test {

inline Tensor binary_tensor(Shape shape, Rng& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  Tensor t(std::move(shape), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = coin(rng) ? 1.0 : 0.0;
  return t;
}

/// Random nonnegative square matrix with a zero diagonal; each off-diagonal
/// entry is present with probability `density`.
inline Tensor random_graph(std::size_t n, Rng& rng, double density = 0.5) {
  std::bernoulli_distribution keep(density);
  std::uniform_real_distribution<double> w(0.1, 2.0);
  Tensor a({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && keep(rng)) a.at(i, j) = w(rng);
  return a;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()}, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hagen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hagen::test
