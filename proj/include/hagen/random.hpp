#pragma once

#include <cstdint>
#include <random>

#include "hagen/tensor.hpp"

namespace hagen {

using Rng = std::mt19937_64;

Tensor normal_tensor(Shape shape, double stddev, Rng& rng);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);

}  // namespace hagen
