#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hagen/autodiff.hpp"

namespace hagen {

/// Central-difference gradient of a scalar function of the given parameters:
/// (f(p + eps) - f(p - eps)) / (2 eps) per coordinate. Parameter values are
/// restored afterwards. `eps` must lie in [1e-7, 1e-4]; `f` is evaluated twice
/// at the base point and must return bit-identical results.
std::vector<Tensor> finite_diff_grad(const std::function<double()>& f, std::span<Parameter* const> params,
                                     double eps = 1e-6);

/// |a - n| / max(1, |a|, |n|)
double gradient_relative_error(double analytic, double numeric);

struct GradientComparison {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares each parameter's `grad` accumulator against numeric gradients.
GradientComparison compare_gradients(std::span<Parameter* const> params, std::span<const Tensor> numeric);

/// Zeroes grads, runs `loss_fn` on a fresh tape and back-propagates it, then
/// compares against finite differences of the same function.
GradientComparison check_gradients(const std::function<Var(Tape&)>& loss_fn, std::span<Parameter* const> params,
                                   double eps = 1e-6);

struct GradCheckCase {
  std::string name;
  std::uint64_t seed = 0;
  GradientComparison result;
};

/// Gradient checks over every differentiable module on toy sizes, one seed.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed);

}  // namespace hagen
