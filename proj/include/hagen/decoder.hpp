#pragma once

#include <cstddef>
#include <vector>

#include "hagen/diffusion.hpp"

namespace hagen {

/// Diffusion-MLP decoder: P hidden layers of width `hidden_dim` followed by an
/// output layer of width C with a sigmoid.
struct DecoderParams {
  struct Layer {
    Parameter* theta = nullptr;
    Parameter* bias = nullptr;
  };
  std::vector<Layer> layers;
  Layer output;
};

DecoderParams init_decoder(ParameterSet& params, std::size_t hidden_dim, std::size_t num_categories,
                           std::size_t num_layers, std::size_t max_step, Rng& rng);

struct DecoderVars {
  struct Layer {
    Var theta;
    Var bias;
  };
  std::vector<Layer> layers;
  Layer output;
};

DecoderVars bind(Tape& tape, const DecoderParams& p);

/// psi_1 = relu(f(h) + b_1), ..., psi_P = f(psi_{P-1}) + b_P, y = sigmoid(f(psi_P) + b').
/// Every hidden layer but the last is rectified; with P = 1 the single layer
/// is rectified.
Var decode(Var h, const DecoderVars& p, const TransitionSet& trans, Var direction, std::size_t batch = 1);

/// Summed binary cross entropy over all cells of one batch divided by the
/// batch size. Probabilities are clamped to [1e-7, 1 - 1e-7].
Var bce_loss(Var probs, const Tensor& targets, std::size_t batch = 1);
double bce_loss(const Tensor& probs, const Tensor& targets, std::size_t batch = 1);

inline constexpr double kProbabilityClamp = 1e-7;

struct LossBreakdown {
  double crime = 0.0;
  double homo = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

/// total = crime + lambda * homo. Negative lambda is a ConfigError.
LossBreakdown total_loss(double crime, double homo, double lambda);

}  // namespace hagen
