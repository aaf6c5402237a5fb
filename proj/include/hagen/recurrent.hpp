#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hagen/diffusion.hpp"

namespace hagen {

/// One DCGRU layer. Filters act on the feature concatenation [x, h] (input
/// features first), so each has `input_dim + hidden_dim` input channels.
struct DcgruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter* theta_r = nullptr;
  Parameter* theta_u = nullptr;
  Parameter* theta_c = nullptr;
  Parameter* b_r = nullptr;
  Parameter* b_u = nullptr;
  Parameter* b_c = nullptr;
};

/// Gate biases start at 1 and the candidate bias at 0.
DcgruParams init_dcgru(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                       std::size_t hidden_dim, std::size_t max_step, Rng& rng);

/// A layer's parameters recorded on a tape once per forward pass, with the
/// reset and update filters stacked side by side so both gates come out of
/// one product.
struct DcgruVars {
  Var gate_filter;  // [(2 (M+1) (in + H)) x 2H]
  Var gate_bias;    // [2H]
  Var candidate_filter;
  Var candidate_bias;
  std::size_t hidden_dim = 0;
};

DcgruVars bind(Tape& tape, const DcgruParams& p);

/// r = s(f(x, h) + b_r), u = s(f(x, h) + b_u), c = tanh(f(x, r*h) + b_c),
/// h' = u*h + (1 - u)*c. All diffusion convolutions share `direction`.
Var dcgru_cell(Var x, Var h_prev, const DcgruVars& p, const TransitionSet& trans, Var direction,
               std::size_t batch = 1);

/// Runs the stacked encoder over a window. Every layer starts from a zero
/// hidden state; layer j > 0 consumes the hidden sequence of layer j - 1.
/// Returns the top layer's final hidden state.
Var encode_sequence(std::span<const Var> inputs, std::span<const DcgruVars> layers, const TransitionSet& trans,
                    Var direction, std::size_t batch = 1);

}  // namespace hagen
