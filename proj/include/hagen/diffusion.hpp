#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hagen/autodiff.hpp"
#include "hagen/random.hpp"

namespace hagen {

/// Powers of the out-degree and in-degree normalized transition matrices,
/// forward[m] = (D_O^-1 A)^m and backward[m] = (D_I^-1 A^T)^m for m = 0..M.
/// Zero-degree rows normalize to zero rows. Index 0 holds the identity.
struct TransitionSet {
  std::vector<Var> forward;
  std::vector<Var> backward;
  std::size_t max_step = 0;

  std::size_t num_nodes() const { return forward.front().value().rows(); }
};

TransitionSet transition_matrices(Var adjacency, std::size_t max_step);

/// Per-node preference for in-going diffusion, sigmoid(raw) in (0, 1). One
/// instance is shared by every gate and decoder layer of a model.
struct DirectionWeights {
  Parameter* raw = nullptr;

  Var effective(Tape& tape) const { return sigmoid(tape.parameter(*raw)); }
};

/// raw = 0 everywhere, i.e. an effective preference of 0.5.
DirectionWeights init_direction_weights(ParameterSet& params, std::size_t num_regions);

/// Filter tensor of shape [in x out x (M+1) x 2]; the last axis selects the
/// out-degree (0) or in-degree (1) branch. Xavier-normal initialized.
Parameter& add_diffusion_filter(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                std::size_t max_step, Rng& rng);

/// Rearranges a [in x out x (M+1) x 2] filter into the stacked weight matrix
/// [(2 (M+1) in) x out] whose row block (dir * (M+1) + m) is T[:, :, m, dir].
Var stacked_filter(Var theta);

/// Diffused copies of `x` side by side: [S^O_0 X, ..., S^O_M X, D_W S^I_0 X, ..., D_W S^I_M X].
/// Multiplying by stacked_filter(theta) gives diffusion_conv.
Var diffusion_features(Var x, const TransitionSet& trans, Var direction, std::size_t batch = 1);

/// sum_m ( S^O_m X T[:,:,m,0] + D_W S^I_m X T[:,:,m,1] ).
///
/// `x` holds `batch` independent signals sharing one graph, laid out
/// node-major: row n * batch + b carries sample b of node n. With batch = 1
/// this is the plain N x H form.
Var diffusion_conv(Var x, const TransitionSet& trans, Var theta, Var direction, std::size_t batch = 1);

}  // namespace hagen
