#include "hagen/decoder.hpp"

#include "hagen/errors.hpp"

namespace hagen {

DecoderParams init_decoder(ParameterSet& params, std::size_t hidden_dim, std::size_t num_categories,
                           std::size_t num_layers, std::size_t max_step, Rng& rng) {
  if (num_layers < 1) throw ConfigError("decoder_layers must be >= 1");
  DecoderParams p;
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::string prefix = "decoder." + std::to_string(i);
    auto& theta = add_diffusion_filter(params, prefix + ".theta", hidden_dim, hidden_dim, max_step, rng);
    auto& bias = params.add(prefix + ".bias", Tensor({hidden_dim}, 0.0));
    p.layers.push_back({&theta, &bias});
  }
  p.output.theta = &add_diffusion_filter(params, "decoder.out.theta", hidden_dim, num_categories, max_step, rng);
  p.output.bias = &params.add("decoder.out.bias", Tensor({num_categories}, 0.0));
  return p;
}

DecoderVars bind(Tape& tape, const DecoderParams& p) {
  DecoderVars v;
  for (const auto& l : p.layers) v.layers.push_back({tape.parameter(*l.theta), tape.parameter(*l.bias)});
  v.output = {tape.parameter(*p.output.theta), tape.parameter(*p.output.bias)};
  return v;
}

Var decode(Var h, const DecoderVars& p, const TransitionSet& trans, Var direction, std::size_t batch) {
  if (p.layers.empty()) throw ContractError("decode: decoder has no hidden layers");
  Var psi = h;
  const std::size_t last = p.layers.size() - 1;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    psi = add_row_vector(diffusion_conv(psi, trans, p.layers[i].theta, direction, batch), p.layers[i].bias);
    if (i < last || p.layers.size() == 1) psi = relu(psi);
  }
  return sigmoid(add_row_vector(diffusion_conv(psi, trans, p.output.theta, direction, batch), p.output.bias));
}

Var bce_loss(Var probs, const Tensor& targets, std::size_t batch) {
  if (batch == 0) throw ContractError("bce_loss: batch size must be positive");
  return scale(bce_sum(probs, targets, kProbabilityClamp), 1.0 / static_cast<double>(batch));
}

double bce_loss(const Tensor& probs, const Tensor& targets, std::size_t batch) {
  Tape tape;
  return bce_loss(tape.constant(probs), targets, batch).value()[0];
}

LossBreakdown total_loss(double crime, double homo, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  return LossBreakdown{crime, homo, crime + lambda * homo, lambda};
}

}  // namespace hagen
