#include "hagen/recurrent.hpp"

#include "hagen/errors.hpp"

namespace hagen {

DcgruParams init_dcgru(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                       std::size_t hidden_dim, std::size_t max_step, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("DCGRU dimensions must be positive");
  DcgruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t in = input_dim + hidden_dim;
  p.theta_r = &add_diffusion_filter(params, prefix + ".reset.theta", in, hidden_dim, max_step, rng);
  p.theta_u = &add_diffusion_filter(params, prefix + ".update.theta", in, hidden_dim, max_step, rng);
  p.theta_c = &add_diffusion_filter(params, prefix + ".candidate.theta", in, hidden_dim, max_step, rng);
  p.b_r = &params.add(prefix + ".reset.bias", Tensor({hidden_dim}, 1.0));
  p.b_u = &params.add(prefix + ".update.bias", Tensor({hidden_dim}, 1.0));
  p.b_c = &params.add(prefix + ".candidate.bias", Tensor({hidden_dim}, 0.0));
  return p;
}

DcgruVars bind(Tape& tape, const DcgruParams& p) {
  const Var filters[] = {stacked_filter(tape.parameter(*p.theta_r)), stacked_filter(tape.parameter(*p.theta_u))};
  const std::size_t h = p.hidden_dim;
  const Var biases[] = {reshape(tape.parameter(*p.b_r), {1, h}), reshape(tape.parameter(*p.b_u), {1, h})};
  DcgruVars v;
  v.gate_filter = concat_cols(filters);
  v.gate_bias = reshape(concat_cols(biases), {2 * h});
  v.candidate_filter = stacked_filter(tape.parameter(*p.theta_c));
  v.candidate_bias = tape.parameter(*p.b_c);
  v.hidden_dim = h;
  return v;
}

Var dcgru_cell(Var x, Var h_prev, const DcgruVars& p, const TransitionSet& trans, Var direction,
               std::size_t batch) {
  const std::size_t h = p.hidden_dim;
  if (h_prev.value().rank() != 2 || h_prev.value().cols() != h) {
    throw DimensionError("dcgru_cell: hidden state " + shape_to_string(h_prev.shape()) + " for hidden width " +
                         std::to_string(h));
  }
  const std::size_t expected = p.gate_filter.value().rows() / (2 * (trans.max_step + 1));
  if (x.value().rank() != 2 || x.value().cols() + h != expected) {
    throw DimensionError("dcgru_cell: input " + shape_to_string(x.shape()) + " does not fit a filter over " +
                         std::to_string(expected) + " channels");
  }
  const Var xh[] = {x, h_prev};
  Var gates = sigmoid(add_row_vector(matmul(diffusion_features(concat_cols(xh), trans, direction, batch),
                                            p.gate_filter),
                                     p.gate_bias));
  Var r = slice_cols(gates, 0, h);
  Var u = slice_cols(gates, h, 2 * h);
  const Var xrh[] = {x, hadamard(r, h_prev)};
  Var c = tanh(add_row_vector(
      matmul(diffusion_features(concat_cols(xrh), trans, direction, batch), p.candidate_filter), p.candidate_bias));
  return add(hadamard(u, h_prev), hadamard(rsub_scalar(1.0, u), c));
}

Var encode_sequence(std::span<const Var> inputs, std::span<const DcgruVars> layers, const TransitionSet& trans,
                    Var direction, std::size_t batch) {
  if (inputs.empty()) throw ContractError("encode_sequence: empty input window");
  if (layers.empty()) throw ContractError("encode_sequence: no recurrent layers");
  Tape& tape = inputs.front().tape();
  const std::size_t rows = inputs.front().value().rows();

  std::vector<Var> sequence(inputs.begin(), inputs.end());
  for (const auto& layer : layers) {
    Var h = tape.constant(Tensor({rows, layer.hidden_dim}, 0.0));
    std::vector<Var> next;
    next.reserve(sequence.size());
    for (const auto& x : sequence) {
      h = dcgru_cell(x, h, layer, trans, direction, batch);
      next.push_back(h);
    }
    sequence = std::move(next);
  }
  return sequence.back();
}

}  // namespace hagen
