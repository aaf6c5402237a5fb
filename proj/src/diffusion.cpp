#include "hagen/diffusion.hpp"

#include <cmath>

#include "hagen/errors.hpp"

namespace hagen {

TransitionSet transition_matrices(Var adjacency, std::size_t max_step) {
  const Tensor& a = adjacency.value();
  a.require_matrix("transition_matrices");
  if (a.rows() != a.cols()) throw DimensionError("transition_matrices: adjacency must be square");
  if (max_step < 1) throw ConfigError("diffusion_steps must be >= 1");
  for (double v : a.values()) {
    if (v < 0.0) throw DataError("transition_matrices: adjacency must be nonnegative");
  }
  Tape& tape = adjacency.tape();
  Var eye = tape.constant(Tensor::identity(a.rows()));

  TransitionSet ts;
  ts.max_step = max_step;
  ts.forward.push_back(eye);
  ts.backward.push_back(eye);
  Var out1 = row_normalize(adjacency);
  Var in1 = row_normalize(transpose(adjacency));
  ts.forward.push_back(out1);
  ts.backward.push_back(in1);
  for (std::size_t m = 2; m <= max_step; ++m) {
    ts.forward.push_back(matmul(ts.forward.back(), out1));
    ts.backward.push_back(matmul(ts.backward.back(), in1));
  }
  return ts;
}

DirectionWeights init_direction_weights(ParameterSet& params, std::size_t num_regions) {
  return DirectionWeights{&params.add("direction.raw", Tensor({num_regions}, 0.0))};
}

Parameter& add_diffusion_filter(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                std::size_t max_step, Rng& rng) {
  const double fan_in = static_cast<double>(in * (max_step + 1) * 2);
  const double stddev = std::sqrt(2.0 / (fan_in + static_cast<double>(out)));
  return params.add(name, normal_tensor({in, out, max_step + 1, 2}, stddev, rng));
}

Var stacked_filter(Var theta) {
  const Shape& s = theta.shape();
  if (s.size() != 4 || s[3] != 2) {
    throw DimensionError("diffusion filter must have shape [in x out x (M+1) x 2], got " + shape_to_string(s));
  }
  const std::size_t in = s[0], out = s[1], steps = s[2];
  std::vector<std::size_t> index(2 * steps * in * out);
  std::size_t r = 0;
  for (std::size_t dir = 0; dir < 2; ++dir)
    for (std::size_t m = 0; m < steps; ++m)
      for (std::size_t f = 0; f < in; ++f)
        for (std::size_t h = 0; h < out; ++h) index[r++] = ((f * out + h) * steps + m) * 2 + dir;
  return gather(theta, std::move(index), {2 * steps * in, out});
}

Var diffusion_features(Var x, const TransitionSet& trans, Var direction, std::size_t batch) {
  const Tensor& xv = x.value();
  xv.require_matrix("diffusion_conv");
  const std::size_t n = trans.num_nodes();
  const std::size_t features = xv.cols();
  if (batch == 0 || xv.rows() != n * batch) {
    throw DimensionError("diffusion_conv: input " + shape_to_string(xv.shape()) + " does not hold " +
                         std::to_string(batch) + " signal(s) over " + std::to_string(n) + " nodes");
  }
  if (direction.value().size() != n) {
    throw DimensionError("diffusion_conv: direction weights " + shape_to_string(direction.shape()) + " for " +
                         std::to_string(n) + " nodes");
  }

  const Shape node_view{n, batch * features};
  const Shape row_view{n * batch, features};
  Var xn = batch > 1 ? reshape(x, node_view) : x;

  std::vector<Var> blocks;
  blocks.reserve(2 * (trans.max_step + 1));
  blocks.push_back(x);
  for (std::size_t m = 1; m <= trans.max_step; ++m) {
    Var y = matmul(trans.forward[m], xn);
    blocks.push_back(batch > 1 ? reshape(y, row_view) : y);
  }
  for (std::size_t m = 0; m <= trans.max_step; ++m) {
    Var y = m == 0 ? xn : matmul(trans.backward[m], xn);
    y = scale_rows(y, direction);
    blocks.push_back(batch > 1 ? reshape(y, row_view) : y);
  }
  return concat_cols(blocks);
}

Var diffusion_conv(Var x, const TransitionSet& trans, Var theta, Var direction, std::size_t batch) {
  const Shape& ts = theta.shape();
  if (ts.size() != 4 || ts[0] != x.value().cols() || ts[2] != trans.max_step + 1 || ts[3] != 2) {
    throw DimensionError("diffusion_conv: filter " + shape_to_string(ts) + " incompatible with input width " +
                         std::to_string(x.value().cols()) + " and " + std::to_string(trans.max_step) +
                         " diffusion steps");
  }
  return matmul(diffusion_features(x, trans, direction, batch), stacked_filter(theta));
}

}  // namespace hagen
