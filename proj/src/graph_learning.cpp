#include "hagen/graph_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hagen/errors.hpp"

namespace hagen {

RegionEmbeddingParams init_region_embeddings(ParameterSet& params, std::size_t num_regions, std::size_t embed_dim,
                                             double alpha, std::optional<Tensor> pretrained, Rng& rng) {
  if (num_regions < 2) throw ConfigError("graph learning needs at least 2 regions");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("alpha (saturation rate) must be positive");

  RegionEmbeddingParams p;
  p.num_regions = num_regions;
  p.embed_dim = embed_dim;
  p.alpha = alpha;
  const double map_std = 1.0 / std::sqrt(static_cast<double>(embed_dim));

  if (pretrained) {
    pretrained->require_matrix("pretrained embeddings");
    if (pretrained->rows() != num_regions) {
      throw DataError("pretrained embeddings have " + std::to_string(pretrained->rows()) + " rows, expected " +
                      std::to_string(num_regions));
    }
    const std::size_t in = pretrained->cols();
    p.mlp_weight = &params.add("graph.mlp.weight",
                               normal_tensor({in, embed_dim}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
    p.mlp_bias = &params.add("graph.mlp.bias", Tensor({embed_dim}, 0.0));
    p.pretrained = std::move(pretrained);
  } else {
    p.base = &params.add("graph.base", normal_tensor({num_regions, embed_dim}, 0.1, rng));
  }
  p.source_map = &params.add("graph.source_map", normal_tensor({embed_dim, embed_dim}, map_std, rng));
  p.target_map = &params.add("graph.target_map", normal_tensor({embed_dim, embed_dim}, map_std, rng));
  p.theta1 = &params.add("graph.theta1", normal_tensor({embed_dim, embed_dim}, 0.1 * map_std, rng));
  p.theta2 = &params.add("graph.theta2", normal_tensor({embed_dim, embed_dim}, 0.1 * map_std, rng));
  return p;
}

RegionEmbeddings embed_regions(Tape& tape, const RegionEmbeddingParams& p) {
  RegionEmbeddings e;
  if (p.pretrained) {
    Var pre = tape.constant(*p.pretrained);
    e.base = tanh(add_row_vector(matmul(pre, tape.parameter(*p.mlp_weight)), tape.parameter(*p.mlp_bias)));
  } else {
    e.base = tape.parameter(*p.base);
  }
  e.source = matmul(e.base, tape.parameter(*p.source_map));
  e.target = matmul(e.base, tape.parameter(*p.target_map));
  e.theta1 = tape.parameter(*p.theta1);
  e.theta2 = tape.parameter(*p.theta2);
  e.alpha = p.alpha;
  return e;
}

Var compute_adjacency(Var source, Var target, Var theta1, Var theta2, double alpha) {
  Var zs = tanh(scale(matmul(source, theta1), alpha));
  Var zt = tanh(scale(matmul(target, theta2), alpha));
  Var st = matmul(zs, transpose(zt));
  Var ts = matmul(zt, transpose(zs));
  // tanh rounds to exactly 1 for large inputs; keep weights strictly below 1.
  return scale(relu(tanh(scale(sub(st, ts), alpha))), std::nextafter(1.0, 0.0));
}

Var compute_adjacency(const RegionEmbeddings& emb) {
  return compute_adjacency(emb.source, emb.target, emb.theta1, emb.theta2, emb.alpha);
}

std::size_t effective_top_k(std::size_t requested, std::size_t num_regions) {
  if (requested == 0) throw ConfigError("top_k must be >= 1");
  return std::min(requested, num_regions - 1);
}

Tensor topk_mask(const Tensor& a, std::size_t k) {
  a.require_matrix("topk_mask");
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("topk_mask: adjacency must be square, got " + shape_to_string(a.shape()));
  if (k < 1 || k > n - 1) {
    throw ConfigError("top_k must lie in [1, " + std::to_string(n - 1) + "], got " + std::to_string(k));
  }
  Tensor mask(a.shape(), 0.0);
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < n; ++i) {
    cols.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cols.push_back(j);
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t x, std::size_t y) { return a.at(i, x) > a.at(i, y); });
    for (std::size_t r = 0; r < k; ++r) mask.at(i, cols[r]) = 1.0;
  }
  return mask;
}

Var sparsify_topk(Var a, std::size_t k) {
  Var mask = a.tape().constant(topk_mask(a.value(), k));
  return hadamard(a, mask);
}

RegionGraph sparsify_topk(const Tensor& a, std::size_t k) {
  Tensor mask = topk_mask(a, k);
  RegionGraph g;
  g.n_nodes = a.rows();
  g.top_k = k;
  g.weights = a;
  for (std::size_t i = 0; i < a.size(); ++i) g.weights[i] *= mask[i];
  return g;
}

}  // namespace hagen
