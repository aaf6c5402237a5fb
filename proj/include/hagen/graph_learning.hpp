#pragma once

#include <cstddef>
#include <optional>

#include "hagen/autodiff.hpp"
#include "hagen/random.hpp"

namespace hagen {

/// Trainable state behind the adaptive region graph. Pointers refer into the
/// owning ParameterSet.
///
/// Without pretrained rows the shared base embedding is itself a parameter.
/// With pretrained rows it is tanh(pretrained * mlp_weight + mlp_bias). The
/// source and target embeddings are two separate linear maps of the base.
struct RegionEmbeddingParams {
  std::size_t num_regions = 0;
  std::size_t embed_dim = 0;
  double alpha = 3.0;
  std::optional<Tensor> pretrained;

  Parameter* base = nullptr;
  Parameter* mlp_weight = nullptr;
  Parameter* mlp_bias = nullptr;
  Parameter* source_map = nullptr;
  Parameter* target_map = nullptr;
  Parameter* theta1 = nullptr;
  Parameter* theta2 = nullptr;
};

/// Registers the graph-learning parameters under the "graph." prefix. The base
/// table, when free, starts from N(0, 0.1^2); the source/target maps from
/// N(0, 1/D) and theta1/theta2 from N(0, 0.01/D).
RegionEmbeddingParams init_region_embeddings(ParameterSet& params, std::size_t num_regions, std::size_t embed_dim,
                                             double alpha, std::optional<Tensor> pretrained, Rng& rng);

/// Region embeddings recorded on a tape for one forward pass.
struct RegionEmbeddings {
  Var base;
  Var source;
  Var target;
  Var theta1;
  Var theta2;
  double alpha = 3.0;
};

RegionEmbeddings embed_regions(Tape& tape, const RegionEmbeddingParams& p);

/// Z_s = tanh(a E_s T1), Z_t = tanh(a E_t T2),
/// A = relu(tanh(a (Z_s Z_t^T - Z_t Z_s^T))).
///
/// The argument of the outer tanh is antisymmetric, so at most one of A[i][j]
/// and A[j][i] is positive and the diagonal is exactly zero.
Var compute_adjacency(Var source, Var target, Var theta1, Var theta2, double alpha);
Var compute_adjacency(const RegionEmbeddings& emb);

/// Column index set kept per row by top-k selection, as a 0/1 mask. The
/// diagonal is never kept; ties go to the smaller column index.
Tensor topk_mask(const Tensor& a, std::size_t k);

/// Keeps the k largest entries per row. Survivors pass their gradient through
/// unchanged; the selection itself is a constant of the step.
Var sparsify_topk(Var a, std::size_t k);

struct RegionGraph {
  std::size_t n_nodes = 0;
  std::size_t top_k = 0;
  Tensor weights;
};

RegionGraph sparsify_topk(const Tensor& a, std::size_t k);

/// Largest permitted top-k for a graph of n nodes, clamped from a requested value.
std::size_t effective_top_k(std::size_t requested, std::size_t num_regions);

}  // namespace hagen
