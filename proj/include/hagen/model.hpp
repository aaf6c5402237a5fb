#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hagen/autodiff.hpp"
#include "hagen/data.hpp"
#include "hagen/decoder.hpp"
#include "hagen/dependency.hpp"
#include "hagen/diffusion.hpp"
#include "hagen/graph_learning.hpp"
#include "hagen/recurrent.hpp"

namespace hagen {

struct ModelConfig {
  std::size_t num_regions = 0;
  std::size_t num_categories = 0;
  std::size_t embed_dim = 40;
  std::size_t hidden_dim = 64;
  std::size_t rnn_layers = 2;
  std::size_t diffusion_steps = 2;
  std::size_t top_k = 50;  // clamped to N - 1
  std::size_t decoder_layers = 2;
  double alpha = 3.0;
  bool use_dependency = true;  // false: inputs pass through unweighted
  bool learn_graph = true;     // false: the fixed prior graph is used as A_r

  void validate() const;
};

/// Optional tensors a model is built from, beyond its hyperparameters.
struct ModelInputs {
  std::optional<Tensor> pretrained;       // [N x D_pre] region embeddings
  std::optional<Tensor> fixed_graph;      // [N x N], required when !learn_graph
  std::optional<Tensor> crime_embedding;  // [C x D] initial E_c; N(0, 0.1^2) otherwise
};

/// A minibatch of windows in the node-major batched layout: row n * B + b of
/// every matrix belongs to region n of sample b.
struct Batch {
  std::size_t size = 0;
  std::vector<Tensor> inputs;  // K slots, each [(N B) x C]
  Tensor targets;              // [(N B) x C]
  /// Per sample, per input slot, per category: one labeling of the regions.
  std::vector<std::vector<double>> homophily_labels;
};

Batch make_batch(std::span<const Window> windows, std::span<const std::size_t> order);
Batch make_batch(std::span<const Window> windows);

/// Reassembles batched [(N B) x C] rows into B tensors of shape [N x C].
std::vector<Tensor> split_batch(const Tensor& batched, std::size_t num_regions, std::size_t batch);

struct ForwardPass {
  Var probs;       // [(N B) x C]
  Var adjacency;   // [N x N]
  Var dependency;  // [N x C]
  TransitionSet transitions;
};

class HagenModel {
 public:
  HagenModel(ModelConfig config, std::uint64_t seed, ModelInputs inputs = {});

  HagenModel(const HagenModel&) = delete;
  HagenModel& operator=(const HagenModel&) = delete;

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ModelInputs& inputs() const { return inputs_; }

  /// A_r as used by the forward pass: learned and top-k sparsified, or the
  /// fixed prior graph.
  Var adjacency(Tape& tape, const RegionEmbeddings& emb) const;
  Tensor adjacency() const;
  Tensor dependency() const;

  ForwardPass forward(Tape& tape, const Batch& batch) const;
  /// Occurrence probabilities for a batch, [(N B) x C].
  Tensor predict(const Batch& batch) const;

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  ModelInputs inputs_;
  ParameterSet params_;
  RegionEmbeddingParams graph_;
  DirectionWeights direction_;
  std::vector<DcgruParams> encoder_;
  DecoderParams decoder_;
  CrimeEmbedding crime_;
};

struct Objective {
  Var total;
  LossBreakdown breakdown;
};

/// BCE (summed per sample, averaged over the batch) plus lambda times the
/// batch-averaged homophily loss. With lambda = 0 or a fixed graph the
/// homophily term is evaluated detached and only reported.
Objective compute_objective(const HagenModel& model, Tape& tape, const Batch& batch, double lambda);

}  // namespace hagen
