#include "hagen/model.hpp"

#include "hagen/errors.hpp"
#include "hagen/homophily.hpp"

namespace hagen {

void ModelConfig::validate() const {
  if (num_regions < 2) throw ConfigError("model needs at least 2 regions");
  if (num_categories < 1) throw ConfigError("model needs at least 1 category");
  if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("embed_dim and hidden_dim must be >= 1");
  if (rnn_layers < 1) throw ConfigError("rnn_layers must be >= 1");
  if (diffusion_steps < 1) throw ConfigError("diffusion_steps must be >= 1");
  if (decoder_layers < 1) throw ConfigError("decoder_layers must be >= 1");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
}

Batch make_batch(std::span<const Window> windows, std::span<const std::size_t> order) {
  if (order.empty()) throw ContractError("make_batch: empty batch");
  const Window& first = windows[order[0]];
  const std::size_t n = first.inputs.shape()[0], c = first.inputs.shape()[1], k = first.inputs.shape()[2];
  const std::size_t b = order.size();
  Batch batch;
  batch.size = b;
  batch.inputs.assign(k, Tensor({n * b, c}, 0.0));
  batch.targets = Tensor({n * b, c}, 0.0);
  for (std::size_t s = 0; s < b; ++s) {
    const Window& w = windows[order[s]];
    if (w.inputs.shape() != first.inputs.shape()) throw DimensionError("make_batch: windows differ in shape");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < c; ++l) {
        for (std::size_t t = 0; t < k; ++t) batch.inputs[t].at(i * b + s, l) = w.inputs[(i * c + l) * k + t];
        batch.targets.at(i * b + s, l) = w.target.at(i, l);
      }
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t l = 0; l < c; ++l) {
        std::vector<double> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = w.inputs[(i * c + l) * k + t];
        batch.homophily_labels.push_back(std::move(labels));
      }
  }
  return batch;
}

Batch make_batch(std::span<const Window> windows) {
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return make_batch(windows, order);
}

std::vector<Tensor> split_batch(const Tensor& batched, std::size_t num_regions, std::size_t batch) {
  const std::size_t c = batched.cols();
  std::vector<Tensor> out(batch, Tensor({num_regions, c}, 0.0));
  for (std::size_t i = 0; i < num_regions; ++i)
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t l = 0; l < c; ++l) out[s].at(i, l) = batched.at(i * batch + s, l);
  return out;
}

HagenModel::HagenModel(ModelConfig config, std::uint64_t seed, ModelInputs inputs)
    : config_(config), seed_(seed), inputs_(std::move(inputs)) {
  config_.validate();
  const std::size_t n = config_.num_regions, c = config_.num_categories, d = config_.embed_dim;
  if (!config_.learn_graph) {
    if (!inputs_.fixed_graph) throw ConfigError("a fixed graph is required when graph learning is disabled");
    if (inputs_.fixed_graph->shape() != Shape{n, n}) {
      throw DimensionError("fixed graph " + shape_to_string(inputs_.fixed_graph->shape()) + " for " +
                           std::to_string(n) + " regions");
    }
  }
  if (inputs_.crime_embedding && inputs_.crime_embedding->shape() != Shape{c, d}) {
    throw DimensionError("crime embedding " + shape_to_string(inputs_.crime_embedding->shape()) + ", expected " +
                         shape_to_string({c, d}));
  }

  Rng rng(seed);
  graph_ = init_region_embeddings(params_, n, d, config_.alpha, inputs_.pretrained, rng);
  direction_ = init_direction_weights(params_, n);
  const std::size_t h = config_.hidden_dim, m = config_.diffusion_steps;
  for (std::size_t layer = 0; layer < config_.rnn_layers; ++layer) {
    encoder_.push_back(init_dcgru(params_, "encoder." + std::to_string(layer), layer == 0 ? c : h, h, m, rng));
  }
  decoder_ = init_decoder(params_, h, c, config_.decoder_layers, m, rng);
  Tensor ce = inputs_.crime_embedding ? *inputs_.crime_embedding : normal_tensor({c, d}, 0.1, rng);
  crime_ = init_crime_embedding(params_, std::move(ce), rng);
}

Var HagenModel::adjacency(Tape& tape, const RegionEmbeddings& emb) const {
  if (!config_.learn_graph) return tape.constant(*inputs_.fixed_graph);
  return sparsify_topk(compute_adjacency(emb), effective_top_k(config_.top_k, config_.num_regions));
}

Tensor HagenModel::adjacency() const {
  Tape tape;
  return adjacency(tape, embed_regions(tape, graph_)).value();
}

Tensor HagenModel::dependency() const {
  Tape tape;
  auto emb = embed_regions(tape, graph_);
  return inter_dependency(emb.base, tape.parameter(*crime_.embedding), tape.parameter(*crime_.transition)).value();
}

ForwardPass HagenModel::forward(Tape& tape, const Batch& batch) const {
  const std::size_t n = config_.num_regions, c = config_.num_categories, b = batch.size;
  if (batch.inputs.empty() || batch.targets.shape() != Shape{n * b, c}) {
    throw DimensionError("batch does not match model: expected rows of " + std::to_string(n) + " regions x " +
                         std::to_string(c) + " categories");
  }
  ForwardPass fp;
  auto emb = embed_regions(tape, graph_);
  fp.adjacency = adjacency(tape, emb);
  fp.transitions = transition_matrices(fp.adjacency, config_.diffusion_steps);
  Var dw = direction_.effective(tape);

  if (config_.use_dependency) {
    fp.dependency =
        inter_dependency(emb.base, tape.parameter(*crime_.embedding), tape.parameter(*crime_.transition));
  } else {
    fp.dependency = tape.constant(Tensor({n, c}, 1.0));
  }
  Var weights = repeat_rows(fp.dependency, b);
  std::vector<Var> xs;
  xs.reserve(batch.inputs.size());
  for (const auto& slot : batch.inputs) xs.push_back(weight_input(weights, tape.constant(slot)));

  std::vector<DcgruVars> layers;
  for (const auto& layer : encoder_) layers.push_back(bind(tape, layer));
  Var h = encode_sequence(xs, layers, fp.transitions, dw, b);
  fp.probs = decode(h, bind(tape, decoder_), fp.transitions, dw, b);
  return fp;
}

Tensor HagenModel::predict(const Batch& batch) const {
  Tape tape;
  return forward(tape, batch).probs.value();
}

Objective compute_objective(const HagenModel& model, Tape& tape, const Batch& batch, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  ForwardPass fp = model.forward(tape, batch);
  Var crime = bce_loss(fp.probs, batch.targets, batch.size);
  const double inv_b = 1.0 / static_cast<double>(batch.size);

  Objective obj;
  if (lambda > 0.0 && model.config().learn_graph) {
    Var r = add_scalar(homophily_ratios(fp.adjacency, batch.homophily_labels), -1.0);
    Var homo = scale(sum(hadamard(r, r)), inv_b);
    obj.total = add(crime, scale(homo, lambda));
    obj.breakdown = total_loss(crime.value()[0], homo.value()[0], lambda);
  } else {
    Tape detached;
    Var r = add_scalar(homophily_ratios(detached.constant(fp.adjacency.value()), batch.homophily_labels), -1.0);
    const double homo = sum(hadamard(r, r)).value()[0] * inv_b;
    obj.total = crime;
    obj.breakdown = total_loss(crime.value()[0], homo, lambda);
  }
  return obj;
}

}  // namespace hagen
