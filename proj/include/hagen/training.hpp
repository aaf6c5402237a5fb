#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hagen/data.hpp"
#include "hagen/evaluation.hpp"
#include "hagen/model.hpp"

namespace hagen {

/// Adam moments keyed by parameter name.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// One bias-corrected Adam update. Gradients are left in place. A non-finite
/// gradient throws NumericalError naming the parameter, before any update.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr);

/// Scales all gradients so their joint L2 norm is at most `max_norm`. Returns
/// the norm before scaling.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

struct TrainConfig {
  double lr0 = 0.01;
  double decay_factor = 0.1;
  std::vector<std::size_t> milestones{20, 30, 40};
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t window = 7;
  double lambda = 0.01;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // 0 disables clipping
  double train_frac = 0.8125;
  double val_frac = 0.0625;
  double threshold = 0.5;
  bool no_homophily = false;
  bool no_dependency = false;
  bool no_graph_learning = false;

  void validate() const;
  double effective_lambda() const { return no_homophily ? 0.0 : lambda; }
};

/// lr0 * decay_factor^(number of milestones <= epoch)
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

/// Everything needed to rebuild a model and resume its optimizer.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;  // completed epochs
  std::vector<std::pair<std::string, Tensor>> params;
  AdamState adam;
  ModelInputs buffers;  // pretrained embeddings and fixed graph; crime_embedding unused
};

Checkpoint make_checkpoint(const HagenModel& model, const TrainConfig& train, const AdamState& adam,
                           std::size_t epoch);
/// Rebuilds the model and overwrites every parameter with the stored values.
std::unique_ptr<HagenModel> restore_model(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct HistoryRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double crime_loss = 0.0;
  double homo_loss = 0.0;
  double val_micro_f1 = 0.0;
  double val_macro_f1 = 0.0;
  double mean_homophily = 0.0;
};

void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

/// Optional prior inputs to training.
struct TrainPriors {
  std::optional<Tensor> pretrained;
  std::optional<Tensor> distance_graph;  // A_r when graph learning is disabled
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<HistoryRow> history;
  SplitRanges split;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Fits a model on the training split with minibatch Adam. Model sizes
/// num_regions/num_categories are taken from the data when left at 0.
TrainResult train(const TrainConfig& cfg, ModelConfig model_cfg, const CrimeTensor& data,
                  const TrainPriors& priors = {}, const EpochCallback& on_epoch = {});

struct WindowEvaluation {
  MetricsReport metrics;
  double crime_loss = 0.0;  // mean per-window BCE
  Tensor probs;             // [N x C x W], slot w is window w's forecast
  Tensor truth;             // [N x C x W]
};

/// Forecasts every window in batches of `batch_size` and scores them.
WindowEvaluation evaluate_windows(const HagenModel& model, std::span<const Window> windows, double threshold,
                                  std::size_t batch_size = 32);

}  // namespace hagen
