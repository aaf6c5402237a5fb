#include "hagen/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hagen/dependency.hpp"
#include "hagen/errors.hpp"
#include "hagen/homophily.hpp"

namespace hagen {

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NumericalError("non-finite gradient in parameter '" + p->name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (Parameter* p : params) {
    auto m_it = state.first_moment.try_emplace(p->name, p->value.shape(), 0.0).first;
    auto v_it = state.second_moment.try_emplace(p->name, p->value.shape(), 0.0).first;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (m.shape() != p->value.shape() || v.shape() != p->value.shape()) {
      throw DimensionError("adam moments " + shape_to_string(m.shape()) + " for parameter '" + p->name + "' " +
                           shape_to_string(p->value.shape()));
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      p->value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.values()) g *= s;
  }
  return norm;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  double lr = cfg.lr0;
  for (std::size_t m : cfg.milestones)
    if (m <= epoch) lr *= cfg.decay_factor;
  return lr;
}

void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17) << "epoch,lr,crime_loss,homo_loss,val_micro_f1,val_macro_f1,mean_homophily\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.crime_loss << ',' << r.homo_loss << ',' << r.val_micro_f1 << ','
        << r.val_macro_f1 << ',' << r.mean_homophily << '\n';
  }
}

WindowEvaluation evaluate_windows(const HagenModel& model, std::span<const Window> windows, double threshold,
                                  std::size_t batch_size) {
  if (windows.empty()) throw DataError("no windows to evaluate");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const std::size_t n = model.config().num_regions, c = model.config().num_categories, w = windows.size();
  WindowEvaluation ev;
  ev.probs = Tensor({n, c, w}, 0.0);
  ev.truth = Tensor({n, c, w}, 0.0);
  double loss = 0.0;
  for (std::size_t b0 = 0; b0 < w; b0 += batch_size) {
    const std::size_t b = std::min(batch_size, w - b0);
    Batch batch = make_batch(windows.subspan(b0, b));
    Tensor probs = model.predict(batch);
    loss += bce_loss(probs, batch.targets, 1);
    auto per = split_batch(probs, n, b);
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < c; ++l) {
          ev.probs[(i * c + l) * w + b0 + s] = per[s].at(i, l);
          ev.truth[(i * c + l) * w + b0 + s] = windows[b0 + s].target.at(i, l);
        }
  }
  ev.crime_loss = loss / static_cast<double>(w);
  ev.metrics = f1_scores(binarize(ev.probs, threshold), ev.truth, threshold);
  return ev;
}

namespace {

// Keeps freed tape memory in the process between steps.
void keep_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  });
#endif
}

}  // namespace

TrainResult train(const TrainConfig& cfg, ModelConfig model_cfg, const CrimeTensor& data, const TrainPriors& priors,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  keep_freed_memory();
  const std::size_t n = data.num_regions(), c = data.num_categories();
  if (model_cfg.num_regions == 0) model_cfg.num_regions = n;
  if (model_cfg.num_categories == 0) model_cfg.num_categories = c;
  if (model_cfg.num_regions != n || model_cfg.num_categories != c) {
    throw DimensionError("model expects " + std::to_string(model_cfg.num_regions) + " regions x " +
                         std::to_string(model_cfg.num_categories) + " categories, data has " + std::to_string(n) +
                         " x " + std::to_string(c));
  }
  model_cfg.use_dependency = !cfg.no_dependency;
  model_cfg.learn_graph = !cfg.no_graph_learning;

  TrainResult result;
  result.split = chrono_split(data.num_slots(), cfg.train_frac, cfg.val_frac, cfg.window);
  const auto train_windows = window_dataset(data, cfg.window, result.split.train);
  const auto val_windows = window_dataset(data, cfg.window, result.split.val);
  if (train_windows.empty()) throw DataError("training split holds no windows");

  ModelInputs inputs;
  inputs.pretrained = priors.pretrained;
  if (cfg.no_graph_learning) {
    if (!priors.distance_graph) throw ConfigError("graph learning is disabled but no distance graph was given");
    inputs.fixed_graph = priors.distance_graph;
  }
  Rng pca_rng(cfg.seed ^ 0x5bd1e995ULL);
  inputs.crime_embedding = init_crime_embedding_pca(
      data.slice(result.split.train.begin, result.split.train.end), model_cfg.embed_dim, pca_rng);

  HagenModel model(model_cfg, cfg.seed, std::move(inputs));
  AdamState adam;
  auto params = model.params().all();
  result.best = make_checkpoint(model, cfg, adam, 0);
  double best_macro = -1.0;

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double lambda = cfg.effective_lambda();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    HistoryRow row;
    row.epoch = epoch;
    row.lr = lr_schedule(epoch - 1, cfg);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double crime_sum = 0.0, homo_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - b0);
      Batch batch = make_batch(train_windows, std::span<const std::size_t>(order).subspan(b0, b));
      model.params().zero_grad();
      Tape tape;
      Objective obj = compute_objective(model, tape, batch, lambda);
      if (!std::isfinite(obj.breakdown.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(obj.total);
      for (const Parameter* p : params) {
        if (!p->grad.all_finite()) {
          throw NumericalError("non-finite gradient in parameter '" + p->name + "' at epoch " +
                               std::to_string(epoch));
        }
      }
      clip_grad_norm(params, cfg.clip_norm);
      adam_step(params, adam, row.lr);
      crime_sum += obj.breakdown.crime * static_cast<double>(b);
      homo_sum += obj.breakdown.homo * static_cast<double>(b);
    }
    row.crime_loss = crime_sum / static_cast<double>(order.size());
    row.homo_loss = homo_sum / static_cast<double>(order.size());

    if (!val_windows.empty()) {
      const auto ev = evaluate_windows(model, val_windows, cfg.threshold, cfg.batch_size);
      row.val_micro_f1 = ev.metrics.micro_f1;
      row.val_macro_f1 = ev.metrics.macro_f1;
    }
    row.mean_homophily =
        homophily_report(model.adjacency(), data.records, result.split.val.begin, result.split.val.end).mean;
    result.history.push_back(row);
    if (row.val_macro_f1 > best_macro) {
      best_macro = row.val_macro_f1;
      result.best = make_checkpoint(model, cfg, adam, epoch);
    }
    if (on_epoch) on_epoch(row);
  }
  result.last = make_checkpoint(model, cfg, adam, cfg.epochs);
  return result;
}

}  // namespace hagen
