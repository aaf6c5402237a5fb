#include "hagen/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <nlohmann/json.hpp>

#include "hagen/config.hpp"
#include "hagen/errors.hpp"
#include "hagen/gradcheck.hpp"
#include "hagen/homophily.hpp"
#include "hagen/training.hpp"

namespace hagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradcheckTolerance = 1e-4;
constexpr double kHoursPerMonth = 720.0;

void apply_thread_env() {
  if (const char* env = std::getenv("HAGEN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("HAGEN_THREADS must be a positive integer");
    kernels::set_max_threads(static_cast<unsigned>(v));
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct DataDir {
  DatasetMeta meta;
  CrimeTensor crimes;
};

DataDir load_data_dir(const fs::path& dir) {
  DataDir d;
  d.meta = read_meta(dir / "meta.json");
  d.crimes = ingest_events(dir / "events.csv", d.meta);
  return d;
}

void check_compatible(const Checkpoint& ck, const DatasetMeta& meta) {
  if (ck.model.num_regions != meta.num_regions || ck.model.num_categories != meta.num_categories) {
    throw DimensionError("checkpoint was trained on " + std::to_string(ck.model.num_regions) + " regions x " +
                         std::to_string(ck.model.num_categories) + " categories, data has " +
                         std::to_string(meta.num_regions) + " x " + std::to_string(meta.num_categories));
  }
}

SlotRange pick_split(const SplitRanges& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  return s.test;
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed, bool quiet,
              std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) cfg.train.seed = *seed;
  LoadedRun run = load_run_data(cfg.data);
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  fs::create_directories(out_dir);

  auto log = [&](const HistoryRow& r) {
    if (quiet) return;
    err << "epoch " << r.epoch << " lr " << r.lr << " crime " << r.crime_loss << " homo " << r.homo_loss
        << " val_micro " << r.val_micro_f1 << " val_macro " << r.val_macro_f1 << " homophily " << r.mean_homophily
        << '\n';
  };
  TrainResult result = train(cfg.train, cfg.model, run.crimes, run.priors, log);

  cfg.model = result.last.model;
  write_json(to_json(cfg), out_dir / "resolved_config.json");
  save_checkpoint(result.best, out_dir / "best.ckpt.json");
  save_checkpoint(result.last, out_dir / "last.ckpt.json");
  write_history(result.history, out_dir / "history.csv");
  out << "best epoch " << result.best.epoch << ", wrote " << out_dir.string() << '\n';
  return 0;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data_dir, const std::string& split_name,
             std::optional<fs::path> out_dir, std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  DataDir data = load_data_dir(data_dir);
  check_compatible(ck, data.meta);
  auto model = restore_model(ck);
  const SplitRanges split = chrono_split(data.crimes.num_slots(), ck.train.train_frac, ck.train.val_frac,
                                         ck.train.window);
  const SlotRange range = pick_split(split, split_name);
  const auto windows = window_dataset(data.crimes, ck.train.window, range);
  const auto ev = evaluate_windows(*model, windows, ck.train.threshold, ck.train.batch_size);

  const fs::path dir = out_dir ? *out_dir : ckpt_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  write_metrics_json(ev.metrics, dir / ("metrics_" + split_name + ".json"));
  write_category_csv(ev.metrics, dir / ("category_f1_" + split_name + ".csv"));

  // Windows grouped by the month their target slot falls in, counted from the split start.
  const std::size_t hours = std::max<std::size_t>(1, data.crimes.slot_duration_hours);
  const auto period_slots =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kHoursPerMonth / static_cast<double>(hours))));
  const std::size_t n = ck.model.num_regions, c = ck.model.num_categories, w = windows.size();
  std::ofstream periods(dir / ("periods_" + split_name + ".csv"));
  if (!periods) throw DataError("cannot write period report in " + dir.string());
  periods << std::setprecision(17) << "period,first_target_slot,last_target_slot,windows,micro_f1,macro_f1\n";
  for (std::size_t first = 0; first < w;) {
    const std::size_t period = (windows[first].start + ck.train.window - range.begin) / period_slots;
    std::size_t last = first;
    while (last + 1 < w && (windows[last + 1].start + ck.train.window - range.begin) / period_slots == period) ++last;
    const std::size_t count = last - first + 1;
    Tensor p({n, c, count}, 0.0), t({n, c, count}, 0.0);
    for (std::size_t i = 0; i < n * c; ++i)
      for (std::size_t k = 0; k < count; ++k) {
        p[i * count + k] = ev.probs[i * w + first + k];
        t[i * count + k] = ev.truth[i * w + first + k];
      }
    const auto m = f1_scores(binarize(p, ck.train.threshold), t, ck.train.threshold);
    periods << period << ',' << windows[first].start + ck.train.window << ',' << windows[last].start + ck.train.window
            << ',' << count << ',' << m.micro_f1 << ',' << m.macro_f1 << '\n';
    first = last + 1;
  }

  out << std::setprecision(6) << "split " << split_name << " windows " << w << " micro_f1 " << ev.metrics.micro_f1
      << " macro_f1 " << ev.metrics.macro_f1 << " crime_loss " << ev.crime_loss << '\n';
  return 0;
}

int cmd_forecast(const fs::path& ckpt_path, const fs::path& data_dir, const fs::path& out_path, std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  DataDir data = load_data_dir(data_dir);
  check_compatible(ck, data.meta);
  auto model = restore_model(ck);
  const std::size_t t = data.crimes.num_slots(), k = ck.train.window;
  if (t < k) throw DataError("data holds " + std::to_string(t) + " slots, the model needs " + std::to_string(k));
  const std::size_t n = ck.model.num_regions, c = ck.model.num_categories;
  std::vector<Window> w{{t - k, data.crimes.slice(t - k, t), Tensor({n, c}, 0.0)}};
  const Tensor probs = model->predict(make_batch(w));

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream csv(out_path);
  if (!csv) throw DataError("cannot write " + out_path.string());
  csv << std::setprecision(17) << "region_id,category_id,probability,predicted_label\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l) {
      const double p = probs.at(i, l);
      csv << i << ',' << l << ',' << p << ',' << (p >= ck.train.threshold ? 1 : 0) << '\n';
    }
  out << "forecast for slot " << t << " written to " << out_path.string() << '\n';
  return 0;
}

int cmd_synth(const SynthSpec& spec, const fs::path& out_dir, std::ostream& out) {
  const auto data = synth_generate(spec);
  write_synth_bundle(data, out_dir);
  out << "wrote synthetic bundle to " << out_dir.string() << '\n';
  return 0;
}

int cmd_graph_export(const fs::path& ckpt_path, const fs::path& out_dir, std::optional<fs::path> data_dir,
                     const std::string& split_name, std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  auto model = restore_model(ck);
  const Tensor a = model->adjacency();
  fs::create_directories(out_dir);
  write_graph(a, out_dir / "graph.csv");

  const std::size_t n = a.rows();
  std::size_t edges = 0, max_out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < n; ++j) row += a.at(i, j) != 0.0;
    edges += row;
    max_out = std::max(max_out, row);
  }
  json report = {{"num_regions", n},
                 {"edges", edges},
                 {"max_out_degree", max_out},
                 {"top_k", effective_top_k(ck.model.top_k, n)}};
  if (data_dir) {
    DataDir data = load_data_dir(*data_dir);
    check_compatible(ck, data.meta);
    const auto split =
        chrono_split(data.crimes.num_slots(), ck.train.train_frac, ck.train.val_frac, ck.train.window);
    const SlotRange range = pick_split(split, split_name);
    const auto h = homophily_report(a, data.crimes.records, range.begin, range.end);
    json rows = json::array();
    for (std::size_t k = 0; k < h.per_slot_category.rows(); ++k) {
      json row = json::array();
      for (std::size_t l = 0; l < h.per_slot_category.cols(); ++l) row.push_back(h.per_slot_category.at(k, l));
      rows.push_back(row);
    }
    report["split"] = split_name;
    report["first_slot"] = range.begin;
    report["mean"] = h.mean;
    report["loss"] = h.loss;
    report["vacuous_count"] = h.vacuous_count;
    report["per_slot_category"] = rows;
  }
  write_json(report, out_dir / "homophily.json");
  out << edges << " edges written to " << (out_dir / "graph.csv").string() << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t seeds, std::ostream& out) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    for (const auto& c : run_gradcheck_suite(seed + s)) {
      out << std::setprecision(3) << "seed " << c.seed << ' ' << std::left << std::setw(26) << c.name
          << " max_rel_error " << std::scientific << c.result.max_rel_error << std::defaultfloat;
      if (c.result.max_rel_error >= kGradcheckTolerance) {
        out << " FAIL at " << c.result.worst_param << '[' << c.result.worst_index << "] analytic "
            << c.result.analytic << " numeric " << c.result.numeric;
      }
      out << '\n';
      worst = std::max(worst, c.result.max_rel_error);
    }
  }
  out << "worst relative error " << std::scientific << worst << std::defaultfloat << '\n';
  return worst < kGradcheckTolerance ? 0 : 3;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crime forecasting on adaptive region graphs"};
  app.require_subcommand(1);

  fs::path config, out_path, ckpt, data_dir;
  std::optional<fs::path> eval_out, export_data;
  std::optional<std::uint64_t> train_seed;
  std::string split = "test", export_split = "test";
  bool quiet = false;
  SynthSpec spec;
  std::uint64_t gc_seed = 0;
  std::size_t gc_seeds = 1;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run configuration");
  train_cmd->add_option("--config", config, "Run configuration (JSON)")->required();
  train_cmd->add_option("--out", out_path, "Output directory for checkpoints and history")->required();
  train_cmd->add_option("--seed", train_seed, "Override train.seed from the config");
  train_cmd->add_flag("--quiet", quiet, "Suppress per-epoch progress on stderr");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on one split of a dataset directory");
  eval_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "Directory holding events.csv and meta.json")->required();
  eval_cmd->add_option("--split", split, "Split to score")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report directory (default: the checkpoint's directory)");

  auto* forecast_cmd = app.add_subcommand("forecast", "Forecast the slot after the last one in the data");
  forecast_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  forecast_cmd->add_option("--data", data_dir, "Directory holding events.csv and meta.json")->required();
  forecast_cmd->add_option("--out", out_path, "Output CSV")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-homophily synthetic dataset");
  synth_cmd->add_option("--regions", spec.num_regions, "Number of regions N")->capture_default_str();
  synth_cmd->add_option("--categories", spec.num_categories, "Number of crime categories C")->capture_default_str();
  synth_cmd->add_option("--slots", spec.num_slots, "Number of time slots T")->capture_default_str();
  synth_cmd->add_option("--clusters", spec.num_clusters, "Number of region clusters B")->capture_default_str();
  synth_cmd->add_option("--period", spec.period, "Template period in slots")->capture_default_str();
  synth_cmd->add_option("--noise", spec.flip_noise, "Label flip probability p in [0, 0.5)")->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--slot-hours", spec.slot_duration_hours, "Slot duration in hours")->capture_default_str();
  synth_cmd->add_option("--out", out_path, "Output directory")->required();

  auto* export_cmd = app.add_subcommand("graph-export", "Export the learned region graph");
  export_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  export_cmd->add_option("--out", out_path, "Output directory")->required();
  export_cmd->add_option("--data", export_data, "Dataset directory for the homophily report");
  export_cmd->add_option("--split", export_split, "Split used for the homophily report")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();

  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks over every module");
  gc_cmd->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  gc_cmd->add_option("--seeds", gc_seeds, "Number of consecutive seeds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_thread_env();
    if (train_cmd->parsed()) return cmd_train(config, out_path, train_seed, quiet, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ckpt, data_dir, split, eval_out, out);
    if (forecast_cmd->parsed()) return cmd_forecast(ckpt, data_dir, out_path, out);
    if (synth_cmd->parsed()) return cmd_synth(spec, out_path, out);
    if (export_cmd->parsed()) return cmd_graph_export(ckpt, out_path, export_data, export_split, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_seeds, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace hagen
