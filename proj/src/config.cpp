#include "hagen/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "hagen/errors.hpp"

namespace hagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Setter = std::function<void(const json&)>;

void apply(const json& j, const std::string& section, const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + section + "." + key + "': " + e.what());
    }
  }
}

std::size_t as_size(const json& v) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number");
  return v.get<double>();
}

bool as_bool(const json& v) {
  if (!v.is_boolean()) throw ConfigError("expected true or false");
  return v.get<bool>();
}

fs::path as_path(const json& v, const fs::path& base) {
  if (!v.is_string()) throw ConfigError("expected a path string");
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

ModelConfig model_config_from_json(const json& j, ModelConfig cfg) {
  apply(j, "model",
        {{"num_regions", [&](const json& v) { cfg.num_regions = as_size(v); }},
         {"num_categories", [&](const json& v) { cfg.num_categories = as_size(v); }},
         {"embed_dim", [&](const json& v) { cfg.embed_dim = as_size(v); }},
         {"hidden_dim", [&](const json& v) { cfg.hidden_dim = as_size(v); }},
         {"rnn_layers", [&](const json& v) { cfg.rnn_layers = as_size(v); }},
         {"diffusion_steps", [&](const json& v) { cfg.diffusion_steps = as_size(v); }},
         {"top_k", [&](const json& v) { cfg.top_k = as_size(v); }},
         {"decoder_layers", [&](const json& v) { cfg.decoder_layers = as_size(v); }},
         {"alpha", [&](const json& v) { cfg.alpha = as_real(v); }},
         {"use_dependency", [&](const json& v) { cfg.use_dependency = as_bool(v); }},
         {"learn_graph", [&](const json& v) { cfg.learn_graph = as_bool(v); }}});
  return cfg;
}

TrainConfig train_config_from_json(const json& j, TrainConfig cfg) {
  apply(j, "train",
        {{"lr0", [&](const json& v) { cfg.lr0 = as_real(v); }},
         {"decay_factor", [&](const json& v) { cfg.decay_factor = as_real(v); }},
         {"milestones",
          [&](const json& v) {
            if (!v.is_array()) throw ConfigError("milestones must be an array");
            cfg.milestones.clear();
            for (const auto& m : v) cfg.milestones.push_back(as_size(m));
          }},
         {"epochs", [&](const json& v) { cfg.epochs = as_size(v); }},
         {"batch_size", [&](const json& v) { cfg.batch_size = as_size(v); }},
         {"window", [&](const json& v) { cfg.window = as_size(v); }},
         {"lambda", [&](const json& v) { cfg.lambda = as_real(v); }},
         {"seed", [&](const json& v) { cfg.seed = as_size(v); }},
         {"clip_norm", [&](const json& v) { cfg.clip_norm = as_real(v); }},
         {"train_frac", [&](const json& v) { cfg.train_frac = as_real(v); }},
         {"val_frac", [&](const json& v) { cfg.val_frac = as_real(v); }},
         {"no_homophily", [&](const json& v) { cfg.no_homophily = as_bool(v); }},
         {"no_dependency", [&](const json& v) { cfg.no_dependency = as_bool(v); }},
         {"no_graph_learning", [&](const json& v) { cfg.no_graph_learning = as_bool(v); }}});
  return cfg;
}

json to_json(const ModelConfig& c) {
  return {{"num_regions", c.num_regions},       {"num_categories", c.num_categories},
          {"embed_dim", c.embed_dim},           {"hidden_dim", c.hidden_dim},
          {"rnn_layers", c.rnn_layers},         {"diffusion_steps", c.diffusion_steps},
          {"top_k", c.top_k},                   {"decoder_layers", c.decoder_layers},
          {"alpha", c.alpha},                   {"use_dependency", c.use_dependency},
          {"learn_graph", c.learn_graph}};
}

json to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"decay_factor", c.decay_factor},
          {"milestones", c.milestones},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"window", c.window},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm},
          {"train_frac", c.train_frac},
          {"val_frac", c.val_frac},
          {"no_homophily", c.no_homophily},
          {"no_dependency", c.no_dependency},
          {"no_graph_learning", c.no_graph_learning}};
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  RunConfig cfg;
  bool have_events = false, have_meta = false;
  apply(j, "root",
        {{"data",
          [&](const json& d) {
            apply(d, "data",
                  {{"events", [&](const json& v) { cfg.data.events = as_path(v, base_dir), have_events = true; }},
                   {"meta", [&](const json& v) { cfg.data.meta = as_path(v, base_dir), have_meta = true; }},
                   {"distance_graph", [&](const json& v) { cfg.data.distance_graph = as_path(v, base_dir); }},
                   {"poi_graph", [&](const json& v) { cfg.data.poi_graph = as_path(v, base_dir); }},
                   {"embeddings", [&](const json& v) {
                      if (!v.is_array()) throw ConfigError("data.embeddings must be an array of paths");
                      for (const auto& p : v) cfg.data.embeddings.push_back(as_path(p, base_dir));
                    }}});
          }},
         {"model", [&](const json& v) { cfg.model = model_config_from_json(v); }},
         {"train", [&](const json& v) { cfg.train = train_config_from_json(v); }},
         {"eval", [&](const json& e) {
            apply(e, "eval", {{"threshold", [&](const json& v) { cfg.train.threshold = as_real(v); }}});
          }}});
  if (!have_events) throw ConfigError("data.events is required");
  if (!have_meta) throw ConfigError("data.meta is required");
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

json to_json(const RunConfig& cfg) {
  json data = {{"events", cfg.data.events.string()}, {"meta", cfg.data.meta.string()}};
  if (cfg.data.distance_graph) data["distance_graph"] = cfg.data.distance_graph->string();
  if (cfg.data.poi_graph) data["poi_graph"] = cfg.data.poi_graph->string();
  data["embeddings"] = json::array();
  for (const auto& p : cfg.data.embeddings) data["embeddings"].push_back(p.string());
  return {{"data", data},
          {"model", to_json(cfg.model)},
          {"train", to_json(cfg.train)},
          {"eval", {{"threshold", cfg.train.threshold}}}};
}

LoadedRun load_run_data(const DataConfig& data) {
  LoadedRun run;
  run.meta = read_meta(data.meta);
  run.crimes = ingest_events(data.events, run.meta);
  const std::size_t n = run.meta.num_regions;

  std::vector<Tensor> blocks;
  for (const auto& path : data.embeddings) blocks.push_back(load_embeddings(path, n));
  auto graph = [&](const fs::path& path) {
    auto g = load_graph(path, n);
    for (auto& w : g.warnings) run.warnings.push_back(path.string() + ": " + w);
    return g.weights;
  };
  if (data.distance_graph) run.priors.distance_graph = graph(*data.distance_graph);
  if (blocks.empty()) {
    if (run.priors.distance_graph) blocks.push_back(graph_embedding(*run.priors.distance_graph));
    if (data.poi_graph) blocks.push_back(graph_embedding(graph(*data.poi_graph)));
  }
  if (!blocks.empty()) {
    std::size_t width = 0;
    for (const auto& b : blocks) width += b.cols();
    Tensor pre({n, width}, 0.0);
    std::size_t col = 0;
    for (const auto& b : blocks) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < b.cols(); ++k) pre.at(i, col + k) = b.at(i, k);
      col += b.cols();
    }
    run.priors.pretrained = std::move(pre);
  }
  return run;
}

}  // namespace hagen
