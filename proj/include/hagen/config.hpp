#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hagen/model.hpp"
#include "hagen/training.hpp"

namespace hagen {

/// Input files of a run. Relative paths resolve against the config file.
struct DataConfig {
  std::filesystem::path events;
  std::filesystem::path meta;
  std::optional<std::filesystem::path> distance_graph;
  std::optional<std::filesystem::path> poi_graph;
  /// Pretrained region embedding files, concatenated column-wise.
  std::vector<std::filesystem::path> embeddings;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;  // train.threshold mirrors the "eval" section
};

/// Strict readers: unknown keys and wrongly typed values are ConfigErrors.
/// Missing keys keep the defaults passed in.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig defaults = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});
nlohmann::json to_json(const ModelConfig& cfg);
/// Omits the threshold, which lives in the "eval" section.
nlohmann::json to_json(const TrainConfig& cfg);

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
/// The fully resolved configuration with absolute paths and every default spelled out.
nlohmann::json to_json(const RunConfig& cfg);

/// Loads everything the data section points at.
struct LoadedRun {
  DatasetMeta meta;
  CrimeTensor crimes;
  TrainPriors priors;
  std::vector<std::string> warnings;
};

LoadedRun load_run_data(const DataConfig& data);

}  // namespace hagen
