#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hagen/tensor.hpp"

namespace hagen {

/// Binary occurrence records Y[region][category][slot], stored row-major as a
/// rank-3 tensor [N x C x T].
struct CrimeTensor {
  Tensor records;
  std::size_t slot_duration_hours = 24;
  std::optional<std::string> origin_timestamp;

  std::size_t num_regions() const { return records.shape()[0]; }
  std::size_t num_categories() const { return records.shape()[1]; }
  std::size_t num_slots() const { return records.shape()[2]; }

  double at(std::size_t region, std::size_t category, std::size_t slot) const {
    return records[(region * num_categories() + category) * num_slots() + slot];
  }
  double& at(std::size_t region, std::size_t category, std::size_t slot) {
    return records[(region * num_categories() + category) * num_slots() + slot];
  }

  /// Slots [t0, t1) as a new [N x C x (t1 - t0)] tensor.
  Tensor slice(std::size_t t0, std::size_t t1) const;
  /// Records of one slot as [N x C].
  Tensor slot(std::size_t t) const;
};

struct DatasetMeta {
  std::size_t num_regions = 0;
  std::size_t num_categories = 0;
  std::size_t num_slots = 0;
  std::size_t slot_duration_hours = 24;
  std::vector<std::string> region_names;
  std::vector<std::string> category_names;
  std::optional<std::string> origin_timestamp;
};

DatasetMeta read_meta(const std::filesystem::path& path);
void write_meta(const DatasetMeta& meta, const std::filesystem::path& path);

/// Reads `time_slot,region_id,category_id` rows. Duplicate rows are idempotent.
CrimeTensor ingest_events(const std::filesystem::path& events_path, const DatasetMeta& meta);
CrimeTensor ingest_events(const std::filesystem::path& events_path, const std::filesystem::path& meta_path);
void write_events(const CrimeTensor& crimes, const std::filesystem::path& path);

struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct SplitRanges {
  SlotRange train;
  SlotRange val;
  SlotRange test;
};

/// Contiguous chronological split: train gets floor(T * train_frac) slots,
/// validation floor(T * val_frac), test the remainder. With `window` > 0 each
/// range must also hold at least window + 1 slots.
SplitRanges chrono_split(std::size_t num_slots, double train_frac, double val_frac, std::size_t window = 0);

/// One forecasting sample: K input slots and the slot that follows them.
struct Window {
  std::size_t start = 0;  // first input slot
  Tensor inputs;          // [N x C x K]
  Tensor target;          // [N x C]
};

/// One window per start slot t with t + K inside the range.
std::vector<Window> window_dataset(const CrimeTensor& crimes, std::size_t window, SlotRange range);

struct LoadedGraph {
  Tensor weights;
  std::vector<std::string> warnings;
};

/// Reads `src,dst,weight` rows into a dense [N x N] matrix. Self-loops are
/// dropped and duplicate pairs keep the last row; both produce warnings.
LoadedGraph load_graph(const std::filesystem::path& path, std::size_t num_regions);
/// Writes the nonzero entries of a square matrix, row-major.
void write_graph(const Tensor& weights, const std::filesystem::path& path);

/// Reads `region_id,e0,e1,...` rows, one per region.
Tensor load_embeddings(const std::filesystem::path& path, std::size_t num_regions);
void write_embeddings(const Tensor& embeddings, const std::filesystem::path& path);

/// Positional embedding of a graph: row i of the row-normalized matrix
/// (A + A^T + I). Used as a stand-in pretrained prior when no externally
/// pre-trained embedding is available.
Tensor graph_embedding(const Tensor& adjacency);

// ---------------------------------------------------------------------------
// Planted-homophily synthetic data
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t num_regions = 20;
  std::size_t num_categories = 3;
  std::size_t num_slots = 400;
  std::size_t num_clusters = 4;
  std::size_t period = 7;
  double flip_noise = 0.1;
  std::uint64_t seed = 0;
  std::size_t slot_duration_hours = 24;

  void validate() const;
};

struct SynthDataset {
  CrimeTensor crimes;
  DatasetMeta meta;
  std::vector<std::size_t> clusters;
  /// Unit edges from lower to higher region index inside each cluster.
  Tensor ground_truth_graph;
  /// Symmetric graph whose edges join regions of different clusters.
  Tensor mismatched_graph;
};

/// Regions are split into contiguous clusters (region i -> i * B / N). Each
/// cluster draws a Bernoulli(1/2) template of length `period` per category;
/// a region's series repeats its cluster template with independent
/// Bernoulli(flip_noise) flips.
SynthDataset synth_generate(const SynthSpec& spec);

/// Writes events.csv, meta.json, clusters.csv, ground_truth_graph.csv,
/// distance_graph.csv (the mismatched graph) and embeddings.csv (its
/// graph_embedding) into `dir`.
void write_synth_bundle(const SynthDataset& data, const std::filesystem::path& dir);

void write_clusters(const std::vector<std::size_t>& clusters, const std::filesystem::path& path);

}  // namespace hagen
