#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hagen/tensor.hpp"

namespace hagen {

/// 1 where p >= threshold, else 0. The threshold must lie in (0, 1).
Tensor binarize(const Tensor& probs, double threshold = 0.5);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  /// 2TP / (2TP + FP + FN), or 0 when all counts are zero.
  double f1() const;
};

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_category_f1;
  double threshold = 0.5;
  ConfusionCounts total;
  std::vector<ConfusionCounts> per_category;
  /// Categories with TP = FP = FN = 0; they score 0 in the macro average.
  std::vector<std::size_t> zero_support_categories;
};

/// F1 scores over binary [N x C x T] (or [N x C]) predictions. Micro pools all
/// cells; macro averages per-category F1 pooled over regions and slots.
MetricsReport f1_scores(const Tensor& pred, const Tensor& truth, double threshold = 0.5);

/// Writes the report as JSON.
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);
/// `category_id,f1,tp,fp,fn`
void write_category_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace hagen
