#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hagen/autodiff.hpp"

namespace hagen {

/// Extended homophily ratio of a weighted digraph under one binary labeling.
///
/// For every node v with in-weight d_v = sum_u A[u][v] > 0, the same-label
/// share s_v = sum_{u : y_u = y_v} A[u][v] / d_v; the ratio is the mean of s_v
/// over those nodes. A graph where no node has an in-neighbour is vacuous and
/// scores 1.
struct HomophilyRatio {
  double ratio = 1.0;
  bool vacuous = true;
  std::size_t counted_nodes = 0;
};

HomophilyRatio homophily_ratio(const Tensor& adjacency, std::span<const double> labels);

/// Differentiable ratios for several labelings of the same graph; output
/// shape [label_sets.size()]. Vacuous entries are 1 with zero gradient.
Var homophily_ratios(Var adjacency, const std::vector<std::vector<double>>& label_sets);

/// Labelings for every (slot, category) pair of a crime tensor [N x C x T]
/// restricted to slots [t0, t1), ordered slot-major.
std::vector<std::vector<double>> slot_category_labels(const Tensor& crimes, std::size_t t0, std::size_t t1);

/// sum over (slot, category) of (ratio - 1)^2 for a window [N x C x K].
double homophily_loss(const Tensor& adjacency, const Tensor& window);
Var homophily_loss(Var adjacency, const Tensor& window);

struct HomophilyReport {
  Tensor per_slot_category;  // [K x C]
  double mean = 1.0;         // over non-vacuous entries
  double loss = 0.0;
  std::size_t vacuous_count = 0;
};

HomophilyReport homophily_report(const Tensor& adjacency, const Tensor& crimes, std::size_t t0, std::size_t t1);

}  // namespace hagen
