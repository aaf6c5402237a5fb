#include "hagen/homophily.hpp"

#include "hagen/errors.hpp"

namespace hagen {
namespace {

void check_inputs(const Tensor& a, std::size_t num_labels) {
  a.require_matrix("homophily");
  if (a.rows() != a.cols()) throw DimensionError("homophily: adjacency must be square, got " + shape_to_string(a.shape()));
  if (num_labels != a.rows()) {
    throw DimensionError("homophily: " + std::to_string(num_labels) + " labels for " + std::to_string(a.rows()) +
                         " nodes");
  }
}

// In-weight and same-label in-weight per node.
void neighbour_sums(const Tensor& a, std::span<const double> labels, std::vector<double>& den,
                    std::vector<double>& num) {
  const std::size_t n = a.rows();
  den.assign(n, 0.0);
  num.assign(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const double w = a.at(u, v);
      if (w == 0.0) continue;
      den[v] += w;
      if (labels[u] == labels[v]) num[v] += w;
    }
  }
}

HomophilyRatio ratio_from_sums(const std::vector<double>& den, const std::vector<double>& num) {
  HomophilyRatio r;
  double acc = 0.0;
  for (std::size_t v = 0; v < den.size(); ++v) {
    if (den[v] > 0.0) {
      acc += num[v] / den[v];
      ++r.counted_nodes;
    }
  }
  if (r.counted_nodes > 0) {
    r.ratio = acc / static_cast<double>(r.counted_nodes);
    r.vacuous = false;
  }
  return r;
}

}  // namespace

HomophilyRatio homophily_ratio(const Tensor& adjacency, std::span<const double> labels) {
  check_inputs(adjacency, labels.size());
  for (double v : adjacency.values()) {
    if (v < 0.0) throw DataError("homophily: adjacency must be nonnegative");
  }
  std::vector<double> den, num;
  neighbour_sums(adjacency, labels, den, num);
  return ratio_from_sums(den, num);
}

Var homophily_ratios(Var adjacency, const std::vector<std::vector<double>>& label_sets) {
  const Tensor& a = adjacency.value();
  if (label_sets.empty()) throw ContractError("homophily_ratios: no labelings");
  for (const auto& labels : label_sets) check_inputs(a, labels.size());

  Tensor out({label_sets.size()});
  std::vector<double> den, num;
  for (std::size_t s = 0; s < label_sets.size(); ++s) {
    neighbour_sums(a, label_sets[s], den, num);
    out[s] = ratio_from_sums(den, num).ratio;
  }
  const auto ia = adjacency.id();
  return adjacency.tape().record(std::move(out), {adjacency}, [ia, label_sets](Tape& t, const Tensor&, const Tensor& g) {
    // d ratio / d A[u][v] = (same(u, v) - s_v) / (d_v * |counted|) for counted v.
    Tensor* ga = t.grad_slot(ia);
    const Tensor& a = t.value(ia);
    const std::size_t n = a.rows();
    std::vector<double> den, num;
    for (std::size_t s = 0; s < label_sets.size(); ++s) {
      if (g[s] == 0.0) continue;
      const auto& labels = label_sets[s];
      neighbour_sums(a, labels, den, num);
      const auto r = ratio_from_sums(den, num);
      if (r.vacuous) continue;
      const double inv_count = 1.0 / static_cast<double>(r.counted_nodes);
      for (std::size_t v = 0; v < n; ++v) {
        if (!(den[v] > 0.0)) continue;
        const double share = num[v] / den[v];
        const double coef = g[s] * inv_count / den[v];
        for (std::size_t u = 0; u < n; ++u) {
          const double same = labels[u] == labels[v] ? 1.0 : 0.0;
          ga->at(u, v) += coef * (same - share);
        }
      }
    }
  });
}

std::vector<std::vector<double>> slot_category_labels(const Tensor& crimes, std::size_t t0, std::size_t t1) {
  if (crimes.rank() != 3) throw DimensionError("expected a crime tensor [N x C x T], got " + shape_to_string(crimes.shape()));
  const std::size_t n = crimes.shape()[0], c = crimes.shape()[1], t = crimes.shape()[2];
  if (t0 >= t1 || t1 > t) throw DimensionError("slot range out of bounds");
  std::vector<std::vector<double>> sets;
  sets.reserve((t1 - t0) * c);
  for (std::size_t k = t0; k < t1; ++k) {
    for (std::size_t l = 0; l < c; ++l) {
      std::vector<double> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = crimes[(i * c + l) * t + k];
      sets.push_back(std::move(labels));
    }
  }
  return sets;
}

double homophily_loss(const Tensor& adjacency, const Tensor& window) {
  const auto sets = slot_category_labels(window, 0, window.shape().at(2));
  double loss = 0.0;
  for (const auto& labels : sets) {
    const double d = homophily_ratio(adjacency, labels).ratio - 1.0;
    loss += d * d;
  }
  return loss;
}

Var homophily_loss(Var adjacency, const Tensor& window) {
  Var r = homophily_ratios(adjacency, slot_category_labels(window, 0, window.shape().at(2)));
  Var d = add_scalar(r, -1.0);
  return sum(hadamard(d, d));
}

HomophilyReport homophily_report(const Tensor& adjacency, const Tensor& crimes, std::size_t t0, std::size_t t1) {
  const std::size_t c = crimes.shape().at(1);
  const auto sets = slot_category_labels(crimes, t0, t1);
  HomophilyReport rep;
  rep.per_slot_category = Tensor({t1 - t0, c});
  double acc = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto r = homophily_ratio(adjacency, sets[s]);
    rep.per_slot_category[s] = r.ratio;
    rep.loss += (r.ratio - 1.0) * (r.ratio - 1.0);
    if (r.vacuous) {
      ++rep.vacuous_count;
    } else {
      acc += r.ratio;
      ++counted;
    }
  }
  rep.mean = counted ? acc / static_cast<double>(counted) : 1.0;
  return rep;
}

}  // namespace hagen
