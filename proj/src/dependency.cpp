#include "hagen/dependency.hpp"

#include <cmath>
#include <numeric>

#include "hagen/errors.hpp"

namespace hagen {
namespace {

constexpr int kPowerIterations = 200;
constexpr double kPowerTolerance = 1e-9;
constexpr double kNoiseStd = 0.01;

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

Tensor init_crime_embedding_pca(const Tensor& train_crimes, std::size_t embed_dim, Rng& rng) {
  if (embed_dim == 0) throw ConfigError("crime embedding dimension must be positive");
  if (train_crimes.rank() != 3) {
    throw DimensionError("PCA init expects [N x C x T] records, got " + shape_to_string(train_crimes.shape()));
  }
  const std::size_t n = train_crimes.shape()[0], c = train_crimes.shape()[1], t = train_crimes.shape()[2];
  if (t < 2) throw DataError("PCA init needs at least 2 training slots");

  // rows[l] = records of category l over (region, slot)
  const std::size_t width = n * t;
  std::vector<std::vector<double>> rows(c, std::vector<double>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l)
      for (std::size_t k = 0; k < t; ++k) rows[l][i * t + k] = train_crimes[(i * c + l) * t + k];
  for (std::size_t j = 0; j < width; ++j) {
    double mean = 0.0;
    for (std::size_t l = 0; l < c; ++l) mean += rows[l][j];
    mean /= static_cast<double>(c);
    for (std::size_t l = 0; l < c; ++l) rows[l][j] -= mean;
  }

  std::vector<double> gram(c * c, 0.0);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = a; b < c; ++b) {
      const double v = std::inner_product(rows[a].begin(), rows[a].end(), rows[b].begin(), 0.0);
      gram[a * c + b] = gram[b * c + a] = v;
    }
  double trace = 0.0;
  for (std::size_t a = 0; a < c; ++a) trace += gram[a * c + a];

  Tensor out({c, embed_dim}, 0.0);
  const std::size_t wanted = std::min(embed_dim, c);
  std::normal_distribution<double> start(0.0, 1.0);
  std::size_t rank = 0;
  for (std::size_t comp = 0; comp < wanted; ++comp) {
    std::vector<double> v(c);
    for (auto& x : v) x = start(rng);
    double nv = norm(v);
    for (auto& x : v) x /= nv;
    double lambda = 0.0;
    for (int it = 0; it < kPowerIterations; ++it) {
      std::vector<double> w(c, 0.0);
      for (std::size_t a = 0; a < c; ++a)
        for (std::size_t b = 0; b < c; ++b) w[a] += gram[a * c + b] * v[b];
      const double nw = norm(w);
      if (nw == 0.0) {
        lambda = 0.0;
        break;
      }
      double delta = 0.0;
      for (std::size_t a = 0; a < c; ++a) {
        w[a] /= nw;
        delta = std::max(delta, std::abs(w[a] - v[a]));
      }
      v = std::move(w);
      lambda = nw;
      if (delta < kPowerTolerance) break;
    }
    if (!(lambda > kPowerTolerance * std::max(1.0, trace))) break;
    // projection of the centered rows onto the component: sqrt(lambda) * v
    const double s = std::sqrt(lambda);
    for (std::size_t a = 0; a < c; ++a) out.at(a, comp) = s * v[a];
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) gram[a * c + b] -= lambda * v[a] * v[b];
    ++rank;
  }
  std::normal_distribution<double> noise(0.0, kNoiseStd);
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t d = rank; d < embed_dim; ++d) out.at(a, d) = noise(rng);
  return out;
}

CrimeEmbedding init_crime_embedding(ParameterSet& params, Tensor initial, Rng& rng) {
  initial.require_matrix("crime embedding");
  const std::size_t d = initial.cols();
  CrimeEmbedding ce;
  ce.embedding = &params.add("dependency.crime_embedding", std::move(initial));
  // Entries drawn from N(0, 1/D^2).
  ce.transition = &params.add("dependency.transition", normal_tensor({d, d}, 1.0 / static_cast<double>(d), rng));
  return ce;
}

Var inter_dependency(Var region_base, Var crime_embedding, Var transition) {
  if (region_base.value().cols() != crime_embedding.value().cols()) {
    throw DimensionError("inter_dependency: region embedding " + shape_to_string(region_base.shape()) +
                         " vs crime embedding " + shape_to_string(crime_embedding.shape()));
  }
  return softmax_rows(matmul(matmul(region_base, transition), transpose(crime_embedding)));
}

Var weight_input(Var dependency, Var slot_records) {
  if (dependency.shape() != slot_records.shape()) {
    throw DimensionError("weight_input: dependency " + shape_to_string(dependency.shape()) + " vs records " +
                         shape_to_string(slot_records.shape()));
  }
  return hadamard(dependency, slot_records);
}

Var repeat_rows(Var a, std::size_t batch) {
  if (batch == 1) return a;
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<std::size_t> index;
  index.reserve(r * batch * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < c; ++j) index.push_back(i * c + j);
  return gather(a, std::move(index), {r * batch, c});
}

}  // namespace hagen
