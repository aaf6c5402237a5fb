#include "hagen/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hagen/errors.hpp"
#include "hagen/random.hpp"

namespace hagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

// Line-oriented CSV reader with a mandatory header row.
class CsvReader {
 public:
  CsvReader(const fs::path& path, const std::vector<std::string>& expected_prefix) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in_, line)) {
      // A zero-byte file has no rows.
      header_ = expected_prefix;
      return;
    }
    ++line_no_;
    header_ = split_csv(line);
    if (header_.size() < expected_prefix.size()) throw ParseError(where() + ": unexpected header '" + trim(line) + "'");
    for (std::size_t i = 0; i < expected_prefix.size(); ++i) {
      if (header_[i] != expected_prefix[i]) throw ParseError(where() + ": unexpected header '" + trim(line) + "'");
    }
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (trim(line).empty()) continue;
      fields = split_csv(line);
      if (fields.size() != header_.size()) {
        throw ParseError(where() + ": expected " + std::to_string(header_.size()) + " fields, got " +
                         std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::size_t parse_index(const std::string& s) const {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty()) throw ParseError(where() + ": malformed integer '" + s + "'");
    return v;
  }

  double parse_real(const std::string& s) const {
    if (s.empty()) throw ParseError(where() + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) throw ParseError(where() + ": malformed number '" + s + "'");
    return v;
  }

  std::string where() const { return path_.string() + ":" + std::to_string(line_no_); }
  const std::vector<std::string>& header() const { return header_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor CrimeTensor::slice(std::size_t t0, std::size_t t1) const {
  if (t0 >= t1 || t1 > num_slots()) throw DimensionError("slot slice out of range");
  const std::size_t n = num_regions(), c = num_categories(), k = t1 - t0;
  Tensor out({n, c, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l)
      for (std::size_t s = 0; s < k; ++s) out[(i * c + l) * k + s] = at(i, l, t0 + s);
  return out;
}

Tensor CrimeTensor::slot(std::size_t t) const {
  const std::size_t n = num_regions(), c = num_categories();
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l) out.at(i, l) = at(i, l, t);
  return out;
}

DatasetMeta read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  DatasetMeta m;
  try {
    m.num_regions = j.at("num_regions").get<std::size_t>();
    m.num_categories = j.at("num_categories").get<std::size_t>();
    m.num_slots = j.at("num_slots").get<std::size_t>();
    m.slot_duration_hours = j.value("slot_duration_hours", std::size_t{24});
    if (j.contains("region_names")) m.region_names = j.at("region_names").get<std::vector<std::string>>();
    if (j.contains("category_names")) m.category_names = j.at("category_names").get<std::vector<std::string>>();
    if (j.contains("origin_timestamp") && !j.at("origin_timestamp").is_null())
      m.origin_timestamp = j.at("origin_timestamp").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (m.num_regions == 0 || m.num_categories == 0 || m.num_slots == 0 || m.slot_duration_hours == 0) {
    throw DataError(path.string() + ": counts and slot_duration_hours must be positive");
  }
  if (m.region_names.empty())
    for (std::size_t i = 0; i < m.num_regions; ++i) m.region_names.push_back("region_" + std::to_string(i));
  if (m.category_names.empty())
    for (std::size_t i = 0; i < m.num_categories; ++i) m.category_names.push_back("category_" + std::to_string(i));
  if (m.region_names.size() != m.num_regions || m.category_names.size() != m.num_categories) {
    throw DataError(path.string() + ": name lists must match num_regions and num_categories");
  }
  return m;
}

void write_meta(const DatasetMeta& m, const fs::path& path) {
  json j;
  j["num_regions"] = m.num_regions;
  j["num_categories"] = m.num_categories;
  j["num_slots"] = m.num_slots;
  j["slot_duration_hours"] = m.slot_duration_hours;
  j["region_names"] = m.region_names;
  j["category_names"] = m.category_names;
  if (m.origin_timestamp) j["origin_timestamp"] = *m.origin_timestamp;
  open_output(path) << j.dump(2) << '\n';
}

CrimeTensor ingest_events(const fs::path& events_path, const DatasetMeta& meta) {
  CrimeTensor y;
  y.records = Tensor({meta.num_regions, meta.num_categories, meta.num_slots}, 0.0);
  y.slot_duration_hours = meta.slot_duration_hours;
  y.origin_timestamp = meta.origin_timestamp;
  CsvReader csv(events_path, {"time_slot", "region_id", "category_id"});
  std::vector<std::string> f;
  while (csv.next(f)) {
    const auto t = csv.parse_index(f[0]);
    const auto r = csv.parse_index(f[1]);
    const auto c = csv.parse_index(f[2]);
    if (t >= meta.num_slots) throw DataError(csv.where() + ": time_slot " + f[0] + " out of range");
    if (r >= meta.num_regions) throw DataError(csv.where() + ": region_id " + f[1] + " out of range");
    if (c >= meta.num_categories) throw DataError(csv.where() + ": category_id " + f[2] + " out of range");
    y.at(r, c, t) = 1.0;
  }
  return y;
}

CrimeTensor ingest_events(const fs::path& events_path, const fs::path& meta_path) {
  return ingest_events(events_path, read_meta(meta_path));
}

void write_events(const CrimeTensor& y, const fs::path& path) {
  auto out = open_output(path);
  out << "time_slot,region_id,category_id\n";
  for (std::size_t t = 0; t < y.num_slots(); ++t)
    for (std::size_t r = 0; r < y.num_regions(); ++r)
      for (std::size_t c = 0; c < y.num_categories(); ++c)
        if (y.at(r, c, t) != 0.0) out << t << ',' << r << ',' << c << '\n';
}

SplitRanges chrono_split(std::size_t num_slots, double train_frac, double val_frac, std::size_t window) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0)) throw ConfigError("split fractions must be positive");
  if (!(train_frac + val_frac < 1.0)) throw ConfigError("train_frac + val_frac must be < 1");
  const auto n = static_cast<double>(num_slots);
  const auto n_train = static_cast<std::size_t>(std::floor(n * train_frac + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * val_frac + 1e-9));
  SplitRanges s;
  s.train = {0, n_train};
  s.val = {n_train, n_train + n_val};
  s.test = {n_train + n_val, num_slots};
  for (const auto& [name, r] : {std::pair{"train", s.train}, std::pair{"validation", s.val}, std::pair{"test", s.test}}) {
    if (r.size() == 0) throw ConfigError(std::string(name) + " split is empty");
    if (window > 0 && r.size() < window + 1) {
      throw ConfigError(std::string(name) + " split has " + std::to_string(r.size()) + " slots, needs at least " +
                        std::to_string(window + 1) + " for window " + std::to_string(window));
    }
  }
  return s;
}

std::vector<Window> window_dataset(const CrimeTensor& y, std::size_t window, SlotRange range) {
  if (window == 0) throw ConfigError("window length must be >= 1");
  if (range.end > y.num_slots() || range.begin >= range.end) throw DataError("window range outside the data");
  if (range.size() < window + 1) {
    throw DataError("range of " + std::to_string(range.size()) + " slots is too short for window " +
                    std::to_string(window));
  }
  std::vector<Window> out;
  for (std::size_t t = range.begin; t + window < range.end; ++t) {
    out.push_back(Window{t, y.slice(t, t + window), y.slot(t + window)});
  }
  return out;
}

LoadedGraph load_graph(const fs::path& path, std::size_t num_regions) {
  LoadedGraph g{Tensor({num_regions, num_regions}, 0.0), {}};
  CsvReader csv(path, {"src", "dst", "weight"});
  std::vector<std::string> f;
  std::vector<char> seen(num_regions * num_regions, 0);
  while (csv.next(f)) {
    const auto s = csv.parse_index(f[0]);
    const auto d = csv.parse_index(f[1]);
    const double w = csv.parse_real(f[2]);
    if (s >= num_regions || d >= num_regions) throw DataError(csv.where() + ": region id out of range");
    if (w < 0.0) throw DataError(csv.where() + ": negative edge weight");
    if (s == d) {
      g.warnings.push_back(csv.where() + ": self-loop on region " + f[0] + " dropped");
      continue;
    }
    if (seen[s * num_regions + d]) g.warnings.push_back(csv.where() + ": duplicate edge " + f[0] + "->" + f[1] + ", last value kept");
    seen[s * num_regions + d] = 1;
    g.weights.at(s, d) = w;
  }
  return g;
}

void write_graph(const Tensor& w, const fs::path& path) {
  w.require_matrix("write_graph");
  auto out = open_output(path);
  out << "src,dst,weight\n";
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j)
      if (w.at(i, j) != 0.0) out << i << ',' << j << ',' << w.at(i, j) << '\n';
}

Tensor load_embeddings(const fs::path& path, std::size_t num_regions) {
  CsvReader csv(path, {"region_id"});
  const std::size_t dim = csv.header().size() - 1;
  if (dim == 0) throw ParseError(path.string() + ": embedding file has no value columns");
  Tensor e({num_regions, dim}, 0.0);
  std::vector<char> seen(num_regions, 0);
  std::vector<std::string> f;
  while (csv.next(f)) {
    const auto r = csv.parse_index(f[0]);
    if (r >= num_regions) throw DataError(csv.where() + ": region_id " + f[0] + " out of range");
    if (seen[r]) throw DataError(csv.where() + ": duplicate region_id " + f[0]);
    seen[r] = 1;
    for (std::size_t d = 0; d < dim; ++d) e.at(r, d) = csv.parse_real(f[d + 1]);
  }
  for (std::size_t r = 0; r < num_regions; ++r)
    if (!seen[r]) throw DataError(path.string() + ": missing embedding row for region " + std::to_string(r));
  return e;
}

void write_embeddings(const Tensor& e, const fs::path& path) {
  e.require_matrix("write_embeddings");
  auto out = open_output(path);
  out << "region_id";
  for (std::size_t d = 0; d < e.cols(); ++d) out << ",e" << d;
  out << '\n';
  for (std::size_t r = 0; r < e.rows(); ++r) {
    out << r;
    for (std::size_t d = 0; d < e.cols(); ++d) out << ',' << e.at(r, d);
    out << '\n';
  }
}

Tensor graph_embedding(const Tensor& a) {
  a.require_matrix("graph_embedding");
  const std::size_t n = a.rows();
  Tensor e({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      e.at(i, j) = a.at(i, j) + a.at(j, i) + (i == j ? 1.0 : 0.0);
      s += e.at(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) e.at(i, j) /= s;
  }
  return e;
}

// ---------------------------------------------------------------------------

void SynthSpec::validate() const {
  if (num_regions < 2) throw ConfigError("synth: need at least 2 regions");
  if (num_categories < 1 || num_slots < 1 || period < 1) throw ConfigError("synth: sizes must be positive");
  if (num_clusters < 1 || num_clusters > num_regions) throw ConfigError("synth: clusters must lie in [1, regions]");
  if (!(flip_noise >= 0.0 && flip_noise < 0.5)) throw ConfigError("synth: flip_noise must lie in [0, 0.5)");
  if (slot_duration_hours < 1) throw ConfigError("synth: slot duration must be positive");
}

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_regions, c = spec.num_categories, t = spec.num_slots, b = spec.num_clusters;
  Rng rng(spec.seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(spec.flip_noise);

  SynthDataset d;
  d.clusters.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.clusters[i] = i * b / n;

  std::vector<std::vector<std::vector<char>>> templates(b, std::vector<std::vector<char>>(c, std::vector<char>(spec.period)));
  for (auto& cluster : templates)
    for (auto& cat : cluster)
      for (auto& v : cat) v = coin(rng) ? 1 : 0;

  d.crimes.records = Tensor({n, c, t}, 0.0);
  d.crimes.slot_duration_hours = spec.slot_duration_hours;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l)
      for (std::size_t k = 0; k < t; ++k) {
        bool v = templates[d.clusters[i]][l][k % spec.period] != 0;
        if (spec.flip_noise > 0.0 && flip(rng)) v = !v;
        d.crimes.at(i, l, k) = v ? 1.0 : 0.0;
      }

  d.ground_truth_graph = Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (d.clusters[i] == d.clusters[j]) d.ground_truth_graph.at(i, j) = 1.0;

  d.mismatched_graph = Tensor({n, n}, 0.0);
  const std::size_t stride = (n + b - 1) / b;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + stride) % n;
    if (j != i && d.clusters[i] != d.clusters[j]) {
      d.mismatched_graph.at(i, j) = 1.0;
      d.mismatched_graph.at(j, i) = 1.0;
    }
  }

  d.meta.num_regions = n;
  d.meta.num_categories = c;
  d.meta.num_slots = t;
  d.meta.slot_duration_hours = spec.slot_duration_hours;
  for (std::size_t i = 0; i < n; ++i) d.meta.region_names.push_back("region_" + std::to_string(i));
  for (std::size_t l = 0; l < c; ++l) d.meta.category_names.push_back("category_" + std::to_string(l));
  return d;
}

void write_clusters(const std::vector<std::size_t>& clusters, const fs::path& path) {
  auto out = open_output(path);
  out << "region_id,cluster_id\n";
  for (std::size_t i = 0; i < clusters.size(); ++i) out << i << ',' << clusters[i] << '\n';
}

void write_synth_bundle(const SynthDataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  write_events(d.crimes, dir / "events.csv");
  write_meta(d.meta, dir / "meta.json");
  write_clusters(d.clusters, dir / "clusters.csv");
  write_graph(d.ground_truth_graph, dir / "ground_truth_graph.csv");
  write_graph(d.mismatched_graph, dir / "distance_graph.csv");
  write_embeddings(graph_embedding(d.mismatched_graph), dir / "embeddings.csv");
}

}  // namespace hagen
