#include "hagen/evaluation.hpp"

#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "hagen/errors.hpp"

namespace hagen {

Tensor binarize(const Tensor& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  Tensor out(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1.0 : 0.0;
  return out;
}

double ConfusionCounts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

MetricsReport f1_scores(const Tensor& pred, const Tensor& truth, double threshold) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("f1_scores: prediction " + shape_to_string(pred.shape()) + " vs truth " +
                         shape_to_string(truth.shape()));
  }
  if (pred.rank() != 2 && pred.rank() != 3) throw DimensionError("f1_scores expects [N x C] or [N x C x T]");
  const std::size_t c = pred.shape()[1];
  const std::size_t inner = pred.rank() == 3 ? pred.shape()[2] : 1;

  MetricsReport r;
  r.threshold = threshold;
  r.per_category.assign(c, {});
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], y = truth[i];
    if ((p != 0.0 && p != 1.0) || (y != 0.0 && y != 1.0)) throw DataError("f1_scores: inputs must be binary");
    auto& cc = r.per_category[(i / inner) % c];
    if (p == 1.0 && y == 1.0) ++cc.tp;
    else if (p == 1.0) ++cc.fp;
    else if (y == 1.0) ++cc.fn;
  }
  double macro = 0.0;
  for (std::size_t l = 0; l < c; ++l) {
    const auto& cc = r.per_category[l];
    r.total.tp += cc.tp;
    r.total.fp += cc.fp;
    r.total.fn += cc.fn;
    if (cc.tp + cc.fp + cc.fn == 0) r.zero_support_categories.push_back(l);
    r.per_category_f1.push_back(cc.f1());
    macro += r.per_category_f1.back();
  }
  r.micro_f1 = r.total.f1();
  r.macro_f1 = macro / static_cast<double>(c);
  return r;
}

void write_metrics_json(const MetricsReport& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["threshold"] = r.threshold;
  j["per_category_f1"] = r.per_category_f1;
  j["counts"] = {{"tp", r.total.tp}, {"fp", r.total.fp}, {"fn", r.total.fn}};
  j["zero_support_categories"] = r.zero_support_categories;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_category_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17) << "category_id,f1,tp,fp,fn\n";
  for (std::size_t l = 0; l < r.per_category.size(); ++l) {
    const auto& cc = r.per_category[l];
    out << l << ',' << r.per_category_f1[l] << ',' << cc.tp << ',' << cc.fp << ',' << cc.fn << '\n';
  }
}

}  // namespace hagen
