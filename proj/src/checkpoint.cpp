#include <fstream>

#include <nlohmann/json.hpp>

#include "hagen/config.hpp"
#include "hagen/errors.hpp"
#include "hagen/training.hpp"

namespace hagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tensor_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const json& j, const std::string& what) {
  try {
    auto shape = j.at("shape").get<Shape>();
    auto data = j.at("data").get<std::vector<double>>();
    if (shape_numel(shape) != data.size()) {
      throw LoadError(what + ": shape " + shape_to_string(shape) + " does not match " + std::to_string(data.size()) +
                      " values");
    }
    return Tensor(std::move(shape), std::move(data));
  } catch (const json::exception& e) {
    throw LoadError(what + ": " + e.what());
  } catch (const DimensionError& e) {
    throw LoadError(what + ": " + e.what());
  }
}

}  // namespace

Checkpoint make_checkpoint(const HagenModel& model, const TrainConfig& train, const AdamState& adam,
                           std::size_t epoch) {
  Checkpoint ck;
  ck.model = model.config();
  ck.train = train;
  ck.epoch = epoch;
  for (const Parameter* p : model.params().all()) ck.params.emplace_back(p->name, p->value);
  ck.adam = adam;
  ck.buffers.pretrained = model.inputs().pretrained;
  ck.buffers.fixed_graph = model.inputs().fixed_graph;
  return ck;
}

std::unique_ptr<HagenModel> restore_model(const Checkpoint& ck) {
  auto model = std::make_unique<HagenModel>(ck.model, ck.train.seed, ck.buffers);
  if (model->params().size() != ck.params.size()) {
    throw LoadError("checkpoint holds " + std::to_string(ck.params.size()) + " parameters, model defines " +
                    std::to_string(model->params().size()));
  }
  for (const auto& [name, value] : ck.params) {
    if (!model->params().contains(name)) throw LoadError("checkpoint parameter '" + name + "' is unknown");
    Parameter& p = model->params().get(name);
    if (p.value.shape() != value.shape()) {
      throw LoadError("checkpoint parameter '" + name + "' has shape " + shape_to_string(value.shape()) +
                      ", model expects " + shape_to_string(p.value.shape()));
    }
    p.value = value;
  }
  return model;
}

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
  json params = json::object();
  for (const auto& [name, value] : ck.params) params[name] = tensor_json(value);
  json first = json::object(), second = json::object();
  for (const auto& [name, t] : ck.adam.first_moment) first[name] = tensor_json(t);
  for (const auto& [name, t] : ck.adam.second_moment) second[name] = tensor_json(t);
  json buffers = json::object();
  if (ck.buffers.pretrained) buffers["pretrained"] = tensor_json(*ck.buffers.pretrained);
  if (ck.buffers.fixed_graph) buffers["fixed_graph"] = tensor_json(*ck.buffers.fixed_graph);

  json j = {{"format_version", Checkpoint::kFormatVersion},
            {"config",
             {{"model", to_json(ck.model)},
              {"train", to_json(ck.train)},
              {"eval", {{"threshold", ck.train.threshold}}}}},
            {"epoch", ck.epoch},
            {"params", params},
            {"adam",
             {{"beta1", ck.adam.beta1},
              {"beta2", ck.adam.beta2},
              {"eps", ck.adam.eps},
              {"step", ck.adam.step},
              {"first_moment", first},
              {"second_moment", second}}},
            {"buffers", buffers}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("checkpoint " + path.string() + " is corrupt: " + e.what());
  }
  const std::string ctx = "checkpoint " + path.string();
  Checkpoint ck;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw LoadError(ctx + ": format_version " + std::to_string(version) + ", expected " +
                      std::to_string(Checkpoint::kFormatVersion));
    }
    const json& cfg = j.at("config");
    ck.model = model_config_from_json(cfg.at("model"));
    ck.train = train_config_from_json(cfg.at("train"));
    ck.train.threshold = cfg.at("eval").at("threshold").get<double>();
    ck.epoch = j.at("epoch").get<std::size_t>();
    for (const auto& [name, t] : j.at("params").items()) ck.params.emplace_back(name, tensor_from_json(t, ctx + " " + name));
    const json& adam = j.at("adam");
    ck.adam.beta1 = adam.at("beta1").get<double>();
    ck.adam.beta2 = adam.at("beta2").get<double>();
    ck.adam.eps = adam.at("eps").get<double>();
    ck.adam.step = adam.at("step").get<std::size_t>();
    for (const auto& [name, t] : adam.at("first_moment").items())
      ck.adam.first_moment.emplace(name, tensor_from_json(t, ctx + " adam " + name));
    for (const auto& [name, t] : adam.at("second_moment").items())
      ck.adam.second_moment.emplace(name, tensor_from_json(t, ctx + " adam " + name));
    const json& buffers = j.at("buffers");
    if (buffers.contains("pretrained")) ck.buffers.pretrained = tensor_from_json(buffers["pretrained"], ctx);
    if (buffers.contains("fixed_graph")) ck.buffers.fixed_graph = tensor_from_json(buffers["fixed_graph"], ctx);
  } catch (const json::exception& e) {
    throw LoadError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(ctx + ": " + e.what());
  }
  return ck;
}

}  // namespace hagen
