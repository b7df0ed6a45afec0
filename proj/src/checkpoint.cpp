#include "adact/checkpoint.hpp"

#include <fstream>

namespace adact {

using nlohmann::json;

namespace {

json layer_to_json(const LayerDesc& d) {
  using T = LayerDesc::Type;
  switch (d.type) {
    case T::Dense: return {{"type", "dense"}, {"in", d.in}, {"out", d.out}};
    case T::Conv2d:
      return {{"type", "conv2d"}, {"in", d.in},         {"out", d.out},
              {"kernel", d.kernel}, {"stride", d.stride}, {"padding", d.padding}};
    case T::MaxPool: return {{"type", "maxpool"}, {"size", d.kernel}, {"stride", d.stride}};
    case T::Flatten: return {{"type", "flatten"}};
    case T::Activation: return {{"type", "activation"}, {"kind", d.activation.name()}, {"param", d.activation.param}};
    case T::Residual: {
      json body = json::array();
      for (const auto& inner : d.body) body.push_back(layer_to_json(inner));
      return {{"type", "residual"}, {"body", body}};
    }
  }
  return {};
}

LayerDesc layer_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "dense") return LayerDesc::dense(j.at("in").get<Index>(), j.at("out").get<Index>());
  if (type == "conv2d")
    return LayerDesc::conv2d(j.at("in").get<Index>(), j.at("out").get<Index>(), j.at("kernel").get<Index>(),
                             j.at("stride").get<Index>(), j.at("padding").get<Index>());
  if (type == "maxpool") return LayerDesc::max_pool(j.at("size").get<Index>(), j.at("stride").get<Index>());
  if (type == "flatten") return LayerDesc::flatten();
  if (type == "activation") {
    auto kind = ActivationKind::parse(j.at("kind").get<std::string>());
    if (!kind) throw FormatError("checkpoint: unknown activation '" + j.at("kind").get<std::string>() + "'");
    kind->param = j.at("param").get<double>();
    return LayerDesc::act(*kind);
  }
  if (type == "residual") {
    std::vector<LayerDesc> body;
    for (const auto& inner : j.at("body")) body.push_back(layer_from_json(inner));
    return LayerDesc::residual(std::move(body));
  }
  throw FormatError("checkpoint: unknown layer type '" + type + "'");
}

}  // namespace

json spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& d : spec.layers) layers.push_back(layer_to_json(d));
  return {{"preset", spec.preset},
          {"input_shape", spec.input_shape},
          {"classes", spec.classes},
          {"activation", spec.activation.name()},
          {"activation_param", spec.activation.param},
          {"layers", layers}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.preset = j.at("preset").get<std::string>();
  spec.input_shape = j.at("input_shape").get<Shape>();
  spec.classes = j.at("classes").get<Index>();
  auto kind = ActivationKind::parse(j.at("activation").get<std::string>());
  if (!kind) throw FormatError("checkpoint: unknown activation");
  kind->param = j.at("activation_param").get<double>();
  spec.activation = *kind;
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  return spec;
}

json checkpoint_to_json(const Model& model, std::uint64_t seed) {
  Model copy = model;
  json params = json::array();
  for (const auto& p : copy.parameters()) {
    params.push_back({{"name", p.name},
                      {"shape", p.value->shape()},
                      {"trainable", p.trainable},
                      {"values", std::vector<double>(p.value->data(), p.value->data() + p.value->size())}});
  }
  return {{"format", "adact-checkpoint"},
          {"version", kCheckpointVersion},
          {"seed", seed},
          {"spec", spec_to_json(model.spec())},
          {"params", params}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "adact-checkpoint") throw FormatError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + j.at("version").dump());
    Checkpoint ck;
    ck.seed = j.at("seed").get<std::uint64_t>();
    Rng scratch(0);
    ck.model = init(spec_from_json(j.at("spec")), scratch);
    auto params = ck.model.parameters();
    const auto& stored = j.at("params");
    if (stored.size() != params.size()) throw FormatError("checkpoint: parameter count does not match the model spec");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = stored[i];
      const auto shape = entry.at("shape").get<Shape>();
      if (shape != params[i].value->shape() || entry.at("name").get<std::string>() != params[i].name)
        throw FormatError("checkpoint: parameter " + std::to_string(i) + " does not match the model spec");
      const auto values = entry.at("values").get<std::vector<double>>();
      if (static_cast<Index>(values.size()) != params[i].value->size())
        throw FormatError("checkpoint: parameter " + params[i].name + " has the wrong length");
      std::copy(values.begin(), values.end(), params[i].value->data());
      params[i].value->require_finite("checkpoint " + params[i].name);
    }
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].role == ParamRef::Role::Activation && !stored[i].at("trainable").get<bool>()) {
        ck.model.set_activation_frozen(true);
        break;
      }
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const SpecError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << checkpoint_to_json(model, seed).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace adact
