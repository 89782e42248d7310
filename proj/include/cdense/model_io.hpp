#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cdense/detector.hpp"
#include "cdense/error.hpp"

namespace cdense {

// Self-describing text model files: the feature spaces travel with the
// weights, so a model can score new corpora on its own.
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline ordered_json linear_to_json(const LinearModel& m) {
  ordered_json j;
  j["space"] = std::string(to_string(m.space));
  j["loss"] = std::string(to_string(m.loss));
  j["c"] = m.c;
  j["bias"] = m.bias;
  j["weights"] = m.weights;
  if (m.platt) j["platt"] = {{"a", m.platt->a}, {"b", m.platt->b}};
  return j;
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
  LinearModel m;
  auto space = space_kind_from_string(j.at("space").get<std::string>());
  auto loss = loss_from_string(j.at("loss").get<std::string>());
  if (!space || !loss) throw ValidationError("model file: unknown space or loss");
  m.space = *space;
  m.loss = *loss;
  m.c = j.at("c").get<double>();
  m.bias = j.at("bias").get<double>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (auto it = j.find("platt"); it != j.end()) {
    m.platt = PlattScaling{it->at("a").get<double>(), it->at("b").get<double>()};
  }
  return m;
}

}  // namespace detail

inline std::string detector_to_string(const Detector& d) {
  ordered_json j;
  j["format"] = "cdense-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = std::string(to_string(d.kind));
  j["pr_value"] = d.spaces.pr_value == PrValue::count ? "count" : "binary";
  ordered_json spaces = ordered_json::object();
  for (auto k : d.spaces.available()) spaces[std::string(to_string(k))] = d.spaces.get(k).keys();
  j["spaces"] = std::move(spaces);
  if (d.single) j["model"] = detail::linear_to_json(*d.single);
  if (d.fusion) {
    ordered_json f;
    ordered_json first = ordered_json::array();
    for (const auto& [k, m] : d.fusion->first_layer) {
      first.push_back({{"space", std::string(to_string(k))}, {"model", detail::linear_to_json(m)}});
    }
    f["first_layer"] = std::move(first);
    f["second_layer"] = detail::linear_to_json(d.fusion->second_layer);
    f["degenerate"] = d.fusion->degenerate;
    j["fusion"] = std::move(f);
  }
  return j.dump(1) + "\n";
}

inline Detector detector_from_string(const std::string& text) {
  Detector d;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "cdense-model") {
      throw ValidationError("not a cdense model file");
    }
    int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ValidationError("unsupported model version " + std::to_string(version));
    }
    auto kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw ValidationError("unknown model kind");
    d.kind = *kind;
    d.spaces.pr_value = j.at("pr_value").get<std::string>() == "binary" ? PrValue::binary
                                                                        : PrValue::count;
    for (const auto& [name, keys] : j.at("spaces").items()) {
      auto k = space_kind_from_string(name);
      if (!k) throw ValidationError("unknown space '" + name + "'");
      FeatureSpace s(*k, keys.get<std::vector<std::string>>());
      if (s.dim() != keys.size()) throw ValidationError("space '" + name + "' has duplicate keys");
      if (*k == SpaceKind::mrc) d.spaces.mrc = std::move(s);
      else if (*k == SpaceKind::mi) d.spaces.mi = std::move(s);
      else if (*k == SpaceKind::pr) d.spaces.pr = std::move(s);
    }
    if (auto it = j.find("model"); it != j.end()) d.single = detail::linear_from_json(*it);
    if (auto it = j.find("fusion"); it != j.end()) {
      FusionModel f;
      for (const auto& e : it->at("first_layer")) {
        auto k = space_kind_from_string(e.at("space").get<std::string>());
        if (!k) throw ValidationError("unknown first-layer space");
        f.first_layer.emplace_back(*k, detail::linear_from_json(e.at("model")));
      }
      f.second_layer = detail::linear_from_json(it->at("second_layer"));
      f.degenerate = it->at("degenerate").get<bool>();
      if (f.second_layer.dim() != f.first_layer.size()) {
        throw ValidationError("second layer dim differs from first-layer model count");
      }
      d.fusion = std::move(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
  bool fusion_kind = d.kind == ModelKind::decision_fusion;
  if (fusion_kind != d.fusion.has_value() || fusion_kind == d.single.has_value()) {
    throw ValidationError("model file: body does not match kind");
  }
  return d;
}

inline Detector load_detector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return detector_from_string(ss.str());
}

}  // namespace cdense
