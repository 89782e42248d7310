#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/error.hpp"
#include "cdense/features.hpp"
#include "cdense/learn.hpp"

namespace cdense {

enum class ModelKind { mrc, mi, pr, feature_fusion, decision_fusion };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::mrc: return "mrc";
    case ModelKind::mi: return "mi";
    case ModelKind::pr: return "pr";
    case ModelKind::feature_fusion: return "feature-fusion";
    case ModelKind::decision_fusion: return "decision-fusion";
  }
  return "decision-fusion";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  for (ModelKind k : {ModelKind::mrc, ModelKind::mi, ModelKind::pr, ModelKind::feature_fusion,
                      ModelKind::decision_fusion}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct DetectorConfig {
  TrainConfig train;
  MiOptions mi;
  PrValue pr_value = PrValue::count;
  // Representations used by the fusion models (decision fusion over MRC+PR
  // etc. is obtained by narrowing this list).
  std::vector<SpaceKind> fusion_spaces = {SpaceKind::mrc, SpaceKind::mi, SpaceKind::pr};
};

// Two-layer stacked model: one logistic model per representation, then a
// linear (squared hinge, Platt-calibrated) model over their content-dense
// probabilities.
struct FusionModel {
  std::vector<std::pair<SpaceKind, LinearModel>> first_layer;
  LinearModel second_layer;
  bool degenerate = false;  // second layer saw no signal; always predicts 0.5

  SparseFeatureVector layer_features(const AnnotatedLead& lead,
                                     const FeatureSpaces& spaces) const {
    SparseFeatureVector v{SpaceKind::combined, {}};
    for (std::uint32_t i = 0; i < first_layer.size(); ++i) {
      const auto& [kind, model] = first_layer[i];
      double p = model.predict_proba(spaces.extract(lead, kind));
      if (p != 0.0) v.entries.emplace_back(i, p);
    }
    return v;
  }

  double predict_proba(const AnnotatedLead& lead, const FeatureSpaces& spaces) const {
    if (degenerate) return 0.5;
    return second_layer.predict_proba(layer_features(lead, spaces));
  }
};

inline std::vector<Density> labels_of(std::span<const AnnotatedLead> leads) {
  std::vector<Density> y;
  y.reserve(leads.size());
  for (const auto& l : leads) {
    if (!l.label) throw ValidationError("lead '" + l.id + "' has no label");
    y.push_back(*l.label);
  }
  return y;
}

inline std::vector<SparseFeatureVector> extract_all(std::span<const AnnotatedLead> leads,
                                                    const FeatureSpaces& spaces, SpaceKind k) {
  std::vector<SparseFeatureVector> out;
  out.reserve(leads.size());
  for (const auto& l : leads) {
    out.push_back(k == SpaceKind::combined ? spaces.extract_combined(l) : spaces.extract(l, k));
  }
  return out;
}

// Builds the requested spaces from the training fold only.
inline FeatureSpaces build_spaces(std::span<const AnnotatedLead> train,
                                  const std::vector<std::string>& lexicon,
                                  std::span<const SpaceKind> kinds, const DetectorConfig& cfg) {
  FeatureSpaces s;
  s.pr_value = cfg.pr_value;
  for (auto k : kinds) {
    switch (k) {
      case SpaceKind::mrc: s.mrc = make_mrc_space(lexicon); break;
      case SpaceKind::mi: s.mi = select_mi_vocabulary(train, cfg.mi).space; break;
      case SpaceKind::pr: s.pr = make_pr_space(train); break;
      case SpaceKind::combined: throw ValidationError("cannot build the combined space directly");
    }
  }
  return s;
}

inline LinearModel train_single(std::span<const AnnotatedLead> train,
                                std::span<const AnnotatedLead> dev, const FeatureSpaces& spaces,
                                SpaceKind kind, const TrainConfig& cfg) {
  auto xtr = extract_all(train, spaces, kind);
  auto ytr = labels_of(train);
  auto xdv = extract_all(dev, spaces, kind);
  auto ydv = labels_of(dev);
  std::size_t dim = kind == SpaceKind::combined ? spaces.combined_dim() : spaces.get(kind).dim();
  return grid_search_linear(xtr, ytr, xdv, ydv, dim, Loss::logistic, cfg);
}

// Logistic model over the concatenation of every space in `spaces`.
inline LinearModel train_feature_fusion(std::span<const AnnotatedLead> train,
                                        std::span<const AnnotatedLead> dev,
                                        const FeatureSpaces& spaces, const TrainConfig& cfg) {
  return train_single(train, dev, spaces, SpaceKind::combined, cfg);
}

inline void check_disjoint(std::span<const AnnotatedLead> train,
                           std::span<const AnnotatedLead> dev) {
  std::unordered_set<std::string> ids;
  for (const auto& l : train) ids.insert(l.id);
  for (const auto& l : dev) {
    if (ids.count(l.id)) throw DataLeakError(l.id);
  }
}

inline FusionModel train_decision_fusion(std::span<const AnnotatedLead> train,
                                         std::span<const AnnotatedLead> dev,
                                         const FeatureSpaces& spaces, const TrainConfig& cfg) {
  check_disjoint(train, dev);
  if (dev.empty()) throw ValidationError("decision fusion needs a non-empty dev set");
  FusionModel fm;
  for (auto k : spaces.available()) {
    fm.first_layer.emplace_back(k, train_single(train, dev, spaces, k, cfg));
  }
  std::vector<SparseFeatureVector> xdev;
  xdev.reserve(dev.size());
  for (const auto& l : dev) xdev.push_back(fm.layer_features(l, spaces));
  auto ydev = labels_of(dev);

  const std::size_t dim = fm.first_layer.size();
  fm.second_layer.weights.assign(dim, 0.0);
  fm.second_layer.space = SpaceKind::combined;
  fm.second_layer.loss = Loss::squared_hinge;
  fm.second_layer.platt = PlattScaling{0.0, 0.0};

  // No column varies on dev: nothing for the second layer to learn.
  bool varies = false;
  for (std::uint32_t j = 0; j < dim && !varies; ++j) {
    auto first = xdev.front().get(j).value_or(0.0);
    for (const auto& v : xdev) {
      if (v.get(j).value_or(0.0) != first) {
        varies = true;
        break;
      }
    }
  }
  bool both = false;
  for (auto l : ydev) both |= l != ydev.front();
  if (!varies || !both) {
    fm.degenerate = true;
    return fm;
  }
  fm.second_layer = grid_search_cv_linear(xdev, ydev, dim, Loss::squared_hinge, cfg);
  std::vector<double> margins;
  margins.reserve(xdev.size());
  for (const auto& v : xdev) margins.push_back(fm.second_layer.margin(v));
  fm.second_layer.platt = fit_platt(margins, ydev);
  return fm;
}

// A trained detector of any kind, bundled with the spaces it was built on.
struct Detector {
  ModelKind kind = ModelKind::decision_fusion;
  FeatureSpaces spaces;
  std::optional<LinearModel> single;
  std::optional<FusionModel> fusion;

  double predict_proba(const AnnotatedLead& lead) const {
    switch (kind) {
      case ModelKind::mrc: return single->predict_proba(spaces.extract(lead, SpaceKind::mrc));
      case ModelKind::mi: return single->predict_proba(spaces.extract(lead, SpaceKind::mi));
      case ModelKind::pr: return single->predict_proba(spaces.extract(lead, SpaceKind::pr));
      case ModelKind::feature_fusion: return single->predict_proba(spaces.extract_combined(lead));
      case ModelKind::decision_fusion: return fusion->predict_proba(lead, spaces);
    }
    return 0.5;
  }

  Density predict(const AnnotatedLead& lead) const { return decide_label(predict_proba(lead)); }
};

inline std::vector<SpaceKind> spaces_for(ModelKind kind, const DetectorConfig& cfg) {
  switch (kind) {
    case ModelKind::mrc: return {SpaceKind::mrc};
    case ModelKind::mi: return {SpaceKind::mi};
    case ModelKind::pr: return {SpaceKind::pr};
    case ModelKind::feature_fusion:
    case ModelKind::decision_fusion: return cfg.fusion_spaces;
  }
  return {};
}

// Builds spaces on `train`, then fits the model. `dev` drives grid search
// (and trains the second layer of the decision-fusion model).
inline Detector train_detector(ModelKind kind, std::span<const AnnotatedLead> train,
                               std::span<const AnnotatedLead> dev,
                               const std::vector<std::string>& lexicon,
                               const DetectorConfig& cfg) {
  check_disjoint(train, dev);
  auto kinds = spaces_for(kind, cfg);
  if (kinds.empty()) throw UsageError("no feature spaces selected");
  Detector d;
  d.kind = kind;
  d.spaces = build_spaces(train, lexicon, kinds, cfg);
  switch (kind) {
    case ModelKind::mrc:
      d.single = train_single(train, dev, d.spaces, SpaceKind::mrc, cfg.train);
      break;
    case ModelKind::mi:
      d.single = train_single(train, dev, d.spaces, SpaceKind::mi, cfg.train);
      break;
    case ModelKind::pr:
      d.single = train_single(train, dev, d.spaces, SpaceKind::pr, cfg.train);
      break;
    case ModelKind::feature_fusion:
      d.single = train_feature_fusion(train, dev, d.spaces, cfg.train);
      break;
    case ModelKind::decision_fusion:
      d.fusion = train_decision_fusion(train, dev, d.spaces, cfg.train);
      break;
  }
  return d;
}

}  // namespace cdense
