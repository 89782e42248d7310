#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/detector.hpp"
#include "cdense/error.hpp"

namespace cdense {

namespace detail {

// Fisher-Yates driven directly by mt19937_64 so plans do not depend on the
// standard library's distribution implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fold plans

struct FoldRoles {
  std::vector<std::size_t> first_layer;   // folds training first-stage models
  std::vector<std::size_t> second_layer;  // folds training the second stage / grid search
  std::size_t test = 0;
};

struct FoldPlan {
  std::size_t k = 10;
  std::map<std::string, std::size_t> fold_assignments;

  // Iteration i tests on fold i, trains the second stage on the next
  // 4/9 of the remaining folds and the first stage on the rest (5/4/1 for
  // k = 10).
  FoldRoles roles(std::size_t iteration) const {
    FoldRoles r;
    r.test = iteration % k;
    std::size_t n_second = (k - 1) * 4 / 9;
    for (std::size_t j = 1; j < k; ++j) {
      std::size_t f = (iteration + j) % k;
      if (j <= n_second) r.second_layer.push_back(f);
      else r.first_layer.push_back(f);
    }
    std::sort(r.first_layer.begin(), r.first_layer.end());
    std::sort(r.second_layer.begin(), r.second_layer.end());
    return r;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (const auto& [id, f] : fold_assignments) ++s[f];
    return s;
  }
};

// Shuffles ids with the seed and deals them round-robin into k folds. When
// labels are supplied, each class is shuffled separately and dealt in turn,
// so every fold gets a near-equal share of both classes.
inline FoldPlan make_folds(std::span<const std::string> ids, std::size_t k, std::uint64_t seed,
                           std::span<const Density> labels = {}) {
  if (k < 2) throw UsageError("need at least 2 folds");
  if (ids.size() < k) {
    throw DataError("cannot split " + std::to_string(ids.size()) + " ids into " +
                    std::to_string(k) + " folds");
  }
  if (!labels.empty() && labels.size() != ids.size()) {
    throw ValidationError("labels and ids differ in length");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> order;
  if (labels.empty()) {
    order.assign(ids.begin(), ids.end());
    std::sort(order.begin(), order.end());
    detail::seeded_shuffle(order, rng);
  } else {
    for (Density cls : {Density::non_content_dense, Density::content_dense}) {
      std::vector<std::string> group;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] == cls) group.push_back(ids[i]);
      }
      std::sort(group.begin(), group.end());
      detail::seeded_shuffle(group, rng);
      order.insert(order.end(), group.begin(), group.end());
    }
  }
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!plan.fold_assignments.emplace(order[i], i % k).second) throw DuplicateIdError(order[i]);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct Prediction {
  std::string lead_id;
  double prob = 0.5;
  Density gold = Density::content_dense;

  bool correct() const { return decide_label(prob) == gold; }
};

struct CvResult {
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  std::vector<Prediction> predictions;  // every test-fold prediction, fold order
};

inline double accuracy_of(std::span<const Prediction> preds) {
  if (preds.empty()) throw DataError("accuracy of an empty prediction set");
  std::size_t ok = 0;
  for (const auto& p : preds) ok += p.correct();
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

namespace detail {

struct FoldSplit {
  std::vector<AnnotatedLead> first, second, test;
};

inline FoldSplit split_by_roles(std::span<const AnnotatedLead> corpus, const FoldPlan& plan,
                                std::size_t iteration) {
  auto roles = plan.roles(iteration);
  std::vector<int> role_of(plan.k, 0);
  for (auto f : roles.first_layer) role_of[f] = 1;
  for (auto f : roles.second_layer) role_of[f] = 2;
  role_of[roles.test] = 3;
  FoldSplit s;
  for (const auto& lead : corpus) {
    auto it = plan.fold_assignments.find(lead.id);
    if (it == plan.fold_assignments.end()) {
      throw ValidationError("lead '" + lead.id + "' missing from fold plan");
    }
    switch (role_of[it->second]) {
      case 1: s.first.push_back(lead); break;
      case 2: s.second.push_back(lead); break;
      default: s.test.push_back(lead); break;
    }
  }
  return s;
}

// Runs f(i) for i in [0, n) on worker threads; results come back in order.
// Library errors are re-raised tagged with the iteration index.
template <typename F>
auto run_folds(std::size_t n, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::future<R>> futs;
  futs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futs.push_back(std::async(std::launch::async, f, i));
  std::vector<R> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      out.push_back(futs[i].get());
    } catch (const Error& e) {
      for (std::size_t j = i + 1; j < n; ++j) {
        try {
          futs[j].wait();
        } catch (...) {
        }
      }
      throw Error(e.kind(), "fold " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> ids_of(std::span<const AnnotatedLead> corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& l : corpus) ids.push_back(l.id);
  return ids;
}

// Plan stratified by the corpus labels.
inline FoldPlan make_corpus_folds(std::span<const AnnotatedLead> corpus, std::uint64_t seed,
                                  std::size_t k = 10) {
  auto ids = ids_of(corpus);
  auto y = labels_of(corpus);
  return make_folds(ids, k, seed, y);
}

// Every model kind trains on the first-layer folds, uses the second-layer
// folds for grid search (and, for decision fusion, the second stage), and is
// scored on the test fold. Mean accuracy is the plain average over folds.
inline CvResult cross_validate(std::span<const AnnotatedLead> corpus, const FoldPlan& plan,
                               ModelKind kind, const std::vector<std::string>& lexicon,
                               const DetectorConfig& cfg) {
  auto per_fold = detail::run_folds(plan.k, [&](std::size_t i) {
    auto split = detail::split_by_roles(corpus, plan, i);
    auto det = train_detector(kind, split.first, split.second, lexicon, cfg);
    std::vector<Prediction> preds;
    preds.reserve(split.test.size());
    for (const auto& lead : split.test) {
      preds.push_back({lead.id, det.predict_proba(lead), *lead.label});
    }
    return preds;
  });
  CvResult r;
  for (auto& preds : per_fold) {
    r.fold_accuracy.push_back(accuracy_of(preds));
    r.predictions.insert(r.predictions.end(), preds.begin(), preds.end());
  }
  double sum = 0.0;
  for (double a : r.fold_accuracy) sum += a;
  r.mean_accuracy = sum / static_cast<double>(r.fold_accuracy.size());
  return r;
}

// ---------------------------------------------------------------------------
// Learning curves

struct CurvePoint {
  std::size_t n_train = 0;
  double accuracy = 0.0;             // mean over folds
  std::vector<double> fold_accuracy;
};

inline std::vector<std::size_t> curve_sizes(std::size_t start, std::size_t step,
                                            std::size_t stop) {
  if (start == 0 || step == 0) throw UsageError("learning curve start and step must be > 0");
  std::vector<std::size_t> out;
  for (std::size_t n = start; n <= stop; n += step) out.push_back(n);
  return out;
}

// For each fold the test fold stays fixed. The remaining folds are shuffled
// once (seeded per fold) and the first n articles form the training data, so
// each size adds randomly chosen articles to the previous set. Those n are
// divided 5:4 between first-stage training and the second-stage/grid-search
// set. Sizes larger than the available pool end the curve.
inline std::vector<CurvePoint> learning_curve(std::span<const AnnotatedLead> corpus,
                                              const FoldPlan& plan, ModelKind kind,
                                              const std::vector<std::string>& lexicon,
                                              const DetectorConfig& cfg,
                                              std::span<const std::size_t> sizes,
                                              std::uint64_t seed) {
  auto per_fold = detail::run_folds(plan.k, [&](std::size_t i) {
    auto split = detail::split_by_roles(corpus, plan, i);
    std::vector<AnnotatedLead> pool = split.first;
    pool.insert(pool.end(), split.second.begin(), split.second.end());
    std::sort(pool.begin(), pool.end(),
              [](const AnnotatedLead& a, const AnnotatedLead& b) { return a.id < b.id; });
    std::mt19937_64 rng(detail::mix_seed(seed, i));
    detail::seeded_shuffle(pool, rng);
    std::vector<double> accs;
    for (std::size_t n : sizes) {
      if (n > pool.size()) break;
      std::vector<AnnotatedLead> train, dev;
      for (std::size_t j = 0; j < n; ++j) (j % 9 < 5 ? train : dev).push_back(pool[j]);
      auto det = train_detector(kind, train, dev, lexicon, cfg);
      std::vector<Prediction> preds;
      for (const auto& lead : split.test) {
        preds.push_back({lead.id, det.predict_proba(lead), *lead.label});
      }
      accs.push_back(accuracy_of(preds));
    }
    return accs;
  });
  std::vector<CurvePoint> out;
  std::size_t n_points = sizes.size();
  for (const auto& accs : per_fold) n_points = std::min(n_points, accs.size());
  for (std::size_t p = 0; p < n_points; ++p) {
    CurvePoint cp;
    cp.n_train = sizes[p];
    double sum = 0.0;
    for (const auto& accs : per_fold) {
      cp.fold_accuracy.push_back(accs[p]);
      sum += accs[p];
    }
    cp.accuracy = sum / static_cast<double>(per_fold.size());
    out.push_back(std::move(cp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agreement metrics

// Sample Pearson correlation.
inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValidationError("pearson: need two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

struct Agreement {
  double agreement = 0.0;
  double kappa = 0.0;
};

// Percent agreement and Cohen's kappa between two annotators.
template <typename Label>
Agreement percent_agreement_and_kappa(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("agreement: need two equal-length non-empty label vectors");
  }
  const double n = static_cast<double>(a.size());
  std::map<Label, std::pair<std::size_t, std::size_t>> marg;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += a[i] == b[i];
    ++marg[a[i]].first;
    ++marg[b[i]].second;
  }
  double p_o = static_cast<double>(same) / n;
  double p_e = 0.0;
  for (const auto& [lbl, counts] : marg) {
    p_e += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  if (p_e >= 1.0) throw DataError("kappa undefined: chance agreement is 1");
  return {p_o, (p_o - p_e) / (1.0 - p_e)};
}

// ---------------------------------------------------------------------------
// Crowd annotation filtering and aggregation

enum class Condition { in_domain, general };

struct AnnotationRecord {
  std::string lead_id;
  std::string annotator_id;
  Density label = Density::content_dense;
  double score = 0.0;  // 0..100
  double elapsed_seconds = 0.0;
  Condition condition = Condition::in_domain;
};

struct AmtFilter {
  double min_mean_seconds = 40.0;  // annotator mean must exceed this
  double midpoint = 50.0;          // content_dense needs score >= midpoint
};

inline bool consistent(const AnnotationRecord& r, double midpoint) {
  return r.label == Density::content_dense ? r.score >= midpoint : r.score < midpoint;
}

// Drops every record of annotators who were too fast on average or gave any
// label/score pair that contradicts itself. Record order is preserved.
inline std::vector<AnnotationRecord> filter_amt_annotators(std::span<const AnnotationRecord> recs,
                                                           const AmtFilter& f = {}) {
  std::map<std::string, std::pair<double, std::size_t>> time;
  std::map<std::string, bool> bad;
  for (const auto& r : recs) {
    auto& t = time[r.annotator_id];
    t.first += r.elapsed_seconds;
    ++t.second;
    if (!consistent(r, f.midpoint)) bad[r.annotator_id] = true;
  }
  for (const auto& [who, t] : time) {
    if (t.first / static_cast<double>(t.second) <= f.min_mean_seconds) bad[who] = true;
  }
  std::vector<AnnotationRecord> out;
  for (const auto& r : recs) {
    if (!bad.count(r.annotator_id)) out.push_back(r);
  }
  return out;
}

struct AggregatedLabel {
  Density label = Density::content_dense;
  double mean_score = 0.0;
  std::size_t n = 0;
};

// Majority label (ties -> content_dense) and mean score for one lead.
inline AggregatedLabel aggregate_annotations(std::span<const AnnotationRecord> recs) {
  if (recs.empty()) throw DataError("no annotations to aggregate");
  std::size_t cd = 0;
  double sum = 0.0;
  for (const auto& r : recs) {
    cd += r.label == Density::content_dense;
    sum += r.score;
  }
  std::size_t ncd = recs.size() - cd;
  return {cd >= ncd ? Density::content_dense : Density::non_content_dense,
          sum / static_cast<double>(recs.size()), recs.size()};
}

inline std::map<std::string, AggregatedLabel> aggregate_by_lead(
    std::span<const AnnotationRecord> recs) {
  std::map<std::string, std::vector<AnnotationRecord>> by;
  for (const auto& r : recs) by[r.lead_id].push_back(r);
  std::map<std::string, AggregatedLabel> out;
  for (const auto& [id, rs] : by) out.emplace(id, aggregate_annotations(rs));
  return out;
}

// Tab-separated, header line first:
// lead_id annotator_id label score elapsed_seconds condition
inline std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 6) throw RecordError(line_no, "expected 6 tab-separated fields");
    AnnotationRecord r;
    r.lead_id = f[0];
    r.annotator_id = f[1];
    auto lbl = density_from_string(f[2]);
    if (!lbl) throw RecordError(line_no, "unknown label '" + f[2] + "'");
    r.label = *lbl;
    try {
      r.score = std::stod(f[3]);
      r.elapsed_seconds = std::stod(f[4]);
    } catch (const std::exception&) {
      throw RecordError(line_no, "bad number");
    }
    if (r.score < 0.0 || r.score > 100.0) throw RecordError(line_no, "score outside [0,100]");
    if (r.elapsed_seconds < 0.0) throw RecordError(line_no, "negative elapsed time");
    if (f[5] == "in_domain") r.condition = Condition::in_domain;
    else if (f[5] == "general") r.condition = Condition::general;
    else throw RecordError(line_no, "unknown condition '" + f[5] + "'");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Confidence-stratified accuracy

// Confidence is max(p, 1 - p). For each percentile q the accuracy over the
// ceil(q% * n) most confident predictions is reported. Predictions sharing a
// confidence value are interchangeable: a stratum boundary that cuts through
// such a group credits it with the group's own accuracy, pro rata.
inline std::vector<std::pair<double, double>> confidence_stratified_accuracy(
    std::span<const Prediction> preds, std::span<const double> percentiles) {
  if (preds.empty()) throw DataError("confidence stratification of an empty set");
  std::vector<std::pair<double, bool>> conf;  // (confidence, correct)
  conf.reserve(preds.size());
  for (const auto& p : preds) conf.emplace_back(std::max(p.prob, 1.0 - p.prob), p.correct());
  std::sort(conf.begin(), conf.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  // Groups of equal confidence: (size, correct).
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < conf.size();) {
    std::size_t j = i, ok = 0;
    while (j < conf.size() && conf[j].first == conf[i].first) ok += conf[j++].second;
    groups.emplace_back(j - i, ok);
    i = j;
  }
  const std::size_t n = preds.size();
  std::vector<std::pair<double, double>> out;
  for (double q : percentiles) {
    if (!(q > 0.0 && q <= 100.0)) throw UsageError("percentiles must lie in (0, 100]");
    auto take = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n) - 1e-9));
    take = std::clamp<std::size_t>(take, 1, n);
    std::size_t full_n = 0, full_ok = 0;
    std::size_t g = 0;
    while (g < groups.size() && full_n + groups[g].first <= take) {
      full_n += groups[g].first;
      full_ok += groups[g].second;
      ++g;
    }
    double acc;
    if (full_n == take) {
      acc = static_cast<double>(full_ok) / static_cast<double>(take);
    } else {
      // (full_ok * size + m * ok_g) / (take * size), computed once in double.
      std::size_t m = take - full_n;
      auto [size, ok] = groups[g];
      acc = static_cast<double>(full_ok * size + m * ok) / static_cast<double>(take * size);
    }
    out.emplace_back(q, acc);
  }
  return out;
}

}  // namespace cdense
