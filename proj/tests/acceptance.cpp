// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cdense/cdense.hpp"
#include "cli_pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cdense;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome density_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const std::vector<std::string> tags = {"NN", "VB", "JJ"};
  auto draw = [&](std::size_t n) {
    std::vector<WordPosTuple> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back({words[rng() % 8], tags[rng() % 3]});
    return v;
  };
  std::size_t mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    auto s = draw(1 + rng() % 30);
    auto l = draw(rng() % 31);
    mismatches += content_density_score(s, l) != oracle::density_score(s, l);
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 1.0,
          fmt("%zu/200 mismatches, %.3fs (limit 1s)", mismatches, secs)};
}

Outcome mi_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  const std::vector<std::string> words = {"al", "be", "ce", "de", "ef", "ge", "ha",
                                          "ij", "ka", "el", "em", "en"};
  double max_err = 0.0;
  std::size_t rank_mismatch = 0, corpora = 0;
  while (corpora < 100) {
    std::size_t n = 4 + rng() % 47;
    std::vector<std::vector<std::string>> raw;
    std::vector<int> cls;
    Corpus leads;
    for (std::size_t i = 0; i < n; ++i) {
      int c = static_cast<int>(rng() % 2);
      std::vector<std::string> toks;
      for (std::size_t j = 0; j < 1 + rng() % 8; ++j) {
        std::size_t k = rng() % words.size();
        if (c == 1 && rng() % 3 == 0) k = rng() % 3;
        toks.push_back(words[k]);
      }
      raw.push_back(toks);
      cls.push_back(c);
      leads.push_back(testutil::word_lead("d" + std::to_string(i), toks, static_cast<Density>(c)));
    }
    if (std::count(cls.begin(), cls.end(), 1) % static_cast<long>(n) == 0) continue;
    ++corpora;
    MiOptions opt{static_cast<std::size_t>(1 + rng() % 5), static_cast<std::size_t>(1 + rng() % 10)};
    auto vocab = select_mi_vocabulary(leads, opt);
    for (int c = 0; c < 2; ++c) {
      auto want = oracle::brute_force_mi(raw, cls, c, opt.min_count, opt.top_k);
      const auto& got = c == 1 ? vocab.content_dense : vocab.non_content_dense;
      if (got.size() != want.size()) {
        ++rank_mismatch;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        rank_mismatch += got[i].word != want[i].word;
        max_err = std::max(max_err, std::fabs(got[i].mi - want[i].mi));
      }
    }
  }
  double secs = seconds_since(t0);
  return {max_err <= 1e-12 && rank_mismatch == 0 && secs < 5.0,
          fmt("100 corpora, max |dMI| %.2e (limit 1e-12), %zu rank mismatches, %.3fs (limit 5s)",
              max_err, rank_mismatch, secs)};
}

Outcome production_rules() {
  std::mt19937_64 rng(103);
  std::size_t mismatch = 0, lexical = 0, too_deep = 0;
  for (int t = 0; t < 100; ++t) {
    auto tree = oracle::random_tree(rng, 6);
    too_deep += oracle::tree_depth(tree) > 6;
    std::set<std::string> surface;
    for (const auto* l : leaves(tree)) surface.insert(*l->leaf_word);
    std::multiset<std::string> got;
    for (const auto& r : extract_production_rules(tree)) {
      got.insert(r.key());
      for (const auto& x : r.rhs) lexical += surface.count(x);
    }
    mismatch += got != oracle::production_rules(tree);
  }
  auto clause = parse_ptb_tree(
      "(VP (VB push) (NP (DT the) (NNP Czech) (NN currency)) (PRT (RP up)) (ADVP (RB sharply)))");
  auto rules = extract_production_rules(clause);
  bool example = !rules.empty() && rules.front().key() == "VP -> VB NP PRT ADVP";
  return {mismatch == 0 && lexical == 0 && too_deep == 0 && example,
          fmt("100 trees: %zu multiset mismatches, %zu lexical rules; particle clause %s",
              mismatch, lexical, example ? "gives VP -> VB NP PRT ADVP" : "WRONG")};
}

Outcome gradient_check() {
  std::mt19937_64 rng(104);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (Loss loss : {Loss::logistic, Loss::squared_hinge}) {
    for (int t = 0; t < 20; ++t) {
      std::size_t dim = 1 + rng() % 8, n = 5 + rng() % 20;
      std::vector<SparseFeatureVector> x;
      std::vector<double> y;
      for (std::size_t i = 0; i < n; ++i) {
        SparseFeatureVector v{SpaceKind::mrc, {}};
        for (std::uint32_t j = 0; j < dim; ++j) {
          if (rng() % 3) v.entries.emplace_back(j, g(rng));
        }
        x.push_back(v);
        y.push_back(rng() % 2 ? 1.0 : -1.0);
      }
      Problem prob{x, y, dim, loss, 0.25 + static_cast<double>(rng() % 12) / 4.0};
      std::vector<double> params(dim + 1);
      for (auto& p : params) p = 0.5 * g(rng);
      std::vector<double> grad;
      objective(prob, params, &grad);
      const double h = 1e-5;
      for (std::size_t j = 0; j < params.size(); ++j) {
        auto up = params, down = params;
        up[j] += h;
        down[j] -= h;
        double fd = (objective(prob, up, nullptr) - objective(prob, down, nullptr)) / (2 * h);
        worst = std::max(worst, std::fabs(fd - grad[j]));
      }
    }
  }
  return {worst <= 1e-5, fmt("40 problems (logistic, squared hinge), max-abs %.2e (limit 1e-5)", worst)};
}

// Decision-fusion predictions from the fusion criterion, reused for the
// confidence criterion.
std::vector<Prediction> fusion_predictions;

Outcome fusion_gain() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<ModelKind> singles = {ModelKind::mrc, ModelKind::mi, ModelKind::pr};
  std::vector<double> single_sum(3, 0.0);
  double fusion_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = synth::generate_corpus(2000, synth::SignalProfile::defaults(), seed);
    auto plan = make_corpus_folds(g.leads, seed);
    DetectorConfig cfg;
    cfg.train.seed = seed;
    for (std::size_t i = 0; i < singles.size(); ++i) {
      single_sum[i] += cross_validate(g.leads, plan, singles[i], g.lexicon, cfg).mean_accuracy;
    }
    auto f = cross_validate(g.leads, plan, ModelKind::decision_fusion, g.lexicon, cfg);
    fusion_sum += f.mean_accuracy;
    if (seed == 1) fusion_predictions = f.predictions;
  }
  double fusion = fusion_sum / 5, best = 0.0;
  for (double& s : single_sum) best = std::max(best, s /= 5);
  double secs = seconds_since(t0);
  return {fusion - best >= 0.03 && secs < 120.0,
          fmt("5-seed mean: mrc %.4f mi %.4f pr %.4f decision-fusion %.4f; gain %.2f pts "
              "(need >= 3), %.1fs (limit 120s)",
              single_sum[0], single_sum[1], single_sum[2], fusion, 100 * (fusion - best), secs)};
}

Outcome learning_curve_shape() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes = {100, 2000, 6500};
  double a100 = 0, a2000 = 0, a6500 = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = synth::generate_corpus(7300, synth::SignalProfile::defaults(), seed);
    auto plan = make_corpus_folds(g.leads, seed);
    DetectorConfig cfg;
    cfg.train.seed = seed;
    auto curve = learning_curve(g.leads, plan, ModelKind::decision_fusion, g.lexicon, cfg, sizes, seed);
    if (curve.size() != 3) return {false, "learning curve truncated"};
    a100 += curve[0].accuracy / 5;
    a2000 += curve[1].accuracy / 5;
    a6500 += curve[2].accuracy / 5;
  }
  double rise = 100 * (a2000 - a100), plateau = 100 * (a6500 - a2000);
  return {rise >= 5.0 && plateau <= 2.0,
          fmt("5-seed mean acc n=100 %.4f, n=2000 %.4f, n=6500 %.4f; rise %.2f pts (need >= 5), "
              "later gain %.2f pts (need <= 2), %.1fs",
              a100, a2000, a6500, rise, plateau, seconds_since(t0))};
}

Outcome fold_invariants() {
  std::mt19937_64 rng(107);
  std::size_t violations = 0;
  for (int t = 0; t < 50; ++t) {
    std::size_t n = 10 + rng() % 500;
    std::vector<std::string> ids;
    std::vector<Density> y;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("x" + std::to_string(rng()) + "_" + std::to_string(i));
      y.push_back(rng() % 2 ? Density::content_dense : Density::non_content_dense);
    }
    auto plan = make_folds(ids, 10, rng(), y);
    std::set<std::size_t> tests;
    for (std::size_t i = 0; i < 10; ++i) {
      auto r = plan.roles(i);
      std::set<std::size_t> all(r.first_layer.begin(), r.first_layer.end());
      all.insert(r.second_layer.begin(), r.second_layer.end());
      all.insert(r.test);
      bool ok = r.first_layer.size() == 5 && r.second_layer.size() == 4 && all.size() == 10 &&
                *all.rbegin() == 9;
      violations += !ok;
      tests.insert(r.test);
    }
    violations += tests.size() != 10;
    std::size_t assigned = 0;
    for (auto s : plan.fold_sizes()) assigned += s;
    violations += assigned != n;
  }

  // Each iteration's test leads are the same whatever model is evaluated.
  auto g = synth::generate_corpus(200, synth::SignalProfile::defaults(), 7);
  auto plan = make_corpus_folds(g.leads, 7);
  std::vector<std::string> reference;
  std::size_t mode_mismatch = 0;
  for (auto kind : {ModelKind::mrc, ModelKind::mi, ModelKind::pr, ModelKind::feature_fusion,
                    ModelKind::decision_fusion}) {
    auto r = cross_validate(g.leads, plan, kind, g.lexicon, DetectorConfig{});
    std::vector<std::string> order;
    std::size_t pos = 0, fold = 0;
    auto sizes = plan.fold_sizes();
    for (const auto& p : r.predictions) {
      while (pos >= sizes[fold]) pos = 0, ++fold;
      mode_mismatch += plan.fold_assignments.at(p.lead_id) != fold;
      ++pos;
      order.push_back(p.lead_id);
    }
    if (reference.empty()) reference = order;
    mode_mismatch += order != reference;
  }
  return {violations == 0 && mode_mismatch == 0,
          fmt("50 plans: %zu role violations; 5 modes: %zu test-fold mismatches", violations,
              mode_mismatch)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double pearson_err = 0, agree_err = 0, kappa_err = 0;
  std::size_t bound_violations = 0, done = 0;
  while (done < 100) {
    std::size_t n = 3 + rng() % 80;
    std::vector<double> x, s;
    std::vector<int> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(u(rng));
      s.push_back(2.0 * x.back() + u(rng));
      a.push_back(static_cast<int>(rng() % 2));
      b.push_back(rng() % 3 ? a.back() : static_cast<int>(rng() % 2));
    }
    Agreement k;
    try {
      k = percent_agreement_and_kappa<int>(a, b);
    } catch (const DataError&) {
      continue;  // both raters constant: kappa undefined
    }
    ++done;
    pearson_err = std::max(pearson_err, std::fabs(pearson_correlation(x, s) - oracle::pearson(x, s)));
    auto [po, kappa] = oracle::agreement_kappa(a, b);
    agree_err = std::max(agree_err, std::fabs(k.agreement - po));
    kappa_err = std::max(kappa_err, std::fabs(k.kappa - kappa));
    bound_violations += k.kappa > k.agreement;
  }
  return {pearson_err <= 1e-12 && agree_err <= 1e-12 && kappa_err <= 1e-12 && bound_violations == 0,
          fmt("100 vectors: max err pearson %.1e agreement %.1e kappa %.1e (limit 1e-12); "
              "%zu kappa > agreement",
              pearson_err, agree_err, kappa_err, bound_violations)};
}

Outcome confidence_strata() {
  if (fusion_predictions.empty()) return {false, "no fusion predictions"};
  std::vector<double> pct = {10, 100};
  auto s = confidence_stratified_accuracy(fusion_predictions, pct);
  double top = s[0].second, overall = accuracy_of(fusion_predictions);

  auto flat = fusion_predictions;
  for (auto& p : flat) p.prob = 0.5;
  std::vector<double> all_pcts = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  double flat_overall = accuracy_of(flat);
  bool equal = true;
  for (auto [q, acc] : confidence_stratified_accuracy(flat, all_pcts)) equal &= acc == flat_overall;
  return {top >= overall && equal,
          fmt("decision fusion, 2000 leads: top-10%% %.4f vs overall %.4f; all-0.5 strata %s",
              top, overall, equal ? "equal overall exactly" : "DIFFER")};
}

Outcome combination_system() {
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cuts;
  for (int i = -10; i <= 10; ++i) cuts.push_back(i / 10.0);
  std::size_t non_monotone = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<ScoredPair> pairs;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 100); ++i) {
      pairs.push_back({"p", u(rng), u(rng), static_cast<Preference>(rng() % 3)});
    }
    auto rep = sweep_scored(pairs, cuts);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      non_monotone += rep.rows[i].samples > rep.rows[i - 1].samples;
    }
  }

  // Differences above 0.2 exactly when humans prefer the system summary.
  std::vector<ScoredPair> perfect;
  for (int i = 0; i < 200; ++i) {
    bool sys = rng() % 2;
    double d = sys ? 0.25 + 0.5 * u(rng) : -0.5 * u(rng);
    perfect.push_back({"p", 0.5 + d / 2, 0.5 - d / 2, sys ? Preference::system : Preference::lead});
  }
  double best = 0.0;
  for (const auto& r : sweep_scored(perfect, default_cutoffs()).rows) {
    best = std::max(best, r.combination_pct);
  }

  double bin_err = 0.0;
  for (std::size_t k = 0; k <= 323; ++k) {
    bin_err = std::max(bin_err, std::fabs(binomial_superiority_check(k, 323, 0.585) -
                                          oracle::binomial_upper_tail(k, 323, 0.585)));
  }
  return {non_monotone == 0 && best == 100.0 && bin_err <= 1e-10,
          fmt("100 pair sets: %zu count increases; perfect encoding best %.1f%%; "
              "binomial n=323 p0=0.585 max err %.1e (limit 1e-10)",
              non_monotone, best, bin_err)};
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  auto base = fs::temp_directory_path() / ("cdense_accept_" + std::to_string(::getpid()));
  int rc_a = testutil::run_pipeline(base / "a", "3");
  int rc_b = testutil::run_pipeline(base / "b", "3");
  auto sa = testutil::snapshot(base / "a"), sb = testutil::snapshot(base / "b");
  fs::remove_all(base);
  std::size_t differing = 0;
  for (const auto& [k, v] : sa) differing += !sb.count(k) || sb.at(k) != v;
  differing += sb.size() - std::min(sb.size(), sa.size());
  return {rc_a == 0 && rc_b == 0 && differing == 0 && !sa.empty(),
          fmt("generate/label/train/predict/evaluate/combine twice: exit %d/%d, %zu files, %zu differ",
              rc_a, rc_b, sa.size(), differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"density score oracle", density_oracle},
      {"MI oracle", mi_oracle},
      {"production rules", production_rules},
      {"gradient check", gradient_check},
      {"decision fusion gain", fusion_gain},
      {"learning curve shape", learning_curve_shape},
      {"fold protocol invariants", fold_invariants},
      {"metric oracles", metric_oracles},
      {"confidence strata", confidence_strata},
      {"combination system", combination_system},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed ? 1 : 0;
}
