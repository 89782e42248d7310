#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdense/corpus.hpp"
#include "cdense/detector.hpp"
#include "cdense/error.hpp"
#include "cdense/learn.hpp"

namespace cdense {

enum class Preference { system, lead, tie };
enum class Choice { system, lead };

inline std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::system: return "system";
    case Preference::lead: return "lead";
    case Preference::tie: return "tie";
  }
  return "tie";
}

inline std::string_view to_string(Choice c) { return c == Choice::system ? "system" : "lead"; }

inline std::optional<Preference> preference_from_string(std::string_view s) {
  if (s == "system") return Preference::system;
  if (s == "lead") return Preference::lead;
  if (s == "tie") return Preference::tie;
  return std::nullopt;
}

struct SummaryPair {
  std::string article_id;
  AnnotatedLead lead_summary;
  AnnotatedLead system_summary;
  Preference human_preference = Preference::tie;
};

struct CombinationDecision {
  std::string article_id;
  double score_system = 0.0;
  double score_lead = 0.0;
  double score_difference = 0.0;
  double cutoff = 0.0;
  Choice chosen = Choice::lead;
};

// The system summary is used when score_system - score_lead >= cutoff.
inline CombinationDecision decide_from_scores(std::string article_id, double score_system,
                                              double score_lead, double cutoff) {
  CombinationDecision d;
  d.article_id = std::move(article_id);
  d.score_system = score_system;
  d.score_lead = score_lead;
  d.score_difference = score_system - score_lead;
  d.cutoff = cutoff;
  d.chosen = d.score_difference >= cutoff ? Choice::system : Choice::lead;
  return d;
}

inline CombinationDecision decide(const SummaryPair& pair, const Detector& detector,
                                  double cutoff) {
  for (const auto* s : {&pair.system_summary, &pair.lead_summary}) {
    if (!s->has_parses()) throw MissingParseError(s->id);
  }
  return decide_from_scores(pair.article_id, detector.predict_proba(pair.system_summary),
                            detector.predict_proba(pair.lead_summary), cutoff);
}

struct ScoredPair {
  std::string article_id;
  double score_system = 0.0;
  double score_lead = 0.0;
  Preference preference = Preference::tie;
};

// How a human "tie" judgement scores the combination output. The default
// counts a tie as wrong whichever summary was chosen.
enum class TieCredit { incorrect, correct };

struct CutoffRow {
  double cutoff = 0.0;
  std::size_t samples = 0;  // pairs with difference >= cutoff
  std::size_t prefer_system = 0;
  std::size_t prefer_tie = 0;
  std::size_t prefer_lead = 0;
  std::size_t combination_correct = 0;  // over all pairs
  double combination_pct = 0.0;
};

struct SweepReport {
  std::vector<CutoffRow> rows;
  std::size_t total = 0;
  std::size_t total_system = 0;
  std::size_t total_tie = 0;
  std::size_t total_lead = 0;
  TieCredit tie_credit = TieCredit::incorrect;
};

inline bool combination_correct(Choice c, Preference p, TieCredit tie) {
  if (p == Preference::tie) return tie == TieCredit::correct;
  return (c == Choice::system) == (p == Preference::system);
}

inline SweepReport sweep_scored(std::span<const ScoredPair> pairs, std::span<const double> cutoffs,
                                TieCredit tie = TieCredit::incorrect) {
  SweepReport rep;
  rep.tie_credit = tie;
  rep.total = pairs.size();
  for (const auto& p : pairs) {
    switch (p.preference) {
      case Preference::system: ++rep.total_system; break;
      case Preference::tie: ++rep.total_tie; break;
      case Preference::lead: ++rep.total_lead; break;
    }
  }
  for (double cut : cutoffs) {
    CutoffRow row;
    row.cutoff = cut;
    for (const auto& p : pairs) {
      auto d = decide_from_scores(p.article_id, p.score_system, p.score_lead, cut);
      if (d.chosen == Choice::system) {
        ++row.samples;
        switch (p.preference) {
          case Preference::system: ++row.prefer_system; break;
          case Preference::tie: ++row.prefer_tie; break;
          case Preference::lead: ++row.prefer_lead; break;
        }
      }
      row.combination_correct += combination_correct(d.chosen, p.preference, tie);
    }
    row.combination_pct = pairs.empty() ? 0.0
                                        : 100.0 * static_cast<double>(row.combination_correct) /
                                              static_cast<double>(pairs.size());
    rep.rows.push_back(row);
  }
  return rep;
}

inline std::vector<double> default_cutoffs() { return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}; }

inline SweepReport sweep_cutoffs(std::span<const SummaryPair> pairs, const Detector& detector,
                                 std::span<const double> cutoffs,
                                 TieCredit tie = TieCredit::incorrect) {
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto d = decide(p, detector, 0.0);
    scored.push_back({p.article_id, d.score_system, d.score_lead, p.human_preference});
  }
  return sweep_scored(scored, cutoffs, tie);
}

// Table layout: cutoff, samples, system, tie, lead, correct, pct; then an
// "All" row with the overall preference counts.
inline std::string format_sweep(const SweepReport& rep) {
  std::string out = "cutoff\tsamples\tprefer_system\tprefer_tie\tprefer_lead\tcombination_correct\tcombination_pct\n";
  char buf[256];
  std::vector<CutoffRow> rows = rep.rows;
  std::sort(rows.begin(), rows.end(),
            [](const CutoffRow& a, const CutoffRow& b) { return a.cutoff > b.cutoff; });
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g\t%zu\t%zu\t%zu\t%zu\t%zu\t%.1f\n", r.cutoff, r.samples,
                  r.prefer_system, r.prefer_tie, r.prefer_lead, r.combination_correct,
                  r.combination_pct);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "All\t%zu\t%zu\t%zu\t%zu\tNA\tNA\n", rep.total, rep.total_system,
                rep.total_tie, rep.total_lead);
  out += buf;
  out += rep.tie_credit == TieCredit::incorrect ? "# tie judgements counted as incorrect\n"
                                                : "# tie judgements counted as correct\n";
  return out;
}

// ---------------------------------------------------------------------------
// Pair files: one JSON object per line with article_id, lead_summary,
// system_summary (corpus records) and human_preference.

struct PairLoad {
  std::vector<SummaryPair> pairs;
  std::size_t identical_dropped = 0;
};

inline bool same_text(const AnnotatedLead& a, const AnnotatedLead& b) {
  return a.words() == b.words();
}

inline PairLoad read_pairs(std::istream& in) {
  PairLoad out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SummaryPair p;
    try {
      auto j = nlohmann::json::parse(line);
      p.article_id = j.at("article_id").get<std::string>();
      p.lead_summary = lead_from_line(j.at("lead_summary").dump(), line_no);
      p.system_summary = lead_from_line(j.at("system_summary").dump(), line_no);
      auto pref = preference_from_string(j.at("human_preference").get<std::string>());
      if (!pref) throw RecordError(line_no, "unknown human_preference");
      p.human_preference = *pref;
    } catch (const nlohmann::json::exception& e) {
      throw RecordError(line_no, e.what());
    }
    if (same_text(p.lead_summary, p.system_summary)) {
      ++out.identical_dropped;
      continue;
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

inline std::string pair_to_line(const SummaryPair& p) {
  ordered_json j;
  j["article_id"] = p.article_id;
  j["lead_summary"] = lead_to_json(p.lead_summary);
  j["system_summary"] = lead_to_json(p.system_summary);
  j["human_preference"] = std::string(to_string(p.human_preference));
  return j.dump();
}

// ---------------------------------------------------------------------------
// Baselines

// Accuracy of labeling every lead content-dense.
inline double baseline_always_dense(std::span<const Density> gold) {
  if (gold.empty()) throw DataError("baseline over an empty set");
  auto cd = std::count(gold.begin(), gold.end(), Density::content_dense);
  return static_cast<double>(cd) / static_cast<double>(gold.size());
}

struct LengthBaseline {
  LinearModel model;  // one weight over the standardized article length
  double mean = 0.0;
  double stddev = 0.0;
  double accuracy = 0.0;

  SparseFeatureVector feature(std::size_t length) const {
    SparseFeatureVector v{SpaceKind::combined, {}};
    double z = stddev > 0.0 ? (static_cast<double>(length) - mean) / stddev : 0.0;
    if (z != 0.0) v.entries.emplace_back(0, z);
    return v;
  }
};

// One-feature logistic model on the full article length, standardized with
// the training mean and standard deviation.
inline LengthBaseline baseline_article_length(std::span<const AnnotatedLead> train,
                                              std::span<const AnnotatedLead> test,
                                              double c = 1.0, const TrainConfig& cfg = {}) {
  for (auto span : {train, test}) {
    for (const auto& l : span) {
      if (l.article_word_count == 0) {
        throw ValidationError("lead '" + l.id + "' has no article_word_count");
      }
    }
  }
  if (test.empty()) throw DataError("empty test set");
  LengthBaseline b;
  double n = static_cast<double>(train.size());
  for (const auto& l : train) b.mean += static_cast<double>(l.article_word_count);
  b.mean /= n;
  double var = 0.0;
  for (const auto& l : train) {
    double d = static_cast<double>(l.article_word_count) - b.mean;
    var += d * d;
  }
  b.stddev = std::sqrt(var / n);
  std::vector<SparseFeatureVector> x;
  for (const auto& l : train) x.push_back(b.feature(l.article_word_count));
  auto y = labels_of(train);
  b.model = train_linear(x, y, 1, Loss::logistic, c, cfg);
  std::size_t ok = 0;
  for (const auto& l : test) {
    ok += decide_label(b.model.predict_proba(b.feature(l.article_word_count))) == *l.label;
  }
  b.accuracy = static_cast<double>(ok) / static_cast<double>(test.size());
  return b;
}

// One-sided exact binomial test: P(X >= successes) for X ~ Bin(n, p0).
inline double binomial_superiority_check(std::size_t successes, std::size_t n, double p0) {
  if (successes > n) throw ValidationError("successes exceed trials");
  if (!(p0 > 0.0 && p0 < 1.0)) throw ValidationError("p0 must lie in (0, 1)");
  if (successes == 0) return 1.0;
  const double lp = std::log(p0), lq = std::log1p(-p0);
  const double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
  // Sum the tail from its largest term outward in log space.
  std::vector<double> logs;
  logs.reserve(n - successes + 1);
  for (std::size_t i = successes; i <= n; ++i) {
    double di = static_cast<double>(i);
    logs.push_back(lg_n - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) +
                   di * lp + static_cast<double>(n - i) * lq);
  }
  double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return std::min(1.0, std::exp(mx) * s);
}

}  // namespace cdense
