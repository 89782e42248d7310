#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/error.hpp"

namespace cdense {

struct DensityScore {
  std::string lead_id;
  double score = 0.0;
};

struct HeuristicLabel {
  std::string lead_id;
  Density label;
};

// Fraction of summary (word, pos) tuples that occur anywhere in the lead.
// Duplicate summary tuples count once per occurrence.
inline double content_density_score(std::span<const WordPosTuple> summary,
                                    std::span<const WordPosTuple> lead) {
  if (summary.empty()) throw EmptySummaryError();
  std::unordered_set<WordPosTuple, WordPosHash> in_lead(lead.begin(), lead.end());
  std::size_t hits = 0;
  for (const auto& t : summary) hits += in_lead.count(t);
  return static_cast<double>(hits) / static_cast<double>(summary.size());
}

// Linear interpolation between closest ranks on a sorted sample
// (pct in [0,100]).
inline double percentile(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw DataError("percentile of empty sample");
  double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Leads strictly below the low percentile become non_content_dense, strictly
// above the high percentile content_dense; the middle is dropped. The larger
// class is trimmed from its threshold side until both classes are equal.
// Output order: non_content_dense ascending by score, then content_dense
// descending by score.
inline std::vector<HeuristicLabel> percentile_label(std::span<const DensityScore> scores,
                                                    double low_pct = 20.0,
                                                    double high_pct = 80.0) {
  if (scores.size() < 2) throw DataError("percentile labeling needs at least 2 scores");
  if (!(low_pct >= 0.0 && low_pct <= high_pct && high_pct <= 100.0)) {
    throw UsageError("percentiles must satisfy 0 <= low <= high <= 100");
  }
  std::vector<double> sorted;
  sorted.reserve(scores.size());
  for (const auto& s : scores) sorted.push_back(s.score);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw DegenerateDistributionError("all content-density scores are identical");
  }
  double low_cut = percentile(sorted, low_pct);
  double high_cut = percentile(sorted, high_pct);

  std::vector<const DensityScore*> low, high;
  for (const auto& s : scores) {
    if (s.score < low_cut) low.push_back(&s);
    else if (s.score > high_cut) high.push_back(&s);
  }
  // Farthest from the threshold first; id breaks ties.
  std::sort(low.begin(), low.end(), [](const DensityScore* a, const DensityScore* b) {
    return a->score != b->score ? a->score < b->score : a->lead_id < b->lead_id;
  });
  std::sort(high.begin(), high.end(), [](const DensityScore* a, const DensityScore* b) {
    return a->score != b->score ? a->score > b->score : a->lead_id < b->lead_id;
  });
  std::size_t n = std::min(low.size(), high.size());
  if (n == 0) {
    throw DegenerateDistributionError("percentile thresholds leave a class empty");
  }
  std::vector<HeuristicLabel> out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({low[i]->lead_id, Density::non_content_dense});
  for (std::size_t i = 0; i < n; ++i) out.push_back({high[i]->lead_id, Density::content_dense});
  return out;
}

struct CorpusScores {
  std::vector<DensityScore> scores;
  std::size_t skipped = 0;  // leads without a long enough summary
};

// Scores every lead whose summary has at least min_summary_words tuples.
inline CorpusScores score_corpus(std::span<const AnnotatedLead> corpus,
                                 std::size_t min_summary_words = 25) {
  CorpusScores out;
  for (const auto& lead : corpus) {
    if (!lead.summary || lead.summary->size() < min_summary_words ||
        lead.summary->empty()) {
      ++out.skipped;
      continue;
    }
    auto lead_tuples = lead.tuples();
    out.scores.push_back({lead.id, content_density_score(*lead.summary, lead_tuples)});
  }
  return out;
}

}  // namespace cdense
