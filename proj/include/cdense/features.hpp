#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/error.hpp"

namespace cdense {

enum class SpaceKind { mrc, mi, pr, combined };

inline std::string_view to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::mrc: return "MRC";
    case SpaceKind::mi: return "MI";
    case SpaceKind::pr: return "PR";
    case SpaceKind::combined: return "ALL";
  }
  return "ALL";
}

inline std::optional<SpaceKind> space_kind_from_string(std::string_view s) {
  for (SpaceKind k : {SpaceKind::mrc, SpaceKind::mi, SpaceKind::pr, SpaceKind::combined}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

// Bijection between feature keys and [0, dim).
class FeatureSpace {
 public:
  FeatureSpace() = default;
  FeatureSpace(SpaceKind kind, std::vector<std::string> keys) : kind_(kind) {
    for (auto& k : keys) add(std::move(k));
  }

  SpaceKind kind() const { return kind_; }
  std::string name() const { return std::string(to_string(kind_)); }
  std::size_t dim() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  std::optional<std::uint32_t> find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Returns the index of key, inserting it if new.
  std::uint32_t add(std::string key) {
    auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(keys_.size()));
    if (inserted) keys_.push_back(std::move(key));
    return it->second;
  }

  bool operator==(const FeatureSpace& o) const { return kind_ == o.kind_ && keys_ == o.keys_; }

 private:
  SpaceKind kind_ = SpaceKind::combined;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Sorted (index, value) pairs over a named space. Zero values are omitted.
struct SparseFeatureVector {
  SpaceKind space = SpaceKind::combined;
  std::vector<std::pair<std::uint32_t, double>> entries;

  std::optional<double> get(std::uint32_t i) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), i,
                               [](const auto& e, std::uint32_t k) { return e.first < k; });
    if (it != entries.end() && it->first == i) return it->second;
    return std::nullopt;
  }
};

namespace detail {

inline SparseFeatureVector from_map(SpaceKind kind, const std::map<std::uint32_t, double>& m) {
  SparseFeatureVector v{kind, {}};
  v.entries.reserve(m.size());
  for (const auto& [i, x] : m) {
    if (x != 0.0) v.entries.emplace_back(i, x);
  }
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MRC lexicon features

inline FeatureSpace make_mrc_space(const std::vector<std::string>& lexicon) {
  if (lexicon.empty()) throw ValidationError("MRC lexicon is empty");
  std::set<std::string> words;
  for (const auto& w : lexicon) {
    if (!w.empty()) words.insert(to_lower(w));
  }
  return FeatureSpace(SpaceKind::mrc, {words.begin(), words.end()});
}

inline std::vector<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  if (out.empty()) throw ValidationError("lexicon '" + path + "' is empty");
  return out;
}

// count(w) / lead token count, for every lexicon word w present in the lead.
inline SparseFeatureVector mrc_features(const AnnotatedLead& lead, const FeatureSpace& space) {
  if (space.kind() != SpaceKind::mrc) throw SpaceMismatchError("expected an MRC space");
  std::size_t total = lead.token_count();
  if (total == 0) throw EmptyLeadError(lead.id);
  std::map<std::uint32_t, double> counts;
  for (const auto& w : lead.words()) {
    if (auto i = space.find(w)) counts[*i] += 1.0;
  }
  for (auto& [i, x] : counts) x /= static_cast<double>(total);
  return detail::from_map(SpaceKind::mrc, counts);
}

// ---------------------------------------------------------------------------
// Mutual-information vocabulary

struct MiEntry {
  std::string word;
  Density cls;
  double mi = 0.0;
  std::size_t docs_with_word = 0;
  std::size_t docs_in_class_with_word = 0;
};

struct MiVocabulary {
  FeatureSpace space;
  std::vector<MiEntry> content_dense;      // ranked, best first
  std::vector<MiEntry> non_content_dense;  // ranked, best first
};

struct MiOptions {
  std::size_t min_count = 5;
  std::size_t top_k = 500;
};

// Document-presence counts per word for a labeled training fold.
struct MiCounts {
  std::size_t n_docs = 0;
  std::size_t n_class[2] = {0, 0};
  // word -> {docs containing, docs of class 0 containing, docs of class 1 containing}
  std::map<std::string, std::array<std::size_t, 3>> words;
};

inline MiCounts count_document_presence(std::span<const AnnotatedLead> train) {
  MiCounts c;
  for (const auto& lead : train) {
    if (!lead.label) throw ValidationError("lead '" + lead.id + "' has no label");
    int k = static_cast<int>(*lead.label);
    ++c.n_docs;
    ++c.n_class[k];
    auto ws = lead.words();
    std::unordered_set<std::string> uniq(ws.begin(), ws.end());
    for (const auto& w : uniq) {
      auto& row = c.words[w];
      ++row[0];
      ++row[1 + k];
    }
  }
  return c;
}

// MI_c(w) = ln p(w,c) / (p(w) p(c)) with document-level probabilities.
// Words never seen in class c have MI = -inf for c and are not ranked there.
// Ties in MI are broken lexicographically.
inline MiVocabulary select_mi_vocabulary(std::span<const AnnotatedLead> train,
                                         const MiOptions& opt = {}) {
  MiCounts c = count_document_presence(train);
  if (c.n_class[0] == 0 || c.n_class[1] == 0) throw SingleClassError();
  const double n = static_cast<double>(c.n_docs);

  MiVocabulary out;
  for (int k = 0; k < 2; ++k) {
    std::vector<MiEntry> ranked;
    for (const auto& [word, row] : c.words) {
      if (row[0] < opt.min_count || row[1 + k] == 0) continue;
      double p_wc = static_cast<double>(row[1 + k]) / n;
      double p_w = static_cast<double>(row[0]) / n;
      double p_c = static_cast<double>(c.n_class[k]) / n;
      ranked.push_back({word, static_cast<Density>(k), std::log(p_wc / (p_w * p_c)), row[0],
                        row[1 + k]});
    }
    // Within a class MI is monotone in n_wc / n_w, so rank by that exact
    // rational to keep equal-MI words tied regardless of rounding.
    std::sort(ranked.begin(), ranked.end(), [](const MiEntry& a, const MiEntry& b) {
      auto lhs = a.docs_in_class_with_word * b.docs_with_word;
      auto rhs = b.docs_in_class_with_word * a.docs_with_word;
      if (lhs != rhs) return lhs > rhs;
      return a.word < b.word;
    });
    if (ranked.size() > opt.top_k) ranked.resize(opt.top_k);
    (k == 1 ? out.content_dense : out.non_content_dense) = std::move(ranked);
  }
  out.space = FeatureSpace(SpaceKind::mi, {});
  for (const auto& e : out.content_dense) out.space.add(e.word);
  for (const auto& e : out.non_content_dense) out.space.add(e.word);
  return out;
}

// Binary presence indicators over the selected vocabulary.
inline SparseFeatureVector mi_features(const AnnotatedLead& lead, const FeatureSpace& space) {
  if (space.kind() != SpaceKind::mi) throw SpaceMismatchError("expected an MI space");
  if (lead.token_count() == 0) throw EmptyLeadError(lead.id);
  std::map<std::uint32_t, double> present;
  for (const auto& w : lead.words()) {
    if (auto i = space.find(w)) present[*i] = 1.0;
  }
  return detail::from_map(SpaceKind::mi, present);
}

// ---------------------------------------------------------------------------
// Production rules

struct ProductionRule {
  std::string lhs;
  std::vector<std::string> rhs;

  std::string key() const {
    std::string s = lhs + " ->";
    for (const auto& r : rhs) {
      s += ' ';
      s += r;
    }
    return s;
  }

  auto operator<=>(const ProductionRule&) const = default;
};

namespace detail {

inline void collect_rules(const ParseTree& t, std::vector<ProductionRule>& out) {
  if (t.is_leaf()) return;  // preterminal -> word is lexical
  ProductionRule r{t.label, {}};
  r.rhs.reserve(t.children.size());
  for (const auto& c : t.children) r.rhs.push_back(c.label);
  out.push_back(std::move(r));
  for (const auto& c : t.children) collect_rules(c, out);
}

}  // namespace detail

// Unlexicalized productions, one per internal node, in pre-order.
inline std::vector<ProductionRule> extract_production_rules(const ParseTree& tree) {
  std::vector<ProductionRule> out;
  detail::collect_rules(tree, out);
  return out;
}

inline std::vector<ProductionRule> lead_production_rules(const AnnotatedLead& lead) {
  if (!lead.has_parses()) throw MissingParseError(lead.id);
  std::vector<ProductionRule> out;
  for (const auto& s : lead.sentences) {
    auto r = extract_production_rules(*s.parse);
    out.insert(out.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  return out;
}

enum class PrValue { count, binary };

// Every rule seen in the training leads, keys in lexicographic order.
inline FeatureSpace make_pr_space(std::span<const AnnotatedLead> train) {
  std::set<std::string> keys;
  for (const auto& lead : train) {
    for (const auto& r : lead_production_rules(lead)) keys.insert(r.key());
  }
  return FeatureSpace(SpaceKind::pr, {keys.begin(), keys.end()});
}

inline SparseFeatureVector pr_features(const AnnotatedLead& lead, const FeatureSpace& space,
                                       PrValue mode = PrValue::count) {
  if (space.kind() != SpaceKind::pr) throw SpaceMismatchError("expected a PR space");
  std::map<std::uint32_t, double> counts;
  for (const auto& r : lead_production_rules(lead)) {
    if (auto i = space.find(r.key())) {
      if (mode == PrValue::binary) counts[*i] = 1.0;
      else counts[*i] += 1.0;
    }
  }
  return detail::from_map(SpaceKind::pr, counts);
}

// ---------------------------------------------------------------------------
// Concatenation

inline int canonical_rank(SpaceKind k) {
  switch (k) {
    case SpaceKind::mrc: return 0;
    case SpaceKind::mi: return 1;
    case SpaceKind::pr: return 2;
    case SpaceKind::combined: return 3;
  }
  return 3;
}

// Joins vectors from distinct spaces into one combined vector. Offsets are
// the cumulative dims of the participating spaces in MRC, MI, PR order.
inline SparseFeatureVector concat_features(
    std::span<const std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts) {
  std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> sorted(parts.begin(),
                                                                                 parts.end());
  for (const auto& [space, vec] : sorted) {
    if (space->kind() == SpaceKind::combined) {
      throw ValidationError("cannot concatenate an already combined vector");
    }
    if (vec->space != space->kind()) throw SpaceMismatchError("vector/space kind mismatch");
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return canonical_rank(a.first->kind()) < canonical_rank(b.first->kind());
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].first->kind() == sorted[i - 1].first->kind()) {
      throw ValidationError("duplicate feature space " + sorted[i].first->name());
    }
  }
  SparseFeatureVector out{SpaceKind::combined, {}};
  std::uint32_t offset = 0;
  for (const auto& [space, vec] : sorted) {
    for (const auto& [i, x] : vec->entries) {
      if (i >= space->dim()) throw SpaceMismatchError("feature index out of range");
      out.entries.emplace_back(offset + i, x);
    }
    offset += static_cast<std::uint32_t>(space->dim());
  }
  return out;
}

// The matching combined space; keys are prefixed with their space name.
inline FeatureSpace concat_spaces(std::span<const FeatureSpace* const> spaces) {
  std::vector<const FeatureSpace*> sorted(spaces.begin(), spaces.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return canonical_rank(a->kind()) < canonical_rank(b->kind());
  });
  FeatureSpace out(SpaceKind::combined, {});
  for (const auto* s : sorted) {
    for (const auto& k : s->keys()) out.add(s->name() + ":" + k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Space bundle used by the learners.

struct FeatureSpaces {
  std::optional<FeatureSpace> mrc;
  std::optional<FeatureSpace> mi;
  std::optional<FeatureSpace> pr;
  PrValue pr_value = PrValue::count;

  const FeatureSpace& get(SpaceKind k) const {
    const std::optional<FeatureSpace>* s = k == SpaceKind::mrc  ? &mrc
                                           : k == SpaceKind::mi ? &mi
                                                                : &pr;
    if (k == SpaceKind::combined || !s->has_value()) {
      throw ValidationError("feature space " + std::string(to_string(k)) + " not built");
    }
    return **s;
  }

  SparseFeatureVector extract(const AnnotatedLead& lead, SpaceKind k) const {
    switch (k) {
      case SpaceKind::mrc: return mrc_features(lead, get(k));
      case SpaceKind::mi: return mi_features(lead, get(k));
      case SpaceKind::pr: return pr_features(lead, get(k), pr_value);
      case SpaceKind::combined: break;
    }
    throw ValidationError("use extract_combined for the combined space");
  }

  std::vector<SpaceKind> available() const {
    std::vector<SpaceKind> out;
    if (mrc) out.push_back(SpaceKind::mrc);
    if (mi) out.push_back(SpaceKind::mi);
    if (pr) out.push_back(SpaceKind::pr);
    return out;
  }

  std::size_t combined_dim() const {
    std::size_t d = 0;
    for (auto k : available()) d += get(k).dim();
    return d;
  }

  SparseFeatureVector extract_combined(const AnnotatedLead& lead) const {
    std::vector<SparseFeatureVector> vecs;
    std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts;
    auto kinds = available();
    vecs.reserve(kinds.size());
    for (auto k : kinds) vecs.push_back(extract(lead, k));
    for (std::size_t i = 0; i < kinds.size(); ++i) parts.emplace_back(&get(kinds[i]), &vecs[i]);
    return concat_features(parts);
  }
};

// Writes "index<TAB>key" lines.
inline void write_space_table(std::ostream& out, const FeatureSpace& space) {
  for (std::size_t i = 0; i < space.dim(); ++i) out << i << '\t' << space.keys()[i] << '\n';
}

inline FeatureSpace read_space_table(std::istream& in, SpaceKind kind) {
  FeatureSpace s(kind, {});
  std::string line;
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ValidationError("space table line without tab");
    if (std::stoul(line.substr(0, tab)) != expect) {
      throw ValidationError("space table indices must be consecutive from 0");
    }
    s.add(line.substr(tab + 1));
    ++expect;
  }
  if (s.dim() != expect) throw ValidationError("space table has duplicate keys");
  return s;
}

}  // namespace cdense
