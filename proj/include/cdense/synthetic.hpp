#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdense/corpus.hpp"
#include "cdense/error.hpp"
#include "cdense/summcomb.hpp"

namespace cdense::synth {

// Each representation carries its own evidence. For every lead and every
// representation a hidden polarity agrees with the true label with the given
// probability (independently across representations). The channels do not
// overlap: MRC polarity only changes how often the lead's lexicon words repeat,
// MI polarity only changes which marker set is used, and PR polarity only
// changes bracketing (flat vs nested), never the words.
struct SignalProfile {
  double mrc_agreement = 0.7;
  double mi_agreement = 0.7;
  double pr_agreement = 0.7;

  // Each lead holds a few distinct lexicon words regardless of polarity;
  // dense polarity repeats each of them.
  std::size_t lexicon_words_min = 3;
  std::size_t lexicon_words_max = 3;
  std::size_t lexicon_repeat_dense = 4;
  std::size_t lexicon_repeat_sparse = 1;
  // Marker word rate per content slot, and the chance a marker comes from
  // the opposite polarity's set.
  double marker_rate = 0.45;
  double marker_noise = 0.0;
  // Probability of the polarity's preferred bracketing is (1 + skew) / 2.
  double rule_skew = 0.95;

  std::size_t lexicon_size = 12;
  std::size_t markers_per_class = 20;
  std::size_t filler_per_pos = 2000;

  static SignalProfile defaults() { return {}; }

  // No representation carries information about the label.
  static SignalProfile null() {
    SignalProfile p;
    p.mrc_agreement = p.mi_agreement = p.pr_agreement = 0.5;
    return p;
  }

  // Every representation agrees with the label and evidence is strong.
  static SignalProfile separable() {
    SignalProfile p;
    p.mrc_agreement = p.mi_agreement = p.pr_agreement = 1.0;
    p.lexicon_repeat_dense = 5;
    p.marker_rate = 0.3;
    p.marker_noise = 0.0;
    p.rule_skew = 0.9;
    p.lexicon_size = 60;
    p.markers_per_class = 30;
    return p;
  }

  // Only the MRC lexicon representation carries signal.
  static SignalProfile mrc_only() {
    SignalProfile p;
    p.mrc_agreement = 0.85;
    p.mi_agreement = p.pr_agreement = 0.5;
    return p;
  }
};

inline std::optional<SignalProfile> profile_from_string(std::string_view s) {
  if (s == "default") return SignalProfile::defaults();
  if (s == "null") return SignalProfile::null();
  if (s == "separable") return SignalProfile::separable();
  if (s == "mrc-only") return SignalProfile::mrc_only();
  return std::nullopt;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  std::uint64_t raw() { return eng_(); }

  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 eng_;
};

namespace detail {

// Pronounceable pseudo-words, deterministic in (tag, index).
inline std::string pseudo_word(std::string_view tag, std::size_t index) {
  static constexpr const char* kOnset[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                           "p", "r", "s", "t", "v", "z", "br", "st"};
  static constexpr const char* kVowel[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : tag) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
  h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6);
  std::string w;
  for (int s = 0; s < 3; ++s) {
    w += kOnset[h % 16];
    h /= 16;
    w += kVowel[h % 8];
    h /= 8;
  }
  return w + std::to_string(index);
}

inline std::vector<std::string> word_list(std::string_view tag, std::size_t n) {
  std::vector<std::string> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(pseudo_word(tag, i));
  return v;
}

}  // namespace detail

struct Vocabulary {
  std::vector<std::string> lexicon;
  std::vector<std::string> markers_dense;
  std::vector<std::string> markers_sparse;
  std::vector<std::string> nouns, verbs, adjectives, adverbs, names;

  explicit Vocabulary(const SignalProfile& p)
      : lexicon(detail::word_list("lex", p.lexicon_size)),
        markers_dense(detail::word_list("mkd", p.markers_per_class)),
        markers_sparse(detail::word_list("mks", p.markers_per_class)),
        nouns(detail::word_list("nn", p.filler_per_pos)),
        verbs(detail::word_list("vb", p.filler_per_pos / 4)),
        adjectives(detail::word_list("jj", p.filler_per_pos / 2)),
        adverbs(detail::word_list("rb", p.filler_per_pos / 8)),
        names(detail::word_list("np", p.filler_per_pos / 4)) {}
};

// Polarities chosen for one lead.
struct Polarity {
  bool mrc_dense = true;
  bool mi_dense = true;
  bool pr_dense = true;
};

class LeadBuilder {
 public:
  LeadBuilder(const SignalProfile& p, const Vocabulary& v, Rng& rng, Polarity pol)
      : p_(p), v_(v), rng_(rng), pol_(pol) {}

  Sentence sentence() {
    tokens_.clear();
    ParseTree s = node("S", {np(0), vp(0), leaf(".", ".")});
    Sentence out;
    out.tokens = tokens_;
    out.parse = std::move(s);
    ++sentence_index_;
    return out;
  }

  // (sentence, token) positions holding plain filler content words.
  const std::vector<std::pair<std::size_t, std::size_t>>& filler_slots() const { return slots_; }

 private:
  ParseTree node(std::string label, std::vector<ParseTree> kids) {
    return ParseTree{std::move(label), std::move(kids), std::nullopt};
  }

  ParseTree leaf(const std::string& pos, const std::string& surface) {
    tokens_.push_back(Token{surface, pos, std::nullopt});
    return ParseTree{pos, {}, surface};
  }

  // Content word: marker or filler for the POS.
  ParseTree content(const std::string& pos, const std::vector<std::string>& filler) {
    if (rng_.bernoulli(p_.marker_rate)) {
      bool dense = pol_.mi_dense != rng_.bernoulli(p_.marker_noise);
      return leaf(pos, rng_.pick(dense ? v_.markers_dense : v_.markers_sparse));
    }
    slots_.emplace_back(sentence_index_, tokens_.size());
    return leaf(pos, rng_.pick(filler));
  }

  // Flat or nested bracketing of the same children. Nested moves everything
  // after the first child under an intermediate node.
  ParseTree phrase(const std::string& label, std::vector<ParseTree> kids) {
    bool flat_preferred = pol_.pr_dense;
    bool flat = rng_.bernoulli((1.0 + p_.rule_skew) / 2.0) == flat_preferred;
    if (flat || kids.size() < 2) return node(label, std::move(kids));
    std::vector<ParseTree> rest(std::make_move_iterator(kids.begin() + 1),
                                std::make_move_iterator(kids.end()));
    std::vector<ParseTree> outer;
    outer.push_back(std::move(kids.front()));
    outer.push_back(node(label.substr(0, 1) + "X", std::move(rest)));
    return node(label, std::move(outer));
  }

  ParseTree dt() {
    static const std::vector<std::string> d = {"the", "a", "this", "that", "every"};
    return leaf("DT", rng_.pick(d));
  }
  ParseTree nn() { return content("NN", v_.nouns); }
  ParseTree nns() { return content("NNS", v_.nouns); }
  ParseTree jj() { return content("JJ", v_.adjectives); }
  ParseTree rb() { return content("RB", v_.adverbs); }
  ParseTree vbd() { return content("VBD", v_.verbs); }
  ParseTree vb() { return content("VB", v_.verbs); }
  ParseTree nnp() {
    std::string w = rng_.pick(v_.names);
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return leaf("NNP", w);
  }
  ParseTree cd() { return leaf("CD", std::to_string(rng_.between(2, 999))); }
  ParseTree in() {
    static const std::vector<std::string> w = {"of", "in", "on", "for", "with", "after"};
    return leaf("IN", rng_.pick(w));
  }
  ParseTree prp() {
    static const std::vector<std::string> w = {"he", "she", "they", "it", "we"};
    return leaf("PRP", rng_.pick(w));
  }
  ParseTree rp() {
    static const std::vector<std::string> w = {"up", "down", "out", "off"};
    return leaf("RP", rng_.pick(w));
  }
  ParseTree md() {
    static const std::vector<std::string> w = {"will", "could", "may", "would"};
    return leaf("MD", rng_.pick(w));
  }

  ParseTree pp(int depth) { return phrase("PP", {in(), np(depth + 1)}); }

  ParseTree np(int depth) {
    switch (rng_.below(depth >= 2 ? 8 : 10)) {
      case 0: return phrase("NP", {dt(), nn()});
      case 1: return phrase("NP", {dt(), jj(), nn()});
      case 2: return phrase("NP", {nnp(), nnp()});
      case 3: return phrase("NP", {jj(), cd(), nns()});
      case 4: return phrase("NP", {cd(), nns()});
      case 5: return phrase("NP", {prp()});
      case 6: return phrase("NP", {dt(), nn(), nn()});
      case 7: return phrase("NP", {dt(), jj(), jj(), nns()});
      case 8: return phrase("NP", {np(depth + 1), pp(depth)});
      default: return phrase("NP", {nns(), pp(depth)});
    }
  }

  ParseTree vp(int depth) {
    switch (rng_.below(depth >= 2 ? 8 : 10)) {
      case 0: return phrase("VP", {vbd(), np(depth + 1)});
      case 1: return phrase("VP", {vbd(), phrase("ADJP", {rb(), jj()})});
      case 2:
        return phrase("VP", {vb(), np(depth + 1), phrase("PRT", {rp()}), phrase("ADVP", {rb()})});
      case 3: return phrase("VP", {vbd(), phrase("ADVP", {rb()})});
      case 4: return phrase("VP", {vbd(), np(depth + 1), pp(depth)});
      case 5: return phrase("VP", {md(), phrase("VP", {vb(), phrase("ADVP", {rb()})})});
      case 6: return phrase("VP", {vbd(), np(depth + 1), phrase("ADVP", {rb()})});
      case 7: return phrase("VP", {vbd(), phrase("ADJP", {jj()})});
      case 8:
        return phrase("VP", {vbd(), phrase("SBAR", {in(), phrase("S", {np(depth + 1),
                                                                     vp(depth + 1)})})});
      default: return phrase("VP", {md(), phrase("VP", {vb(), np(depth + 1)})});
    }
  }

  const SignalProfile& p_;
  const Vocabulary& v_;
  Rng& rng_;
  Polarity pol_;
  std::vector<Token> tokens_;
  std::size_t sentence_index_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> slots_;
};

namespace detail {

inline bool set_leaf_word(ParseTree& t, std::size_t& index, const std::string& word) {
  if (t.is_leaf()) {
    if (index-- == 0) {
      t.leaf_word = word;
      return true;
    }
    return false;
  }
  for (auto& c : t.children) {
    if (set_leaf_word(c, index, word)) return true;
  }
  return false;
}

}  // namespace detail

struct GeneratedCorpus {
  Corpus leads;
  std::vector<std::string> lexicon;
  std::vector<std::string> planted_dense_markers;
  std::vector<std::string> planted_sparse_markers;
};

inline Polarity draw_polarity(const SignalProfile& p, Density label, Rng& rng) {
  bool dense = label == Density::content_dense;
  return {dense == rng.bernoulli(p.mrc_agreement), dense == rng.bernoulli(p.mi_agreement),
          dense == rng.bernoulli(p.pr_agreement)};
}

inline std::string join_surfaces(const std::vector<Sentence>& sents) {
  std::string text;
  for (const auto& s : sents) {
    for (const auto& t : s.tokens) {
      if (!text.empty() && t.pos != ".") text += ' ';
      text += t.surface;
    }
  }
  return text;
}

inline AnnotatedLead make_lead(std::string id, const SignalProfile& p, const Vocabulary& v,
                               Rng& rng, Polarity pol, std::size_t min_sentences = 4,
                               std::size_t max_sentences = 5) {
  AnnotatedLead lead;
  lead.id = std::move(id);
  lead.domain = Domain::general;
  LeadBuilder b(p, v, rng, pol);
  std::size_t n_sent = rng.between(min_sentences, max_sentences);
  for (std::size_t s = 0; s < n_sent; ++s) lead.sentences.push_back(b.sentence());

  // Lexicon words overwrite filler slots.
  auto slots = b.filler_slots();
  for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.below(i)]);
  std::size_t distinct = rng.between(p.lexicon_words_min, p.lexicon_words_max);
  std::size_t repeat = pol.mrc_dense ? p.lexicon_repeat_dense : p.lexicon_repeat_sparse;
  std::size_t used = 0;
  for (std::size_t k = 0; k < distinct; ++k) {
    const std::string& word = rng.pick(v.lexicon);
    for (std::size_t r = 0; r < repeat && used < slots.size(); ++r, ++used) {
      auto [si, ti] = slots[used];
      auto& sent = lead.sentences[si];
      sent.tokens[ti].surface = word;
      std::size_t index = ti;
      detail::set_leaf_word(*sent.parse, index, word);
    }
  }
  lead.lead_text = join_surfaces(lead.sentences);
  lead.article_word_count = lead.token_count();
  return lead;
}

// Manual-summary stand-in: tuples copied from the lead at a label-dependent
// rate, the rest novel. Overlap scores therefore track the label.
inline std::vector<WordPosTuple> make_summary(const AnnotatedLead& lead, Density label,
                                              const Vocabulary& v, Rng& rng) {
  auto tuples = lead.tuples();
  double overlap = label == Density::content_dense ? 0.55 + 0.35 * rng.uniform()
                                                   : 0.10 + 0.35 * rng.uniform();
  std::size_t len = rng.between(25, 40);
  std::vector<WordPosTuple> out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (rng.bernoulli(overlap)) {
      out.push_back(tuples[rng.below(tuples.size())]);
    } else {
      out.push_back({"sum" + rng.pick(v.nouns), "NN"});
    }
  }
  return out;
}

// Balanced corpus: labels alternate, ids are lead-000000 style.
inline GeneratedCorpus generate_corpus(std::size_t n_leads, const SignalProfile& p,
                                       std::uint64_t seed) {
  if (n_leads == 0) throw UsageError("n_leads must be positive");
  Vocabulary v(p);
  Rng rng(seed);
  GeneratedCorpus out;
  out.lexicon = v.lexicon;
  out.planted_dense_markers = v.markers_dense;
  out.planted_sparse_markers = v.markers_sparse;
  out.leads.reserve(n_leads);
  for (std::size_t i = 0; i < n_leads; ++i) {
    Density label = i % 2 == 0 ? Density::content_dense : Density::non_content_dense;
    char id[32];
    std::snprintf(id, sizeof id, "lead-%06zu", i);
    auto lead = make_lead(id, p, v, rng, draw_polarity(p, label, rng));
    lead.summary = make_summary(lead, label, v, rng);
    // Full-article length: weakly longer for non-dense leads.
    std::size_t base = label == Density::content_dense ? 500 : 650;
    lead.article_word_count = lead.token_count() + base + rng.below(700);
    lead.label = label;
    out.leads.push_back(std::move(lead));
  }
  return out;
}

// Summary pairs with human preferences. A latent preference decides which
// summary gets dense-polarity text in every representation with probability
// `signal`; the rest is drawn at random.
inline std::vector<SummaryPair> generate_pairs(std::size_t n_pairs, const SignalProfile& p,
                                               std::uint64_t seed, double signal = 0.8) {
  Vocabulary v(p);
  Rng rng(seed);
  std::vector<SummaryPair> out;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    SummaryPair pair;
    char id[32];
    std::snprintf(id, sizeof id, "article-%05zu", i);
    pair.article_id = id;
    double u = rng.uniform();
    pair.human_preference = u < 0.34 ? Preference::system
                            : u < 0.42 ? Preference::tie
                                       : Preference::lead;
    bool system_dense = pair.human_preference == Preference::system;
    bool lead_dense = pair.human_preference != Preference::system;
    auto pol_for = [&](bool dense) {
      bool d = rng.bernoulli(signal) ? dense : rng.bernoulli(0.5);
      return Polarity{d, d, d};
    };
    pair.lead_summary = make_lead(pair.article_id + "-lead", p, v, rng, pol_for(lead_dense), 1, 2);
    pair.system_summary =
        make_lead(pair.article_id + "-system", p, v, rng, pol_for(system_dense), 1, 2);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace cdense::synth
