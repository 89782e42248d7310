#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdense/error.hpp"

namespace cdense {

enum class Domain { business, science, sports, politics, general };

// Binary content-density class. content_dense is the positive class (+1).
enum class Density { non_content_dense = 0, content_dense = 1 };

inline std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::business: return "business";
    case Domain::science: return "science";
    case Domain::sports: return "sports";
    case Domain::politics: return "politics";
    case Domain::general: return "general";
  }
  return "general";
}

inline std::optional<Domain> domain_from_string(std::string_view s) {
  for (Domain d : {Domain::business, Domain::science, Domain::sports,
                   Domain::politics, Domain::general}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

inline std::string_view to_string(Density d) {
  return d == Density::content_dense ? "content_dense" : "non_content_dense";
}

inline std::optional<Density> density_from_string(std::string_view s) {
  if (s == "content_dense") return Density::content_dense;
  if (s == "non_content_dense") return Density::non_content_dense;
  return std::nullopt;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

struct WordPosTuple {
  std::string word;  // case-folded
  std::string pos;

  auto operator<=>(const WordPosTuple&) const = default;
};

struct WordPosHash {
  std::size_t operator()(const WordPosTuple& t) const noexcept {
    std::size_t h = std::hash<std::string>{}(t.word);
    return h ^ (std::hash<std::string>{}(t.pos) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

struct Token {
  std::string surface;
  std::string pos;
  std::optional<std::string> lemma;

  // The lexical form used by every word-level feature: the lemma when
  // supplied, the lower-cased surface otherwise.
  std::string word() const { return lemma ? to_lower(*lemma) : to_lower(surface); }
};

struct ParseTree {
  std::string label;
  std::vector<ParseTree> children;
  std::optional<std::string> leaf_word;  // present iff children is empty

  bool is_leaf() const { return children.empty(); }

  std::size_t leaf_count() const {
    if (is_leaf()) return 1;
    std::size_t n = 0;
    for (const auto& c : children) n += c.leaf_count();
    return n;
  }

  bool operator==(const ParseTree&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::optional<ParseTree> parse;
};

struct AnnotatedLead {
  std::string id;
  Domain domain = Domain::general;
  std::string lead_text;
  std::vector<Sentence> sentences;
  std::optional<std::vector<WordPosTuple>> summary;
  std::size_t article_word_count = 0;
  std::optional<Density> label;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
  }

  std::vector<WordPosTuple> tuples() const {
    std::vector<WordPosTuple> out;
    out.reserve(token_count());
    for (const auto& s : sentences) {
      for (const auto& t : s.tokens) out.push_back({t.word(), t.pos});
    }
    return out;
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    out.reserve(token_count());
    for (const auto& s : sentences) {
      for (const auto& t : s.tokens) out.push_back(t.word());
    }
    return out;
  }

  bool has_parses() const {
    if (sentences.empty()) return false;
    return std::all_of(sentences.begin(), sentences.end(),
                       [](const Sentence& s) { return s.parse.has_value(); });
  }
};

using Corpus = std::vector<AnnotatedLead>;

// ---------------------------------------------------------------------------
// Bracketed (Penn Treebank style) trees.

namespace detail {

class TreeReader {
 public:
  explicit TreeReader(std::string_view src) : src_(src) {}

  ParseTree read_root() {
    skip_ws();
    if (pos_ == src_.size()) throw ParseError(pos_, "empty tree");
    ParseTree root = read_node(true);
    skip_ws();
    if (pos_ != src_.size()) throw ParseError(pos_, "trailing input after tree");
    // "( (S ...) )" wrapper with an empty root label.
    if (root.label.empty()) {
      if (root.children.size() != 1) {
        throw ParseError(0, "unlabeled root must wrap exactly one tree");
      }
      ParseTree inner = std::move(root.children.front());
      return inner;
    }
    return root;
  }

 private:
  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  }

  void skip_ws() {
    while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
  }

  std::string read_atom() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && !is_space(src_[pos_]) && src_[pos_] != '(' &&
           src_[pos_] != ')') {
      ++pos_;
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  ParseTree read_node(bool is_root) {
    std::size_t open = pos_;
    if (pos_ >= src_.size() || src_[pos_] != '(') {
      throw ParseError(pos_, "expected '('");
    }
    ++pos_;
    skip_ws();
    ParseTree node;
    node.label = read_atom();
    if (node.label.empty() && !is_root) {
      throw ParseError(pos_, "node without label");
    }
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError(pos_, "unbalanced parentheses: missing ')'");
    if (src_[pos_] == '(') {
      while (true) {
        skip_ws();
        if (pos_ >= src_.size()) {
          throw ParseError(pos_, "unbalanced parentheses: missing ')'");
        }
        if (src_[pos_] == ')') break;
        if (src_[pos_] != '(') {
          throw ParseError(pos_, "node mixes children and a word");
        }
        node.children.push_back(read_node(false));
      }
    } else if (src_[pos_] == ')') {
      throw ParseError(open, "node '" + node.label + "' has neither children nor word");
    } else {
      node.leaf_word = read_atom();
      skip_ws();
      if (pos_ >= src_.size()) {
        throw ParseError(pos_, "unbalanced parentheses: missing ')'");
      }
      if (src_[pos_] != ')') throw ParseError(pos_, "preterminal with more than one word");
    }
    ++pos_;  // ')'
    return node;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline void write_tree(const ParseTree& t, std::string& out) {
  out += '(';
  out += t.label;
  if (t.leaf_word) {
    out += ' ';
    out += *t.leaf_word;
  }
  for (const auto& c : t.children) {
    out += ' ';
    write_tree(c, out);
  }
  out += ')';
}

inline void collect_leaves(const ParseTree& t, std::vector<const ParseTree*>& out) {
  if (t.is_leaf()) {
    out.push_back(&t);
    return;
  }
  for (const auto& c : t.children) collect_leaves(c, out);
}

}  // namespace detail

inline ParseTree parse_ptb_tree(std::string_view bracketed) {
  return detail::TreeReader(bracketed).read_root();
}

// Canonical single-line serialization: one space between siblings.
inline std::string to_ptb_string(const ParseTree& tree) {
  std::string out;
  detail::write_tree(tree, out);
  return out;
}

inline std::vector<const ParseTree*> leaves(const ParseTree& tree) {
  std::vector<const ParseTree*> out;
  detail::collect_leaves(tree, out);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

inline void validate_lead(const AnnotatedLead& lead) {
  if (lead.id.empty()) throw ValidationError("lead with empty id");
  if (!lead.lead_text.empty() && lead.sentences.empty()) {
    throw ValidationError("lead '" + lead.id + "' has text but no sentences");
  }
  for (std::size_t i = 0; i < lead.sentences.size(); ++i) {
    const auto& s = lead.sentences[i];
    if (s.parse && s.parse->leaf_count() != s.tokens.size()) {
      throw ValidationError("lead '" + lead.id + "' sentence " + std::to_string(i) +
                            ": parse has " + std::to_string(s.parse->leaf_count()) +
                            " leaves but " + std::to_string(s.tokens.size()) +
                            " tokens");
    }
  }
  if (lead.article_word_count < lead.token_count()) {
    throw ValidationError("lead '" + lead.id +
                          "': article_word_count is smaller than the lead");
  }
  if (lead.summary) {
    for (const auto& t : *lead.summary) {
      if (t.word.empty()) {
        throw ValidationError("lead '" + lead.id + "': empty summary word");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Record (JSON lines) codec. The field layout is documented in docs/FORMATS.md.

using ordered_json = nlohmann::ordered_json;

inline ordered_json sentence_to_json(const Sentence& s) {
  ordered_json j;
  std::vector<std::string> tokens, pos;
  std::vector<std::string> lemmas;
  bool any_lemma = false;
  for (const auto& t : s.tokens) {
    tokens.push_back(t.surface);
    pos.push_back(t.pos);
    if (t.lemma) any_lemma = true;
  }
  j["tokens"] = tokens;
  j["pos"] = pos;
  if (any_lemma) {
    for (const auto& t : s.tokens) lemmas.push_back(t.lemma.value_or(""));
    j["lemmas"] = lemmas;
  }
  if (s.parse) j["parse"] = to_ptb_string(*s.parse);
  return j;
}

inline ordered_json lead_to_json(const AnnotatedLead& lead) {
  ordered_json j;
  j["id"] = lead.id;
  j["domain"] = std::string(to_string(lead.domain));
  j["lead_text"] = lead.lead_text;
  ordered_json sents = ordered_json::array();
  for (const auto& s : lead.sentences) sents.push_back(sentence_to_json(s));
  j["sentences"] = std::move(sents);
  if (lead.summary) {
    ordered_json sum = ordered_json::array();
    for (const auto& t : *lead.summary) sum.push_back({t.word, t.pos});
    j["summary"] = std::move(sum);
  }
  j["article_word_count"] = lead.article_word_count;
  if (lead.label) j["label"] = std::string(to_string(*lead.label));
  return j;
}

inline std::string lead_to_line(const AnnotatedLead& lead) {
  return lead_to_json(lead).dump();
}

namespace detail {

template <typename J>
const J& require(const J& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(std::string("missing field '") + key + "'");
  return *it;
}

inline Sentence sentence_from_json(const nlohmann::json& j) {
  Sentence s;
  auto tokens = require(j, "tokens").get<std::vector<std::string>>();
  auto pos = require(j, "pos").get<std::vector<std::string>>();
  if (tokens.size() != pos.size()) {
    throw std::runtime_error("tokens and pos differ in length");
  }
  std::vector<std::string> lemmas;
  if (auto it = j.find("lemmas"); it != j.end()) {
    lemmas = it->get<std::vector<std::string>>();
    if (lemmas.size() != tokens.size()) {
      throw std::runtime_error("lemmas and tokens differ in length");
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Token t{tokens[i], pos[i], std::nullopt};
    if (!lemmas.empty() && !lemmas[i].empty()) t.lemma = lemmas[i];
    s.tokens.push_back(std::move(t));
  }
  if (auto it = j.find("parse"); it != j.end() && !it->is_null()) {
    s.parse = parse_ptb_tree(it->get<std::string>());
  }
  return s;
}

}  // namespace detail

// Decodes one record. Structural problems surface as RecordError with the
// line number; invariant violations as ValidationError.
inline AnnotatedLead lead_from_line(std::string_view line, std::size_t line_no = 0) {
  AnnotatedLead lead;
  try {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw std::runtime_error("record is not an object");
    lead.id = detail::require(j, "id").get<std::string>();
    auto dom = detail::require(j, "domain").get<std::string>();
    auto d = domain_from_string(dom);
    if (!d) throw std::runtime_error("unknown domain '" + dom + "'");
    lead.domain = *d;
    lead.lead_text = detail::require(j, "lead_text").get<std::string>();
    for (const auto& s : detail::require(j, "sentences")) {
      lead.sentences.push_back(detail::sentence_from_json(s));
    }
    if (auto it = j.find("summary"); it != j.end() && !it->is_null()) {
      std::vector<WordPosTuple> sum;
      for (const auto& pair : *it) {
        if (!pair.is_array() || pair.size() != 2) {
          throw std::runtime_error("summary entries must be [word, pos] pairs");
        }
        sum.push_back({to_lower(pair[0].get<std::string>()), pair[1].get<std::string>()});
      }
      lead.summary = std::move(sum);
    }
    lead.article_word_count = detail::require(j, "article_word_count").get<std::size_t>();
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
      auto lbl = it->get<std::string>();
      auto d2 = density_from_string(lbl);
      if (!d2) throw std::runtime_error("unknown label '" + lbl + "'");
      lead.label = *d2;
    }
  } catch (const ParseError& e) {
    throw RecordError(line_no, std::string("bad parse tree: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw RecordError(line_no, e.what());
  } catch (const std::runtime_error& e) {
    throw RecordError(line_no, e.what());
  }
  try {
    validate_lead(lead);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return lead;
}

inline Corpus read_corpus(std::istream& in) {
  Corpus out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto lead = lead_from_line(line, line_no);
    if (!seen.insert(lead.id).second) throw DuplicateIdError(lead.id);
    out.push_back(std::move(lead));
  }
  return out;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& lead : corpus) out << lead_to_line(lead) << '\n';
}

inline std::string corpus_to_string(const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  return os.str();
}

}  // namespace cdense
