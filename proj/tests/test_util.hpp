#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "cdense/corpus.hpp"

namespace testutil {

// Lead whose sentences are given as bracketed parses; tokens come from the
// leaves.
inline cdense::AnnotatedLead parsed_lead(const std::string& id,
                                         std::initializer_list<const char*> trees,
                                         std::optional<cdense::Density> label = std::nullopt) {
  cdense::AnnotatedLead lead;
  lead.id = id;
  for (const char* t : trees) {
    cdense::Sentence s;
    s.parse = cdense::parse_ptb_tree(t);
    for (const auto* leaf : cdense::leaves(*s.parse)) {
      s.tokens.push_back({*leaf->leaf_word, leaf->label, std::nullopt});
    }
    lead.sentences.push_back(std::move(s));
  }
  lead.article_word_count = lead.token_count();
  lead.label = label;
  return lead;
}

// One-sentence lead without a parse; every token tagged NN.
inline cdense::AnnotatedLead word_lead(const std::string& id, const std::vector<std::string>& words,
                                       std::optional<cdense::Density> label = std::nullopt) {
  cdense::AnnotatedLead lead;
  lead.id = id;
  cdense::Sentence s;
  for (const auto& w : words) s.tokens.push_back({w, "NN", std::nullopt});
  lead.sentences.push_back(std::move(s));
  lead.article_word_count = lead.token_count();
  lead.label = label;
  return lead;
}

}  // namespace testutil
