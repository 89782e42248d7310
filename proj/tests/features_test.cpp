#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cdense/features.hpp"
#include "cdense/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cdense {
namespace {

using testutil::parsed_lead;
using testutil::word_lead;

constexpr auto CD = Density::content_dense;
constexpr auto NCD = Density::non_content_dense;

TEST(MrcFeatures, TwoOfTenTokens) {
  auto space = make_mrc_space({"cat", "dog"});
  auto lead = word_lead("x", {"the", "cat", "sat", "on", "a", "Cat", "mat", "and", "it", "purred"});
  auto v = mrc_features(lead, space);
  ASSERT_EQ(v.entries.size(), 1u);
  EXPECT_DOUBLE_EQ(*v.get(*space.find("cat")), 0.2);
  EXPECT_FALSE(v.get(*space.find("dog")).has_value());
}

TEST(MrcFeatures, NoSharedWords) {
  auto space = make_mrc_space({"zebra"});
  EXPECT_TRUE(mrc_features(word_lead("x", {"a", "b"}), space).entries.empty());
}

TEST(MrcFeatures, SingleTokenIdentity) {
  auto space = make_mrc_space({"a"});
  auto v = mrc_features(word_lead("x", {"a"}), space);
  EXPECT_EQ(*v.get(0), 1.0);
}

TEST(MrcFeatures, Errors) {
  EXPECT_THROW(make_mrc_space({}), ValidationError);
  auto space = make_mrc_space({"a"});
  AnnotatedLead empty;
  empty.id = "e";
  EXPECT_THROW(mrc_features(empty, space), EmptyLeadError);
  FeatureSpace pr(SpaceKind::pr, {"S -> NP VP"});
  EXPECT_THROW(mrc_features(word_lead("x", {"a"}), pr), SpaceMismatchError);
}

TEST(MrcFeatures, ValuesBoundedProperty) {
  std::mt19937_64 rng(3);
  std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g"};
  auto space = make_mrc_space({"a", "c", "e", "g"});
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < 1 + rng() % 20; ++i) toks.push_back(words[rng() % words.size()]);
    auto v = mrc_features(word_lead("x", toks), space);
    double sum = 0;
    for (auto [i, x] : v.entries) {
      EXPECT_GT(x, 0.0);
      EXPECT_LE(x, 1.0);
      sum += x;
    }
    EXPECT_LE(sum, 1.0 + 1e-12);
  }
}

std::vector<AnnotatedLead> docs_with(const std::vector<std::pair<std::vector<std::string>, Density>>& d) {
  std::vector<AnnotatedLead> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.push_back(word_lead("d" + std::to_string(i), d[i].first, d[i].second));
  }
  return out;
}

const MiEntry* find_entry(const std::vector<MiEntry>& es, const std::string& w) {
  for (const auto& e : es) {
    if (e.word == w) return &e;
  }
  return nullptr;
}

TEST(SelectMiVocabulary, WordOnlyInOneClass) {
  // 10 docs, 5 per class; "w" in the 5 content-dense docs.
  std::vector<std::pair<std::vector<std::string>, Density>> d;
  for (int i = 0; i < 5; ++i) d.push_back({{"w", "x"}, CD});
  for (int i = 0; i < 5; ++i) d.push_back({{"x"}, NCD});
  auto vocab = select_mi_vocabulary(docs_with(d));
  const auto* e = find_entry(vocab.content_dense, "w");
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->mi, std::log(2.0), 1e-12);
  EXPECT_NEAR(e->mi, 0.6931, 1e-4);
  EXPECT_EQ(find_entry(vocab.non_content_dense, "w"), nullptr);
}

TEST(SelectMiVocabulary, UnbalancedClasses) {
  // Class CD has 4 docs; "w" appears in 5 docs, 3 of them CD.
  std::vector<std::pair<std::vector<std::string>, Density>> d;
  for (int i = 0; i < 3; ++i) d.push_back({{"w"}, CD});
  d.push_back({{"y"}, CD});
  for (int i = 0; i < 2; ++i) d.push_back({{"w"}, NCD});
  for (int i = 0; i < 4; ++i) d.push_back({{"y"}, NCD});
  auto vocab = select_mi_vocabulary(docs_with(d));
  const auto* e = find_entry(vocab.content_dense, "w");
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->mi, std::log(1.5), 1e-12);
  EXPECT_NEAR(e->mi, 0.4055, 1e-4);
}

TEST(SelectMiVocabulary, IndependentWordHasZeroMi) {
  std::vector<std::pair<std::vector<std::string>, Density>> d;
  for (int i = 0; i < 6; ++i) d.push_back({{"the"}, i % 2 ? CD : NCD});
  auto vocab = select_mi_vocabulary(docs_with(d));
  EXPECT_DOUBLE_EQ(find_entry(vocab.content_dense, "the")->mi, 0.0);
  EXPECT_DOUBLE_EQ(find_entry(vocab.non_content_dense, "the")->mi, 0.0);
}

TEST(SelectMiVocabulary, MinCountAndSingleClass) {
  std::vector<std::pair<std::vector<std::string>, Density>> d;
  for (int i = 0; i < 4; ++i) d.push_back({{"rare"}, CD});
  d.push_back({{"other"}, NCD});
  auto vocab = select_mi_vocabulary(docs_with(d));
  EXPECT_EQ(vocab.space.dim(), 0u);

  std::vector<std::pair<std::vector<std::string>, Density>> one = {{{"a"}, CD}, {{"b"}, CD}};
  EXPECT_THROW(select_mi_vocabulary(docs_with(one)), SingleClassError);
}

TEST(SelectMiVocabulary, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> words = {"al", "be", "ce", "de", "ef", "ge", "ha",
                                          "ij", "ka", "el", "em", "en"};
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 6 + rng() % 45;
    std::vector<std::vector<std::string>> raw;
    std::vector<int> cls;
    std::vector<AnnotatedLead> leads;
    for (std::size_t i = 0; i < n; ++i) {
      int c = static_cast<int>(i % 2);
      std::vector<std::string> toks;
      for (std::size_t j = 0; j < 1 + rng() % 8; ++j) {
        // Class-skewed draws so some words carry signal.
        std::size_t k = rng() % words.size();
        if (c == 1 && rng() % 3 == 0) k = rng() % 3;
        toks.push_back(words[k]);
      }
      raw.push_back(toks);
      cls.push_back(c);
      leads.push_back(word_lead("d" + std::to_string(i), toks, static_cast<Density>(c)));
    }
    MiOptions opt{static_cast<std::size_t>(1 + rng() % 5), static_cast<std::size_t>(1 + rng() % 8)};
    auto vocab = select_mi_vocabulary(leads, opt);
    for (int c = 0; c < 2; ++c) {
      auto want = oracle::brute_force_mi(raw, cls, c, opt.min_count, opt.top_k);
      const auto& got = c == 1 ? vocab.content_dense : vocab.non_content_dense;
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].word, want[i].word);
        EXPECT_NEAR(got[i].mi, want[i].mi, 1e-12);
      }
    }
  }
}

TEST(SelectMiVocabulary, RecoversPlantedMarkers) {
  // Markers are perfectly class-specific here; the count floor keeps chance
  // associations of rare filler words out of the ranking.
  auto g = synth::generate_corpus(1000, synth::SignalProfile::separable(), 4);
  MiOptions opt{50, 20};
  auto vocab = select_mi_vocabulary(g.leads, opt);
  std::set<std::string> dense(g.planted_dense_markers.begin(), g.planted_dense_markers.end());
  std::set<std::string> sparse(g.planted_sparse_markers.begin(), g.planted_sparse_markers.end());
  ASSERT_EQ(vocab.content_dense.size(), 20u);
  for (const auto& e : vocab.content_dense) EXPECT_TRUE(dense.count(e.word)) << e.word;
  for (const auto& e : vocab.non_content_dense) EXPECT_TRUE(sparse.count(e.word)) << e.word;
}

TEST(MiFeatures, BinaryPresence) {
  FeatureSpace space(SpaceKind::mi, {"a", "b", "c", "d"});
  auto v = mi_features(word_lead("x", {"a", "b", "c", "c", "c", "c", "c", "z"}), space);
  ASSERT_EQ(v.entries.size(), 3u);
  for (auto [i, x] : v.entries) EXPECT_EQ(x, 1.0);
  EXPECT_TRUE(mi_features(word_lead("y", {"z"}), space).entries.empty());
}

TEST(ProductionRules, SimpleSentence) {
  auto rules = extract_production_rules(parse_ptb_tree("(S (NP (DT the) (NN cat)) (VP (VBD sat)))"));
  std::vector<std::string> keys;
  for (const auto& r : rules) keys.push_back(r.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"S -> NP VP", "NP -> DT NN", "VP -> VBD"}));
}

TEST(ProductionRules, PreterminalHasNone) {
  EXPECT_TRUE(extract_production_rules(parse_ptb_tree("(NN cat)")).empty());
}

TEST(ProductionRules, ParticleClause) {
  auto t = parse_ptb_tree(
      "(VP (VB push) (NP (DT the) (NNP Czech) (NN currency)) (PRT (RP up)) (ADVP (RB sharply)))");
  auto rules = extract_production_rules(t);
  ASSERT_FALSE(rules.empty());
  EXPECT_EQ(rules.front().key(), "VP -> VB NP PRT ADVP");
}

TEST(ProductionRules, MatchesStackOracleAndNoLexicalLeaves) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    auto t = oracle::random_tree(rng, 6);
    std::multiset<std::string> got;
    std::set<std::string> surface;
    for (const auto* l : leaves(t)) surface.insert(*l->leaf_word);
    for (const auto& r : extract_production_rules(t)) {
      got.insert(r.key());
      for (const auto& x : r.rhs) EXPECT_FALSE(surface.count(x)) << r.key();
    }
    EXPECT_EQ(got, oracle::production_rules(t));
  }
}

TEST(PrFeatures, CountsAcrossSentences) {
  auto lead = parsed_lead("x", {"(S (NP (PRP it)) (VP (VBD rose)))", "(S (NP (PRP we)) (VP (VBD fell)))"});
  auto space = make_pr_space(std::vector<AnnotatedLead>{lead});
  auto v = pr_features(lead, space);
  EXPECT_EQ(*v.get(*space.find("S -> NP VP")), 2.0);
  EXPECT_EQ(*pr_features(lead, space, PrValue::binary).get(*space.find("S -> NP VP")), 1.0);
}

TEST(PrFeatures, UnseenRulesIgnoredAndMissingParse) {
  auto train = parsed_lead("a", {"(S (NP (PRP it)) (VP (VBD rose)))"});
  auto space = make_pr_space(std::vector<AnnotatedLead>{train});
  auto other = parsed_lead("b", {"(FRAG (ADJP (JJ big)))"});
  EXPECT_TRUE(pr_features(other, space).entries.empty());

  AnnotatedLead no_sentences;
  no_sentences.id = "c";
  EXPECT_THROW(pr_features(no_sentences, space), MissingParseError);
  EXPECT_THROW(pr_features(word_lead("d", {"x"}), space), MissingParseError);
}

FeatureSpace sized(SpaceKind k, std::size_t dim) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < dim; ++i) keys.push_back("k" + std::to_string(i));
  return FeatureSpace(k, keys);
}

TEST(ConcatFeatures, OffsetsFollowMrcMiPrOrder) {
  auto mrc = sized(SpaceKind::mrc, 5), mi = sized(SpaceKind::mi, 7), pr = sized(SpaceKind::pr, 9);
  SparseFeatureVector vm{SpaceKind::mrc, {}}, vi{SpaceKind::mi, {}}, vp{SpaceKind::pr, {{2, 1.5}}};
  // Deliberately out of order.
  std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts = {
      {&pr, &vp}, {&mrc, &vm}, {&mi, &vi}};
  auto v = concat_features(parts);
  ASSERT_EQ(v.entries.size(), 1u);
  EXPECT_EQ(v.entries[0].first, 14u);
  EXPECT_EQ(v.entries[0].second, 1.5);

  std::vector<const FeatureSpace*> spaces = {&pr, &mi, &mrc};
  EXPECT_EQ(concat_spaces(spaces).dim(), 21u);
}

TEST(ConcatFeatures, EmptyAndSingle) {
  auto mrc = sized(SpaceKind::mrc, 5), mi = sized(SpaceKind::mi, 7), pr = sized(SpaceKind::pr, 9);
  SparseFeatureVector vm{SpaceKind::mrc, {}}, vi{SpaceKind::mi, {}}, vp{SpaceKind::pr, {}};
  std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts = {
      {&mrc, &vm}, {&mi, &vi}, {&pr, &vp}};
  EXPECT_TRUE(concat_features(parts).entries.empty());

  SparseFeatureVector only{SpaceKind::mi, {{0, 1.0}, {6, 1.0}}};
  std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> one = {{&mi, &only}};
  EXPECT_EQ(concat_features(one).entries, only.entries);
}

TEST(ConcatFeatures, DuplicateSpaceRejected) {
  auto mi = sized(SpaceKind::mi, 3);
  SparseFeatureVector v{SpaceKind::mi, {}};
  std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts = {{&mi, &v},
                                                                                    {&mi, &v}};
  EXPECT_THROW(concat_features(parts), ValidationError);
}

TEST(ConcatFeatures, InjectiveProperty) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    auto mrc = sized(SpaceKind::mrc, 1 + rng() % 6), mi = sized(SpaceKind::mi, 1 + rng() % 6),
         pr = sized(SpaceKind::pr, 1 + rng() % 6);
    auto full = [](const FeatureSpace& s) {
      SparseFeatureVector v{s.kind(), {}};
      for (std::uint32_t i = 0; i < s.dim(); ++i) v.entries.emplace_back(i, 1.0 + i);
      return v;
    };
    auto a = full(mrc), b = full(mi), c = full(pr);
    std::vector<std::pair<const FeatureSpace*, const SparseFeatureVector*>> parts = {
        {&mrc, &a}, {&mi, &b}, {&pr, &c}};
    auto v = concat_features(parts);
    std::set<std::uint32_t> idx;
    for (auto [i, x] : v.entries) idx.insert(i);
    EXPECT_EQ(idx.size(), mrc.dim() + mi.dim() + pr.dim());
    EXPECT_EQ(*idx.rbegin() + 1, mrc.dim() + mi.dim() + pr.dim());
  }
}

TEST(SpaceTable, RoundTrip) {
  FeatureSpace s(SpaceKind::pr, {"S -> NP VP", "NP -> DT NN"});
  std::stringstream buf;
  write_space_table(buf, s);
  EXPECT_EQ(read_space_table(buf, SpaceKind::pr), s);
  std::stringstream bad("0\ta\n2\tb\n");
  EXPECT_THROW(read_space_table(bad, SpaceKind::pr), ValidationError);
}

}  // namespace
}  // namespace cdense
