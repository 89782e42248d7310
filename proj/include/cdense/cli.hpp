#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cdense/corpus.hpp"
#include "cdense/detector.hpp"
#include "cdense/error.hpp"
#include "cdense/eval.hpp"
#include "cdense/labeling.hpp"
#include "cdense/model_io.hpp"
#include "cdense/summcomb.hpp"
#include "cdense/synthetic.hpp"

namespace cdense::cli {

namespace fs = std::filesystem;

// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
}

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline std::vector<double> parse_doubles(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": '" + cell + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(path)) throw IoError(std::string(what) + " '" + path + "' does not exist");
}

// Labels file: "id<TAB>label" lines with a header.
inline std::map<std::string, Density> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels '" + path + "'");
  std::map<std::string, Density> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw RecordError(line_no, "expected id<TAB>label");
    auto d = density_from_string(line.substr(tab + 1));
    if (!d) throw RecordError(line_no, "unknown label");
    out[line.substr(0, tab)] = *d;
  }
  return out;
}

struct LabelOptions {
  std::string labels_path;
  std::string percentiles = "20,80";
  std::size_t min_summary_words = 25;
};

inline std::pair<double, double> parse_percentiles(const std::string& s) {
  auto v = parse_doubles(s, "--percentiles");
  if (v.size() != 2) throw UsageError("--percentiles takes low,high");
  return {v[0], v[1]};
}

// Attaches labels and keeps only labeled leads. Priority: explicit labels
// file, then labels carried by every record, then heuristic labels.
inline Corpus labeled_corpus(Corpus corpus, const LabelOptions& opt) {
  if (corpus.empty()) throw DataError("corpus is empty");
  std::map<std::string, Density> labels;
  if (!opt.labels_path.empty()) {
    labels = read_labels(opt.labels_path);
  } else if (std::all_of(corpus.begin(), corpus.end(),
                         [](const AnnotatedLead& l) { return l.label.has_value(); })) {
    return corpus;
  } else {
    auto [lo, hi] = parse_percentiles(opt.percentiles);
    auto scores = score_corpus(corpus, opt.min_summary_words);
    for (const auto& h : percentile_label(scores.scores, lo, hi)) labels[h.lead_id] = h.label;
  }
  Corpus out;
  for (auto& l : corpus) {
    auto it = labels.find(l.id);
    if (it == labels.end()) continue;
    l.label = it->second;
    out.push_back(std::move(l));
  }
  if (out.empty()) throw DataError("no lead carries a label");
  return out;
}

struct CommonOptions {
  std::string corpus;
  std::string lexicon;
  std::string mode = "decision-fusion";
  std::uint64_t seed = 1;
  std::string c_grid;
  std::string fusion_spaces = "mrc,mi,pr";
  std::string pr_value = "count";
  std::size_t mi_min_count = 5;
  std::size_t mi_top_k = 500;
  std::string out;
  LabelOptions label;
};

inline DetectorConfig detector_config(const CommonOptions& o) {
  DetectorConfig cfg;
  if (!o.c_grid.empty()) cfg.train.c_grid = parse_doubles(o.c_grid, "--c-grid");
  for (double c : cfg.train.c_grid) {
    if (!(c > 0)) throw UsageError("--c-grid values must be positive");
  }
  cfg.train.seed = o.seed;
  cfg.mi.min_count = o.mi_min_count;
  cfg.mi.top_k = o.mi_top_k;
  if (o.pr_value == "binary") cfg.pr_value = PrValue::binary;
  else if (o.pr_value != "count") throw UsageError("--pr-value must be count or binary");
  cfg.fusion_spaces.clear();
  std::stringstream ss(o.fusion_spaces);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto k = space_kind_from_string(to_lower(cell) == "mrc"  ? "MRC"
                                    : to_lower(cell) == "mi" ? "MI"
                                    : to_lower(cell) == "pr" ? "PR"
                                                             : "?");
    if (!k) throw UsageError("unknown space in --fusion-spaces: '" + cell + "'");
    cfg.fusion_spaces.push_back(*k);
  }
  if (cfg.fusion_spaces.empty()) throw UsageError("--fusion-spaces is empty");
  return cfg;
}

inline ModelKind parse_mode(const std::string& mode) {
  auto k = model_kind_from_string(mode);
  if (!k) throw UsageError("unknown --mode '" + mode + "'");
  return *k;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_generate(std::size_t n, const std::string& profile_name, std::uint64_t seed,
                        std::size_t n_pairs, const std::string& out) {
  if (out.empty()) throw UsageError("missing --out");
  auto profile = synth::profile_from_string(profile_name);
  if (!profile) throw UsageError("unknown --profile '" + profile_name + "'");
  auto gen = synth::generate_corpus(n, *profile, seed);
  fs::path dir(out);
  write_file_atomic(dir / "corpus.jsonl", corpus_to_string(gen.leads));
  std::string lex;
  for (const auto& w : gen.lexicon) lex += w + "\n";
  write_file_atomic(dir / "lexicon.txt", lex);
  if (n_pairs > 0) {
    std::string pairs;
    for (const auto& p : synth::generate_pairs(n_pairs, *profile, seed ^ 0x5eedULL)) {
      pairs += pair_to_line(p) + "\n";
    }
    write_file_atomic(dir / "pairs.jsonl", pairs);
  }
  return 0;
}

inline int cmd_label(const CommonOptions& o, std::ostream& err) {
  require_file(o.corpus, "corpus");
  if (o.out.empty()) throw UsageError("missing --out");
  auto corpus = load_corpus(o.corpus);
  if (corpus.empty()) throw DataError("corpus is empty");
  auto [lo, hi] = parse_percentiles(o.label.percentiles);
  auto scored = score_corpus(corpus, o.label.min_summary_words);
  if (scored.skipped > 0) {
    err << "warning: skipped " << scored.skipped
        << " lead(s) without a summary of at least " << o.label.min_summary_words << " words\n";
  }
  auto labels = percentile_label(scored.scores, lo, hi);
  std::string s = "id\tscore\n";
  for (const auto& d : scored.scores) s += d.lead_id + "\t" + fmt_double(d.score) + "\n";
  std::string l = "id\tlabel\n";
  for (const auto& h : labels) l += h.lead_id + "\t" + std::string(to_string(h.label)) + "\n";
  fs::path dir(o.out);
  write_file_atomic(dir / "scores.tsv", s);
  write_file_atomic(dir / "labels.tsv", l);
  return 0;
}

// Stratified 9-way split: five parts train the model (or first stage), four
// drive grid search and the second stage.
inline std::pair<Corpus, Corpus> train_dev_split(const Corpus& corpus, std::uint64_t seed) {
  auto plan = make_corpus_folds(corpus, seed, 9);
  Corpus train, dev;
  for (const auto& l : corpus) {
    (plan.fold_assignments.at(l.id) < 5 ? train : dev).push_back(l);
  }
  return {train, dev};
}

inline int cmd_train(const CommonOptions& o) {
  require_file(o.corpus, "corpus");
  require_file(o.lexicon, "lexicon");
  if (o.out.empty()) throw UsageError("missing --out");
  auto kind = parse_mode(o.mode);
  auto cfg = detector_config(o);
  auto corpus = labeled_corpus(load_corpus(o.corpus), o.label);
  auto lexicon = load_lexicon(o.lexicon);
  auto [train, dev] = train_dev_split(corpus, o.seed);
  auto det = train_detector(kind, train, dev, lexicon, cfg);
  fs::path dir(o.out);
  write_file_atomic(dir / "model.json", detector_to_string(det));
  for (auto k : det.spaces.available()) {
    std::ostringstream os;
    write_space_table(os, det.spaces.get(k));
    write_file_atomic(dir / ("space_" + std::string(to_string(k)) + ".tsv"), os.str());
  }
  return 0;
}

inline int cmd_predict(const std::string& model_path, const std::string& corpus_path,
                       const std::string& out) {
  require_file(model_path, "model");
  require_file(corpus_path, "corpus");
  if (out.empty()) throw UsageError("missing --out");
  auto det = load_detector(model_path);
  auto corpus = load_corpus(corpus_path);
  std::string s = "id\tprob_content_dense\tlabel\n";
  for (const auto& l : corpus) {
    double p = det.predict_proba(l);
    s += l.id + "\t" + fmt_double(p) + "\t" + std::string(to_string(decide_label(p))) + "\n";
  }
  write_file_atomic(out, s);
  return 0;
}

struct EvaluateOptions {
  std::string curve;  // start,step,stop
  std::string conf_percentiles = "10,20,30,40,50,60,70,80,90,100";
  std::string annotations;
};

inline int cmd_evaluate(const CommonOptions& o, const EvaluateOptions& e) {
  require_file(o.corpus, "corpus");
  require_file(o.lexicon, "lexicon");
  if (o.out.empty()) throw UsageError("missing --out");
  std::vector<ModelKind> kinds;
  if (o.mode == "all") {
    kinds = {ModelKind::mrc, ModelKind::mi, ModelKind::pr, ModelKind::feature_fusion,
             ModelKind::decision_fusion};
  } else {
    kinds = {parse_mode(o.mode)};
  }
  auto cfg = detector_config(o);
  auto corpus = labeled_corpus(load_corpus(o.corpus), o.label);
  auto lexicon = load_lexicon(o.lexicon);
  auto plan = make_corpus_folds(corpus, o.seed);
  auto conf_pcts = parse_doubles(e.conf_percentiles, "--conf-percentiles");
  fs::path dir(o.out);

  std::string folds = "mode\tfold\ttest_size\taccuracy\n";
  std::string summary = "mode\tmean_accuracy\n";
  std::map<std::string, double> cv_prob;  // decision-fusion (or last mode) test probabilities
  for (auto kind : kinds) {
    auto res = cross_validate(corpus, plan, kind, lexicon, cfg);
    auto sizes = plan.fold_sizes();
    std::string name(to_string(kind));
    for (std::size_t i = 0; i < res.fold_accuracy.size(); ++i) {
      folds += name + "\t" + std::to_string(i) + "\t" + std::to_string(sizes[i]) + "\t" +
               fmt_double(res.fold_accuracy[i]) + "\n";
    }
    summary += name + "\t" + fmt_double(res.mean_accuracy) + "\n";
    std::string conf = "percentile\taccuracy\n";
    for (const auto& [q, acc] : confidence_stratified_accuracy(res.predictions, conf_pcts)) {
      conf += fmt_double(q) + "\t" + fmt_double(acc) + "\n";
    }
    write_file_atomic(dir / ("confidence_" + name + ".tsv"), conf);
    cv_prob.clear();
    for (const auto& p : res.predictions) cv_prob[p.lead_id] = p.prob;

    if (!e.curve.empty()) {
      auto v = parse_doubles(e.curve, "--learning-curve");
      if (v.size() != 3) throw UsageError("--learning-curve takes start,step,stop");
      auto sizes_lc = curve_sizes(static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
                                  static_cast<std::size_t>(v[2]));
      auto curve = learning_curve(corpus, plan, kind, lexicon, cfg, sizes_lc, o.seed);
      std::string lc = "n_train\taccuracy\n";
      for (const auto& pt : curve) lc += std::to_string(pt.n_train) + "\t" + fmt_double(pt.accuracy) + "\n";
      write_file_atomic(dir / ("learning_curve_" + name + ".tsv"), lc);
    }
  }

  // Baselines on the same test folds.
  auto gold = labels_of(corpus);
  summary += "baseline-always-dense\t" + fmt_double(baseline_always_dense(gold)) + "\n";
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < plan.k; ++i) {
      auto split = detail::split_by_roles(corpus, plan, i);
      sum += baseline_article_length(split.first, split.test, 1.0, cfg.train).accuracy;
    }
    summary += "baseline-article-length\t" + fmt_double(sum / static_cast<double>(plan.k)) + "\n";
  }
  write_file_atomic(dir / "folds.tsv", folds);
  write_file_atomic(dir / "summary.tsv", summary);

  if (!e.annotations.empty()) {
    require_file(e.annotations, "annotations");
    std::ifstream in(e.annotations);
    auto recs = read_annotations(in);
    auto kept = filter_amt_annotators(recs);
    auto agg = aggregate_by_lead(kept);
    std::string a = "id\tlabel\tmean_score\tn_annotators\n";
    std::vector<Density> crowd, ours;
    std::vector<double> scores, probs;
    for (const auto& [id, g] : agg) {
      a += id + "\t" + std::string(to_string(g.label)) + "\t" + fmt_double(g.mean_score) + "\t" +
           std::to_string(g.n) + "\n";
      auto it = std::find_if(corpus.begin(), corpus.end(),
                             [&](const AnnotatedLead& l) { return l.id == id; });
      if (it != corpus.end()) {
        crowd.push_back(g.label);
        ours.push_back(*it->label);
      }
      if (auto p = cv_prob.find(id); p != cv_prob.end()) {
        scores.push_back(g.mean_score);
        probs.push_back(p->second);
      }
    }
    write_file_atomic(dir / "annotations_aggregated.tsv", a);
    std::string ag = "metric\tvalue\n";
    ag += "records_kept\t" + std::to_string(kept.size()) + "\n";
    ag += "records_dropped\t" + std::to_string(recs.size() - kept.size()) + "\n";
    if (!crowd.empty()) {
      auto k = percent_agreement_and_kappa<Density>(crowd, ours);
      ag += "agreement\t" + fmt_double(k.agreement) + "\n";
      ag += "kappa\t" + fmt_double(k.kappa) + "\n";
    }
    if (probs.size() >= 2) {
      ag += "pearson_prob_vs_score\t" + fmt_double(pearson_correlation(probs, scores)) + "\n";
    }
    write_file_atomic(dir / "agreement.tsv", ag);
  }
  return 0;
}

inline int cmd_combine(const std::string& pairs_path, const std::string& model_path,
                       const std::string& cutoffs_csv, const std::string& tie_credit,
                       double p0, const std::string& out, std::ostream& err) {
  require_file(pairs_path, "pairs");
  require_file(model_path, "model");
  if (out.empty()) throw UsageError("missing --out");
  TieCredit tie;
  if (tie_credit == "incorrect") tie = TieCredit::incorrect;
  else if (tie_credit == "correct") tie = TieCredit::correct;
  else throw UsageError("--tie-credit must be incorrect or correct");
  auto cutoffs = cutoffs_csv.empty() ? default_cutoffs() : parse_doubles(cutoffs_csv, "--cutoffs");
  std::ifstream in(pairs_path);
  auto loaded = read_pairs(in);
  if (loaded.identical_dropped > 0) {
    err << "warning: dropped " << loaded.identical_dropped << " pair(s) with identical summaries\n";
  }
  if (loaded.pairs.empty()) throw DataError("no summary pairs");
  auto det = load_detector(model_path);
  auto rep = sweep_cutoffs(loaded.pairs, det, cutoffs, tie);
  if (p0 <= 0.0) {
    p0 = static_cast<double>(rep.total_lead) / static_cast<double>(rep.total);
  }
  std::string report = format_sweep(rep);
  report += "# binomial upper-tail p-values against p0=" + fmt_double(p0) + "\n";
  report += "# cutoff\tp_value\n";
  std::vector<CutoffRow> rows = rep.rows;
  std::sort(rows.begin(), rows.end(),
            [](const CutoffRow& a, const CutoffRow& b) { return a.cutoff > b.cutoff; });
  if (p0 > 0.0 && p0 < 1.0) {
    for (const auto& r : rows) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "# %g\t%.6g\n", r.cutoff,
                    binomial_superiority_check(r.combination_correct, rep.total, p0));
      report += buf;
    }
  }
  write_file_atomic(out, report);
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"cdense: content-density detection for news leads"};
  app.require_subcommand(1);

  CommonOptions common;
  EvaluateOptions eval_opt;
  std::size_t gen_n = 1000, gen_pairs = 0;
  std::string gen_profile = "default";
  std::string model_path, predict_out, pairs_path, cutoffs, tie_credit = "incorrect";
  double p0 = 0.0;

  auto add_seed = [&](CLI::App* sc) { sc->add_option("--seed", common.seed, "Random seed"); };
  auto add_out = [&](CLI::App* sc) { sc->add_option("--out", common.out, "Output directory"); };
  auto add_label_opts = [&](CLI::App* sc) {
    sc->add_option("--labels", common.label.labels_path, "id<TAB>label file (from `label`)");
    sc->add_option("--percentiles", common.label.percentiles, "low,high percentile cut");
    sc->add_option("--min-summary-words", common.label.min_summary_words,
                   "Shortest usable manual summary");
  };
  auto add_learn_opts = [&](CLI::App* sc) {
    sc->add_option("--corpus", common.corpus, "Corpus file (JSON lines)");
    sc->add_option("--lexicon", common.lexicon, "Lexicon word list");
    sc->add_option("--mode", common.mode,
                   "mrc|mi|pr|feature-fusion|decision-fusion (evaluate also accepts all)");
    sc->add_option("--c-grid", common.c_grid, "Comma-separated regularization grid");
    sc->add_option("--fusion-spaces", common.fusion_spaces, "Spaces for fusion models");
    sc->add_option("--pr-value", common.pr_value, "Production-rule values: count|binary");
    sc->add_option("--mi-min-count", common.mi_min_count, "Minimum document count for MI words");
    sc->add_option("--mi-top-k", common.mi_top_k, "MI words kept per class");
    add_seed(sc);
    add_out(sc);
    add_label_opts(sc);
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus, lexicon and pairs");
  gen->add_option("--n", gen_n, "Number of leads");
  gen->add_option("--profile", gen_profile, "default|null|separable|mrc-only");
  gen->add_option("--pairs", gen_pairs, "Number of summary pairs (0 = none)");
  add_seed(gen);
  add_out(gen);

  auto* label = app.add_subcommand("label", "Score leads against summaries and label extremes");
  label->add_option("--corpus", common.corpus, "Corpus file (JSON lines)");
  label->add_option("--percentiles", common.label.percentiles, "low,high percentile cut");
  label->add_option("--min-summary-words", common.label.min_summary_words,
                    "Shortest usable manual summary");
  add_out(label);

  auto* train = app.add_subcommand("train", "Train a detector");
  add_learn_opts(train);

  auto* predict = app.add_subcommand("predict", "Score a corpus with a trained detector");
  predict->add_option("--model", model_path, "Model file");
  predict->add_option("--corpus", common.corpus, "Corpus file");
  predict->add_option("--out", predict_out, "Output TSV file");

  auto* evaluate = app.add_subcommand("evaluate", "10-fold cross-validation reports");
  add_learn_opts(evaluate);
  evaluate->add_option("--learning-curve", eval_opt.curve, "start,step,stop");
  evaluate->add_option("--conf-percentiles", eval_opt.conf_percentiles,
                       "Percentiles for confidence-stratified accuracy");
  evaluate->add_option("--annotations", eval_opt.annotations, "Crowd annotation TSV");

  auto* combine = app.add_subcommand("combine", "Lead vs system summary combination report");
  combine->add_option("--pairs", pairs_path, "Summary pair file (JSON lines)");
  combine->add_option("--model", model_path, "Model file");
  combine->add_option("--cutoffs", cutoffs, "Comma-separated score-difference cutoffs");
  combine->add_option("--tie-credit", tie_credit, "incorrect|correct");
  combine->add_option("--p0", p0, "Binomial null probability (default: lead preference rate)");
  combine->add_option("--out", predict_out, "Output report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*gen) return cmd_generate(gen_n, gen_profile, common.seed, gen_pairs, common.out);
    if (*label) return cmd_label(common, err);
    if (*train) return cmd_train(common);
    if (*predict) return cmd_predict(model_path, common.corpus, predict_out);
    if (*evaluate) return cmd_evaluate(common, eval_opt);
    if (*combine) {
      return cmd_combine(pairs_path, model_path, cutoffs, tie_credit, p0, predict_out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cdense::cli
