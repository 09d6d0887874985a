#pragma once

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oiekit/config.hpp"
#include "oiekit/core.hpp"
#include "oiekit/eval.hpp"
#include "oiekit/ingest.hpp"
#include "oiekit/model.hpp"
#include "oiekit/score_filter.hpp"
#include "oiekit/train_builder.hpp"

namespace oiekit::cli {

// Exit codes: 0 success, 1 internal error, 2 user/input error.
inline constexpr int kOk = 0;
inline constexpr int kInternalError = 1;
inline constexpr int kUserError = 2;

namespace detail {

struct GlobalOptions {
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = take from config
  bool verbose = false;

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (has_seed) {
      cfg.seed = seed;
      cfg.model.seed = seed;
    }
    if (jobs > 0) cfg.jobs = jobs;
    return cfg;
  }
};

// "name=path" source arguments, rank = order of appearance.
inline std::vector<SourceSpec> parse_source_args(const std::vector<std::string>& args,
                                                 const std::vector<std::string>& no_confidence) {
  std::vector<SourceSpec> specs;
  for (const auto& arg : args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
      throw ConfigError("bad --source value '" + arg + "', expected name=path");
    }
    SourceSpec spec;
    spec.name = arg.substr(0, eq);
    spec.file = arg.substr(eq + 1);
    spec.has_confidence =
        std::find(no_confidence.begin(), no_confidence.end(), spec.name) == no_confidence.end();
    specs.push_back(std::move(spec));
  }
  return specs;
}

inline std::map<std::string, bool> confidence_map(const std::vector<SourceSpec>& sources) {
  std::map<std::string, bool> m;
  for (const auto& s : sources) m[s.name] = s.has_confidence;
  return m;
}

inline std::vector<std::string> source_ranks(const std::vector<SourceSpec>& sources) {
  std::vector<std::string> ranks;
  for (const auto& s : sources) ranks.push_back(s.name);
  return ranks;
}

inline std::map<std::string, std::vector<Extraction>> group_by_sentence(
    const std::vector<std::pair<std::string, Extraction>>& rows) {
  std::map<std::string, std::vector<Extraction>> grouped;
  for (const auto& [sid, ext] : rows) grouped[sid].push_back(ext);
  return grouped;
}

inline std::unique_ptr<Scorer> make_scorer(const PipelineConfig& cfg,
                                           const std::vector<ExtractionPool>& pools) {
  if (cfg.scorer.kind == "rank") {
    return std::make_unique<RankScorer>(pools, confidence_map(cfg.sources));
  }
  if (cfg.scorer.kind == "external") {
    if (cfg.scorer.score_file.empty()) throw ConfigError("scorer.score_file: required for external scorer");
    require_files({cfg.scorer.score_file});
    return std::make_unique<ExternalScorer>(ExternalScorer::from_file(cfg.scorer.score_file));
  }
  if (cfg.scorer.kind == "model") {
    if (cfg.scorer.checkpoint.empty()) throw ConfigError("scorer.checkpoint: required for model scorer");
    require_files({cfg.scorer.checkpoint});
    Checkpoint ckpt = load_checkpoint(cfg.scorer.checkpoint);
    return std::make_unique<ModelScorer>(std::move(ckpt.params), std::move(ckpt.vocab));
  }
  throw ConfigError("unknown scorer kind: " + cfg.scorer.kind);
}

// ---------------------------------------------------------------------------

inline int cmd_ingest(const GlobalOptions& global, const std::vector<std::string>& source_args,
                      const std::vector<std::string>& no_confidence, std::string sentences_path,
                      const std::string& out_path, const std::string& report_path) {
  PipelineConfig cfg = global.load();
  if (!source_args.empty()) cfg.sources = parse_source_args(source_args, no_confidence);
  if (!sentences_path.empty()) cfg.sentences = sentences_path;
  if (cfg.sources.empty()) throw ConfigError("no sources given (use --source name=path or a config)");
  if (cfg.sentences.empty()) throw ConfigError("no sentence file given");
  std::vector<std::string> inputs{cfg.sentences};
  for (const auto& s : cfg.sources) inputs.push_back(s.file);
  require_files(inputs);

  std::vector<std::string> report;
  const std::vector<Sentence> sentences = read_sentences(cfg.sentences, &report);
  std::vector<std::vector<std::pair<std::string, Extraction>>> per_source;
  for (const auto& spec : cfg.sources) {
    ExtractionFile file = read_extractions(spec.file, spec.name);
    std::cout << spec.name << ": " << file.rows.size() << " extractions";
    if (!file.report.has_confidence) std::cout << " (no confidence)";
    std::cout << "\n";
    for (const auto& m : file.report.malformed) report.push_back(m);
    per_source.push_back(std::move(file.rows));
  }
  const PoolingResult pooled = pool_extractions(sentences, per_source);
  write_pooled(out_path, pooled.pools);
  report.push_back("duplicates_removed\t" + std::to_string(pooled.duplicates_removed));
  report.push_back("orphan_extractions\t" + std::to_string(pooled.orphan_extractions));
  if (!report_path.empty()) write_lines(report_path, report);
  std::size_t kept = 0;
  for (const auto& p : pooled.pools) kept += p.extractions.size();
  std::cout << "pooled: " << kept << " extractions over " << pooled.pools.size()
            << " sentences (dups removed: " << pooled.duplicates_removed << ")\n";
  return kOk;
}

inline int cmd_score_filter(const GlobalOptions& global, std::string sentences_path,
                            const std::string& pooled_path, const std::string& out_path,
                            const std::string& report_path, const std::string& scorer_kind,
                            const std::string& checkpoint, const std::string& score_file) {
  PipelineConfig cfg = global.load();
  if (!sentences_path.empty()) cfg.sentences = sentences_path;
  if (!scorer_kind.empty()) cfg.scorer.kind = scorer_kind;
  if (!checkpoint.empty()) cfg.scorer.checkpoint = checkpoint;
  if (!score_file.empty()) cfg.scorer.score_file = score_file;
  if (cfg.sentences.empty()) throw ConfigError("no sentence file given");
  require_files({cfg.sentences, pooled_path});

  const std::vector<Sentence> sentences = read_sentences(cfg.sentences);
  std::vector<std::string> malformed;
  const std::vector<ExtractionPool> pools = read_pooled(pooled_path, sentences, &malformed);
  const std::unique_ptr<Scorer> scorer = make_scorer(cfg, pools);
  const ScoreFilterResult result = score_and_filter(pools, *scorer, cfg.jobs);

  std::vector<std::pair<std::string, Extraction>> rows;
  std::vector<std::string> report;
  std::size_t pooled_count = 0, selected_count = 0;
  for (std::size_t i = 0; i < result.selections.size(); ++i) {
    const auto& sel = result.selections[i];
    pooled_count += pools[i].extractions.size();
    selected_count += sel.selected.size();
    for (const auto& ext : sel.selected) rows.emplace_back(sel.sentence.id, ext);
    report.push_back(sel.sentence.id + '\t' + format_double(sel.objective) + '\t' +
                     std::to_string(sel.selected.size()) + '\t' +
                     std::to_string(pools[i].extractions.size()));
  }
  write_extractions(out_path, rows);
  if (!report_path.empty()) write_lines(report_path, report);
  std::cout << "selected " << selected_count << " / " << pooled_count << " pooled extractions ("
            << result.scorer_warnings << " scorer warnings)\n";
  if (global.verbose) {
    for (const auto& m : malformed) std::cerr << m << "\n";
  }
  return kOk;
}

inline int cmd_build_train(const GlobalOptions& global, std::string sentences_path,
                           const std::string& extractions_path, const std::string& pooled_path,
                           bool random_bootstrap, bool keep_file_order, bool shuffle_order,
                           int max_input_len, const std::string& out_path) {
  PipelineConfig cfg = global.load();
  if (!sentences_path.empty()) cfg.sentences = sentences_path;
  if (cfg.sentences.empty()) throw ConfigError("no sentence file given");
  if (extractions_path.empty() == pooled_path.empty()) {
    throw ConfigError("give exactly one of --extractions or --pooled");
  }
  if (random_bootstrap && pooled_path.empty()) {
    throw ConfigError("--random-bootstrap needs --pooled input with source tags");
  }
  require_files({cfg.sentences, extractions_path, pooled_path});
  const std::size_t cap = max_input_len > 0 ? static_cast<std::size_t>(max_input_len)
                                            : static_cast<std::size_t>(cfg.model.max_input_len);

  const std::vector<Sentence> sentences = read_sentences(cfg.sentences);
  BootstrapCorpus corpus;
  if (!pooled_path.empty()) {
    const std::vector<ExtractionPool> pools = read_pooled(pooled_path, sentences);
    if (random_bootstrap) {
      corpus = build_random_bootstrap(pools, cfg.seed, detail::source_ranks(cfg.sources),
                                      detail::confidence_map(cfg.sources))
                   .corpus;
    } else {
      for (const auto& pool : pools) {
        if (pool.extractions.empty()) continue;
        corpus.pairs.emplace_back(pool.sentence,
                                  order_for_bootstrap(pool.extractions, !keep_file_order));
      }
    }
  } else {
    const ExtractionFile file = read_extractions(extractions_path, "external");
    const auto grouped = group_by_sentence(file.rows);
    const bool has_conf = !keep_file_order && file.report.has_confidence;
    for (const auto& s : sentences) {
      const auto it = grouped.find(s.id);
      if (it == grouped.end()) continue;
      corpus.pairs.emplace_back(s, order_for_bootstrap(it->second, has_conf));
    }
  }

  if (shuffle_order) {
    for (auto& [sentence, exts] : corpus.pairs) {
      std::mt19937_64 rng(splitmix64(cfg.seed ^ fnv1a64(sentence.id)));
      std::shuffle(exts.begin(), exts.end(), rng);
    }
  }

  std::vector<TrainingInstance> instances;
  for (const auto& [sentence, exts] : corpus.pairs) {
    auto built = build_instances(sentence, exts, cap);
    instances.insert(instances.end(), std::make_move_iterator(built.begin()),
                     std::make_move_iterator(built.end()));
  }
  write_instances(out_path, instances);
  std::cout << "wrote " << instances.size() << " training instances for " << corpus.pairs.size()
            << " sentences\n";
  return kOk;
}

inline int cmd_train(const GlobalOptions& global, const std::string& instances_path,
                     const std::string& out_path, int epochs, double learning_rate) {
  PipelineConfig cfg = global.load();
  require_files({instances_path});
  if (epochs >= 0) cfg.model.epochs = epochs;
  if (learning_rate > 0) cfg.model.learning_rate = learning_rate;

  const std::vector<TrainingInstance> instances = read_instances(instances_path);
  if (instances.empty()) throw ConfigError("no training instances in " + instances_path);
  const Vocab vocab = Vocab::build(instances, cfg.model.vocab_min_freq);
  ModelParams params = ModelParams::init(cfg.model, vocab.size());
  std::cout << "vocab " << vocab.size() << ", instances " << instances.size() << "\n";
  train(params, instances, vocab, [](int epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << format_double(loss) << "\n";
  });
  save_checkpoint(out_path, params, vocab);
  std::cout << "saved checkpoint " << out_path << "\n";
  return kOk;
}

inline int cmd_decode(const GlobalOptions& global, const std::string& checkpoint_path,
                      std::string sentences_path, const std::string& out_path, int max_iters,
                      int max_len) {
  PipelineConfig cfg = global.load();
  if (!sentences_path.empty()) cfg.sentences = sentences_path;
  if (cfg.sentences.empty()) throw ConfigError("no sentence file given");
  require_files({checkpoint_path, cfg.sentences});
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const std::vector<Sentence> sentences = read_sentences(cfg.sentences);

  std::vector<GenerateResult> results(sentences.size());
  parallel_for(sentences.size(), cfg.jobs, [&](std::size_t i) {
    results[i] = generate_extractions(ckpt.params, ckpt.vocab, sentences[i], max_iters, max_len);
  });

  std::vector<std::pair<std::string, Extraction>> rows;
  std::size_t malformed = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    malformed += results[i].malformed;
    for (const auto& ext : results[i].extractions) rows.emplace_back(sentences[i].id, ext);
  }
  write_extractions(out_path, rows);
  std::cout << "decoded " << rows.size() << " extractions from " << sentences.size()
            << " sentences (" << malformed << " malformed decodes skipped)\n";
  return kOk;
}

inline int cmd_eval(const GlobalOptions& global, const std::string& preds_path,
                    const std::string& gold_path, const std::string& curve_csv,
                    const std::string& curve_svg, bool print_summary) {
  (void)global;
  require_files({preds_path, gold_path});
  const ExtractionFile preds = read_extractions(preds_path, "model");
  const GoldSet gold = read_gold(gold_path);
  if (gold.by_sentence.empty()) throw ConfigError("gold set is empty: " + gold_path);
  const PRCurve curve = pr_curve(preds.rows, gold);
  if (!curve_csv.empty()) write_curve_csv(curve, curve_csv);
  if (!curve_svg.empty()) write_curve_svg(curve, curve_svg);
  if (print_summary) {
    std::cout << "optimal_f1 " << format_double(curve.optimal_f1) << "\n"
              << "auc " << format_double(curve.auc) << "\n"
              << "last_f1 " << format_double(curve.last_f1) << "\n";
  } else {
    std::cout << "wrote curve with " << curve.points.size() << " points\n";
  }
  return kOk;
}

inline int cmd_redundancy(const std::string& preds_path) {
  require_files({preds_path});
  const ExtractionFile preds = read_extractions(preds_path, "model");
  const RedundancyMetrics metrics = redundancy_metrics(group_by_sentence(preds.rows));
  std::cout << "mno " << format_double(metrics.mno) << "\n"
            << "iou " << format_double(metrics.iou) << "\n"
            << "tuples " << metrics.tuple_count << "\n";
  return kOk;
}

inline int cmd_export_attention(const GlobalOptions& global, const std::string& checkpoint_path,
                                std::string sentences_path, const std::string& sentence_id,
                                const std::string& out_prefix) {
  PipelineConfig cfg = global.load();
  if (!sentences_path.empty()) cfg.sentences = sentences_path;
  if (cfg.sentences.empty()) throw ConfigError("no sentence file given");
  require_files({checkpoint_path, cfg.sentences});
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const std::vector<Sentence> sentences = read_sentences(cfg.sentences);
  const auto it = std::find_if(sentences.begin(), sentences.end(),
                               [&](const Sentence& s) { return s.id == sentence_id; });
  if (it == sentences.end()) throw ConfigError("sentence id not found: " + sentence_id);

  const GenerateResult result = generate_extractions(ckpt.params, ckpt.vocab, *it);
  for (std::size_t i = 0; i < result.attention.size(); ++i) {
    const std::string path = out_prefix + "_ext" + std::to_string(i + 1) + ".csv";
    export_attention(result.attention[i], result.inputs[i], result.raw[i], path);
    std::cout << "wrote " << path << "\n";
  }
  if (result.attention.empty()) std::cout << "no extractions decoded for " << sentence_id << "\n";
  return kOk;
}

}  // namespace detail

// Builds the CLI and dispatches. Used by the oiekit binary and callable from
// tests with a constructed argv.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Open information extraction toolkit: pool, aggregate, train, decode, evaluate"};
  app.require_subcommand(1);

  detail::GlobalOptions global;
  app.add_option("--config", global.config_path, "pipeline config (JSON)");
  auto* seed_opt = app.add_option("--seed", global.seed, "override every seed in the config");
  app.add_option("--jobs", global.jobs, "worker threads for per-sentence stages");
  app.add_flag("--verbose", global.verbose, "chattier diagnostics");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "pool per-source extraction files per sentence");
  std::vector<std::string> source_args, no_confidence;
  std::string sentences_path, out_path, report_path;
  ingest->add_option("--source", source_args, "source as name=path, rank = order given");
  ingest->add_option("--no-confidence", no_confidence, "treat named source as unranked");
  ingest->add_option("--sentences", sentences_path, "sentence TSV");
  ingest->add_option("--out", out_path, "pooled corpus output")->required();
  ingest->add_option("--report", report_path, "malformed-line / dedup report");

  // score-filter
  auto* sf = app.add_subcommand("score-filter", "score pooled extractions and keep the best subset");
  std::string sf_sentences, sf_pooled, sf_out, sf_report, sf_scorer, sf_ckpt, sf_scores;
  sf->add_option("--sentences", sf_sentences, "sentence TSV");
  sf->add_option("--pooled", sf_pooled, "pooled corpus from ingest")->required();
  sf->add_option("--out", sf_out, "aggregated corpus output")->required();
  sf->add_option("--report", sf_report, "per-sentence objective report");
  sf->add_option("--scorer", sf_scorer, "rank | model | external");
  sf->add_option("--checkpoint", sf_ckpt, "model checkpoint for --scorer model");
  sf->add_option("--score-file", sf_scores, "score TSV for --scorer external");

  // build-train
  auto* bt = app.add_subcommand("build-train", "construct iterative-memory training instances");
  std::string bt_sentences, bt_exts, bt_pooled, bt_out;
  bool bt_random = false, bt_keep_order = false, bt_shuffle = false;
  int bt_cap = 0;
  bt->add_option("--sentences", bt_sentences, "sentence TSV");
  bt->add_option("--extractions", bt_exts, "extraction TSV (single corpus)");
  bt->add_option("--pooled", bt_pooled, "pooled corpus (multi-source)");
  bt->add_flag("--random-bootstrap", bt_random, "pick one source per sentence at random");
  bt->add_flag("--keep-file-order", bt_keep_order, "do not sort by confidence");
  bt->add_flag("--shuffle-train-order", bt_shuffle, "randomize tuple order per sentence");
  bt->add_option("--max-input-len", bt_cap, "memory length cap in tokens");
  bt->add_option("--out", bt_out, "training instance TSV")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the extractor on instance TSV");
  std::string tr_instances, tr_out;
  int tr_epochs = -1;
  double tr_lr = 0.0;
  tr->add_option("--instances", tr_instances, "training instance TSV")->required();
  tr->add_option("--out", tr_out, "checkpoint output")->required();
  tr->add_option("--epochs", tr_epochs, "override config epochs");
  tr->add_option("--learning-rate", tr_lr, "override config learning rate");

  // decode
  auto* dec = app.add_subcommand("decode", "generate extractions for sentences");
  std::string dec_ckpt, dec_sentences, dec_out;
  int dec_iters = -1, dec_len = -1;
  dec->add_option("--checkpoint", dec_ckpt, "model checkpoint")->required();
  dec->add_option("--sentences", dec_sentences, "sentence TSV");
  dec->add_option("--out", dec_out, "prediction TSV")->required();
  dec->add_option("--max-iters", dec_iters, "max extractions per sentence");
  dec->add_option("--max-len", dec_len, "max tokens per extraction");

  // eval / pr-curve
  auto* ev = app.add_subcommand("eval", "precision-recall metrics against gold tuples");
  std::string ev_preds, ev_gold, ev_csv, ev_svg;
  ev->add_option("--preds", ev_preds, "prediction TSV")->required();
  ev->add_option("--gold", ev_gold, "gold TSV")->required();
  ev->add_option("--curve-out", ev_csv, "curve CSV output");
  ev->add_option("--svg-out", ev_svg, "curve SVG output");

  auto* pc = app.add_subcommand("pr-curve", "write the precision-recall curve files");
  std::string pc_preds, pc_gold, pc_csv, pc_svg;
  pc->add_option("--preds", pc_preds, "prediction TSV")->required();
  pc->add_option("--gold", pc_gold, "gold TSV")->required();
  pc->add_option("--out", pc_csv, "curve CSV output")->required();
  pc->add_option("--svg-out", pc_svg, "curve SVG output");

  // redundancy
  auto* red = app.add_subcommand("redundancy", "MNO / IOU redundancy statistics");
  std::string red_preds;
  red->add_option("--preds", red_preds, "prediction TSV")->required();

  // export-attention
  auto* att = app.add_subcommand("export-attention", "dump attention matrices for one sentence");
  std::string att_ckpt, att_sentences, att_id, att_prefix;
  att->add_option("--checkpoint", att_ckpt, "model checkpoint")->required();
  att->add_option("--sentences", att_sentences, "sentence TSV");
  att->add_option("--id", att_id, "sentence id")->required();
  att->add_option("--out-prefix", att_prefix, "output path prefix")->required();

  try {
    app.parse(argc, argv);
    global.has_seed = seed_opt->count() > 0;
    if (ingest->parsed()) {
      return detail::cmd_ingest(global, source_args, no_confidence, sentences_path, out_path,
                                report_path);
    }
    if (sf->parsed()) {
      return detail::cmd_score_filter(global, sf_sentences, sf_pooled, sf_out, sf_report, sf_scorer,
                                      sf_ckpt, sf_scores);
    }
    if (bt->parsed()) {
      return detail::cmd_build_train(global, bt_sentences, bt_exts, bt_pooled, bt_random,
                                     bt_keep_order, bt_shuffle, bt_cap, bt_out);
    }
    if (tr->parsed()) return detail::cmd_train(global, tr_instances, tr_out, tr_epochs, tr_lr);
    if (dec->parsed()) {
      return detail::cmd_decode(global, dec_ckpt, dec_sentences, dec_out, dec_iters, dec_len);
    }
    if (ev->parsed()) return detail::cmd_eval(global, ev_preds, ev_gold, ev_csv, ev_svg, true);
    if (pc->parsed()) return detail::cmd_eval(global, pc_preds, pc_gold, pc_csv, pc_svg, false);
    if (red->parsed()) return detail::cmd_redundancy(red_preds);
    if (att->parsed()) {
      return detail::cmd_export_attention(global, att_ckpt, att_sentences, att_id, att_prefix);
    }
    std::cerr << "no subcommand given\n";
    return kUserError;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kUserError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace oiekit::cli
