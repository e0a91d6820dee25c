// mcnn command-line tool: synthetic data generation, gradient checking,
// training, retrieval evaluation, pair scoring, and the word-reshuffle probe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mcnn/checkpoint.hpp"
#include "mcnn/config.hpp"
#include "mcnn/data.hpp"
#include "mcnn/eval.hpp"
#include "mcnn/gradcheck.hpp"
#include "mcnn/model.hpp"
#include "mcnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcnn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> nearest_ids(const std::string& id,
                                     const std::vector<ImageFeature>& features, int n) {
  std::vector<std::pair<int, std::string>> scored;
  for (const auto& f : features) scored.emplace_back(levenshtein(id, f.id), f.id);
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (int i = 0; i < n && i < static_cast<int>(scored.size()); ++i) {
    out.push_back(scored[i].second);
  }
  return out;
}

ArchitectureConfig architecture_from_run_config(const RunConfig& rc, int manifest_dim) {
  auto variant = parse_variant(rc.variant);
  if (!variant) throw UsageError("unknown variant '" + rc.variant + "' (wd|phs|phl|st)");
  if (rc.channels.size() != 3) throw UsageError("channels must list exactly 3 values");
  if (rc.feature_dim != 0 && rc.feature_dim != manifest_dim) {
    throw UsageError("configured feature_dim " + std::to_string(rc.feature_dim) +
                     " conflicts with data manifest dim " + std::to_string(manifest_dim));
  }
  ArchitectureConfig cfg;
  cfg.variant = *variant;
  cfg.max_len = rc.max_len;
  cfg.k_rp = rc.k_rp;
  cfg.word_dim = rc.word_dim;
  cfg.feature_dim = manifest_dim;
  cfg.image_dim = rc.image_dim;
  cfg.mlp_hidden = rc.mlp_hidden;
  std::copy(rc.channels.begin(), rc.channels.end(), cfg.conv_channels.begin());
  return cfg;
}

TrainConfig train_config_from_run_config(const RunConfig& rc) {
  auto direction = parse_direction(rc.direction);
  if (!direction) {
    throw UsageError("unknown direction '" + rc.direction +
                     "' (image_query|sentence_query|both)");
  }
  TrainConfig cfg;
  cfg.margin = rc.margin;
  cfg.batch_size = rc.batch_size;
  cfg.learning_rate = rc.learning_rate;
  cfg.negatives_per_positive = rc.negatives;
  cfg.direction = *direction;
  cfg.dropout_p = rc.dropout;
  cfg.patience = rc.patience;
  cfg.max_epochs = rc.max_epochs;
  cfg.seed = rc.seed;
  return cfg;
}

struct LoadedModels {
  std::vector<LoadedCheckpoint> checkpoints;
  std::vector<const MatchModel<float>*> models;
  std::vector<std::string> names;
};

LoadedModels load_models(const std::vector<std::string>& ckpt_paths) {
  LoadedModels loaded;
  for (const auto& path : ckpt_paths) {
    loaded.checkpoints.push_back(load_checkpoint(path));
  }
  for (std::size_t i = 1; i < loaded.checkpoints.size(); ++i) {
    if (loaded.checkpoints[i].vocab_hash != loaded.checkpoints[0].vocab_hash) {
      throw UsageError("checkpoint " + ckpt_paths[i] + " was trained with a different vocabulary");
    }
    if (loaded.checkpoints[i].model.config.feature_dim !=
        loaded.checkpoints[0].model.config.feature_dim) {
      throw UsageError("checkpoint " + ckpt_paths[i] + " expects a different feature_dim");
    }
  }
  for (auto& c : loaded.checkpoints) {
    loaded.models.push_back(&c.model);
    loaded.names.push_back(variant_name(c.model.config.variant));
  }
  return loaded;
}

PairDataset dataset_for_models(const fs::path& data_dir, const LoadedModels& loaded) {
  const auto& model = *loaded.models.front();
  PairDataset ds = load_dataset(data_dir, model.vocab, model.config.max_len);
  if (!ds.images.empty() &&
      static_cast<int>(ds.images[0].vector.size()) != model.config.feature_dim) {
    throw UsageError("data feature dim " + std::to_string(ds.images[0].vector.size()) +
                     " does not match checkpoint feature_dim " +
                     std::to_string(model.config.feature_dim));
  }
  return ds;
}

void select_split(const PairDataset& ds, const std::string& split,
                  std::vector<std::string>* image_ids, std::vector<int>* sentence_indices) {
  if (split == "train") {
    *image_ids = ds.splits.train;
    *sentence_indices = ds.train_sentences;
  } else if (split == "val") {
    *image_ids = ds.splits.val;
    *sentence_indices = ds.val_sentences;
  } else if (split == "test") {
    *image_ids = ds.splits.test;
    *sentence_indices = ds.test_sentences;
  } else {
    throw UsageError("unknown split '" + split + "' (train|val|test)");
  }
  if (image_ids->empty() || sentence_indices->empty()) {
    throw DataError("split '" + split + "' is empty");
  }
}

json report_to_json(const RetrievalReport& report, const std::vector<std::string>& ckpts,
                    bool ensemble) {
  json j;
  j["direction"] = report.direction;
  j["r_at_1"] = report.r_at.at(1);
  j["r_at_5"] = report.r_at.at(5);
  j["r_at_10"] = report.r_at.at(10);
  j["med_r"] = report.med_r;
  j["n_queries"] = report.n_queries;
  j["tie_break"] = "index";
  j["checkpoint"] = ckpts.size() == 1 ? json(ckpts[0]) : json(ckpts);
  j["ensemble"] = ensemble;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// --- subcommand implementations ---------------------------------------------

int cmd_make_toy(const ToyDatasetOptions& opts, const std::string& out_dir) {
  make_toy_dataset(opts, out_dir);
  std::printf("wrote toy dataset to %s (%d images, %d concepts, dim %d, seed %llu)\n",
              out_dir.c_str(), opts.n_images, opts.concepts, opts.feature_dim,
              static_cast<unsigned long long>(opts.seed));
  return 0;
}

int cmd_gradcheck(const GradcheckConfig& cfg, bool as_json) {
  auto runs = run_gradcheck(cfg);
  bool all_passed = true;
  json out = json::array();
  for (const auto& run : runs) {
    all_passed = all_passed && run.passed;
    if (as_json) {
      json entry{{"variant", variant_name(run.variant)},
                 {"seed", run.seed},
                 {"max_rel_error", run.max_rel_error},
                 {"passed", run.passed}};
      json params = json::array();
      for (const auto& r : run.results) {
        params.push_back({{"param", r.param_name},
                          {"max_rel_error", r.max_rel_error},
                          {"passed", r.passed}});
      }
      entry["params"] = params;
      out.push_back(entry);
    } else {
      std::printf("%-4s seed %2llu  max_rel %.3e  %s\n", variant_name(run.variant),
                  static_cast<unsigned long long>(run.seed), run.max_rel_error,
                  run.passed ? "pass" : "FAIL");
      if (!run.passed) {
        for (const auto& r : run.results) {
          if (!r.passed) {
            std::printf("    %-12s max_rel %.3e\n", r.param_name.c_str(), r.max_rel_error);
          }
        }
      }
    }
  }
  if (as_json) {
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    std::printf("gradcheck: %s\n", all_passed ? "all variants pass" : "FAILURES present");
  }
  return all_passed ? 0 : kExitNumeric;
}

int cmd_train(const RunConfig& rc) {
  if (rc.data_dir.empty()) throw UsageError("--data is required");
  if (rc.out_path.empty()) throw UsageError("--out is required");

  auto captions = load_captions_tsv(fs::path(rc.data_dir) / "captions.tsv");
  auto splits = load_splits(fs::path(rc.data_dir) / "splits.json");
  Vocabulary vocab = build_vocabulary(captions, splits);

  auto features = load_image_features(fs::path(rc.data_dir) / "features.json");
  if (features.empty()) throw DataError("dataset has no image features");
  const int manifest_dim = static_cast<int>(features[0].vector.size());

  ArchitectureConfig arch = architecture_from_run_config(rc, manifest_dim);
  TrainConfig train_cfg = train_config_from_run_config(rc);
  train_cfg.validate();
  shape_plan(arch);  // fail fast on an inconsistent layer plan

  Warnings warnings;
  PairDataset dataset = load_dataset(rc.data_dir, vocab, arch.max_len, &warnings);
  for (const auto& msg : warnings.messages) std::fprintf(stderr, "warning: %s\n", msg.c_str());

  // resolved configuration, for the run record
  {
    json resolved;
    for (const auto& [k, v] : config_as_map(rc)) resolved[k] = v;
    std::printf("resolved config: %s\n", resolved.dump().c_str());
  }

  auto model = build_model<float>(arch, vocab, train_cfg.seed);
  if (!rc.embeddings_path.empty()) {
    EmbeddingLoadStats stats;
    auto table = load_embeddings(rc.embeddings_path, vocab, train_cfg.seed, &stats);
    apply_embeddings(model, table);
    std::printf("embeddings: dim %d, %d covered, %d random-initialized\n", stats.dim,
                stats.covered, stats.uncovered);
  }

  FitResult result = fit(model, dataset, train_cfg);

  fs::path log_path = rc.log_path.empty() ? fs::path(rc.out_path + ".log.jsonl")
                                          : fs::path(rc.log_path);
  {
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write training log " + log_path.string());
    for (const auto& e : result.logs) {
      json line{{"epoch", e.epoch},           {"mean_loss", e.mean_loss},
                {"active_fraction", e.active_fraction}, {"val_r1", e.val_r1},
                {"val_r5", e.val_r5},         {"val_r10", e.val_r10},
                {"val_medr", e.val_medr},     {"lr", e.lr}};
      log << line.dump() << "\n";
    }
  }

  save_checkpoint(model, train_cfg, CheckpointMeta{result.best_epoch, result.best_metric},
                  rc.out_path);
  std::printf("trained %s: best epoch %d, val recall sum %.4f (%d epochs%s)\n",
              rc.variant.c_str(), result.best_epoch, result.best_metric, result.epochs_run,
              result.stopped_early ? ", early stop" : "");
  std::printf("checkpoint: %s\nlog: %s\n", rc.out_path.c_str(), log_path.c_str());
  return 0;
}

int cmd_eval(const std::vector<std::string>& ckpts, const std::string& data_dir,
             const std::string& split, bool ensemble, const std::string& out_dir,
             const std::string& csv_prefix) {
  if (ckpts.size() > 1 && !ensemble) {
    throw UsageError("multiple checkpoints require --ensemble");
  }
  LoadedModels loaded = load_models(ckpts);
  PairDataset ds = dataset_for_models(data_dir, loaded);
  std::vector<std::string> image_ids;
  std::vector<int> sentence_indices;
  select_split(ds, split, &image_ids, &sentence_indices);

  SplitEvalResult result =
      evaluate_split<float>(loaded.models, ds, image_ids, sentence_indices, ensemble);

  for (const RetrievalReport* report : {&result.sentence_retrieval, &result.image_retrieval}) {
    std::printf("%-18s R@1 %.4f  R@5 %.4f  R@10 %.4f  Med r %.1f  (%d queries)\n",
                report->direction.c_str(), report->r_at.at(1), report->r_at.at(5),
                report->r_at.at(10), report->med_r, report->n_queries);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      std::string name = "report_" + report->direction + (ensemble ? "_ensemble" : "") + ".json";
      write_text(fs::path(out_dir) / name,
                 report_to_json(*report, ckpts, ensemble).dump(2) + "\n");
    }
    if (!csv_prefix.empty()) {
      std::string csv = "query_index,rank\n";
      for (std::size_t q = 0; q < report->per_query_ranks.size(); ++q) {
        csv += std::to_string(q) + "," + std::to_string(report->per_query_ranks[q]) + "\n";
      }
      write_text(csv_prefix + "_" + report->direction + ".csv", csv);
    }
  }
  return 0;
}

int cmd_score(const std::string& ckpt, const std::string& data_dir, const std::string& image_id,
              const std::string& sentence, bool as_json) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  auto features = load_image_features(fs::path(data_dir) / "features.json");
  const ImageFeature* image = nullptr;
  for (const auto& f : features) {
    if (f.id == image_id) {
      image = &f;
      break;
    }
  }
  if (image == nullptr) {
    std::string msg = "unknown image id '" + image_id + "'; nearest:";
    for (const auto& id : nearest_ids(image_id, features, 3)) msg += " " + id;
    throw UsageError(msg);
  }

  auto tokens = tokenize(sentence);
  auto encoded = encode_sentence(tokens, loaded.model.vocab, loaded.model.config.max_len);
  std::vector<float> feature(image->vector.begin(), image->vector.end());
  double score = score_pair_eval(loaded.model, feature, encoded).value;
  if (as_json) {
    json j{{"image_id", image_id}, {"sentence", sentence}, {"score", score}};
    std::printf("%s\n", j.dump().c_str());
  } else {
    std::printf("%.6f\n", score);
  }
  return 0;
}

int cmd_probe_reshuffle(const std::vector<std::string>& ckpts, const std::string& data_dir,
                        const std::string& split, int n_shuffles, std::uint64_t seed,
                        const std::string& out_path) {
  LoadedModels loaded = load_models(ckpts);
  PairDataset ds = dataset_for_models(data_dir, loaded);
  std::vector<std::string> image_ids;
  std::vector<int> sentence_indices;
  select_split(ds, split, &image_ids, &sentence_indices);

  std::vector<std::pair<const ImageFeature*, const SentenceEntry*>> pairs;
  for (int idx : sentence_indices) {
    const auto& entry = ds.sentences[idx];
    pairs.push_back({&ds.images[ds.image_index.at(entry.image_id)], &entry});
  }
  ProbeReport report =
      probe_reshuffle<float>(loaded.models, loaded.names, pairs, n_shuffles, seed);

  json j;
  j["n_shuffles"] = n_shuffles;
  j["seed"] = seed;
  j["models"] = report.model_names;
  j["n_scored"] = report.n_scored;
  j["n_skipped"] = report.n_skipped;
  for (std::size_t c = 0; c < report.model_names.size(); ++c) {
    j["beats_mean"][report.model_names[c]] = report.beats_mean_fraction[c];
    j["beats_max"][report.model_names[c]] = report.beats_max_fraction[c];
  }
  json rows = json::array();
  for (const auto& p : report.pairs) {
    json row{{"image_id", p.image_id}, {"sentence", p.sentence_text}, {"skipped", p.skipped}};
    if (!p.skipped) {
      for (std::size_t c = 0; c < report.model_names.size(); ++c) {
        row["original"][report.model_names[c]] = p.original_scores[c];
      }
      json shuffles = json::array();
      for (const auto& s : p.shuffle_scores) {
        json entry;
        for (std::size_t c = 0; c < report.model_names.size(); ++c) {
          entry[report.model_names[c]] = s[c];
        }
        shuffles.push_back(entry);
      }
      row["shuffles"] = shuffles;
    }
    rows.push_back(row);
  }
  j["pairs"] = rows;

  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  for (std::size_t c = 0; c < report.model_names.size(); ++c) {
    std::printf("%-8s original beats shuffle mean on %.1f%% of pairs (max: %.1f%%)\n",
                report.model_names[c].c_str(), 100.0 * report.beats_mean_fraction[c],
                100.0 * report.beats_max_fraction[c]);
  }
  if (report.n_skipped > 0) {
    std::printf("skipped %d pair(s) with fewer than two live tokens\n", report.n_skipped);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcnn: multimodal convolutional matching of images and sentences"};
  app.require_subcommand(1);

  // make-toy
  auto* make_toy = app.add_subcommand("make-toy", "generate a synthetic paired dataset");
  ToyDatasetOptions toy_opts;
  std::string toy_out;
  make_toy->add_option("--images", toy_opts.n_images, "number of images")->required();
  make_toy->add_option("--concepts", toy_opts.concepts, "latent concepts")->capture_default_str();
  make_toy->add_option("--feature-dim", toy_opts.feature_dim, "image feature dim")->capture_default_str();
  make_toy->add_option("--vocab-size", toy_opts.vocab_size, "token budget")->capture_default_str();
  make_toy->add_option("--captions", toy_opts.captions_per_image, "captions per image")->capture_default_str();
  make_toy->add_option("--seed", toy_opts.seed, "rng seed")->capture_default_str();
  make_toy->add_option("--train-pct", toy_opts.train_pct, "train split percent")->capture_default_str();
  make_toy->add_option("--val-pct", toy_opts.val_pct, "val split percent")->capture_default_str();
  make_toy->add_option("--out", toy_out, "output directory")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  GradcheckConfig gc_cfg;
  std::string gc_variant;
  bool gc_json = false;
  gradcheck->add_option("--tolerance", gc_cfg.tolerance, "max relative error")->capture_default_str();
  gradcheck->add_option("--epsilon", gc_cfg.epsilon, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--seeds", gc_cfg.seeds, "seeds per variant")->capture_default_str();
  gradcheck->add_option("--variant", gc_variant, "check one variant only (wd|phs|phl|st)");
  gradcheck->add_flag("--json", gc_json, "machine-readable output");

  // train
  auto* train = app.add_subcommand("train", "train one matching variant");
  std::string train_config_path;
  RunConfig rc;
  train->add_option("--config", train_config_path, "key = value config file");
  auto* opt_variant = train->add_option("--variant", rc.variant, "wd|phs|phl|st");
  auto* opt_data = train->add_option("--data", rc.data_dir, "dataset directory");
  auto* opt_out = train->add_option("--out", rc.out_path, "checkpoint output path");
  auto* opt_log = train->add_option("--log", rc.log_path, "training log path (JSON lines)");
  auto* opt_embeddings =
      train->add_option("--embeddings", rc.embeddings_path, "pretrained word vectors");
  auto* opt_seed = train->add_option("--seed", rc.seed, "rng seed");
  auto* opt_margin = train->add_option("--margin", rc.margin, "ranking margin");
  auto* opt_lr = train->add_option("--lr", rc.learning_rate, "learning rate");
  auto* opt_batch = train->add_option("--batch-size", rc.batch_size, "mini-batch size");
  auto* opt_epochs = train->add_option("--epochs", rc.max_epochs, "max epochs");
  auto* opt_patience = train->add_option("--patience", rc.patience, "early-stopping patience");
  auto* opt_dropout = train->add_option("--dropout", rc.dropout, "dropout probability");
  auto* opt_negatives = train->add_option("--negatives", rc.negatives, "negatives per positive");
  auto* opt_direction =
      train->add_option("--direction", rc.direction, "image_query|sentence_query|both");
  auto* opt_word_dim = train->add_option("--word-dim", rc.word_dim, "word embedding dim");
  auto* opt_image_dim = train->add_option("--image-dim", rc.image_dim, "projected image dim");
  auto* opt_mlp = train->add_option("--mlp-hidden", rc.mlp_hidden, "MLP hidden size");
  auto* opt_channels =
      train->add_option("--channels", rc.channels, "three conv channel counts")->delimiter(',');
  auto* opt_max_len = train->add_option("--max-len", rc.max_len, "max sentence length");
  auto* opt_feature_dim =
      train->add_option("--feature-dim", rc.feature_dim, "expected image feature dim");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "bidirectional retrieval evaluation");
  std::vector<std::string> eval_ckpts;
  std::string eval_data, eval_split = "test", eval_out, eval_csv;
  bool eval_ensemble = false;
  eval_cmd->add_option("--ckpt", eval_ckpts, "checkpoint path (repeatable)")
      ->required()
      ->expected(1, 4);
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test")->capture_default_str();
  eval_cmd->add_flag("--ensemble", eval_ensemble, "sum scores over all checkpoints");
  eval_cmd->add_option("--out", eval_out, "directory for report JSON files");
  eval_cmd->add_option("--csv", eval_csv, "prefix for per-query rank CSVs");

  // score
  auto* score_cmd = app.add_subcommand("score", "score one image-sentence pair");
  std::string score_ckpt, score_data, score_image, score_sentence;
  bool score_json = false;
  score_cmd->add_option("--ckpt", score_ckpt, "checkpoint path")->required();
  score_cmd->add_option("--data", score_data, "dataset directory")->required();
  score_cmd->add_option("--image-id", score_image, "image id from the manifest")->required();
  score_cmd->add_option("--sentence", score_sentence, "sentence text")->required();
  score_cmd->add_flag("--json", score_json, "machine-readable output");

  // probe-reshuffle
  auto* probe_cmd = app.add_subcommand("probe-reshuffle", "word-order composition probe");
  std::vector<std::string> probe_ckpts;
  std::string probe_data, probe_split = "train", probe_out;
  int probe_n = 3;
  std::uint64_t probe_seed = 1;
  probe_cmd->add_option("--ckpt", probe_ckpts, "checkpoint path (repeatable)")
      ->required()
      ->expected(1, 4);
  probe_cmd->add_option("--data", probe_data, "dataset directory")->required();
  probe_cmd->add_option("--split", probe_split, "train|val|test")->capture_default_str();
  probe_cmd->add_option("--n", probe_n, "shuffles per sentence")->capture_default_str();
  probe_cmd->add_option("--seed", probe_seed, "rng seed")->capture_default_str();
  probe_cmd->add_option("--out", probe_out, "probe report JSON path");

  try {
    app.parse(argc, argv);

    if (*make_toy) return cmd_make_toy(toy_opts, toy_out);

    if (*gradcheck) {
      if (!gc_variant.empty()) {
        auto v = parse_variant(gc_variant);
        if (!v) throw UsageError("unknown variant '" + gc_variant + "'");
        gc_cfg.only_variant = v;
      }
      return cmd_gradcheck(gc_cfg, gc_json);
    }

    if (*train) {
      // file first, explicit flags override
      RunConfig file_rc;
      if (!train_config_path.empty()) {
        apply_config_entries(file_rc, parse_config_file(train_config_path));
      }
      RunConfig merged = file_rc;
      auto take = [](const CLI::Option* opt, auto& dst, const auto& src) {
        if (opt->count() > 0) dst = src;
      };
      take(opt_variant, merged.variant, rc.variant);
      take(opt_data, merged.data_dir, rc.data_dir);
      take(opt_out, merged.out_path, rc.out_path);
      take(opt_log, merged.log_path, rc.log_path);
      take(opt_embeddings, merged.embeddings_path, rc.embeddings_path);
      take(opt_seed, merged.seed, rc.seed);
      take(opt_margin, merged.margin, rc.margin);
      take(opt_lr, merged.learning_rate, rc.learning_rate);
      take(opt_batch, merged.batch_size, rc.batch_size);
      take(opt_epochs, merged.max_epochs, rc.max_epochs);
      take(opt_patience, merged.patience, rc.patience);
      take(opt_dropout, merged.dropout, rc.dropout);
      take(opt_negatives, merged.negatives, rc.negatives);
      take(opt_direction, merged.direction, rc.direction);
      take(opt_word_dim, merged.word_dim, rc.word_dim);
      take(opt_image_dim, merged.image_dim, rc.image_dim);
      take(opt_mlp, merged.mlp_hidden, rc.mlp_hidden);
      take(opt_channels, merged.channels, rc.channels);
      take(opt_max_len, merged.max_len, rc.max_len);
      take(opt_feature_dim, merged.feature_dim, rc.feature_dim);
      return cmd_train(merged);
    }

    if (*eval_cmd) {
      return cmd_eval(eval_ckpts, eval_data, eval_split, eval_ensemble, eval_out, eval_csv);
    }
    if (*score_cmd) {
      return cmd_score(score_ckpt, score_data, score_image, score_sentence, score_json);
    }
    if (*probe_cmd) {
      if (probe_n < 1) throw UsageError("--n must be >= 1");
      return cmd_probe_reshuffle(probe_ckpts, probe_data, probe_split, probe_n, probe_seed,
                                 probe_out);
    }
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
