#ifndef MCNN_TRAIN_HPP_
#define MCNN_TRAIN_HPP_

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcnn/common.hpp"
#include "mcnn/data.hpp"
#include "mcnn/eval.hpp"
#include "mcnn/kernel.hpp"
#include "mcnn/model.hpp"

namespace mcnn {

// Which ranking directions contribute hinge terms. image_query ranks
// sentences for a fixed image (negative term s(I_n, S_m)); sentence_query
// ranks images (negative term s(I_m, S_n)).
enum class Direction { image_query, sentence_query, both };

std::optional<Direction> parse_direction(const std::string& name);
const char* direction_name(Direction d);

struct TrainConfig {
  double margin = 0.5;
  int batch_size = 100;
  double learning_rate = 0.01;
  int negatives_per_positive = 1;
  Direction direction = Direction::both;
  double dropout_p = 0.1;
  int patience = 10;
  int max_epochs = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (margin < 0.0) throw UsageError("margin must be >= 0");
    if (batch_size < 2) throw UsageError("batch_size must be >= 2 for in-batch negatives");
    if (negatives_per_positive < 1) throw UsageError("negatives_per_positive must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw UsageError("dropout must be in [0, 1)");
    if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
    if (patience < 0) throw UsageError("patience must be >= 0");
  }
};

inline double hinge_loss(double s_pos, double s_neg, double margin) {
  return std::max(0.0, margin - s_pos + s_neg);
}

struct NegativeSample {
  int positive_slot = 0;               // index into the batch
  std::vector<int> negative_slots;     // k other batch slots, none sharing the image
};

// In-batch negatives: for each positive, k slots drawn uniformly without
// replacement from batch members of a different image (ground-truth matches
// are never negatives).
std::vector<NegativeSample> sample_negatives(const std::vector<std::string>& batch_image_ids,
                                             Rng& rng, int k);

struct EpochStats {
  double mean_loss = 0.0;       // summed hinge terms per positive
  double active_fraction = 0.0; // fraction of hinge terms > 0
  int positives = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double active_fraction = 0.0;
  double val_r1 = 0.0;   // mean over both directions
  double val_r5 = 0.0;
  double val_r10 = 0.0;
  double val_medr = 0.0;
  double lr = 0.0;
};

struct FitResult {
  int best_epoch = 0;
  double best_metric = 0.0;
  int epochs_run = 0;
  bool stopped_early = false;
  std::vector<EpochLog> logs;
};

// One direction-pair retrieval evaluation over a split subset.
struct SplitEvalResult {
  RetrievalReport sentence_retrieval;
  RetrievalReport image_retrieval;

  double recall_sum() const {
    double total = 0.0;
    for (const auto& [k, v] : sentence_retrieval.r_at) total += v;
    for (const auto& [k, v] : image_retrieval.r_at) total += v;
    return total;
  }
};

template <typename T>
SplitEvalResult evaluate_split(const std::vector<const MatchModel<T>*>& models,
                               const PairDataset& dataset,
                               const std::vector<std::string>& split_image_ids,
                               const std::vector<int>& split_sentence_indices, bool ensemble) {
  std::vector<ImageFeature> images;
  std::unordered_map<std::string, int> image_row;
  images.reserve(split_image_ids.size());
  for (const auto& id : split_image_ids) {
    auto it = dataset.image_index.find(id);
    if (it == dataset.image_index.end()) throw DataError("split references unknown image " + id);
    image_row[id] = static_cast<int>(images.size());
    images.push_back(dataset.images[it->second]);
  }

  std::vector<const EncodedSentence*> sentences;
  std::vector<int> sentence_to_image_row;
  std::vector<std::vector<int>> image_to_sentence_cols(images.size());
  sentences.reserve(split_sentence_indices.size());
  for (int sentence_idx : split_sentence_indices) {
    const SentenceEntry& entry = dataset.sentences[sentence_idx];
    int row = image_row.at(entry.image_id);
    image_to_sentence_cols[row].push_back(static_cast<int>(sentences.size()));
    sentence_to_image_row.push_back(row);
    sentences.push_back(&entry.encoded);
  }

  ScoreMatrix matrix = build_score_matrix(models, images, sentences, ensemble);
  SplitEvalResult result;
  result.sentence_retrieval = compute_report(sentence_retrieval_view(matrix, image_to_sentence_cols));
  result.image_retrieval = compute_report(image_retrieval_view(matrix, sentence_to_image_row));
  return result;
}

// One pass of shuffled mini-batches: per positive, hinge terms for the
// configured direction(s) against sampled in-batch negatives, then an SGD
// step per batch. Gradients are averaged over the batch positives.
template <typename T>
EpochStats train_epoch(MatchModel<T>& model, const PairDataset& dataset,
                       const TrainConfig& config, Rng& rng) {
  config.validate();
  if (dataset.train_sentences.empty()) throw UsageError("train split is empty");

  std::vector<int> order = dataset.train_sentences;
  rng.shuffle(order);

  double total_loss = 0.0;
  long total_terms = 0;
  long active_terms = 0;
  int positives_done = 0;

  const bool use_image_query =
      config.direction == Direction::image_query || config.direction == Direction::both;
  const bool use_sentence_query =
      config.direction == Direction::sentence_query || config.direction == Direction::both;

  int batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
    std::size_t end = std::min(order.size(), start + config.batch_size);
    std::vector<int> batch(order.begin() + start, order.begin() + end);

    std::vector<std::string> batch_image_ids;
    batch_image_ids.reserve(batch.size());
    for (int s : batch) batch_image_ids.push_back(dataset.sentences[s].image_id);
    int distinct = 0;
    {
      std::set<std::string> uniq(batch_image_ids.begin(), batch_image_ids.end());
      distinct = static_cast<int>(uniq.size());
    }
    if (distinct < 2) continue;  // trailing remainder without usable negatives

    auto samples = sample_negatives(batch_image_ids, rng, config.negatives_per_positive);
    model.params.zero_grad();
    const T scale = T(1) / static_cast<T>(batch.size());

    double batch_loss = 0.0;
    for (const auto& sample : samples) {
      const int n = batch[sample.positive_slot];
      const SentenceEntry& pos_sentence = dataset.sentences[n];
      const ImageFeature& pos_image =
          dataset.images[dataset.image_index.at(pos_sentence.image_id)];
      std::vector<T> pos_feature(pos_image.vector.begin(), pos_image.vector.end());

      PairTrace<T> pos_trace;
      double s_pos = score_pair(model, pos_feature, pos_sentence.encoded, RunMode::train,
                                config.dropout_p, rng, &pos_trace)
                         .value;

      T pos_coeff = T(0);
      for (int neg_slot : sample.negative_slots) {
        const int m = batch[neg_slot];
        const SentenceEntry& neg_sentence = dataset.sentences[m];
        const ImageFeature& neg_image =
            dataset.images[dataset.image_index.at(neg_sentence.image_id)];

        if (use_image_query) {
          PairTrace<T> trace;
          double s_neg = score_pair(model, pos_feature, neg_sentence.encoded, RunMode::train,
                                    config.dropout_p, rng, &trace)
                             .value;
          double term = hinge_loss(s_pos, s_neg, config.margin);
          batch_loss += term;
          ++total_terms;
          if (term > 0.0) {
            ++active_terms;
            pos_coeff -= scale;
            backward_pair(model, trace, scale);
          }
        }
        if (use_sentence_query) {
          std::vector<T> neg_feature(neg_image.vector.begin(), neg_image.vector.end());
          PairTrace<T> trace;
          double s_neg = score_pair(model, neg_feature, pos_sentence.encoded, RunMode::train,
                                    config.dropout_p, rng, &trace)
                             .value;
          double term = hinge_loss(s_pos, s_neg, config.margin);
          batch_loss += term;
          ++total_terms;
          if (term > 0.0) {
            ++active_terms;
            pos_coeff -= scale;
            backward_pair(model, trace, scale);
          }
        }
      }
      if (pos_coeff != T(0)) backward_pair(model, pos_trace, pos_coeff);
      ++positives_done;
    }

    if (!std::isfinite(batch_loss)) {
      throw NumericError("non-finite loss in batch " + std::to_string(batch_index));
    }
    total_loss += batch_loss;
    sgd_step(model.params, config.learning_rate);
  }

  EpochStats stats;
  stats.positives = positives_done;
  stats.mean_loss = positives_done > 0 ? total_loss / positives_done : 0.0;
  stats.active_fraction =
      total_terms > 0 ? static_cast<double>(active_terms) / total_terms : 0.0;
  return stats;
}

template <typename T>
std::vector<std::vector<T>> snapshot_values(const ParamSet<T>& params) {
  std::vector<std::vector<T>> snap;
  snap.reserve(params.arrays.size());
  for (const auto& arr : params.arrays) snap.push_back(arr->values);
  return snap;
}

template <typename T>
void restore_values(ParamSet<T>& params, const std::vector<std::vector<T>>& snap) {
  for (std::size_t i = 0; i < params.arrays.size(); ++i) params.arrays[i]->values = snap[i];
}

// Trains with early stopping on summed validation recalls over both
// directions; keeps and restores the best parameters. The metric hook exists
// for tests that need a synthetic validation signal. Learning rate halves
// after patience/2 epochs without improvement.
template <typename T>
FitResult fit(MatchModel<T>& model, const PairDataset& dataset, const TrainConfig& config,
              const std::function<double(MatchModel<T>&, int)>& metric_hook = nullptr) {
  config.validate();
  if (!metric_hook && dataset.val_sentences.empty()) {
    throw UsageError("fit: validation split is empty");
  }

  Rng rng(config.seed);
  FitResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  auto best_values = snapshot_values(model.params);
  double lr = config.learning_rate;
  int stall = 0;
  const int half_patience = std::max(1, config.patience / 2);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    TrainConfig epoch_config = config;
    epoch_config.learning_rate = lr;
    EpochStats stats = train_epoch(model, dataset, epoch_config, rng);

    double metric = 0.0;
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = stats.mean_loss;
    log.active_fraction = stats.active_fraction;
    log.lr = lr;
    if (metric_hook) {
      metric = metric_hook(model, epoch);
      log.val_r1 = metric;
    } else {
      SplitEvalResult val = evaluate_split<T>({&model}, dataset, dataset.splits.val,
                                              dataset.val_sentences, false);
      metric = val.recall_sum();
      log.val_r1 = 0.5 * (val.sentence_retrieval.r_at.at(1) + val.image_retrieval.r_at.at(1));
      log.val_r5 = 0.5 * (val.sentence_retrieval.r_at.at(5) + val.image_retrieval.r_at.at(5));
      log.val_r10 = 0.5 * (val.sentence_retrieval.r_at.at(10) + val.image_retrieval.r_at.at(10));
      log.val_medr = 0.5 * (val.sentence_retrieval.med_r + val.image_retrieval.med_r);
    }
    result.logs.push_back(log);
    result.epochs_run = epoch;

    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      best_values = snapshot_values(model.params);
      stall = 0;
    } else {
      ++stall;
      if (stall % half_patience == 0) lr *= 0.5;
    }
    if (stall >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }

  restore_values(model.params, best_values);
  return result;
}

}  // namespace mcnn

#endif  // MCNN_TRAIN_HPP_
