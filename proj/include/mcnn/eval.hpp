#ifndef MCNN_EVAL_HPP_
#define MCNN_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mcnn/common.hpp"
#include "mcnn/data.hpp"
#include "mcnn/model.hpp"

namespace mcnn {

// Raw pairwise scores: rows are images, columns are sentences. Both retrieval
// directions are read off the same matrix.
struct ScoreMatrix {
  int n_images = 0;
  int n_sentences = 0;
  std::vector<double> values;

  double& at(int img, int sent) { return values[static_cast<std::size_t>(img) * n_sentences + sent]; }
  double at(int img, int sent) const {
    return values[static_cast<std::size_t>(img) * n_sentences + sent];
  }
};

// One retrieval direction: per query a row of candidate scores plus the
// ground-truth candidate set.
struct RetrievalView {
  std::string direction;
  int n_queries = 0;
  int n_candidates = 0;
  std::vector<double> values;
  std::vector<std::vector<int>> truth;

  const double* row(int q) const { return values.data() + static_cast<std::size_t>(q) * n_candidates; }
};

struct RetrievalReport {
  std::string direction;
  std::map<int, double> r_at;  // K in {1, 5, 10}
  double med_r = 0.0;
  int n_queries = 0;
  std::vector<int> per_query_ranks;
};

// Candidates are ranked by descending score with ties broken by ascending
// candidate index; returns the best (smallest) 1-based rank over truth_set.
int rank_of_best_truth(const std::vector<double>& score_row, const std::vector<int>& truth_set);

RetrievalReport compute_report(const RetrievalView& view);

// All pairwise scores for the given images/sentences; with ensemble=true the
// member matrices are summed elementwise in member order.
template <typename T>
ScoreMatrix build_score_matrix(const std::vector<const MatchModel<T>*>& models,
                               const std::vector<ImageFeature>& images,
                               const std::vector<const EncodedSentence*>& sentences,
                               bool ensemble) {
  if (models.empty()) throw UsageError("build_score_matrix: no models");
  if (!ensemble && models.size() > 1) {
    throw UsageError("build_score_matrix: multiple models require ensemble=true");
  }
  ScoreMatrix matrix;
  matrix.n_images = static_cast<int>(images.size());
  matrix.n_sentences = static_cast<int>(sentences.size());
  matrix.values.assign(static_cast<std::size_t>(matrix.n_images) * matrix.n_sentences, 0.0);
  for (const MatchModel<T>* model : models) {
    for (int i = 0; i < matrix.n_images; ++i) {
      std::vector<T> feature(images[i].vector.begin(), images[i].vector.end());
      for (int s = 0; s < matrix.n_sentences; ++s) {
        matrix.at(i, s) += score_pair_eval(*model, feature, *sentences[s]).value;
      }
    }
  }
  return matrix;
}

// Direction views over the raw matrix. image_to_sentence maps image row ->
// ground-truth sentence columns; sentence_to_image maps sentence -> image.
RetrievalView sentence_retrieval_view(const ScoreMatrix& matrix,
                                      const std::vector<std::vector<int>>& image_to_sentences);
RetrievalView image_retrieval_view(const ScoreMatrix& matrix,
                                   const std::vector<int>& sentence_to_image);

// --- word-reshuffle probe ----------------------------------------------------

struct ProbePairResult {
  std::string image_id;
  std::string sentence_text;
  std::vector<double> original_scores;               // per model, then ensemble last
  std::vector<std::vector<double>> shuffle_scores;   // [shuffle][model...,ensemble]
  bool skipped = false;
};

struct ProbeReport {
  std::vector<std::string> model_names;  // per model, then "ensemble" when >1 model
  std::vector<ProbePairResult> pairs;
  std::vector<double> beats_max_fraction;   // per column of scores
  std::vector<double> beats_mean_fraction;  // per column of scores
  int n_scored = 0;
  int n_skipped = 0;
};

// Scores each pair's natural order against n_shuffles uniform permutations of
// its live tokens (padding stays put). Pairs with fewer than two live tokens
// are skipped.
template <typename T>
ProbeReport probe_reshuffle(const std::vector<const MatchModel<T>*>& models,
                            const std::vector<std::string>& model_names,
                            const std::vector<std::pair<const ImageFeature*,
                                                        const SentenceEntry*>>& pairs,
                            int n_shuffles, std::uint64_t seed) {
  if (models.empty()) throw UsageError("probe_reshuffle: no models");
  if (n_shuffles < 1) throw UsageError("probe_reshuffle: n_shuffles must be >= 1");

  ProbeReport report;
  report.model_names = model_names;
  const bool with_ensemble = models.size() > 1;
  if (with_ensemble) report.model_names.push_back("ensemble");
  const std::size_t n_cols = report.model_names.size();

  auto score_all = [&](const std::vector<T>& feature, const EncodedSentence& sentence) {
    std::vector<double> scores;
    scores.reserve(n_cols);
    double total = 0.0;
    for (const auto* m : models) {
      double s = score_pair_eval(*m, feature, sentence).value;
      scores.push_back(s);
      total += s;
    }
    if (with_ensemble) scores.push_back(total);
    return scores;
  };

  Rng rng(seed);
  std::vector<int> beats_max(n_cols, 0);
  std::vector<int> beats_mean(n_cols, 0);
  for (const auto& [image, entry] : pairs) {
    ProbePairResult result;
    result.image_id = image->id;
    for (std::size_t i = 0; i < entry->tokens.size(); ++i) {
      if (i > 0) result.sentence_text += ' ';
      result.sentence_text += entry->tokens[i];
    }
    if (entry->encoded.live_length < 2) {
      result.skipped = true;
      ++report.n_skipped;
      report.pairs.push_back(std::move(result));
      continue;
    }

    std::vector<T> feature(image->vector.begin(), image->vector.end());
    result.original_scores = score_all(feature, entry->encoded);

    std::vector<double> max_shuffle(n_cols, -std::numeric_limits<double>::infinity());
    std::vector<double> sum_shuffle(n_cols, 0.0);
    for (int s = 0; s < n_shuffles; ++s) {
      EncodedSentence shuffled = entry->encoded;
      std::vector<int> live(shuffled.indices.begin(),
                            shuffled.indices.begin() + shuffled.live_length);
      rng.shuffle(live);
      std::copy(live.begin(), live.end(), shuffled.indices.begin());
      auto scores = score_all(feature, shuffled);
      for (std::size_t c = 0; c < n_cols; ++c) {
        max_shuffle[c] = std::max(max_shuffle[c], scores[c]);
        sum_shuffle[c] += scores[c];
      }
      result.shuffle_scores.push_back(std::move(scores));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (result.original_scores[c] > max_shuffle[c]) ++beats_max[c];
      if (result.original_scores[c] > sum_shuffle[c] / n_shuffles) ++beats_mean[c];
    }
    ++report.n_scored;
    report.pairs.push_back(std::move(result));
  }

  report.beats_max_fraction.resize(n_cols);
  report.beats_mean_fraction.resize(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    report.beats_max_fraction[c] =
        report.n_scored > 0 ? static_cast<double>(beats_max[c]) / report.n_scored : 0.0;
    report.beats_mean_fraction[c] =
        report.n_scored > 0 ? static_cast<double>(beats_mean[c]) / report.n_scored : 0.0;
  }
  return report;
}

}  // namespace mcnn

#endif  // MCNN_EVAL_HPP_
