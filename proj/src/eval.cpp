#include "mcnn/eval.hpp"

namespace mcnn {

int rank_of_best_truth(const std::vector<double>& score_row, const std::vector<int>& truth_set) {
  if (truth_set.empty()) throw UsageError("rank_of_best_truth: empty truth set");
  const int n = static_cast<int>(score_row.size());
  int best_rank = n + 1;
  for (int t : truth_set) {
    if (t < 0 || t >= n) throw UsageError("rank_of_best_truth: truth index out of range");
    int rank = 1;
    for (int c = 0; c < n; ++c) {
      if (score_row[c] > score_row[t]) ++rank;
      else if (score_row[c] == score_row[t] && c < t) ++rank;
    }
    best_rank = std::min(best_rank, rank);
  }
  return best_rank;
}

RetrievalReport compute_report(const RetrievalView& view) {
  RetrievalReport report;
  report.direction = view.direction;
  report.n_queries = view.n_queries;
  report.per_query_ranks.reserve(view.n_queries);
  for (int q = 0; q < view.n_queries; ++q) {
    std::vector<double> row(view.row(q), view.row(q) + view.n_candidates);
    report.per_query_ranks.push_back(rank_of_best_truth(row, view.truth[q]));
  }

  for (int k : {1, 5, 10}) {
    int hits = 0;
    for (int r : report.per_query_ranks) {
      if (r <= k) ++hits;
    }
    report.r_at[k] = view.n_queries > 0 ? static_cast<double>(hits) / view.n_queries : 0.0;
  }

  std::vector<int> sorted = report.per_query_ranks;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty()) {
    report.med_r = 0.0;
  } else if (sorted.size() % 2 == 1) {
    report.med_r = sorted[sorted.size() / 2];
  } else {
    // Even count: mean of the two middle ranks.
    report.med_r = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  }
  return report;
}

RetrievalView sentence_retrieval_view(const ScoreMatrix& matrix,
                                      const std::vector<std::vector<int>>& image_to_sentences) {
  RetrievalView view;
  view.direction = "sentence_retrieval";
  view.n_queries = matrix.n_images;
  view.n_candidates = matrix.n_sentences;
  view.values = matrix.values;
  view.truth = image_to_sentences;
  return view;
}

RetrievalView image_retrieval_view(const ScoreMatrix& matrix,
                                   const std::vector<int>& sentence_to_image) {
  RetrievalView view;
  view.direction = "image_retrieval";
  view.n_queries = matrix.n_sentences;
  view.n_candidates = matrix.n_images;
  view.values.resize(matrix.values.size());
  for (int s = 0; s < matrix.n_sentences; ++s) {
    for (int i = 0; i < matrix.n_images; ++i) {
      view.values[static_cast<std::size_t>(s) * matrix.n_images + i] = matrix.at(i, s);
    }
  }
  view.truth.resize(matrix.n_sentences);
  for (int s = 0; s < matrix.n_sentences; ++s) view.truth[s] = {sentence_to_image[s]};
  return view;
}

}  // namespace mcnn
