#include "mcnn/train.hpp"

#include <set>

namespace mcnn {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::image_query: return "image_query";
    case Direction::sentence_query: return "sentence_query";
    case Direction::both: return "both";
  }
  return "?";
}

std::optional<Direction> parse_direction(const std::string& name) {
  if (name == "image_query") return Direction::image_query;
  if (name == "sentence_query") return Direction::sentence_query;
  if (name == "both") return Direction::both;
  return std::nullopt;
}

std::vector<NegativeSample> sample_negatives(const std::vector<std::string>& batch_image_ids,
                                             Rng& rng, int k) {
  if (k < 1) throw UsageError("sample_negatives: k must be >= 1");
  std::set<std::string> distinct(batch_image_ids.begin(), batch_image_ids.end());
  if (distinct.size() < 2) {
    throw UsageError("sample_negatives: batch needs at least 2 distinct images");
  }

  std::vector<NegativeSample> samples;
  samples.reserve(batch_image_ids.size());
  std::vector<int> candidates;
  for (int n = 0; n < static_cast<int>(batch_image_ids.size()); ++n) {
    candidates.clear();
    for (int m = 0; m < static_cast<int>(batch_image_ids.size()); ++m) {
      if (m == n) continue;
      if (batch_image_ids[m] == batch_image_ids[n]) continue;  // ground-truth match
      candidates.push_back(m);
    }
    NegativeSample sample;
    sample.positive_slot = n;
    const int take = std::min<int>(k, static_cast<int>(candidates.size()));
    // Partial Fisher-Yates: uniform draws without replacement.
    for (int i = 0; i < take; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      sample.negative_slots.push_back(candidates[i]);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace mcnn
