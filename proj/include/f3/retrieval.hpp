#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "f3/history.hpp"

namespace f3 {

struct SimilarityScore {
  double value = 0.0;          // matches / m, in [0, 1]
  int matches = 0;             // positions where both moves agree
  std::size_t record_ref = 0;  // index into PastMemory::items()
};

// Fraction of the first m = c.size() turns where both the learner's and the
// opponent's moves agree. Throws std::domain_error for m = 0 or a record
// shorter than m.
double prefix_similarity(const CurrentHistory& c, const GameRecord& rec);

inline constexpr int kDefaultTopK = 5;

// The k most similar records whose length exceeds m, most similar first.
// Ties go to the higher delta_R, then to the older record. `exclude_serial`
// drops one record (leave-one-out during estimator training). Empty memory
// gives an empty result.
std::vector<SimilarityScore> top_k_similar(
    const CurrentHistory& c, const PastMemory& p, int k,
    std::optional<std::uint64_t> exclude_serial = std::nullopt);

// Same ranking from match counts kept by the caller: matches[i] counts the
// positions where items()[i] agrees with a history of length m.
std::vector<SimilarityScore> rank_by_matches(
    const PastMemory& p, std::span<const int> matches, int m, int k,
    std::optional<std::uint64_t> exclude_serial = std::nullopt);

}  // namespace f3
