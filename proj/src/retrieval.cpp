#include "f3/retrieval.hpp"

#include <algorithm>
#include <stdexcept>

namespace f3 {
namespace {

int count_matches(const CurrentHistory& c, const GameRecord& rec) {
  const auto& pairs = c.pairs();
  int matches = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& o = rec.outcomes[i];
    matches += (o.learner == pairs[i].learner && o.opponent == pairs[i].opponent);
  }
  return matches;
}

}  // namespace

double prefix_similarity(const CurrentHistory& c, const GameRecord& rec) {
  if (c.empty()) throw std::domain_error("prefix_similarity: empty history");
  if (rec.length() < c.size()) {
    throw std::domain_error("prefix_similarity: record shorter than history");
  }
  return static_cast<double>(count_matches(c, rec)) / c.size();
}

std::vector<SimilarityScore> rank_by_matches(
    const PastMemory& p, std::span<const int> matches, int m, int k,
    std::optional<std::uint64_t> exclude_serial) {
  if (m < 1) throw std::domain_error("top_k_similar: empty history");
  if (k < 1) throw std::domain_error("top_k_similar: k must be positive");
  const auto& items = p.items();
  if (matches.size() != items.size()) {
    throw std::invalid_argument("rank_by_matches: one count per stored record expected");
  }
  std::vector<SimilarityScore> scored;
  scored.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.record.length() <= m) continue;
    if (exclude_serial && item.serial == *exclude_serial) continue;
    scored.push_back({static_cast<double>(matches[i]) / m, matches[i], i});
  }
  const auto better = [&items](const SimilarityScore& a,
                               const SimilarityScore& b) {
    if (a.matches != b.matches) return a.matches > b.matches;
    const auto& ra = items[a.record_ref];
    const auto& rb = items[b.record_ref];
    if (ra.record.delta_R != rb.record.delta_R)
      return ra.record.delta_R > rb.record.delta_R;
    return ra.serial < rb.serial;
  };
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), better);
  scored.resize(keep);
  return scored;
}

std::vector<SimilarityScore> top_k_similar(
    const CurrentHistory& c, const PastMemory& p, int k,
    std::optional<std::uint64_t> exclude_serial) {
  if (c.empty()) throw std::domain_error("top_k_similar: empty history");
  const auto& items = p.items();
  std::vector<int> matches(items.size(), 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].record.length() > c.size()) matches[i] = count_matches(c, items[i].record);
  }
  return rank_by_matches(p, matches, c.size(), k, exclude_serial);
}

}  // namespace f3
