#include "invscov/feedback.hpp"

namespace invscov {

NoveltySummary is_interesting(FeedbackState& fs, const CoverageMap& map) {
  NoveltySummary s;
  for (size_t i = 0; i < kMapSize; ++i) {
    const uint8_t h = map.hits[i];
    if (h == 0) continue;
    const uint16_t bit = static_cast<uint16_t>(1u << bucket(h));
    if ((fs.virgin[i] & bit) == 0)
      s.new_items.emplace_back(static_cast<uint16_t>(i), bucket(h));
  }
  if (!s.new_items.empty()) {
    s.interesting = true;
    for (auto [idx, bk] : s.new_items)
      fs.virgin[idx] |= static_cast<uint16_t>(1u << bk);
  }
  return s;
}

std::vector<std::pair<uint16_t, uint8_t>> coverage_signature(
    const CoverageMap& map) {
  std::vector<std::pair<uint16_t, uint8_t>> sig;
  for (size_t i = 0; i < kMapSize; ++i)
    if (map.hits[i] != 0)
      sig.emplace_back(static_cast<uint16_t>(i), bucket(map.hits[i]));
  return sig;
}

}  // namespace invscov
