#pragma once

// AFL-style edge-coverage map plus the invariant-violation feedback: check
// outcomes (id << 1 when violated, 0 otherwise) are XOR-ed into the shifted
// previous-location accumulator, so a violated invariant of the incoming
// block perturbs the indices of its outgoing edges.

#include <array>
#include <cstdint>
#include <cstring>
#include <vector>

namespace invscov {

constexpr size_t kMapSize = 65536;

struct CoverageMap {
  std::array<uint8_t, kMapSize> hits{};

  void clear() { hits.fill(0); }
  // Counters saturate at 255.
  void bump(uint16_t index) {
    if (hits[index] != 0xff) ++hits[index];
  }
  bool operator==(const CoverageMap&) const = default;
};

// Hit-count buckets {0},{1},{2},{3},{4-7},{8-15},{16-31},{32-127},{128-255}.
inline uint8_t bucket(uint8_t hits) {
  static constexpr uint8_t lut[9] = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  if (hits == 0) return lut[0];
  if (hits == 1) return lut[1];
  if (hits == 2) return lut[2];
  if (hits == 3) return lut[3];
  if (hits <= 7) return lut[4];
  if (hits <= 15) return lut[5];
  if (hits <= 31) return lut[6];
  if (hits <= 127) return lut[7];
  return lut[8];
}

struct FeedbackState {
  uint16_t prev_loc = 0;
  // Campaign-wide record of coverage buckets already observed, one bit per
  // bucket id per map index.
  std::vector<uint16_t> virgin = std::vector<uint16_t>(kMapSize, 0);

  void reset_execution() { prev_loc = 0; }
};

// map[cur ^ prev]++, then prev = cur >> 1.
inline void log_edge(FeedbackState& fs, CoverageMap& map, uint16_t cur_loc) {
  map.bump(cur_loc ^ fs.prev_loc);
  fs.prev_loc = cur_loc >> 1;
}

// Novelty of one execution's map against the virgin record.
struct NoveltySummary {
  bool interesting = false;
  // (map index, bucket) pairs newly observed by this execution.
  std::vector<std::pair<uint16_t, uint8_t>> new_items;
};

// True iff some index shows a bucket not yet in the virgin map; on true the
// virgin map absorbs the new buckets. Zero counters never count as novelty.
NoveltySummary is_interesting(FeedbackState& fs, const CoverageMap& map);

// Full (index, bucket) signature of one execution, used for corpus
// favored-subset selection.
std::vector<std::pair<uint16_t, uint8_t>> coverage_signature(
    const CoverageMap& map);

}  // namespace invscov
