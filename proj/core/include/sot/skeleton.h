#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sot {

struct SkeletonPoint {
  int index = 0;     // as written by the model, never renumbered
  std::string text;  // surrounding whitespace stripped, never empty

  friend bool operator==(const SkeletonPoint&, const SkeletonPoint&) = default;
};

struct Skeleton {
  std::string raw;
  std::vector<SkeletonPoint> points;
  bool truncated = false;

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

inline constexpr std::size_t kDefaultPointCap = 10;

// Extracts points with the semantics of the ECMAScript pattern
//   (\d+)\.\s?([\s\S]+?)(?=\n|\n*$)
// scanned left to right. Matches whose text is blank after stripping, whose
// index is 0 or does not fit an int, or whose index was already seen are
// dropped. With a cap, only the first `cap` surviving points are kept and
// `truncated` is set. Throws EmptySkeleton when nothing survives.
//
// `raw` must include the "1." partial answer when the backend did not echo it.
Skeleton parse_skeleton(std::string raw,
                        std::optional<std::size_t> cap = kDefaultPointCap);

inline std::size_t point_count(const Skeleton& s) { return s.points.size(); }

// "{index}. {text}\n" per point.
std::string serialize_points(std::span<const SkeletonPoint> points);

}  // namespace sot
