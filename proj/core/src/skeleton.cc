#include "sot/skeleton.h"

#include <charconv>
#include <limits>
#include <set>

#include "sot/error.h"

namespace sot {
namespace {

// \s in ECMAScript for single-byte input.
bool regex_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

bool digit(char c) { return c >= '0' && c <= '9'; }

std::string_view strip(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && regex_space(s[b])) ++b;
  while (e > b && regex_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

struct Match {
  std::string_view digits;
  std::string_view text;
  std::size_t end = 0;
};

// Leftmost match of (\d+)\.\s?([\s\S]+?)(?=\n|\n*$) at or after `from`.
// The lazy group takes one character unconditionally, then extends up to the
// next '\n' or the end of input. \s? consumes a whitespace character only if
// one more character follows it.
std::optional<Match> next_match(std::string_view raw, std::size_t from) {
  const std::size_t n = raw.size();
  std::size_t i = from;
  while (i < n) {
    if (!digit(raw[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && digit(raw[j])) ++j;
    // Every start inside this digit run ends at the same j, so they all
    // succeed or fail together; the leftmost one is i.
    if (j < n && raw[j] == '.' && j + 1 < n) {
      std::size_t start = j + 1;
      if (regex_space(raw[start]) && start + 1 < n) ++start;
      std::size_t end = start + 1;
      while (end < n && raw[end] != '\n') ++end;
      return Match{raw.substr(i, j - i), raw.substr(start, end - start), end};
    }
    i = j;
  }
  return std::nullopt;
}

std::optional<int> parse_index(std::string_view digits) {
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 1) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

Skeleton parse_skeleton(std::string raw, std::optional<std::size_t> cap) {
  Skeleton s;
  s.raw = std::move(raw);
  std::string_view view = s.raw;
  std::set<int> seen;
  std::size_t pos = 0;
  while (auto m = next_match(view, pos)) {
    pos = m->end;
    auto text = strip(m->text);
    auto index = parse_index(m->digits);
    if (text.empty() || !index || !seen.insert(*index).second) continue;
    if (cap && s.points.size() == *cap) {
      s.truncated = true;
      break;
    }
    s.points.push_back({*index, std::string(text)});
  }
  if (s.points.empty()) throw EmptySkeleton(s.raw);
  return s;
}

std::string serialize_points(std::span<const SkeletonPoint> points) {
  std::string out;
  for (const auto& p : points) {
    out += std::to_string(p.index);
    out += ". ";
    out += p.text;
    out += '\n';
  }
  return out;
}

}  // namespace sot
