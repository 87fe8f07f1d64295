#include <gtest/gtest.h>

#include <climits>
#include <random>
#include <regex>
#include <set>

#include "sot/error.h"
#include "sot/skeleton.h"

namespace sot {
namespace {

// Reference: the ECMAScript pattern driven by std::regex, then the same
// strip / index / dedup / cap rules.
struct OracleResult {
  std::vector<SkeletonPoint> points;
  bool truncated = false;
};

OracleResult oracle(const std::string& raw, std::optional<std::size_t> cap) {
  static const std::regex re(R"((\d+)\.\s?([\s\S]+?)(?=\n|\n*$))");
  OracleResult out;
  std::set<int> seen;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), re);
       it != std::sregex_iterator(); ++it) {
    std::string text = (*it)[2].str();
    const char* ws = " \t\n\r\v\f";
    auto b = text.find_first_not_of(ws);
    if (b == std::string::npos) continue;
    text = text.substr(b, text.find_last_not_of(ws) - b + 1);
    long long idx = 0;
    const std::string digits = (*it)[1].str();
    if (digits.size() > 10) continue;
    idx = std::stoll(digits);
    if (idx < 1 || idx > INT_MAX) continue;
    if (!seen.insert(static_cast<int>(idx)).second) continue;
    if (cap && out.points.size() == *cap) {
      out.truncated = true;
      break;
    }
    out.points.push_back({static_cast<int>(idx), text});
  }
  return out;
}

const char* kDemo =
    "1. Dumplings.\n2. Noodles.\n3. Dim Sum.\n4. Hot Pot.\n5. Wonton.\n"
    "6. Ma Po Tofu.\n7. Char Siu.\n8. Fried Rice.";

TEST(ParseSkeleton, DemoSkeleton) {
  auto s = parse_skeleton(kDemo);
  ASSERT_EQ(point_count(s), 8u);
  const char* texts[] = {"Dumplings.", "Noodles.",    "Dim Sum.",  "Hot Pot.",
                         "Wonton.",    "Ma Po Tofu.", "Char Siu.", "Fried Rice."};
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(s.points[i].index, i + 1);
    EXPECT_EQ(s.points[i].text, texts[i]);
  }
  EXPECT_FALSE(s.truncated);
  EXPECT_EQ(s.raw, kDemo);
}

TEST(ParseSkeleton, SinglePoint) {
  auto s = parse_skeleton("1. Only point.");
  ASSERT_EQ(point_count(s), 1u);
  EXPECT_EQ(s.points[0].text, "Only point.");
}

TEST(ParseSkeleton, DuplicateIndexKeepsFirst) {
  auto s = parse_skeleton("1. A\nfiller\n1. A again\n3. C");
  EXPECT_EQ(s.points, (std::vector<SkeletonPoint>{{1, "A"}, {3, "C"}}));
}

TEST(ParseSkeleton, CapTruncates) {
  auto s = parse_skeleton(kDemo, 3);
  EXPECT_EQ(point_count(s), 3u);
  EXPECT_TRUE(s.truncated);
  auto exact = parse_skeleton("1. a\n2. b\n3. c", 3);
  EXPECT_FALSE(exact.truncated);
  EXPECT_EQ(point_count(parse_skeleton(kDemo, std::nullopt)), 8u);
}

TEST(ParseSkeleton, OutOfOrderIndicesKeptVerbatim) {
  auto s = parse_skeleton("1. a\n3. c\n2. b");
  EXPECT_EQ(s.points, (std::vector<SkeletonPoint>{{1, "a"}, {3, "c"}, {2, "b"}}));
}

TEST(ParseSkeleton, NoPointsThrows) {
  EXPECT_THROW(parse_skeleton("No list here."), EmptySkeleton);
  EXPECT_THROW(parse_skeleton("1."), EmptySkeleton);
  EXPECT_THROW(parse_skeleton("1. \t"), EmptySkeleton);
  EXPECT_THROW(parse_skeleton(""), EmptySkeleton);
}

TEST(ParseSkeleton, ZeroIndexDropped) {
  auto s = parse_skeleton("0. zero\n1. one");
  EXPECT_EQ(s.points, (std::vector<SkeletonPoint>{{1, "one"}}));
}

TEST(ParseSkeleton, InlineNumbersFollowTheRegex) {
  const std::string raw = "1. Costs rose 2.5 percent\n2. Next";
  auto s = parse_skeleton(raw);
  auto o = oracle(raw, kDefaultPointCap);
  EXPECT_EQ(s.points, o.points);
}

TEST(ParseSkeleton, MatchesRegexOracleOnFixedCases) {
  const std::vector<std::string> cases = {
      "1.A",        "1.\n2. x",       "1. a\n\n\n",      "1.  two spaces",
      "12. x\n3.y", "a1. b",          "1.\n\n",          "1. a\r\n2. b\r\n",
      "1..",        "x 99999999999. big\n2. ok", "1.\t\tTab", "1. a\n 2. b",
  };
  for (const auto& raw : cases) {
    auto o = oracle(raw, kDefaultPointCap);
    if (o.points.empty()) {
      EXPECT_THROW(parse_skeleton(raw), EmptySkeleton) << raw;
      continue;
    }
    auto s = parse_skeleton(raw);
    EXPECT_EQ(s.points, o.points) << raw;
    EXPECT_EQ(s.truncated, o.truncated) << raw;
  }
}

std::string random_text(std::mt19937& rng, std::size_t max_len) {
  static const std::string alphabet = "0123456789.. \n\n\tab-xyZ\r";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (auto n = len(rng); n > 0; --n) s += alphabet[pick(rng)];
  return s;
}

TEST(ParseSkeleton, FuzzAgainstRegexOracle) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> cap_pick(0, 4);
  for (int iter = 0; iter < 3000; ++iter) {
    std::string raw = random_text(rng, 60);
    int c = cap_pick(rng);
    std::optional<std::size_t> cap;
    if (c > 0) cap = static_cast<std::size_t>(c);
    auto o = oracle(raw, cap);
    if (o.points.empty()) {
      EXPECT_THROW(parse_skeleton(raw, cap), EmptySkeleton) << raw;
      continue;
    }
    auto s = parse_skeleton(raw, cap);
    ASSERT_EQ(s.points, o.points) << "input: " << raw;
    ASSERT_EQ(s.truncated, o.truncated) << "input: " << raw;
  }
}

TEST(ParseSkeleton, InvariantsOnFuzzedInput) {
  std::mt19937 rng(99);
  for (int iter = 0; iter < 2000; ++iter) {
    std::string raw = random_text(rng, 80);
    Skeleton s;
    try {
      s = parse_skeleton(raw, std::nullopt);
    } catch (const EmptySkeleton&) {
      continue;
    }
    std::set<int> indices;
    std::size_t last = 0;
    bool first = true;
    std::size_t cursor = 0;
    for (const auto& p : s.points) {
      EXPECT_FALSE(p.text.empty());
      EXPECT_TRUE(indices.insert(p.index).second);
      auto pos = raw.find(p.text, cursor);
      ASSERT_NE(pos, std::string::npos);
      if (!first) {
        EXPECT_GT(pos, last);
      }
      last = pos;
      first = false;
      cursor = pos + p.text.size();
    }
  }
}

TEST(ParseSkeleton, SerializeReparseIdempotent) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> count(1, 10);
  std::uniform_int_distribution<int> idx(1, 50);
  std::uniform_int_distribution<int> words(1, 5);
  const std::vector<std::string> vocab = {"Energy", "saving", "tips.", "3.5%",
                                          "growth", "A", "b-c", "(x)"};
  std::uniform_int_distribution<std::size_t> w(0, vocab.size() - 1);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<SkeletonPoint> pts;
    std::set<int> used;
    for (int k = count(rng); k > 0; --k) {
      int i = idx(rng);
      if (!used.insert(i).second) continue;
      std::string text;
      for (int n = words(rng); n > 0; --n) {
        if (!text.empty()) text += ' ';
        text += vocab[w(rng)];
      }
      pts.push_back({i, text});
    }
    auto s = parse_skeleton(serialize_points(pts), std::nullopt);
    ASSERT_EQ(s.points, pts);
    EXPECT_EQ(parse_skeleton(serialize_points(s.points), std::nullopt).points, s.points);
  }
}

}  // namespace
}  // namespace sot
