#include <gtest/gtest.h>

#include <random>
#include <string>

#include "sot/tokens.h"

namespace sot {
namespace {

TEST(ApproximateTokens, EmptyIsZero) { EXPECT_EQ(approximate_token_count(""), 0u); }

TEST(ApproximateTokens, WordsAndPunctuation) {
  EXPECT_EQ(approximate_token_count("Hello, world"), 3u);
  EXPECT_EQ(approximate_token_count("1. Dumplings."), 4u);
  EXPECT_EQ(approximate_token_count("snake_case x2"), 2u);
  EXPECT_EQ(approximate_token_count("  \n\t "), 0u);
}

TEST(ApproximateTokens, NonAsciiBytesJoinWords) {
  EXPECT_EQ(approximate_token_count("caf\xc3\xa9 ok"), 2u);
}

TEST(CountTokens, BackendUsagePassesThrough) {
  auto c = count_tokens("ignored text", TokenMode::backend_usage, 155);
  EXPECT_EQ(c, (TokenCount{155, false}));
}

TEST(CountTokens, MissingUsageFallsBackAndFlags) {
  auto c = count_tokens("Hello, world", TokenMode::backend_usage);
  EXPECT_EQ(c, (TokenCount{3, true}));
  EXPECT_EQ(count_tokens("Hello, world"), (TokenCount{3, true}));
}

TEST(ApproximateTokens, MonotoneUnderConcatenation) {
  std::mt19937 rng(7);
  const std::string alphabet = "ab ,.\n_9\xc3";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 20);
  for (int i = 0; i < 2000; ++i) {
    std::string a, b;
    for (int n = len(rng); n > 0; --n) a += alphabet[pick(rng)];
    for (int n = len(rng); n > 0; --n) b += alphabet[pick(rng)];
    auto ab = approximate_token_count(a + b);
    EXPECT_GE(ab, approximate_token_count(a));
    EXPECT_GE(ab, approximate_token_count(b));
    EXPECT_EQ(ab, approximate_token_count(a + b));
  }
}

}  // namespace
}  // namespace sot
