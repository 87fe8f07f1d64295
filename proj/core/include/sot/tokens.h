#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace sot {

enum class TokenMode { backend_usage, approximate };

struct TokenCount {
  std::size_t value = 0;
  bool approximate = false;

  friend bool operator==(const TokenCount&, const TokenCount&) = default;
};

// Deterministic whitespace/punctuation splitter. Each maximal run of word
// bytes (ASCII alphanumerics, '_', and any byte >= 0x80) is one piece, every
// other non-space byte is a piece of its own. Not a model tokenizer.
std::size_t approximate_token_count(std::string_view text);

// backend_usage passes `reported` through unchanged; when the endpoint did not
// report usage it falls back to the approximate rule and flags the result.
TokenCount count_tokens(std::string_view text,
                        TokenMode mode = TokenMode::approximate,
                        std::optional<std::size_t> reported = std::nullopt);

}  // namespace sot
