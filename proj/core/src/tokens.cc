#include "sot/tokens.h"

namespace sot {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

bool is_word(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

}  // namespace

std::size_t approximate_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_word(c)) {
      if (!in_word) ++count;
      in_word = true;
      continue;
    }
    in_word = false;
    if (!is_space(c)) ++count;
  }
  return count;
}

TokenCount count_tokens(std::string_view text, TokenMode mode,
                        std::optional<std::size_t> reported) {
  if (mode == TokenMode::backend_usage && reported) {
    return {*reported, false};
  }
  return {approximate_token_count(text), true};
}

}  // namespace sot
