#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sot {

struct QuestionRecord {
  std::string id;
  std::string category;
  std::string text;
  // Human annotation: true when the question suits skeleton-first answering.
  std::optional<bool> sot_suitable;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

// JSONL, one object per line: {"id","category","text"[,"sot_suitable"]}.
// Blank lines are skipped. Throws DataError naming the 1-based line number.
std::vector<QuestionRecord> parse_dataset(std::istream& in);
std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, std::span<const QuestionRecord> records);

// Label files are JSONL {"id","use_sot"}.
std::map<std::string, bool> parse_labels(std::istream& in);
std::map<std::string, bool> load_labels(const std::filesystem::path& path);

const QuestionRecord* find_question(std::span<const QuestionRecord> records,
                                    std::string_view id);

}  // namespace sot
