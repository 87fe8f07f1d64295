#include "sot/datasets.h"

#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sot/error.h"

namespace sot {
namespace {

using nlohmann::ordered_json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return in;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      fn(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
}

}  // namespace

std::vector<QuestionRecord> parse_dataset(std::istream& in) {
  std::vector<QuestionRecord> out;
  std::set<std::string> seen;
  for_each_json_line(in, [&](const ordered_json& j) {
    QuestionRecord r;
    r.id = j.at("id").get<std::string>();
    r.category = j.value("category", std::string{});
    r.text = j.at("text").get<std::string>();
    if (auto it = j.find("sot_suitable"); it != j.end() && !it->is_null()) {
      r.sot_suitable = it->get<bool>();
    }
    if (r.id.empty()) throw DataError("empty id");
    if (r.text.empty()) throw DataError(fmt::format("question {} has no text", r.id));
    if (!seen.insert(r.id).second) {
      throw DataError(fmt::format("duplicate id {}", r.id));
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_dataset(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_dataset(std::ostream& out, std::span<const QuestionRecord> records) {
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["category"] = r.category;
    j["text"] = r.text;
    if (r.sot_suitable) j["sot_suitable"] = *r.sot_suitable;
    out << j.dump() << '\n';
  }
}

std::map<std::string, bool> parse_labels(std::istream& in) {
  std::map<std::string, bool> labels;
  for_each_json_line(in, [&](const ordered_json& j) {
    auto id = j.at("id").get<std::string>();
    const auto& v = j.at("use_sot");
    bool use_sot = v.is_boolean() ? v.get<bool>() : v.get<int>() != 0;
    if (!labels.emplace(id, use_sot).second) {
      throw DataError(fmt::format("duplicate label for {}", id));
    }
  });
  return labels;
}

std::map<std::string, bool> load_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_labels(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

const QuestionRecord* find_question(std::span<const QuestionRecord> records,
                                    std::string_view id) {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

}  // namespace sot
