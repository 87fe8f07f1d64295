#include "sot/prompt_kit.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sot/error.h"
#include "sot/tokens.h"

namespace sot {
namespace {

constexpr std::string_view kSkeletonPreamble =
    "You're an organizer responsible for only giving the skeleton (not the "
    "full content) for answering the question. Provide the skeleton in a list "
    "of points (numbered 1., 2., 3., etc.) to answer the question. Instead of "
    "writing a full sentence, each skeleton point should be very short with "
    "only 3~5 words. Generally, the skeleton should have 3~10 points.";

constexpr std::string_view kSkeletonDemos =
    "Question:\n"
    "What are the typical types of Chinese dishes?\n"
    "Skeleton:\n"
    "1. Dumplings.\n"
    "2. Noodles.\n"
    "3. Dim Sum.\n"
    "4. Hot Pot.\n"
    "5. Wonton.\n"
    "6. Ma Po Tofu.\n"
    "7. Char Siu.\n"
    "8. Fried Rice.\n"
    "\n"
    "Question:\n"
    "What are some practical tips for individuals to reduce their carbon "
    "emissions?\n"
    "Skeleton:\n"
    "1. Energy conservation.\n"
    "2. Efficient transportation. \n"
    "3. Home energy efficiency. \n"
    "4. Reduce water consumption. \n"
    "5. Sustainable diet. \n"
    "6. Sustainable travel.";

constexpr std::string_view kSkeletonBody =
    "Now, please provide the skeleton for the following question.\n"
    "{question}\n"
    "Skeleton:";

constexpr std::string_view kPointBody =
    "You're responsible for continuing the writing of one and only one point "
    "in the overall answer to the following question.\n"
    "\n"
    "{question}\n"
    "\n"
    "The skeleton of the answer is\n"
    "\n"
    "{skeleton}\n"
    "\n"
    "Continue and only continue the writing of point {point_index}. Write it "
    "**very shortly** in 1~2 sentence and do not continue with other points!";

constexpr std::string_view kRouterBody =
    "Question: {question}\n"
    "\n"
    "How would you like to answer the question?\n"
    "A. Organize the answer as a list of points or perspectives (in the format "
    "of 1., 2., 3., etc.), and the points or perspectives can be answered "
    "independently without referring to the contents of the previous points.\n"
    "B. Organize the answer as a list of points or perspectives (in the format "
    "of 1., 2., 3., etc.), and the contents of later points or perspectives "
    "cannot be answered independently without referring to the contents of "
    "the previous ones.\n"
    "C. Do not organize the answer as a list of points or perspectives.\n"
    "\n"
    "Just say A, B, or C. Do not explain. Do not provide an answer to the "
    "question.";

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Calls on_text for literal runs and on_placeholder for each {identifier}.
template <typename Text, typename Placeholder>
void scan_template(std::string_view text, Text&& on_text,
                   Placeholder&& on_placeholder) {
  std::size_t i = 0;
  std::size_t literal_start = 0;
  while (i < text.size()) {
    if (text[i] == '{' && i + 1 < text.size() && ident_start(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}') {
        on_text(text.substr(literal_start, i - literal_start));
        on_placeholder(text.substr(i + 1, j - i - 1));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(text.substr(literal_start));
}

const std::optional<std::string>* lookup(const TemplateArgs& args,
                                         std::string_view name) {
  if (name == "question") return &args.question;
  if (name == "skeleton") return &args.skeleton;
  if (name == "point_index") return &args.point_index;
  if (name == "point_skeleton") return &args.point_skeleton;
  return nullptr;
}

void check_placeholders(std::string_view tmpl_name, std::string_view text) {
  TemplateArgs none;
  for (const auto& name : placeholders_in(text)) {
    if (!lookup(none, name)) {
      throw TemplateError(
          fmt::format("template '{}' uses unknown placeholder {{{}}}",
                      tmpl_name, name));
    }
  }
}

std::string render_text(std::string_view tmpl_name, std::string_view text,
                        const TemplateArgs& args) {
  std::string out;
  out.reserve(text.size());
  scan_template(
      text, [&](std::string_view lit) { out.append(lit); },
      [&](std::string_view name) {
        const auto* slot = lookup(args, name);
        if (!slot) {
          throw TemplateError(fmt::format(
              "template '{}' uses unknown placeholder {{{}}}", tmpl_name, name));
        }
        if (!slot->has_value()) {
          throw TemplateError(fmt::format(
              "template '{}': placeholder {{{}}} is unbound", tmpl_name, name));
        }
        out.append(**slot);
      });
  return out;
}

std::string remove_very_shortly(std::string body) {
  for (std::string_view needle :
       {std::string_view("**very shortly** "), kVeryShortly}) {
    for (auto pos = body.find(needle); pos != std::string::npos;
         pos = body.find(needle, pos)) {
      body.erase(pos, needle.size());
    }
  }
  return body;
}

// Wraps a rendered prompt and its partial answer in the profile's
// conversation shape.
RequestPayload wrap(const ModelProfile& profile, std::string prompt,
                    std::string partial) {
  RequestPayload p;
  p.partial_answer = partial;
  p.generation = profile.generation();
  switch (profile.partial_answer_mode) {
    case PartialAnswerMode::continuation_suffix: {
      std::string s;
      if (profile.use_system_message) s += profile.system_message;
      s += profile.user_marker;
      s += prompt;
      s += profile.assistant_marker;
      s += partial;
      p.messages.push_back({Role::user, std::move(s)});
      p.raw_prompt = true;
      break;
    }
    case PartialAnswerMode::assistant_message:
      if (profile.use_system_message) {
        p.messages.push_back({Role::system, profile.system_message});
      }
      p.messages.push_back({Role::user, std::move(prompt)});
      if (!partial.empty()) {
        p.messages.push_back({Role::assistant, std::move(partial)});
      }
      break;
    case PartialAnswerMode::instruction_appendix:
      if (profile.use_system_message) {
        p.messages.push_back({Role::system, profile.system_message});
      }
      if (!partial.empty()) {
        prompt += fmt::format(
            "\nPlease start your answer from \"{}\" and do not output other "
            "things before that",
            partial);
      }
      p.messages.push_back({Role::user, std::move(prompt)});
      break;
  }
  p.rendered_prompt_token_estimate =
      approximate_token_count(p.rendered_prompt());
  validate(p);
  return p;
}

void require_question(std::string_view question) {
  if (question.empty()) throw TemplateError("question must be non-empty");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw DataError(fmt::format("unknown role '{}'", name));
}

std::string RequestPayload::rendered_prompt() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

void validate(const RequestPayload& payload) {
  if (payload.messages.empty()) throw ConfigError("payload has no messages");
  for (std::size_t i = 0; i < payload.messages.size(); ++i) {
    const auto role = payload.messages[i].role;
    if (role == Role::system && i != 0) {
      throw ConfigError("system message must come first");
    }
    if (i > 0 && role == Role::assistant &&
        payload.messages[i - 1].role == Role::assistant) {
      throw ConfigError("two consecutive assistant messages");
    }
  }
  if (payload.raw_prompt && payload.messages.size() != 1) {
    throw ConfigError("raw prompt payloads carry exactly one message");
  }
}

std::string_view to_string(PartialAnswerMode mode) {
  switch (mode) {
    case PartialAnswerMode::continuation_suffix: return "continuation-suffix";
    case PartialAnswerMode::assistant_message: return "assistant-message";
    case PartialAnswerMode::instruction_appendix: return "instruction-appendix";
  }
  return "assistant-message";
}

PartialAnswerMode parse_partial_answer_mode(std::string_view name) {
  if (name == "continuation-suffix") return PartialAnswerMode::continuation_suffix;
  if (name == "assistant-message") return PartialAnswerMode::assistant_message;
  if (name == "instruction-appendix") return PartialAnswerMode::instruction_appendix;
  throw ConfigError(fmt::format("unknown partial_answer_mode '{}'", name));
}

void validate(const ModelProfile& profile) {
  if (profile.model_id.empty()) throw ConfigError("profile needs a model_id");
  if (profile.partial_answer_mode == PartialAnswerMode::continuation_suffix &&
      (profile.user_marker.empty() || profile.assistant_marker.empty())) {
    throw ConfigError(fmt::format(
        "profile {}: continuation-suffix needs user_marker and "
        "assistant_marker",
        profile.model_id));
  }
  if (profile.max_new_tokens && *profile.max_new_tokens <= 0) {
    throw ConfigError("max_new_tokens must be positive");
  }
}

ModelProfile parse_profile(std::string_view json_text) {
  ModelProfile p;
  try {
    auto j = nlohmann::json::parse(json_text);
    p.model_id = j.at("model_id").get<std::string>();
    p.include_demos = j.value("include_demos", p.include_demos);
    p.include_very_shortly =
        j.value("include_very_shortly", p.include_very_shortly);
    if (j.contains("partial_answer_mode")) {
      p.partial_answer_mode = parse_partial_answer_mode(
          j.at("partial_answer_mode").get<std::string>());
    }
    p.user_marker = j.value("user_marker", std::string{});
    p.assistant_marker = j.value("assistant_marker", std::string{});
    p.use_system_message = j.value("use_system_message", false);
    p.system_message = j.value("system_message", std::string{});
    if (auto it = j.find("max_new_tokens"); it != j.end() && !it->is_null()) {
      p.max_new_tokens = it->get<int>();
    }
    if (auto it = j.find("temperature"); it != j.end() && !it->is_null()) {
      p.temperature = it->get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("bad profile: {}", e.what()));
  }
  validate(p);
  return p;
}

ModelProfile load_profile(const std::filesystem::path& path) {
  auto text = read_text_file(path);
  return parse_profile(text);
}

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> names;
  scan_template(
      text, [](std::string_view) {},
      [&](std::string_view name) { names.emplace_back(name); });
  return names;
}

PromptTemplate::PromptTemplate(std::string name, std::string body,
                               std::string partial_answer)
    : name_(std::move(name)),
      body_(std::move(body)),
      partial_answer_(std::move(partial_answer)) {
  check_placeholders(name_, body_);
  check_placeholders(name_, partial_answer_);
}

std::string PromptTemplate::render_body(const TemplateArgs& args) const {
  return render_text(name_, body_, args);
}

std::string PromptTemplate::render_partial_answer(
    const TemplateArgs& args) const {
  return render_text(name_, partial_answer_, args);
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.skeleton_preamble = std::string(kSkeletonPreamble);
  lib.skeleton_demos = std::string(kSkeletonDemos);
  lib.skeleton = PromptTemplate("skeleton", std::string(kSkeletonBody), "1.");
  lib.point = PromptTemplate("point", std::string(kPointBody),
                             "{point_index}. {point_skeleton}");
  lib.router = PromptTemplate("router", std::string(kRouterBody), "");
  return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError(fmt::format("template directory {} not found", dir.string()));
  }
  PromptLibrary lib = builtin();
  auto read_or = [&](const char* file, const std::string& fallback) {
    auto path = dir / file;
    return std::filesystem::exists(path) ? read_text_file(path) : fallback;
  };
  lib.skeleton_preamble = read_or("skeleton_preamble.txt", lib.skeleton_preamble);
  lib.skeleton_demos = read_or("skeleton_demos.txt", lib.skeleton_demos);
  lib.skeleton = PromptTemplate("skeleton",
                                read_or("skeleton.txt", lib.skeleton.body()),
                                read_or("skeleton.partial.txt",
                                        lib.skeleton.partial_answer()));
  lib.point = PromptTemplate(
      "point", read_or("point.txt", lib.point.body()),
      read_or("point.partial.txt", lib.point.partial_answer()));
  lib.router = PromptTemplate("router", read_or("router.txt", lib.router.body()),
                              "");
  return lib;
}

RequestPayload assemble_skeleton_request(const PromptLibrary& prompts,
                                         std::string_view question,
                                         const ModelProfile& profile) {
  require_question(question);
  TemplateArgs args;
  args.question = std::string(question);
  std::string text = prompts.skeleton_preamble;
  if (profile.include_demos) {
    text += "\n\n";
    text += prompts.skeleton_demos;
    text += "\n\n";
  } else {
    text += " ";
  }
  text += prompts.skeleton.render_body(args);
  return wrap(profile, std::move(text),
              prompts.skeleton.render_partial_answer(args));
}

RequestPayload assemble_point_request(const PromptLibrary& prompts,
                                      std::string_view question,
                                      std::string_view skeleton_text,
                                      int index,
                                      std::string_view point_skeleton,
                                      const ModelProfile& profile) {
  require_question(question);
  if (index < 1) throw TemplateError("point index must be >= 1");
  if (point_skeleton.empty()) throw TemplateError("point skeleton is empty");
  TemplateArgs args;
  args.question = std::string(question);
  args.skeleton = std::string(skeleton_text);
  args.point_index = std::to_string(index);
  args.point_skeleton = std::string(point_skeleton);
  std::string body = prompts.point.body();
  if (!profile.include_very_shortly) body = remove_very_shortly(std::move(body));
  std::string text = render_text(prompts.point.name(), body, args);
  return wrap(profile, std::move(text),
              prompts.point.render_partial_answer(args));
}

RequestPayload assemble_router_prompt(const PromptLibrary& prompts,
                                      std::string_view question) {
  require_question(question);
  TemplateArgs args;
  args.question = std::string(question);
  RequestPayload p;
  p.messages.push_back({Role::user, prompts.router.render_body(args)});
  p.rendered_prompt_token_estimate =
      approximate_token_count(p.rendered_prompt());
  return p;
}

RequestPayload assemble_normal_request(std::string_view question,
                                       const ModelProfile& profile) {
  require_question(question);
  return wrap(profile, std::string(question), "");
}

std::vector<Message> build_multiround_history(std::string_view question,
                                              std::string_view final_answer) {
  if (question.empty() || final_answer.empty()) {
    throw ConfigError("history needs a question and an answer");
  }
  return {{Role::user, std::string(question)},
          {Role::assistant, std::string(final_answer)}};
}

RequestPayload with_history(RequestPayload payload,
                            std::span<const Message> history,
                            const ModelProfile& profile) {
  if (history.empty()) return payload;
  if (payload.raw_prompt) {
    std::string rendered;
    for (const auto& m : history) {
      if (m.role == Role::system) continue;
      rendered += m.role == Role::user ? profile.user_marker
                                       : profile.assistant_marker;
      rendered += m.content;
    }
    auto& content = payload.messages.front().content;
    std::size_t at = 0;
    if (profile.use_system_message &&
        content.starts_with(profile.system_message)) {
      at = profile.system_message.size();
    }
    content.insert(at, rendered);
  } else {
    auto at = std::find_if(payload.messages.begin(), payload.messages.end(),
                           [](const Message& m) { return m.role != Role::system; });
    payload.messages.insert(at, history.begin(), history.end());
  }
  payload.rendered_prompt_token_estimate =
      approximate_token_count(payload.rendered_prompt());
  validate(payload);
  return payload;
}

}  // namespace sot
