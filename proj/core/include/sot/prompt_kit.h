#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sot {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct GenerationParams {
  std::optional<int> max_new_tokens;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const GenerationParams&,
                         const GenerationParams&) = default;
};

struct RequestPayload {
  std::vector<Message> messages;
  GenerationParams generation;
  std::size_t rendered_prompt_token_estimate = 0;
  // Prefix the model was asked to start its answer with ("1.", "3. Dim Sum.").
  // Empty for requests without one.
  std::string partial_answer;
  // Set for continuation-suffix profiles: messages holds exactly one user
  // message whose content is the fully templated prompt string.
  bool raw_prompt = false;

  // Contents joined by '\n'; the string mock matchers and token estimates see.
  std::string rendered_prompt() const;

  friend bool operator==(const RequestPayload&,
                         const RequestPayload&) = default;
};

// Throws ConfigError when roles are invalid: two consecutive assistant
// messages, a system message anywhere but first, or no messages at all.
void validate(const RequestPayload& payload);

enum class PartialAnswerMode {
  continuation_suffix,
  assistant_message,
  instruction_appendix,
};

std::string_view to_string(PartialAnswerMode mode);
PartialAnswerMode parse_partial_answer_mode(std::string_view name);

struct ModelProfile {
  std::string model_id = "default";
  bool include_demos = true;
  bool include_very_shortly = true;
  PartialAnswerMode partial_answer_mode = PartialAnswerMode::assistant_message;
  std::string user_marker;
  std::string assistant_marker;
  bool use_system_message = false;
  // In continuation-suffix mode this is emitted verbatim ahead of
  // user_marker, so it must carry its own conversation markers.
  std::string system_message;
  std::optional<int> max_new_tokens;
  std::optional<double> temperature;

  GenerationParams generation() const {
    return {max_new_tokens, temperature, std::nullopt};
  }
};

// Throws ConfigError when the profile breaks its invariants.
void validate(const ModelProfile& profile);
ModelProfile parse_profile(std::string_view json_text);
ModelProfile load_profile(const std::filesystem::path& path);

// Values for the four placeholders a template may reference.
struct TemplateArgs {
  std::optional<std::string> question;
  std::optional<std::string> skeleton;
  std::optional<std::string> point_index;
  std::optional<std::string> point_skeleton;
};

// Text with "{question}", "{skeleton}", "{point_index}" and "{point_skeleton}"
// placeholders. A brace pair enclosing an identifier is always a placeholder;
// anything else in braces is literal text.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  // Throws TemplateError if body or partial_answer names an unknown
  // placeholder.
  PromptTemplate(std::string name, std::string body, std::string partial_answer);

  const std::string& name() const { return name_; }
  const std::string& body() const { return body_; }
  const std::string& partial_answer() const { return partial_answer_; }

  // Substituted values are never rescanned. Throws TemplateError on a
  // placeholder with no bound value.
  std::string render_body(const TemplateArgs& args) const;
  std::string render_partial_answer(const TemplateArgs& args) const;

 private:
  std::string name_;
  std::string body_;
  std::string partial_answer_;
};

// Placeholder names appearing in `text`, in order of appearance.
std::vector<std::string> placeholders_in(std::string_view text);

inline constexpr std::string_view kVeryShortly = "**very shortly**";

// Every template the pipeline renders. The skeleton request is
//   skeleton_preamble + " " + skeleton.body                    (no demos)
//   skeleton_preamble + "\n\n" + skeleton_demos + "\n\n" + skeleton.body
// so toggling demos never touches the trailing question block.
struct PromptLibrary {
  std::string skeleton_preamble;
  std::string skeleton_demos;
  PromptTemplate skeleton;
  PromptTemplate point;
  PromptTemplate router;

  static PromptLibrary builtin();
  // Overrides builtin pieces with whichever of these files exist in `dir`:
  // skeleton_preamble.txt, skeleton_demos.txt, skeleton.txt,
  // skeleton.partial.txt, point.txt, point.partial.txt, router.txt.
  // A single trailing newline is dropped from each file.
  static PromptLibrary load(const std::filesystem::path& dir);
};

RequestPayload assemble_skeleton_request(const PromptLibrary& prompts,
                                         std::string_view question,
                                         const ModelProfile& profile);

RequestPayload assemble_point_request(const PromptLibrary& prompts,
                                      std::string_view question,
                                      std::string_view skeleton_text,
                                      int index,
                                      std::string_view point_skeleton,
                                      const ModelProfile& profile);

RequestPayload assemble_router_prompt(const PromptLibrary& prompts,
                                      std::string_view question);

// The baseline request: just the question inside the conversation template.
RequestPayload assemble_normal_request(std::string_view question,
                                       const ModelProfile& profile);

// Prior rounds of a conversation, with all skeleton/point scaffolding gone.
std::vector<Message> build_multiround_history(std::string_view question,
                                              std::string_view final_answer);

// Inserts `history` ahead of the payload's first user turn. Raw prompts get
// the history rendered through the profile's conversation markers.
RequestPayload with_history(RequestPayload payload,
                            std::span<const Message> history,
                            const ModelProfile& profile);

}  // namespace sot
