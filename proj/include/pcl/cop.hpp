#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pcl/persona.hpp"

namespace pcl {

/// Prompt template with the placeholders {role_profile}, {role_name}, {dialogue_history} and {t}.
/// {output_format} is optional and expands to the numbered self-QA scaffold for t rounds.
struct CopTemplate {
  std::string template_id;
  std::string body;
  std::size_t chain_length = 5;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Line markers the parser anchors on. Swap these to parse translated templates.
struct CopMarkers {
  std::string header = "<self-questioning and self-answering>";
  std::string question = "Self-question";
  std::string answer = "Self-answer";
  std::string response = "<response>";
};

struct QaPair {
  std::string question;
  std::string answer;
  bool operator==(const QaPair&) const = default;
};

struct CopTrace {
  std::vector<QaPair> qa_pairs;
  std::string final_speaker;
  std::string final_response;
  std::string raw;

  std::size_t chain_length() const { return qa_pairs.size(); }
  /// Field equality; `raw` is provenance and does not participate.
  bool same_content(const CopTrace& other) const {
    return qa_pairs == other.qa_pairs && final_speaker == other.final_speaker && final_response == other.final_response;
  }
};

enum class CopErrorKind { MissingResponseMarker, QaCountMismatch, SpeakerMismatch, NonConsecutiveNumbering };

std::string_view to_string(CopErrorKind kind);

struct CopParseError {
  CopErrorKind kind;
  std::size_t found_count = 0;
  std::size_t expected_count = 0;
  std::string found_speaker;
  std::string expected_speaker;
  std::string detail;

  std::string message() const;
};

using CopParseResult = std::variant<CopTrace, CopParseError>;

/// The English rendering of the chain-of-persona prompt, template_id "pcl-default".
CopTemplate default_cop_template(std::size_t chain_length = 5);
/// Variant ending in "Role profile|" followed by the profile, template_id "pcl-profile-last".
CopTemplate profile_last_template(std::size_t chain_length = 5);
/// The in-context-learning prompt (no self-QA), template_id "icl".
CopTemplate icl_template();

/// Placeholder substitution only; validates placeholder counts first.
std::string fill_template(const CopTemplate& tmpl, const std::map<std::string, std::string>& values);
void validate_template(const CopTemplate& tmpl);

std::string render_dialogue_history(const DialogueContext& context);
std::string render_output_scaffold(std::size_t t, const CopMarkers& markers = {});

struct PromptOptions {
  /// Budget in bytes (= tokens for the byte-level policy); 0 disables truncation. Oldest
  /// utterances are dropped first; the profile is never cut and the last utterance is kept.
  std::size_t max_prompt_tokens = 0;
  CopMarkers markers;
};

std::string build_cop_prompt(const RoleProfile& profile, const DialogueContext& context, const CopTemplate& tmpl,
                             const PromptOptions& options = {});
std::string build_icl_prompt(const RoleProfile& profile, const DialogueContext& context,
                             const PromptOptions& options = {});

/// Never throws: returns a trace or one of the four named errors.
CopParseResult parse_cop_output(std::string_view raw, std::size_t expected_t, std::string_view role_name,
                                const CopMarkers& markers = {});

std::string render_cop_target(const CopTrace& trace, const CopMarkers& markers = {});

/// Byte offset of the final response block (the line after the response marker), or 0 when the
/// output has no marker and should be scored whole.
std::size_t final_response_offset(std::string_view output, const CopMarkers& markers = {});

/// template_id -> template. Starts with the built-ins and can be extended from a sidecar manifest
/// of the form [{"template_id": str, "path": str, "t": int}, ...]; paths resolve relative to the manifest.
class TemplateRegistry {
 public:
  TemplateRegistry();
  void add(CopTemplate tmpl);
  void load_manifest(const std::filesystem::path& manifest_path);
  bool contains(const std::string& id) const { return templates_.count(id) > 0; }
  /// Looks up id and applies chain length t. For t = 0 a template that carries self-QA
  /// instructions resolves to the ICL template instead.
  CopTemplate resolve(const std::string& id, std::size_t t) const;
  const CopTemplate& get(const std::string& id) const;

 private:
  std::map<std::string, CopTemplate> templates_;
};

}  // namespace pcl
