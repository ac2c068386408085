#include "pcl/cop.hpp"

#include <array>
#include <cctype>
#include <optional>

namespace pcl {

namespace {

constexpr std::string_view kRequired[] = {"role_profile", "role_name", "dialogue_history", "t"};
constexpr std::string_view kKnown[] = {"role_profile", "role_name", "dialogue_history", "t", "output_format"};

constexpr std::string_view kDefaultBody =
    "You are an expert specializing in role-playing with extensive experience in role-playing. "
    "Please complete <response> based on the given character information and historical dialogue. "
    "Before response, you need to conduct {t} self-questioning and self-answering sessions based on the "
    "historical dialogue and character personality information to ensure that <response> matches the "
    "historical dialogue and fits the character's personality while ensuring that <response> does not "
    "appear in the historical dialogue. The output format is as follows:\n"
    "\"<self-questioning and self-answering>\n"
    "{output_format}\n"
    "<response>\n"
    "<role name>: response content\".\n"
    "\n"
    "{\n"
    "{role_profile}\n"
    "}\n"
    "Now please play the role of {role_name} based on the above role profile and have a conversation.\n"
    "{dialogue_history}";

constexpr std::string_view kIclBody =
    "{\n"
    "{role_profile}\n"
    "}\n"
    "Now, please role-play as a role-playing expert. Based on the role profile above, act as {role_name} "
    "and engage in a conversation.\n"
    "{dialogue_history}";

// Same instructions with the profile moved to the end, so a prompt's final byte depends on the
// profile. A position-sensitive model (such as the bigram toy) needs this to see the persona at all.
constexpr std::string_view kProfileLastBody =
    "Please complete <response> as {role_name}, based on the historical dialogue and the role profile "
    "given last. Before response, conduct {t} self-questioning and self-answering sessions about the "
    "profile. The output format is as follows:\n"
    "\"<self-questioning and self-answering>\n"
    "{output_format}\n"
    "<response>\n"
    "<role name>: response content\".\n"
    "Historical dialogue:\n"
    "{dialogue_history}\n"
    "Role profile|{role_profile}";

bool is_known(std::string_view name) {
  for (auto k : kKnown)
    if (k == name) return true;
  return false;
}

struct Placeholder {
  std::size_t pos;
  std::size_t len;
  std::string name;
};

std::vector<Placeholder> scan_placeholders(std::string_view body) {
  std::vector<Placeholder> found;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < body.size() && (std::islower(static_cast<unsigned char>(body[j])) || body[j] == '_')) ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) {
      std::string name(body.substr(i + 1, j - i - 1));
      if (is_known(name)) found.push_back({i, j - i + 1, std::move(name)});
    }
  }
  return found;
}

std::size_t count_of(const std::vector<Placeholder>& ps, std::string_view name) {
  std::size_t n = 0;
  for (const auto& p : ps) n += p.name == name;
  return n;
}

enum class LineKind { Question, Answer };

struct MarkerHit {
  LineKind kind;
  std::size_t number;
  std::string rest;
};

std::optional<MarkerHit> match_numbered(std::string_view line, std::string_view word, LineKind kind) {
  if (!starts_with(line, word)) return std::nullopt;
  std::size_t i = word.size();
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const std::size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin || i - digits_begin > 6) return std::nullopt;
  const std::size_t number = std::stoul(std::string(line.substr(digits_begin, i - digits_begin)));
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  return MarkerHit{kind, number, std::string(trim(line.substr(i + 1)))};
}

std::string_view ltrim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  return b == std::string_view::npos ? std::string_view{} : s.substr(b);
}

struct Item {
  LineKind kind;
  std::size_t number;
  std::string text;
};

CopParseError make_error(CopErrorKind kind, std::string detail) {
  CopParseError e;
  e.kind = kind;
  e.detail = std::move(detail);
  return e;
}

CopParseResult parse_final_block(std::string_view block, std::string_view role_name, CopTrace trace) {
  const auto body = trim(block);
  if (body.empty()) return make_error(CopErrorKind::MissingResponseMarker, "no response content");
  const auto role = trim(role_name);
  std::string_view rest;
  if (starts_with(body, role) && trim(body.substr(role.size())).substr(0, 1) == ":") {
    rest = body.substr(role.size());
    rest = trim(rest).substr(1);
  } else {
    const auto first_line_end = body.find('\n');
    const auto first_line = body.substr(0, first_line_end);
    const auto colon = first_line.find(':');
    CopParseError e = make_error(CopErrorKind::SpeakerMismatch, "final response is not spoken by the target role");
    e.found_speaker = colon == std::string_view::npos ? std::string{} : std::string(trim(first_line.substr(0, colon)));
    e.expected_speaker = std::string(role);
    return e;
  }
  const auto response = trim(rest);
  if (response.empty()) return make_error(CopErrorKind::MissingResponseMarker, "empty final response");
  trace.final_speaker = std::string(role);
  trace.final_response = std::string(response);
  return trace;
}

}  // namespace

std::string_view to_string(CopErrorKind kind) {
  switch (kind) {
    case CopErrorKind::MissingResponseMarker: return "MissingResponseMarker";
    case CopErrorKind::QaCountMismatch: return "QaCountMismatch";
    case CopErrorKind::SpeakerMismatch: return "SpeakerMismatch";
    case CopErrorKind::NonConsecutiveNumbering: return "NonConsecutiveNumbering";
  }
  return "Unknown";
}

std::string CopParseError::message() const {
  std::string msg(to_string(kind));
  switch (kind) {
    case CopErrorKind::QaCountMismatch:
      msg += "(found " + std::to_string(found_count) + ", expected " + std::to_string(expected_count) + ")";
      break;
    case CopErrorKind::SpeakerMismatch:
      msg += "(found '" + found_speaker + "', expected '" + expected_speaker + "')";
      break;
    default: break;
  }
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

CopTemplate default_cop_template(std::size_t chain_length) {
  return CopTemplate{"pcl-default", std::string(kDefaultBody), chain_length};
}

CopTemplate profile_last_template(std::size_t chain_length) {
  return CopTemplate{"pcl-profile-last", std::string(kProfileLastBody), chain_length};
}

CopTemplate icl_template() { return CopTemplate{"icl", std::string(kIclBody), 0}; }

void validate_template(const CopTemplate& tmpl) {
  const auto ps = scan_placeholders(tmpl.body);
  for (auto name : kRequired) {
    const auto n = count_of(ps, name);
    if (name == "t" && tmpl.chain_length == 0) {
      if (n != 0) throw TemplateError("template '" + tmpl.template_id + "' has t = 0 but contains {t}");
      continue;
    }
    if (n == 0) throw TemplateError("template '" + tmpl.template_id + "' is missing placeholder {" + std::string(name) + "}");
    if (n > 1) throw TemplateError("template '" + tmpl.template_id + "' repeats placeholder {" + std::string(name) + "}");
  }
  const auto n_format = count_of(ps, "output_format");
  if (n_format > 1) throw TemplateError("template '" + tmpl.template_id + "' repeats placeholder {output_format}");
  if (n_format == 1 && tmpl.chain_length == 0)
    throw TemplateError("template '" + tmpl.template_id + "' has t = 0 but contains {output_format}");
}

std::string fill_template(const CopTemplate& tmpl, const std::map<std::string, std::string>& values) {
  validate_template(tmpl);
  std::string out;
  std::size_t cursor = 0;
  for (const auto& p : scan_placeholders(tmpl.body)) {
    out.append(tmpl.body, cursor, p.pos - cursor);
    auto it = values.find(p.name);
    if (it == values.end()) throw TemplateError("no value supplied for placeholder {" + p.name + "}");
    out += it->second;
    cursor = p.pos + p.len;
  }
  out.append(tmpl.body, cursor, std::string::npos);
  return out;
}

std::string render_dialogue_history(const DialogueContext& context) {
  std::string out;
  for (std::size_t i = 0; i < context.utterances.size(); ++i) {
    if (i) out += '\n';
    out += context.utterances[i].speaker;
    out += ": ";
    out += context.utterances[i].text;
  }
  return out;
}

std::string render_output_scaffold(std::size_t t, const CopMarkers& markers) {
  std::string out;
  for (std::size_t k = 1; k <= t; ++k) {
    if (k > 1) out += '\n';
    out += markers.question + " " + std::to_string(k) + ":...\n";
    out += markers.answer + " " + std::to_string(k) + ":...";
  }
  return out;
}

std::string build_cop_prompt(const RoleProfile& profile, const DialogueContext& context, const CopTemplate& tmpl,
                             const PromptOptions& options) {
  if (context.utterances.empty()) throw Error("context '" + context.context_id + "' has no utterances");
  validate_template(tmpl);
  std::map<std::string, std::string> values{
      {"role_profile", render_profile(profile)},
      {"role_name", profile.role_name},
      {"t", std::to_string(tmpl.chain_length)},
      {"output_format", render_output_scaffold(tmpl.chain_length, options.markers)},
  };
  DialogueContext window = context;
  for (;;) {
    values["dialogue_history"] = render_dialogue_history(window);
    std::string prompt = fill_template(tmpl, values);
    if (options.max_prompt_tokens == 0 || prompt.size() <= options.max_prompt_tokens || window.utterances.size() == 1)
      return prompt;
    window.utterances.erase(window.utterances.begin());
  }
}

std::string build_icl_prompt(const RoleProfile& profile, const DialogueContext& context, const PromptOptions& options) {
  return build_cop_prompt(profile, context, icl_template(), options);
}

CopParseResult parse_cop_output(std::string_view raw, std::size_t expected_t, std::string_view role_name,
                                const CopMarkers& markers) {
  CopTrace trace;
  trace.raw = std::string(raw);
  const auto lines = split_lines(raw);

  std::optional<std::size_t> response_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (starts_with(trim(lines[i]), markers.response)) {
      response_line = i;
      break;
    }
  }

  std::vector<Item> items;
  const std::size_t chain_end = response_line.value_or(lines.size());
  for (std::size_t i = 0; i < chain_end; ++i) {
    const auto line = ltrim(lines[i]);
    if (trim(line) == markers.header) continue;
    auto hit = match_numbered(line, markers.question, LineKind::Question);
    if (!hit) hit = match_numbered(line, markers.answer, LineKind::Answer);
    if (hit) {
      items.push_back({hit->kind, hit->number, hit->rest});
    } else if (!items.empty()) {
      items.back().text += '\n';
      items.back().text += lines[i];
    }
  }

  std::string block;
  if (response_line) {
    const auto& marker_line = lines[*response_line];
    const auto after = trim(marker_line).substr(markers.response.size());
    block = std::string(after);
    for (std::size_t i = *response_line + 1; i < lines.size(); ++i) {
      block += '\n';
      block += lines[i];
    }
  } else if (expected_t == 0 && items.empty()) {
    block = std::string(raw);
  } else if (expected_t > 0 || !items.empty()) {
    if (expected_t == 0) {
      CopParseError e = make_error(CopErrorKind::QaCountMismatch, "self-QA present in a t = 0 output");
      e.found_count = items.size() / 2 + items.size() % 2;
      return e;
    }
    return make_error(CopErrorKind::MissingResponseMarker, "no '" + markers.response + "' line");
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t want_number = i / 2 + 1;
    const LineKind want_kind = i % 2 == 0 ? LineKind::Question : LineKind::Answer;
    if (items[i].kind != want_kind || items[i].number != want_number) {
      return make_error(CopErrorKind::NonConsecutiveNumbering,
                        "expected " + std::string(want_kind == LineKind::Question ? markers.question : markers.answer) +
                            " " + std::to_string(want_number) + ", found " +
                            (items[i].kind == LineKind::Question ? markers.question : markers.answer) + " " +
                            std::to_string(items[i].number));
    }
  }
  if (items.size() % 2 == 1)
    return make_error(CopErrorKind::NonConsecutiveNumbering,
                      markers.question + " " + std::to_string(items.size() / 2 + 1) + " has no answer");

  const std::size_t found = items.size() / 2;
  if (found != expected_t) {
    CopParseError e = make_error(CopErrorKind::QaCountMismatch, {});
    e.found_count = found;
    e.expected_count = expected_t;
    return e;
  }
  for (std::size_t k = 0; k < found; ++k)
    trace.qa_pairs.push_back({std::string(trim(items[2 * k].text)), std::string(trim(items[2 * k + 1].text))});

  return parse_final_block(block, role_name, std::move(trace));
}

std::string render_cop_target(const CopTrace& trace, const CopMarkers& markers) {
  const std::string final_line = trace.final_speaker + ": " + trace.final_response;
  if (trace.qa_pairs.empty()) return final_line;
  std::string out = markers.header + "\n";
  for (std::size_t k = 0; k < trace.qa_pairs.size(); ++k) {
    const auto n = std::to_string(k + 1);
    out += markers.question + " " + n + ": " + trace.qa_pairs[k].question + "\n";
    out += markers.answer + " " + n + ": " + trace.qa_pairs[k].answer + "\n";
  }
  out += markers.response + "\n";
  out += final_line;
  return out;
}

std::size_t final_response_offset(std::string_view output, const CopMarkers& markers) {
  std::size_t line_start = 0;
  while (line_start < output.size()) {
    const auto nl = output.find('\n', line_start);
    const auto line = output.substr(line_start, nl == std::string_view::npos ? std::string_view::npos : nl - line_start);
    if (starts_with(trim(line), markers.response)) {
      if (nl == std::string_view::npos) return output.size();
      return nl + 1;
    }
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  return 0;
}

TemplateRegistry::TemplateRegistry() {
  add(default_cop_template());
  add(profile_last_template());
  add(icl_template());
}

void TemplateRegistry::add(CopTemplate tmpl) {
  validate_template(tmpl);
  auto id = tmpl.template_id;
  templates_[id] = std::move(tmpl);
}

void TemplateRegistry::load_manifest(const std::filesystem::path& manifest_path) {
  const json manifest = json::parse(read_file(manifest_path));
  if (!manifest.is_array()) throw TemplateError(manifest_path.string() + ": expected an array of template entries");
  for (const auto& entry : manifest) {
    CopTemplate tmpl;
    tmpl.template_id = entry.at("template_id").get<std::string>();
    std::filesystem::path body_path = entry.at("path").get<std::string>();
    if (body_path.is_relative()) body_path = manifest_path.parent_path() / body_path;
    tmpl.body = read_file(body_path);
    while (!tmpl.body.empty() && (tmpl.body.back() == '\n' || tmpl.body.back() == '\r')) tmpl.body.pop_back();
    tmpl.chain_length = entry.at("t").get<std::size_t>();
    add(std::move(tmpl));
  }
}

const CopTemplate& TemplateRegistry::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw TemplateError("unknown template_id '" + id + "'");
  return it->second;
}

CopTemplate TemplateRegistry::resolve(const std::string& id, std::size_t t) const {
  CopTemplate tmpl = get(id);
  const auto ps = scan_placeholders(tmpl.body);
  const bool has_chain = count_of(ps, "t") > 0;
  if (t == 0) {
    if (has_chain) return get("icl");
    return tmpl;
  }
  if (!has_chain) throw TemplateError("template '" + id + "' has no {t} placeholder; cannot use t = " + std::to_string(t));
  tmpl.chain_length = t;
  validate_template(tmpl);
  return tmpl;
}

}  // namespace pcl
