#include "pcl/config.hpp"

#include <set>
#include <sstream>

#include "toml.hpp"

namespace pcl {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be a table");
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + (section.empty() ? k : section + "." + k) + "'");
}

json section(const json& j, const std::string& key) { return j.contains(key) ? j.at(key) : json::object(); }

json toml_node_to_json(const toml::node& node) {
  if (auto t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_node_to_json(v);
    return out;
  }
  if (auto a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_node_to_json(v));
    return out;
  }
  if (auto s = node.as_string()) return s->get();
  if (auto i = node.as_integer()) return i->get();
  if (auto f = node.as_floating_point()) return f->get();
  if (auto b = node.as_boolean()) return b->get();
  std::ostringstream os;
  node.visit([&os](const auto& n) { os << n; });
  return os.str();
}

void resolve_paths(json& doc, const std::filesystem::path& base) {
  auto fix = [&base](json& v) {
    if (!v.is_string()) return;
    std::filesystem::path p = v.get<std::string>();
    if (!p.empty() && p.is_relative()) v = (base / p).lexically_normal().string();
  };
  for (const char* key : {"corpus", "output_dir", "template_manifest"})
    if (doc.contains(key)) fix(doc[key]);
  if (doc.contains("eval") && doc["eval"].is_object() && doc["eval"].contains("judge_template"))
    fix(doc["eval"]["judge_template"]);
}

}  // namespace

BackendSpec BackendSpec::from_json(const json& j) {
  reject_unknown(j, {"kind", "options"}, "backend");
  BackendSpec s;
  s.kind = j.value("kind", std::string{});
  s.options = j.value("options", json::object());
  if (s.kind.empty()) throw ConfigError("backend spec needs a kind");
  return s;
}

json RunConfig::to_json() const {
  return {
      {"corpus", corpus.string()},
      {"output_dir", output_dir.string()},
      {"template_id", template_id},
      {"template_manifest", template_manifest.string()},
      {"chain_length", chain_length},
      {"max_prompt_tokens", max_prompt_tokens},
      {"seed", seed},
      {"offline", offline},
      {"warmup",
       {{"points", warmup.points},
        {"temperature", warmup.temperature},
        {"max_tokens", warmup.max_tokens},
        {"system_prompt", warmup.system_prompt}}},
      {"selfplay",
       {{"temperature", selfplay.temperature},
        {"max_tokens", selfplay.max_tokens},
        {"strict", selfplay.strict},
        {"oversample", selfplay.oversample},
        {"system_prompt", selfplay.system_prompt}}},
      {"policy",
       {{"alphabet", policy.alphabet}, {"init_scale", policy.init_scale}, {"max_in_flight", policy.max_in_flight}}},
      {"split", {{"train_profiles", split.train_profiles}}},
      {"eval",
       {{"system_a", eval.system_a},
        {"system_b", eval.system_b},
        {"max_items", eval.max_items},
        {"judge_template", eval.judge_template.string()},
        {"judge_temperature", eval.judge_temperature},
        {"temperature", eval.temperature},
        {"max_tokens", eval.max_tokens}}},
      {"teacher", teacher.to_json()},
      {"judge", judge.to_json()},
      {"scorer", scorer.to_json()},
      {"sft", sft.to_json()},
      {"cspa", cspa.to_json()},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"corpus", "output_dir", "template_id", "template_manifest", "chain_length", "max_prompt_tokens",
                  "seed", "offline", "warmup", "selfplay", "policy", "split", "eval", "teacher", "judge", "scorer",
                  "sft", "cspa"},
                 "");
  RunConfig c;
  try {
    c.corpus = j.value("corpus", c.corpus.string());
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.template_id = j.value("template_id", c.template_id);
    c.template_manifest = j.value("template_manifest", c.template_manifest.string());
    c.chain_length = j.value("chain_length", c.chain_length);
    c.max_prompt_tokens = j.value("max_prompt_tokens", c.max_prompt_tokens);
    c.seed = j.value("seed", c.seed);
    c.offline = j.value("offline", c.offline);

    const json w = section(j, "warmup");
    reject_unknown(w, {"points", "temperature", "max_tokens", "system_prompt"}, "warmup");
    c.warmup.points = w.value("points", c.warmup.points);
    c.warmup.temperature = w.value("temperature", c.warmup.temperature);
    c.warmup.max_tokens = w.value("max_tokens", c.warmup.max_tokens);
    c.warmup.system_prompt = w.value("system_prompt", c.warmup.system_prompt);

    const json s = section(j, "selfplay");
    reject_unknown(s, {"temperature", "max_tokens", "strict", "oversample", "system_prompt"}, "selfplay");
    c.selfplay.temperature = s.value("temperature", c.selfplay.temperature);
    c.selfplay.max_tokens = s.value("max_tokens", c.selfplay.max_tokens);
    c.selfplay.strict = s.value("strict", c.selfplay.strict);
    c.selfplay.oversample = s.value("oversample", c.selfplay.oversample);
    c.selfplay.system_prompt = s.value("system_prompt", c.selfplay.system_prompt);

    const json p = section(j, "policy");
    reject_unknown(p, {"alphabet", "init_scale", "max_in_flight"}, "policy");
    c.policy.alphabet = p.value("alphabet", c.policy.alphabet);
    c.policy.init_scale = p.value("init_scale", c.policy.init_scale);
    c.policy.max_in_flight = std::max<std::size_t>(1, p.value("max_in_flight", c.policy.max_in_flight));

    const json sp = section(j, "split");
    reject_unknown(sp, {"train_profiles"}, "split");
    c.split.train_profiles = sp.value("train_profiles", c.split.train_profiles);

    const json e = section(j, "eval");
    reject_unknown(e, {"system_a", "system_b", "max_items", "judge_template", "judge_temperature", "temperature",
                       "max_tokens"},
                   "eval");
    c.eval.system_a = e.value("system_a", c.eval.system_a);
    c.eval.system_b = e.value("system_b", c.eval.system_b);
    c.eval.max_items = e.value("max_items", c.eval.max_items);
    c.eval.judge_template = e.value("judge_template", c.eval.judge_template.string());
    c.eval.judge_temperature = e.value("judge_temperature", c.eval.judge_temperature);
    c.eval.temperature = e.value("temperature", c.eval.temperature);
    c.eval.max_tokens = e.value("max_tokens", c.eval.max_tokens);

    if (j.contains("teacher")) c.teacher = BackendSpec::from_json(j["teacher"]);
    if (j.contains("judge")) c.judge = BackendSpec::from_json(j["judge"]);
    if (j.contains("scorer")) c.scorer = BackendSpec::from_json(j["scorer"]);
    for (const auto& [key, stage] : {std::pair{"sft", Stage::CopSft}, std::pair{"cspa", Stage::Cspa}}) {
      if (!j.contains(key)) continue;
      std::set<std::string> known;
      const json defaults = TrainConfig::defaults(stage).to_json();
      for (const auto& [k, _] : defaults.items()) known.insert(k);
      reject_unknown(j[key], known, key);
      (stage == Stage::CopSft ? c.sft : c.cspa) = TrainConfig::from_json(j[key], stage);
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("invalid config value: ") + ex.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& ex) {
    throw ConfigError(ex.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

json toml_to_json(std::string_view toml_text) {
  try {
    const toml::table table = toml::parse(toml_text);
    return toml_node_to_json(table);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
  }
}

json read_config_document(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".toml") return toml_to_json(text);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("JSON parse error in " + path.string() + ": " + e.what());
  }
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = RunConfig{}.to_json();
  if (!path.empty()) {
    json file = read_config_document(path);
    if (!file.is_object()) throw ConfigError("config root must be a table");
    resolve_paths(file, path.parent_path());
    doc.merge_patch(file);
    // Validate the file alone first so an unknown key is reported against the file.
    RunConfig::from_json(file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return RunConfig::from_json(doc);
}

}  // namespace pcl
