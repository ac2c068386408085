#include "pcl/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pcl/cop.hpp"

namespace pcl {

std::size_t metric_index(std::string_view id) {
  for (std::size_t i = 0; i < kMetricCount; ++i)
    if (kMetricIds[i] == id) return i;
  throw MetricError("unknown metric id '" + std::string(id) + "'");
}

MetricVector MetricVector::from_map(const std::map<std::string, double>& values) {
  MetricVector v;
  std::array<bool, kMetricCount> seen{};
  for (const auto& [id, score] : values) {
    const std::size_t i = metric_index(id);
    if (!std::isfinite(score)) throw MetricError("metric " + id + " is not finite");
    v.scores[i] = score;
    seen[i] = true;
  }
  for (std::size_t i = 0; i < kMetricCount; ++i)
    if (!seen[i]) throw MetricError("metric " + std::string(kMetricIds[i]) + " is missing");
  return v;
}

MetricVector MetricVector::from_json(const json& j) {
  if (!j.is_object()) throw MetricError("metric vector must be a JSON object");
  std::map<std::string, double> values;
  for (const auto& [k, val] : j.items()) {
    if (!val.is_number()) throw MetricError("metric " + k + " is not a number");
    values[k] = val.get<double>();
  }
  return from_map(values);
}

json MetricVector::to_json() const {
  json j = json::object();
  for (std::size_t i = 0; i < kMetricCount; ++i) j[std::string(kMetricIds[i])] = scores[i];
  return j;
}

namespace {

double mean_of(std::span<const double> xs) { return pairwise_sum(xs) / static_cast<double>(xs.size()); }

}  // namespace

double overall_average(double cc, double ca, double ra) {
  const std::array<double, 3> dims{cc, ca, ra};
  return mean_of(dims);
}

DimensionAverages dimension_averages(const MetricVector& v) {
  const std::span<const double> all(v.scores);
  DimensionAverages d;
  d.cc = mean_of(all.subspan(0, kConsistencyEnd));
  d.ca = mean_of(all.subspan(kConsistencyEnd, kConversationEnd - kConsistencyEnd));
  d.ra = mean_of(all.subspan(kConversationEnd));
  d.avg = overall_average(d.cc, d.ca, d.ra);
  return d;
}

json AggregateReport::to_json() const {
  return {{"n", n},
          {"metrics", means.to_json()},
          {"dimensions", {{"CC", dims.cc}, {"CA", dims.ca}, {"RA", dims.ra}, {"Avg", dims.avg}}}};
}

AggregateReport aggregate(const std::vector<MetricVector>& vectors) {
  if (vectors.empty()) throw MetricError("cannot aggregate an empty list of metric vectors");
  AggregateReport r;
  r.n = vectors.size();
  std::vector<double> column(vectors.size());
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i].scores[m];
    r.means.scores[m] = mean_of(column);
  }
  r.dims = dimension_averages(r.means);
  return r;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Win:
      return "win";
    case Verdict::Tie:
      return "tie";
    case Verdict::Fail:
      return "fail";
  }
  return "tie";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "win") return Verdict::Win;
  if (s == "tie") return Verdict::Tie;
  if (s == "fail") return Verdict::Fail;
  throw Error("unknown verdict '" + std::string(s) + "'");
}

JudgeChoice parse_judge_output(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && !std::isalnum(static_cast<unsigned char>(raw[i]))) ++i;
    const std::size_t start = i;
    while (i < raw.size() && std::isalnum(static_cast<unsigned char>(raw[i]))) ++i;
    if (i == start) break;
    const auto token = raw.substr(start, i - start);
    if (token == "0" || token == "1" || token == "2") return {token[0] - '0', false};
  }
  return {0, true};
}

Verdict resolve_passes(int first_pass, int second_pass) {
  // Translate positions into "which text won": +1 for A, -1 for B, 0 for no preference.
  const int first = first_pass == 1 ? 1 : first_pass == 2 ? -1 : 0;
  const int second = second_pass == 2 ? 1 : second_pass == 1 ? -1 : 0;
  if (first == 1 && second == 1) return Verdict::Win;
  if (first == -1 && second == -1) return Verdict::Fail;
  return Verdict::Tie;
}

json PairwiseVerdict::to_json() const {
  json j = {{"item_id", item_id}, {"pass1", first_pass}, {"pass2", second_pass}, {"resolved", to_string(resolved)}};
  if (flagged) j["flagged"] = true;
  return j;
}

PairwiseVerdict PairwiseVerdict::from_json(const json& j) {
  PairwiseVerdict v;
  v.item_id = j.at("item_id").get<std::string>();
  v.first_pass = j.at("pass1").get<int>();
  v.second_pass = j.at("pass2").get<int>();
  v.resolved = verdict_from_string(j.at("resolved").get<std::string>());
  v.flagged = j.value("flagged", false);
  return v;
}

std::string default_judge_template() {
  return "A good role-playing should try to imitate the characteristics of a given role and give personalized "
         "responses.\n"
         "Below we define four evaluation axes for role-playing response quality: conversational ability, character "
         "consistency, role-playing attractiveness, and overall quality.\n"
         "Conversational Ability: The model's responses should meet basic conversational abilities and maintain topic "
         "consistency.\n"
         "Character Consistency: The model's responses should be consistent with the role's profile.\n"
         "Role-playing Attractiveness: The model's responses should have role-playing appeal and be rich in content.\n"
         "Overall quality: This axis answers the question \"how good is the role-playing overall at representing the "
         "given role?\"\n"
         "You are an expert role-playing rater. Given a role profile, dialogue history, and two of its possible "
         "role-playing responses to these conversations, output 1 or 2 to indicate which role-playing response best "
         "adheres to conversational ability, character consistency, role-playing attractiveness, and overall quality "
         "as defined above.\n"
         "If you cannot rate which is better, please output 0 to express that the quality of the two role-playing "
         "responses is equal.\n"
         "Role profile - {\n{role_profile}\n}\n"
         "Dialogue history - {dialogue_history}\n"
         "Role-playing response 1 - {response_1}\n"
         "Role-playing response 2 - {response_2}\n"
         "Ending Consider the conversational ability, character consistency, role-playing attractiveness, and overall "
         "quality of each role-playing and output which one is better.\n"
         "Preferred Response=";
}

std::string build_judge_prompt(const std::string& tmpl, const RoleProfile& profile, const DialogueContext& context,
                               std::string_view response_1, std::string_view response_2) {
  const std::array<std::pair<std::string_view, std::string>, 4> values = {{
      {"{role_profile}", render_profile(profile)},
      {"{dialogue_history}", render_dialogue_history(context)},
      {"{response_1}", std::string(response_1)},
      {"{response_2}", std::string(response_2)},
  }};
  std::string out;
  std::size_t cursor = 0;
  while (cursor < tmpl.size()) {
    std::size_t best = std::string::npos;
    const std::pair<std::string_view, std::string>* hit = nullptr;
    for (const auto& v : values) {
      const std::size_t pos = tmpl.find(v.first, cursor);
      if (pos < best) {
        best = pos;
        hit = &v;
      }
    }
    if (!hit) break;
    out.append(tmpl, cursor, best - cursor);
    out += hit->second;
    cursor = best + hit->first.size();
  }
  if (cursor < tmpl.size()) out.append(tmpl, cursor, std::string::npos);
  return out;
}

namespace {

JudgeChoice ask(Backend& judge, const std::string& prompt, const JudgeOptions& options) {
  GenRequest req;
  req.system_prompt = options.system_prompt;
  req.prompt = prompt;
  req.temperature = options.temperature;
  req.max_tokens = options.max_tokens;
  req.seed = 0;
  auto out = judge.generate(req);
  if (out.empty()) return {0, true};
  return parse_judge_output(out.front().text);
}

}  // namespace

PairwiseVerdict judge_pair(Backend& judge, const JudgeItem& item, const std::string& tmpl,
                           const JudgeOptions& options) {
  const auto first = ask(judge, build_judge_prompt(tmpl, item.profile, item.context, item.resp_a, item.resp_b), options);
  const auto second = ask(judge, build_judge_prompt(tmpl, item.profile, item.context, item.resp_b, item.resp_a), options);
  PairwiseVerdict v;
  v.item_id = item.item_id;
  v.first_pass = first.choice;
  v.second_pass = second.choice;
  v.flagged = first.flagged || second.flagged;
  v.resolved = resolve_passes(first.choice, second.choice);
  return v;
}

std::vector<PairwiseVerdict> judge_all(Backend& judge, const std::vector<JudgeItem>& items, const std::string& tmpl,
                                       const JudgeOptions& options) {
  std::vector<PairwiseVerdict> out(items.size());
  bounded_for(items.size(), judge.max_in_flight(),
              [&](std::size_t i) { out[i] = judge_pair(judge, items[i], tmpl, options); });
  return out;
}

json Tally::to_json() const { return {{"win", win}, {"tie", tie}, {"fail", fail}}; }

Tally tally(const std::vector<PairwiseVerdict>& verdicts) {
  Tally t;
  for (const auto& v : verdicts) {
    switch (v.resolved) {
      case Verdict::Win:
        ++t.win;
        break;
      case Verdict::Tie:
        ++t.tie;
        break;
      case Verdict::Fail:
        ++t.fail;
        break;
    }
  }
  return t;
}

Tally tally_per_pass(const std::vector<PairwiseVerdict>& verdicts) {
  Tally t;
  auto count = [&t](int choice, int a_position) {
    if (choice == 0) {
      ++t.tie;
    } else if (choice == a_position) {
      ++t.win;
    } else {
      ++t.fail;
    }
  };
  for (const auto& v : verdicts) {
    count(v.first_pass, 1);
    count(v.second_pass, 2);
  }
  return t;
}

void write_verdicts(const std::vector<PairwiseVerdict>& verdicts, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(verdicts.size());
  for (const auto& v : verdicts) rows.push_back(v.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<PairwiseVerdict> read_verdicts(const std::filesystem::path& path) {
  std::vector<PairwiseVerdict> out;
  for (const auto& row : read_jsonl(path)) out.push_back(PairwiseVerdict::from_json(row));
  return out;
}

// ---------------------------------------------------------------------------

StubScorer StubScorer::constant(double value) {
  return StubScorer(
      [value](const RoleProfile&, const DialogueContext&, const std::string&) {
        std::map<std::string, double> m;
        for (auto id : kMetricIds) m[std::string(id)] = value;
        return m;
      },
      "constant");
}

json HttpScorerConfig::to_json() const {
  return {{"base_url", base_url},         {"path", path},
          {"timeout_s", timeout_s},       {"max_retries", max_retries},
          {"backoff_base_s", backoff_base_s}, {"backoff_ceiling_s", backoff_ceiling_s},
          {"max_in_flight", max_in_flight}};
}

HttpScorerConfig HttpScorerConfig::from_json(const json& j) {
  HttpScorerConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_base_s = j.value("backoff_base_s", c.backoff_base_s);
  c.backoff_ceiling_s = j.value("backoff_ceiling_s", c.backoff_ceiling_s);
  c.max_in_flight = std::max<std::size_t>(1, j.value("max_in_flight", c.max_in_flight));
  return c;
}

json HttpScorer::request_body(const RoleProfile& profile, const DialogueContext& context,
                              const std::string& response) {
  return {{"profile", render_profile(profile)}, {"dialogue", render_dialogue_history(context)}, {"response", response}};
}

std::map<std::string, double> HttpScorer::score(const RoleProfile& profile, const DialogueContext& context,
                                                const std::string& response) {
  const std::string body = request_body(profile, context, response).dump();
  const auto resp = post_with_retries([&] { return http_post_json(cfg_.base_url, cfg_.path, body, {}, cfg_.timeout_s); },
                                      cfg_.max_retries, cfg_.backoff_base_s, cfg_.backoff_ceiling_s);
  if (resp.status != 200) throw BackendError("scorer returned HTTP " + std::to_string(resp.status));
  const json parsed = json::parse(resp.body);
  if (!parsed.is_object()) throw BackendError("scorer response is not a JSON object");
  std::map<std::string, double> out;
  for (const auto& [k, v] : parsed.items()) {
    if (!v.is_number()) throw BackendError("scorer value for " + k + " is not a number");
    out[k] = v.get<double>();
  }
  return out;
}

std::vector<MetricVector> ScoreResult::present() const {
  std::vector<MetricVector> out;
  for (const auto& v : vectors)
    if (v) out.push_back(*v);
  return out;
}

ScoreResult score_responses(Scorer& scorer, const std::vector<ScoreItem>& items) {
  ScoreResult result;
  result.vectors.resize(items.size());
  std::vector<std::string> errors(items.size());
  bounded_for(items.size(), scorer.max_in_flight(), [&](std::size_t i) {
    try {
      result.vectors[i] = MetricVector::from_map(scorer.score(items[i].profile, items[i].context, items[i].response));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (result.vectors[i]) continue;
    ++result.missing;
    result.errors.push_back(items[i].item_id + ": " + errors[i]);
  }
  return result;
}

// ---------------------------------------------------------------------------

json EvalReport::to_json() const {
  json j = {{"system_a", system_a}, {"system_b", system_b}};
  json scores = json::object();
  if (scores_a) scores[system_a] = scores_a->to_json();
  if (scores_b) scores[system_b] = scores_b->to_json();
  j["scores"] = std::move(scores);
  j["missing"] = {{system_a, missing_a}, {system_b, missing_b}};
  if (resolved) j["tally"] = resolved->to_json();
  if (per_pass) j["tally_per_pass"] = per_pass->to_json();
  j["flagged_passes"] = flagged_passes;
  return j;
}

namespace {

std::string fixed3(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << x;
  return os.str();
}

std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      out += cells[c];
      out.append(width[c] - cells[c].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 3 * (width.size() - 1), '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

}  // namespace

std::string render_report_tables(const json& report) {
  std::string out;
  const json scores = report.value("scores", json::object());
  if (!scores.empty()) {
    std::vector<std::string> header = {"Model"};
    for (std::size_t i = 0; i < kMetricCount; ++i) {
      header.emplace_back(kMetricIds[i]);
      if (i + 1 == kConsistencyEnd || i + 1 == kConversationEnd || i + 1 == kMetricCount) header.emplace_back("Avg.");
    }
    std::vector<std::vector<std::string>> detail, summary;
    for (const auto& [model, agg] : scores.items()) {
      const auto means = MetricVector::from_json(agg.at("metrics"));
      const auto dims = dimension_averages(means);
      std::vector<std::string> row = {model};
      for (std::size_t i = 0; i < kMetricCount; ++i) {
        row.push_back(fixed3(means.scores[i]));
        if (i + 1 == kConsistencyEnd) row.push_back(fixed3(dims.cc));
        if (i + 1 == kConversationEnd) row.push_back(fixed3(dims.ca));
        if (i + 1 == kMetricCount) row.push_back(fixed3(dims.ra));
      }
      detail.push_back(std::move(row));
      summary.push_back({model, fixed3(dims.cc), fixed3(dims.ca), fixed3(dims.ra), fixed3(dims.avg)});
    }
    out += render_grid(header, detail);
    out += "\n";
    out += render_grid({"Model", "CC", "CA", "RA", "Avg."}, summary);
  }
  if (report.contains("tally")) {
    if (!out.empty()) out += "\n";
    const auto& t = report["tally"];
    std::vector<std::vector<std::string>> rows = {
        {"resolved", std::to_string(t.value("win", 0)), std::to_string(t.value("tie", 0)),
         std::to_string(t.value("fail", 0))}};
    if (report.contains("tally_per_pass")) {
      const auto& p = report["tally_per_pass"];
      rows.push_back({"per pass", std::to_string(p.value("win", 0)), std::to_string(p.value("tie", 0)),
                      std::to_string(p.value("fail", 0))});
    }
    const std::string a = report.value("system_a", std::string("A"));
    const std::string b = report.value("system_b", std::string("B"));
    out += a + " vs. " + b + "\n";
    out += render_grid({"Count", "Win", "Tie", "Fail"}, rows);
  }
  return out;
}

}  // namespace pcl
