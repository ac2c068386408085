#include <random>
#include <sstream>

#include "acceptance.hpp"
#include "oracles.hpp"
#include "pcl/cop.hpp"
#include "pcl/eval.hpp"

namespace acceptance {

namespace {

constexpr std::size_t kRoundTrips = 1000;
constexpr std::array<std::size_t, 5> kChainLengths = {0, 1, 3, 5, 10};

bool marker_leading(std::string_view line, const pcl::CopMarkers& m) {
  const auto b = line.find_first_not_of(" \t");
  if (b == std::string_view::npos) return false;
  const auto s = line.substr(b);
  return s.starts_with(m.question) || s.starts_with(m.answer) || s.starts_with(m.response) || s.starts_with(m.header);
}

/// One to three lines of words; the first and last characters are never whitespace.
std::string random_field(std::mt19937_64& rng, const pcl::CopMarkers& m) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  static const std::string inner = letters + " ,.?!:;'\"()-<>";
  for (;;) {
    std::string out;
    const std::size_t n_lines = 1 + rng() % 3;
    for (std::size_t l = 0; l < n_lines; ++l) {
      std::string line = oracle::random_text(rng, letters, 1, 1) + oracle::random_text(rng, inner, 0, 30) +
                         oracle::random_text(rng, letters, 1, 1);
      // Mid-line occurrences of marker words must survive untouched.
      if (rng() % 8 == 0) line += " " + m.answer + " 3: " + line;
      if (l) out += (rng() % 4 == 0) ? "\n  " : "\n";
      out += line;
    }
    bool ok = true;
    std::size_t pos = 0;
    while (ok && pos <= out.size()) {
      const auto nl = out.find('\n', pos);
      ok = !marker_leading(std::string_view(out).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos), m);
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    if (ok) return out;
  }
}

std::string expect_error(const std::string& raw, std::size_t t, std::string_view role, pcl::CopErrorKind want) {
  const auto result = pcl::parse_cop_output(raw, t, role);
  if (const auto* err = std::get_if<pcl::CopParseError>(&result)) {
    if (err->kind == want) return {};
    return std::string("wanted ") + std::string(pcl::to_string(want)) + ", got " + err->message();
  }
  return std::string("wanted ") + std::string(pcl::to_string(want)) + ", parsed cleanly";
}

}  // namespace

Outcome cop_round_trip() {
  std::mt19937_64 rng(31);
  const pcl::CopMarkers markers;
  std::size_t ok = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < kRoundTrips; ++i) {
    const std::size_t t = kChainLengths[i % kChainLengths.size()];
    pcl::CopTrace trace;
    for (std::size_t k = 0; k < t; ++k) trace.qa_pairs.push_back({random_field(rng, markers), random_field(rng, markers)});
    trace.final_speaker = "Role " + oracle::random_text(rng, "ABCDEFGHIJ", 1, 6);
    trace.final_response = random_field(rng, markers);
    const auto rendered = pcl::render_cop_target(trace, markers);
    const auto parsed = pcl::parse_cop_output(rendered, t, trace.final_speaker, markers);
    const auto* back = std::get_if<pcl::CopTrace>(&parsed);
    if (back && back->same_content(trace)) {
      ++ok;
    } else if (first_failure.empty()) {
      first_failure = "trace " + std::to_string(i) + " (t = " + std::to_string(t) + "): " +
                      (back ? std::string("content differs") : std::get<pcl::CopParseError>(parsed).message());
    }
  }

  const std::string role = "Ada";
  std::vector<std::string> error_failures;
  auto check = [&](const std::string& got) {
    if (!got.empty()) error_failures.push_back(got);
  };
  check(expect_error("<self-questioning and self-answering>\nSelf-question 1: a\nSelf-answer 1: b\nAda: hi", 1, role,
                     pcl::CopErrorKind::MissingResponseMarker));
  check(expect_error("Self-question 1: a\nSelf-answer 1: b\nSelf-question 2: c\nSelf-answer 2: d\n<response>\nAda: hi",
                     3, role, pcl::CopErrorKind::QaCountMismatch));
  check(expect_error("Self-question 1: a\nSelf-answer 1: b\n<response>\nBob: hi", 1, role,
                     pcl::CopErrorKind::SpeakerMismatch));
  check(expect_error("Self-question 1: a\nSelf-answer 1: b\nSelf-question 3: c\nSelf-answer 3: d\n<response>\nAda: hi",
                     2, role, pcl::CopErrorKind::NonConsecutiveNumbering));

  std::ostringstream os;
  os << ok << "/" << kRoundTrips << " traces round-trip; " << (4 - error_failures.size()) << "/4 error kinds named";
  if (!first_failure.empty()) os << "; first failure " << first_failure;
  for (const auto& f : error_failures) os << "; " << f;
  return {ok == kRoundTrips && error_failures.empty(), os.str()};
}

Outcome position_bias_cancellation() {
  const std::string tmpl = pcl::default_judge_template();
  auto make_items = [](std::size_t n) {
    std::vector<pcl::JudgeItem> items;
    for (std::size_t i = 0; i < n; ++i) {
      pcl::JudgeItem it;
      it.item_id = "item-" + std::to_string(i);
      it.profile = {"Ada", {{"Occupation", "pilot"}}, false};
      it.context = {"ctx-" + std::to_string(i), {{"User", "hello", 0}}, "Ada"};
      it.resp_a = "alpha-" + std::to_string(i) + "-a";
      it.resp_b = "beta-" + std::to_string(i) + "-b";
      items.push_back(it);
    }
    return items;
  };
  std::vector<std::string> problems;

  // A judge that always names position one.
  const auto items = make_items(50);
  pcl::MockBackend always_first(std::vector<std::string>(100, "1"));
  const auto biased = pcl::judge_all(always_first, items, tmpl);
  const auto biased_tally = pcl::tally(biased);
  if (biased_tally != pcl::Tally{0, 50, 0})
    problems.push_back("always-1 judge gave " + biased_tally.to_json().dump());
  if (always_first.consumed() != 100) problems.push_back("always-1 judge called " + std::to_string(always_first.consumed()) + " times");
  if (pcl::tally_per_pass(biased) != pcl::Tally{50, 0, 50})
    problems.push_back("always-1 per-pass tally " + pcl::tally_per_pass(biased).to_json().dump());

  // Ten scripted item types, five items each. Answers are (pass one, pass two).
  struct Script {
    const char* first;
    const char* second;
    pcl::Verdict expected;
  };
  const std::array<Script, 10> scripts = {{
      {"1", "2", pcl::Verdict::Win},
      {"2", "1", pcl::Verdict::Fail},
      {"1", "1", pcl::Verdict::Tie},
      {"2", "2", pcl::Verdict::Tie},
      {"0", "2", pcl::Verdict::Tie},
      {"1", "0", pcl::Verdict::Tie},
      {"garbled", "2", pcl::Verdict::Tie},
      {"Preferred Response=1", "Response 2 is better", pcl::Verdict::Win},
      {"2", "1", pcl::Verdict::Fail},
      {"1", "2", pcl::Verdict::Win},
  }};
  pcl::FunctionBackend scripted(
      "scripted",
      [&scripts](const pcl::GenRequest& req, std::size_t) -> std::string {
        const auto a = req.prompt.find("alpha-");
        const auto b = req.prompt.find("beta-");
        const std::size_t id_begin = a + 6;
        const std::size_t id = std::stoul(req.prompt.substr(id_begin, req.prompt.find('-', id_begin) - id_begin));
        const auto& s = scripts[id % scripts.size()];
        return a < b ? s.first : s.second;
      },
      4);
  const auto verdicts = pcl::judge_all(scripted, items, tmpl);
  std::size_t label_errors = 0, flagged = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    label_errors += verdicts[i].resolved != scripts[i % scripts.size()].expected;
    flagged += verdicts[i].flagged;
  }
  if (label_errors) problems.push_back(std::to_string(label_errors) + " scripted items mislabeled");
  if (flagged != 5) problems.push_back(std::to_string(flagged) + " flagged items, expected 5");
  const auto t = pcl::tally(verdicts);
  if (t != pcl::Tally{15, 25, 10}) problems.push_back("scripted tally " + t.to_json().dump());
  const auto per = pcl::tally_per_pass(verdicts);
  if (per != pcl::Tally{55, 15, 30}) problems.push_back("scripted per-pass tally " + per.to_json().dump());

  std::ostringstream os;
  os << "always-1: " << biased_tally.to_json().dump() << "; scripted: " << t.to_json().dump() << ", per-pass "
     << per.to_json().dump();
  for (const auto& p : problems) os << "; " << p;
  return {problems.empty(), os.str()};
}

}  // namespace acceptance
