#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "pcl/eval.hpp"
#include "pcl/synthetic.hpp"

namespace {

pcl::MetricVector filled(double v) {
  pcl::MetricVector m;
  m.scores.fill(v);
  return m;
}

pcl::JudgeItem item(const std::string& id, const std::string& a, const std::string& b) {
  return {id, {"Ada", {{"Occupation", "pilot"}}, false}, {"c-" + id, {{"User", "hello", 0}}, "Ada"}, a, b};
}

// Prefers whichever response contains "good", wherever it is shown.
pcl::FunctionBackend content_judge() {
  return pcl::FunctionBackend("content", [](const pcl::GenRequest& r, std::size_t) -> std::string {
    const auto one = r.prompt.find("Role-playing response 1");
    const auto two = r.prompt.find("Role-playing response 2");
    const auto good = r.prompt.find("good", one);
    if (good == std::string::npos) return "0";
    return good < two ? "1" : "2";
  });
}

}  // namespace

TEST(Metrics, IdsAndValidation) {
  EXPECT_EQ(pcl::metric_index("KE"), 0u);
  EXPECT_EQ(pcl::metric_index("Emp"), 11u);
  EXPECT_THROW(pcl::metric_index("XX"), pcl::MetricError);
  std::map<std::string, double> m;
  for (auto id : pcl::kMetricIds) m[std::string(id)] = 1.0;
  EXPECT_NO_THROW(pcl::MetricVector::from_map(m));
  m["Bogus"] = 2.0;
  EXPECT_THROW(pcl::MetricVector::from_map(m), pcl::MetricError);
  m.erase("Bogus");
  m.erase("KH");
  EXPECT_THROW(pcl::MetricVector::from_map(m), pcl::MetricError);
  m["KH"] = std::nan("");
  EXPECT_THROW(pcl::MetricVector::from_map(m), pcl::MetricError);
}

TEST(Aggregate, ConsistencyAverageOfOneRow) {
  pcl::MetricVector v = filled(3.0);
  const double cc[] = {2.431, 3.051, 2.813, 2.144, 2.641};
  std::copy(std::begin(cc), std::end(cc), v.scores.begin());
  EXPECT_NEAR(pcl::dimension_averages(v).cc, 2.616, 5e-4);
}

TEST(Aggregate, OverallOfThreeDimensions) { EXPECT_NEAR(pcl::overall_average(2.596, 3.397, 2.730), 2.908, 5e-4); }

TEST(Aggregate, ConstantVectorEverywhere) {
  const auto r = pcl::aggregate({filled(2.25), filled(2.25)});
  EXPECT_EQ(r.dims.cc, 2.25);
  EXPECT_EQ(r.dims.ca, 2.25);
  EXPECT_EQ(r.dims.ra, 2.25);
  EXPECT_EQ(r.dims.avg, 2.25);
}

TEST(Aggregate, EmptyIsAnError) { EXPECT_THROW(pcl::aggregate({}), pcl::Error); }

TEST(Aggregate, DuplicatingTheListChangesNothing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<pcl::MetricVector> xs(1 + rng() % 30);
    for (auto& x : xs)
      for (auto& s : x.scores) s = u(rng);
    auto twice = xs;
    twice.insert(twice.end(), xs.begin(), xs.end());
    const auto a = pcl::aggregate(xs), b = pcl::aggregate(twice);
    for (std::size_t i = 0; i < pcl::kMetricCount; ++i) EXPECT_NEAR(a.means.scores[i], b.means.scores[i], 1e-14);
    EXPECT_NEAR(a.dims.avg, b.dims.avg, 1e-14);
  }
}

TEST(Aggregate, MeansMatchLongDoubleOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::vector<pcl::MetricVector> xs(37);
  std::vector<std::vector<double>> rows;
  for (auto& x : xs) {
    for (auto& s : x.scores) s = u(rng);
    rows.emplace_back(x.scores.begin(), x.scores.end());
  }
  const auto means = oracle::column_means(rows);
  const auto r = pcl::aggregate(xs);
  for (std::size_t i = 0; i < pcl::kMetricCount; ++i) EXPECT_NEAR(r.means.scores[i], static_cast<double>(means[i]), 1e-14);
  EXPECT_NEAR(r.dims.cc, static_cast<double>((means[0] + means[1] + means[2] + means[3] + means[4]) / 5), 1e-14);
}

TEST(JudgeParse, FirstStandaloneToken) {
  EXPECT_EQ(pcl::parse_judge_output("1").choice, 1);
  EXPECT_EQ(pcl::parse_judge_output(" 2\n").choice, 2);
  EXPECT_EQ(pcl::parse_judge_output("Preferred Response=1").choice, 1);
  EXPECT_EQ(pcl::parse_judge_output("0").choice, 0);
  EXPECT_FALSE(pcl::parse_judge_output("0").flagged);
  const auto bad = pcl::parse_judge_output("response12 is best");
  EXPECT_EQ(bad.choice, 0);
  EXPECT_TRUE(bad.flagged);
  EXPECT_TRUE(pcl::parse_judge_output("").flagged);
}

TEST(JudgeResolve, AgreementOrTie) {
  EXPECT_EQ(pcl::resolve_passes(1, 2), pcl::Verdict::Win);
  EXPECT_EQ(pcl::resolve_passes(2, 1), pcl::Verdict::Fail);
  EXPECT_EQ(pcl::resolve_passes(1, 1), pcl::Verdict::Tie);
  EXPECT_EQ(pcl::resolve_passes(2, 2), pcl::Verdict::Tie);
  EXPECT_EQ(pcl::resolve_passes(0, 2), pcl::Verdict::Tie);
  EXPECT_EQ(pcl::resolve_passes(1, 0), pcl::Verdict::Tie);
}

TEST(JudgePair, AlwaysOneIsTie) {
  pcl::MockBackend judge(std::vector<std::string>(2, "1"));
  EXPECT_EQ(pcl::judge_pair(judge, item("x", "a", "b"), pcl::default_judge_template()).resolved, pcl::Verdict::Tie);
}

TEST(JudgePair, ConsistentPreferenceForAIsWin) {
  auto judge = content_judge();
  const auto v = pcl::judge_pair(judge, item("x", "a good answer", "a bad answer"), pcl::default_judge_template());
  EXPECT_EQ(v.first_pass, 1);
  EXPECT_EQ(v.second_pass, 2);
  EXPECT_EQ(v.resolved, pcl::Verdict::Win);
}

TEST(JudgePair, SwapSymmetry) {
  auto judge = content_judge();
  const auto tmpl = pcl::default_judge_template();
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"good", "meh"}, {"meh", "good"}, {"meh", "meh"}, {"good", "good"}};
  for (const auto& [a, b] : cases) {
    const auto forward = pcl::judge_pair(judge, item("f", a, b), tmpl).resolved;
    const auto mirrored = pcl::judge_pair(judge, item("m", b, a), tmpl).resolved;
    const auto flip = forward == pcl::Verdict::Win ? pcl::Verdict::Fail
                      : forward == pcl::Verdict::Fail ? pcl::Verdict::Win
                                                      : pcl::Verdict::Tie;
    EXPECT_EQ(mirrored, flip) << a << " vs " << b;
  }
}

TEST(JudgePair, TenItemScript) {
  // (pass one, pass two) answers and the hand-resolved verdict for A.
  const std::vector<std::tuple<std::string, std::string, pcl::Verdict>> script = {
      {"1", "2", pcl::Verdict::Win},  {"2", "1", pcl::Verdict::Fail}, {"1", "1", pcl::Verdict::Tie},
      {"2", "2", pcl::Verdict::Tie},  {"1", "2", pcl::Verdict::Win},  {"0", "0", pcl::Verdict::Tie},
      {"2", "1", pcl::Verdict::Fail}, {"1", "2", pcl::Verdict::Win},  {"x", "2", pcl::Verdict::Tie},
      {"1", "2", pcl::Verdict::Win}};
  std::vector<std::string> answers;
  for (const auto& [p1, p2, _] : script) answers.insert(answers.end(), {p1, p2});
  pcl::MockBackend judge(answers);
  std::vector<pcl::JudgeItem> items;
  for (std::size_t i = 0; i < script.size(); ++i) items.push_back(item(std::to_string(i), "a", "b"));
  const auto verdicts = pcl::judge_all(judge, items, pcl::default_judge_template());
  for (std::size_t i = 0; i < script.size(); ++i) EXPECT_EQ(verdicts[i].resolved, std::get<2>(script[i])) << i;
  EXPECT_EQ(pcl::tally(verdicts), (pcl::Tally{4, 4, 2}));
  EXPECT_TRUE(verdicts[8].flagged);
}

TEST(Tally, SumsAndEmpty) {
  EXPECT_EQ(pcl::tally({}), (pcl::Tally{0, 0, 0}));
  std::vector<pcl::PairwiseVerdict> vs(7);
  vs[0].resolved = pcl::Verdict::Win;
  vs[1].resolved = pcl::Verdict::Fail;
  EXPECT_EQ(pcl::tally(vs).total(), 7u);
}

TEST(Tally, PerPassCountsBothPositions) {
  std::vector<pcl::PairwiseVerdict> vs(500);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    vs[i].first_pass = static_cast<int>(i % 3);
    vs[i].second_pass = static_cast<int>((i / 3) % 3);
  }
  EXPECT_EQ(pcl::tally_per_pass(vs).total(), 1000u);
}

TEST(Verdicts, JsonlRoundTrip) {
  std::vector<pcl::PairwiseVerdict> vs = {{"a", 1, 2, pcl::Verdict::Win, false}, {"b", 0, 2, pcl::Verdict::Tie, true}};
  const auto path = std::filesystem::temp_directory_path() / "pcl-verdicts.jsonl";
  pcl::write_verdicts(vs, path);
  EXPECT_EQ(pcl::read_verdicts(path), vs);
  const auto first = pcl::json::parse(pcl::read_file(path).substr(0, pcl::read_file(path).find('\n')));
  EXPECT_EQ(first["pass1"], 1);
  EXPECT_EQ(first["resolved"], "win");
  std::filesystem::remove(path);
}

TEST(JudgePrompt, SubstitutesOnceLeftToRight) {
  const auto p = pcl::build_judge_prompt("{role_profile}|{dialogue_history}|{response_1}|{response_2}",
                                         {"Ada", {{"k", "{response_1}"}}, false}, {"c", {{"U", "hi", 0}}, "Ada"}, "A", "B");
  EXPECT_EQ(p, "k: {response_1}|U: hi|A|B");
}

TEST(Scoring, ConstantStubAggregatesToConstant) {
  auto scorer = pcl::StubScorer::constant(3.5);
  std::vector<pcl::ScoreItem> items(4, {"i", {"Ada", {}, false}, {"c", {{"U", "x", 0}}, "Ada"}, "resp"});
  const auto r = pcl::score_responses(scorer, items);
  EXPECT_EQ(r.missing, 0u);
  EXPECT_EQ(pcl::aggregate(r.present()).dims.avg, 3.5);
}

TEST(Scoring, FailedItemIsMissing) {
  pcl::StubScorer scorer([](const pcl::RoleProfile&, const pcl::DialogueContext&, const std::string& resp) {
    if (resp == "two") throw std::runtime_error("scorer down");
    std::map<std::string, double> m;
    for (auto id : pcl::kMetricIds) m[std::string(id)] = 2.0;
    return m;
  });
  std::vector<pcl::ScoreItem> items;
  for (auto r : {"one", "two", "three"}) items.push_back({r, {"Ada", {}, false}, {"c", {{"U", "x", 0}}, "Ada"}, r});
  const auto res = pcl::score_responses(scorer, items);
  EXPECT_EQ(res.missing, 1u);
  EXPECT_FALSE(res.vectors[1].has_value());
  EXPECT_EQ(pcl::aggregate(res.present()).n, 2u);
}

TEST(Scoring, LengthPercentileStub) {
  const std::vector<std::string> responses = {"a", "abcd", "ab", "abcdefgh", "abc", "abcdef", "abcde"};
  std::vector<std::size_t> sorted;
  for (const auto& r : responses) sorted.push_back(r.size());
  std::sort(sorted.begin(), sorted.end());
  pcl::StubScorer scorer([&](const pcl::RoleProfile&, const pcl::DialogueContext&, const std::string& resp) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), resp.size()) - sorted.begin();
    std::map<std::string, double> m;
    for (auto id : pcl::kMetricIds) m[std::string(id)] = static_cast<double>(below) / static_cast<double>(sorted.size());
    return m;
  });
  std::vector<pcl::ScoreItem> items;
  for (const auto& r : responses) items.push_back({r, {"Ada", {}, false}, {"c", {{"U", "x", 0}}, "Ada"}, r});
  const auto res = pcl::score_responses(scorer, items);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    std::size_t shorter = 0;
    for (const auto& other : responses) shorter += other.size() < responses[i].size();
    EXPECT_DOUBLE_EQ((*res.vectors[i])["Flu"], static_cast<double>(shorter) / responses.size());
  }
}

TEST(Report, JsonAndTables) {
  pcl::EvalReport rep;
  rep.system_a = "cspa";
  rep.system_b = "sft";
  rep.scores_a = pcl::aggregate({filled(2.0)});
  rep.scores_b = pcl::aggregate({filled(3.0)});
  rep.resolved = pcl::Tally{1, 2, 3};
  rep.per_pass = pcl::Tally{4, 4, 4};
  const auto j = rep.to_json();
  const auto text = pcl::render_report_tables(j);
  EXPECT_NE(text.find("2.000"), std::string::npos);
  EXPECT_NE(text.find("Win"), std::string::npos);
  EXPECT_NE(text.find("cspa"), std::string::npos);
  EXPECT_NE(text.find("CC"), std::string::npos);
}

TEST(OverlapJudge, PrefersGroundedResponse) {
  pcl::OverlapJudge judge;
  const auto v = pcl::judge_pair(judge, item("x", "I am a pilot", "I like soup"), pcl::default_judge_template());
  EXPECT_EQ(v.resolved, pcl::Verdict::Win);
}
