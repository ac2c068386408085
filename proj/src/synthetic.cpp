#include "pcl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <set>

namespace pcl {

namespace {

constexpr std::array<std::string_view, 12> kSyllables = {"ka", "ren", "mo", "li", "sa", "tor",
                                                         "vi", "nel", "da", "qua", "zi", "bo"};
constexpr std::array<std::string_view, 10> kOccupations = {"baker",  "sailor", "archivist", "blacksmith", "gardener",
                                                           "healer", "scribe", "astronomer", "courier",  "tinker"};
constexpr std::array<std::string_view, 10> kTraits = {"cheerful", "stern",   "curious", "gentle", "stubborn",
                                                      "witty",    "anxious", "proud",   "dreamy", "blunt"};
constexpr std::array<std::string_view, 8> kTowns = {"Ashford", "Briar Hollow", "Cold Harbor", "Dunmere",
                                                    "Elm Crossing", "Fenwick", "Greystone", "Highmoor"};
constexpr std::array<std::string_view, 10> kOpeners = {"By my oven", "Steady now", "Well well", "Mark my words",
                                                       "Bless the roots", "Hold fast", "Ink and quill",
                                                       "Stars above", "Swift as wind", "Gears and springs"};
constexpr std::array<std::string_view, 8> kUserLines = {
    "How was your day?", "What are you working on?", "Can you help me with something?", "Where are you headed?",
    "Did you hear the news?", "What do you think of the weather?", "Tell me about yourself.", "Any advice for me?"};
constexpr std::array<std::string_view, 8> kRoleLines = {"It has been a long one.",   "Something small, as usual.",
                                                        "Perhaps, if you ask kindly.", "Only to the market.",
                                                        "I heard a little of it.",     "It could be worse.",
                                                        "There is not much to tell.",  "Keep your eyes open."};

std::string pick(std::mt19937_64& rng, std::span<const std::string_view> options) {
  return std::string(options[rng() % options.size()]);
}

std::string make_name(std::mt19937_64& rng, std::set<std::string>& used, std::size_t index) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::string name;
    const std::size_t parts = 2 + rng() % 2;
    for (std::size_t p = 0; p < parts; ++p) name += kSyllables[rng() % kSyllables.size()];
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    if (used.insert(name).second) return name;
  }
  std::string fallback = "Persona" + std::to_string(index);
  used.insert(fallback);
  return fallback;
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 3) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

double overlap_of_words(const std::set<std::string>& vocab, std::string_view response) {
  if (vocab.empty()) return 0.0;
  std::set<std::string> seen;
  for (auto& w : words_of(response))
    if (vocab.count(w)) seen.insert(w);
  return static_cast<double>(seen.size()) / static_cast<double>(vocab.size());
}

std::set<std::string> value_words(const RoleProfile& profile) {
  std::set<std::string> vocab;
  for (const auto& [_, value] : profile.attributes)
    for (auto& w : words_of(value)) vocab.insert(w);
  return vocab;
}

std::optional<std::string_view> between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  if (b == std::string_view::npos) return std::nullopt;
  return text.substr(start, b - start);
}

}  // namespace

Corpus make_synthetic_corpus(const SyntheticCorpusOptions& options) {
  if (options.n_profiles == 0) throw Error("synthetic corpus needs at least one profile");
  std::mt19937_64 rng(mix_seed(options.seed, 0x5e7a));
  std::set<std::string> used;
  std::vector<RoleProfile> profiles;
  for (std::size_t i = 0; i < options.n_profiles; ++i) {
    RoleProfile p;
    p.role_name = make_name(rng, used, i);
    p.attributes = {{"Occupation", pick(rng, kOccupations)},
                    {"Personality", pick(rng, kTraits)},
                    {"Hometown", pick(rng, kTowns)},
                    {"Catchphrase", pick(rng, kOpeners) + ", says " + p.role_name}};
    profiles.push_back(std::move(p));
  }

  std::string jsonl;
  for (std::size_t r = 0; r < options.n_records; ++r) {
    const auto& profile = profiles[r % profiles.size()];
    CorpusRecord rec;
    rec.profile = profile;
    rec.context.context_id = "syn-" + std::to_string(r);
    rec.context.target_role = profile.role_name;
    const std::size_t turns = std::max<std::size_t>(1, options.history_turns);
    for (std::size_t u = 0; u < turns; ++u) {
      // Alternate so the history always ends on the user's line.
      const bool user = (turns - 1 - u) % 2 == 0;
      rec.context.utterances.push_back(
          {user ? "User" : profile.role_name, pick(rng, user ? std::span(kUserLines) : std::span(kRoleLines)), u});
    }
    const std::string gold = options.poison_gold ? std::string(kPoisonPrefix) + std::to_string(r) + "-" +
                                                       sha256_hex(rec.context.context_id).substr(0, 12)
                                                 : pick(rng, kRoleLines);
    rec.gold_response = Utterance{profile.role_name, gold, turns};
    jsonl += record_to_json(rec).dump() + "\n";
  }
  return parse_corpus(jsonl);
}

std::string catchphrase_of(const RoleProfile& profile) {
  for (const auto& [k, v] : profile.attributes)
    if (k == "Catchphrase") return v;
  return "";
}

std::string compliant_cop_output(const CorpusRecord& record, std::size_t t, const CopMarkers& markers) {
  const auto& profile = record.profile;
  CopTrace trace;
  trace.final_speaker = profile.role_name;
  for (std::size_t k = 0; k < t; ++k) {
    if (profile.attributes.empty()) {
      trace.qa_pairs.push_back({"Who am I?", "I am " + profile.role_name + "."});
      continue;
    }
    const auto& [key, value] = profile.attributes[k % profile.attributes.size()];
    trace.qa_pairs.push_back({"What is my " + key + "?", "My " + key + " is " + value + "."});
  }
  const std::string phrase = catchphrase_of(profile);
  std::string reply = phrase.empty() ? std::string("Hello.") : phrase + ".";
  for (const auto& [key, value] : profile.attributes)
    if (key == "Occupation") reply += " I am a " + value + ".";
  trace.final_response = reply;
  return render_cop_target(trace, markers);
}

SyntheticTeacher::SyntheticTeacher(const std::vector<CorpusRecord>& records, const CopTemplate& tmpl,
                                   const PromptOptions& options) {
  for (const auto& rec : records)
    answers_.emplace(build_cop_prompt(rec.profile, rec.context, tmpl, options),
                     compliant_cop_output(rec, tmpl.chain_length, options.markers));
}

std::vector<ScoredSequence> SyntheticTeacher::generate(const GenRequest& req) {
  const auto it = answers_.find(req.prompt);
  if (it == answers_.end()) throw BackendError("synthetic teacher does not recognize the prompt");
  return std::vector<ScoredSequence>(req.n_samples, ScoredSequence{it->second, std::nullopt});
}

std::vector<ScoredSequence> OverlapJudge::generate(const GenRequest& req) {
  std::string answer = "0";
  const auto profile_text = between(req.prompt, "Role profile - {\n", "\n}\nDialogue history - ");
  const auto r1 = between(req.prompt, "Role-playing response 1 - ", "\nRole-playing response 2 - ");
  const auto r2 = between(req.prompt, "Role-playing response 2 - ", "\nEnding ");
  if (profile_text && r1 && r2) {
    std::set<std::string> vocab;
    for (const auto& line : split_lines(*profile_text)) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      for (auto& w : words_of(std::string_view(line).substr(colon + 2))) vocab.insert(w);
    }
    const double s1 = overlap_of_words(vocab, *r1);
    const double s2 = overlap_of_words(vocab, *r2);
    if (s1 > s2) answer = "1";
    if (s2 > s1) answer = "2";
  }
  return std::vector<ScoredSequence>(req.n_samples, ScoredSequence{answer, std::nullopt});
}

double profile_overlap(const RoleProfile& profile, std::string_view response) {
  return overlap_of_words(value_words(profile), response);
}

StubScorer heuristic_scorer() {
  return StubScorer(
      [](const RoleProfile& profile, const DialogueContext& context, const std::string& response) {
        const double grounding = profile_overlap(profile, response);
        const auto words = words_of(response);
        const double fluency = std::min(1.0, static_cast<double>(words.size()) / 12.0);
        double coherence = 0.0;
        if (!context.utterances.empty()) {
          std::set<std::string> last;
          for (auto& w : words_of(context.utterances.back().text)) last.insert(w);
          coherence = overlap_of_words(last, response);
        }
        const double printable =
            response.empty() ? 0.0
                             : static_cast<double>(std::count_if(response.begin(), response.end(),
                                                                 [](unsigned char c) { return std::isprint(c); })) /
                                   static_cast<double>(response.size());
        auto scale = [](double x) { return 1.0 + 4.0 * std::clamp(x, 0.0, 1.0); };
        std::map<std::string, double> m;
        for (auto id : {"KE", "KA", "KH", "PB", "PU"}) m[id] = scale(grounding);
        m["Flu"] = scale(0.5 * fluency + 0.5 * printable);
        m["Coh"] = scale(coherence);
        m["Cons"] = scale(printable);
        for (auto id : {"HL", "CS", "ED", "Emp"}) m[id] = scale(0.5 * grounding + 0.5 * fluency);
        return m;
      },
      "heuristic");
}

}  // namespace pcl
