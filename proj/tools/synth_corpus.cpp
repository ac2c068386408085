// Writes a synthetic persona corpus as JSONL to stdout or --out.
#include <iostream>

#include "CLI11.hpp"
#include "pcl/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic persona corpus generator"};
  pcl::SyntheticCorpusOptions opts;
  std::string out;
  app.add_option("--profiles", opts.n_profiles, "number of personas");
  app.add_option("--records", opts.n_records, "number of dialogue records");
  app.add_option("--turns", opts.history_turns, "utterances per dialogue history");
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_flag("--poison-gold", opts.poison_gold, "replace gold responses with marker strings");
  app.add_option("--out", out, "output path (default: stdout)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = pcl::make_synthetic_corpus(opts);
    const std::string text = pcl::serialize_corpus(corpus.records);
    if (out.empty()) {
      std::cout << text;
    } else {
      pcl::write_file_atomic(out, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
