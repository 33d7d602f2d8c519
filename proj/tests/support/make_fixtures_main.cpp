// Regenerates the bundled fixtures under data/fixtures. The outputs are
// checked in; rerun only when the synthetic generator changes.
#include <cstdio>
#include <filesystem>
#include <string>

#include "synthetic.hpp"

using namespace dtsl::testsupport;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data/fixtures";
  std::filesystem::create_directories(dir);

  // Three-event corpus for CLI smoke runs and LOEO examples.
  SyntheticOptions small;
  small.events = {"alpha", "beta", "gamma"};
  small.per_event = {70, 70, 60};
  small.fake_per_event = {35, 35, 30};
  small.seed = 2024;
  write_corpus_jsonl(dir + "/corpus_200.jsonl", make_corpus(small));

  // Five events with frozen class tallies; stands in for the real corpus in
  // fold-fidelity checks when that dataset is not present.
  SyntheticOptions five;
  five.events = {"ev1", "ev2", "ev3", "ev4", "ev5"};
  five.per_event = {100, 120, 80, 110, 90};
  five.fake_per_event = {60, 50, 30, 55, 45};
  five.seed = 2025;
  write_corpus_jsonl(dir + "/corpus_5events_500.jsonl", make_corpus(five));

  write_embeddings_txt(dir + "/embeddings_d16.txt", make_embeddings(16, 12, 16, 0.8, 0.1, 2026));

  std::printf("fixtures written to %s\n", dir.c_str());
  return 0;
}
