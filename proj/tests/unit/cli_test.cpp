#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../support/synthetic.hpp"
#include "dtsl/cli.hpp"

using namespace dtsl;
using namespace dtsl::testsupport;

namespace {

namespace fs = std::filesystem;

struct CliRig {
  fs::path dir;

  CliRig() : dir(fs::temp_directory_path() / "dtsl_cli_rig") {
    fs::remove_all(dir);
    fs::create_directories(dir);

    SyntheticOptions opts;
    opts.events = {"alpha", "beta", "gamma"};
    opts.per_event = {20, 20, 20};
    opts.seed = 13;
    write_corpus_jsonl((dir / "corpus.jsonl").string(), make_corpus(opts));
    write_embeddings_txt((dir / "embeddings.txt").string(),
                         make_embeddings(8, opts.class_vocab, opts.filler_vocab, 0.8, 0.1, 13));
    write_embeddings_txt((dir / "embeddings16.txt").string(),
                         make_embeddings(16, opts.class_vocab, opts.filler_vocab, 0.8, 0.1, 13));
  }
  ~CliRig() { fs::remove_all(dir); }

  RunConfig base(const std::string& command) const {
    RunConfig config;
    config.command = command;
    config.corpus = (dir / "corpus.jsonl").string();
    config.embeddings = (dir / "embeddings.txt").string();
    config.checkpoint = (dir / "model.ckpt").string();
    config.out = (dir / "out").string();
    config.max_len = 8;
    config.embed_dim = 8;
    config.epochs = 2;
    config.batch_size = 16;
    config.t_ramp = 4.0;
    config.seed = 7;
    return config;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("missing inputs are usage errors") {
  CliRig rig;
  RunConfig config = rig.base("train");
  config.corpus.clear();
  CHECK(run_command(config) == kExitUsage);

  config = rig.base("train");
  config.corpus = (rig.dir / "nope.jsonl").string();
  CHECK(run_command(config) == kExitUsage);

  config = rig.base("predict");
  config.checkpoint = (rig.dir / "nope.ckpt").string();
  CHECK(run_command(config) == kExitUsage);

  config = rig.base("train");
  config.command = "unknown";
  CHECK(run_command(config) == kExitUsage);
}

TEST_CASE("train writes a checkpoint and a log, deterministically") {
  CliRig rig;
  RunConfig config = rig.base("train");
  config.out = (rig.dir / "log.jsonl").string();
  REQUIRE(run_command(config) == kExitOk);
  CHECK(fs::exists(config.checkpoint));
  const std::string log = slurp(config.out);
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);  // one record per epoch
  CHECK(log.find("\"l_prime\"") != std::string::npos);
  const std::string first_ckpt = slurp(config.checkpoint);

  // Same seed, byte-identical checkpoint.
  REQUIRE(run_command(config) == kExitOk);
  CHECK(slurp(config.checkpoint) == first_ckpt);

  // Different seed, different parameters.
  config.seed = 8;
  REQUIRE(run_command(config) == kExitOk);
  CHECK(slurp(config.checkpoint) != first_ckpt);
}

TEST_CASE("predict is deterministic and validates the architecture") {
  CliRig rig;
  RunConfig train_config = rig.base("train");
  REQUIRE(run_command(train_config) == kExitOk);

  RunConfig predict_config = rig.base("predict");
  predict_config.out = (rig.dir / "preds.tsv").string();
  REQUIRE(run_command(predict_config) == kExitOk);
  const std::string first = slurp(predict_config.out);
  CHECK(std::count(first.begin(), first.end(), '\n') == 60);
  CHECK(first.find("alpha-0\t") != std::string::npos);
  CHECK((first.find("\tfake") != std::string::npos || first.find("\ttrue") != std::string::npos));

  REQUIRE(run_command(predict_config) == kExitOk);
  CHECK(slurp(predict_config.out) == first);

  // Embeddings of the wrong dimension are a config error.
  RunConfig mismatched = predict_config;
  mismatched.embeddings = (rig.dir / "embeddings16.txt").string();
  mismatched.embed_dim = 16;
  CHECK(run_command(mismatched) == kExitUsage);
}

TEST_CASE("evaluate writes reports for a labeled corpus") {
  CliRig rig;
  REQUIRE(run_command(rig.base("train")) == kExitOk);
  RunConfig config = rig.base("evaluate");
  REQUIRE(run_command(config) == kExitOk);
  const std::string json = slurp(fs::path(config.out + ".json"));
  CHECK(json.find("macro_f") != std::string::npos);
  CHECK(fs::exists(config.out + ".txt"));
}

TEST_CASE("an overfit checkpoint reproduces the memorized labels") {
  CliRig rig;
  SyntheticOptions four;
  four.events = {"mem"};
  four.per_event = {4};
  four.vocab_disjoint = true;
  four.seed = 99;
  const auto records = make_corpus(four);
  write_corpus_jsonl((rig.dir / "four.jsonl").string(), records);

  RunConfig train_config = rig.base("train");
  train_config.corpus = (rig.dir / "four.jsonl").string();
  train_config.epochs = 40;
  train_config.batch_size = 4;
  REQUIRE(run_command(train_config) == kExitOk);

  RunConfig predict_config = rig.base("predict");
  predict_config.corpus = train_config.corpus;
  predict_config.out = (rig.dir / "four_preds.tsv").string();
  REQUIRE(run_command(predict_config) == kExitOk);

  std::istringstream lines(slurp(predict_config.out));
  std::string line;
  std::size_t matched = 0;
  while (std::getline(lines, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const std::string id = line.substr(0, tab);
    const std::string label = line.substr(tab + 1);
    for (const auto& r : records) {
      if (r.id == id && class_name(*r.label) == label) ++matched;
    }
  }
  CHECK(matched == 4);
}

TEST_CASE("labeled-ratio sweep produces one report per ratio") {
  CliRig rig;
  SyntheticOptions opts;
  opts.events = {"alpha", "beta"};
  opts.per_event = {15, 15};
  opts.seed = 21;
  write_corpus_jsonl((rig.dir / "sweep.jsonl").string(), make_corpus(opts));

  std::vector<std::string> fingerprints;
  for (const double ratio : {0.05, 0.10, 0.30}) {
    RunConfig config = rig.base("loeo");
    config.corpus = (rig.dir / "sweep.jsonl").string();
    config.epochs = 1;
    config.batch_size = 8;
    config.labeled_ratio = ratio;
    config.out = (rig.dir / ("sweep_" + std::to_string(ratio))).string();
    REQUIRE(run_command(config) == kExitOk);
    const std::string json = slurp(fs::path(config.out + ".json"));
    const auto doc = nlohmann::json::parse(json);
    CHECK(doc["labeled_ratio"].get<double>() == ratio);
    fingerprints.push_back(doc["config_fingerprint"].get<std::string>());

    // Byte-identical on a rerun.
    REQUIRE(run_command(config) == kExitOk);
    CHECK(slurp(fs::path(config.out + ".json")) == json);
  }
  CHECK(fingerprints[0] != fingerprints[1]);
  CHECK(fingerprints[1] != fingerprints[2]);
}

TEST_CASE("loeo emits per-event blocks and a pooled summary") {
  CliRig rig;
  RunConfig config = rig.base("loeo");
  config.epochs = 1;
  config.labeled_ratio = 1.0;
  REQUIRE(run_command(config) == kExitOk);
  const std::string json = slurp(fs::path(config.out + ".json"));
  for (const char* event : {"alpha", "beta", "gamma"}) CHECK(json.find(event) != std::string::npos);
  CHECK(json.find("pooled") != std::string::npos);
  CHECK(json.find("config_fingerprint") != std::string::npos);

  // One event only: the fold plan is impossible; runtime failure.
  SyntheticOptions single;
  single.events = {"solo"};
  single.per_event = {20};
  write_corpus_jsonl((rig.dir / "single.jsonl").string(), make_corpus(single));
  config.corpus = (rig.dir / "single.jsonl").string();
  CHECK(run_command(config) == kExitRuntime);
}

#ifdef DTSL_BIN
namespace {

int run_binary(const std::string& args) {
  const int status = std::system((std::string(DTSL_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("the installed binary honors config files with flag overrides") {
  CliRig rig;
  const fs::path config_file = rig.dir / "run.ini";
  {
    std::ofstream os(config_file);
    os << "corpus=" << (rig.dir / "corpus.jsonl").string() << "\n"
       << "embeddings=" << (rig.dir / "embeddings.txt").string() << "\n"
       << "checkpoint=" << (rig.dir / "cfg.ckpt").string() << "\n"
       << "out=" << (rig.dir / "cfg_log.jsonl").string() << "\n"
       << "max-len=8\nembed-dim=8\nepochs=1\nbatch-size=16\nseed=5\n";
  }

  // All settings from the file.
  REQUIRE(run_binary("train --config " + config_file.string()) == kExitOk);
  const std::string one_epoch = slurp(rig.dir / "cfg_log.jsonl");
  CHECK(std::count(one_epoch.begin(), one_epoch.end(), '\n') == 1);

  // A flag overrides the file's epochs=1.
  REQUIRE(run_binary("train --config " + config_file.string() + " --epochs 2") == kExitOk);
  const std::string two_epochs = slurp(rig.dir / "cfg_log.jsonl");
  CHECK(std::count(two_epochs.begin(), two_epochs.end(), '\n') == 2);

  // Usage errors from the real binary.
  CHECK(run_binary("train") == kExitUsage);
  CHECK(run_binary("") == kExitUsage);
  CHECK(run_binary("predict --checkpoint /nonexistent.ckpt --corpus " + (rig.dir / "corpus.jsonl").string() +
                   " --embeddings " + (rig.dir / "embeddings.txt").string() + " --max-len 8 --embed-dim 8") ==
        kExitUsage);
}
#endif  // DTSL_BIN
