#include "dtsl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dtsl/data.hpp"
#include "dtsl/errors.hpp"
#include "dtsl/evaluation.hpp"
#include "dtsl/gradcheck.hpp"
#include "dtsl/network.hpp"
#include "dtsl/trainer.hpp"

namespace dtsl {
namespace {

void require_file(const std::string& path, const std::string& field) {
  if (path.empty()) throw ConfigError("missing required path --" + field);
  if (!std::filesystem::exists(path)) throw ConfigError("--" + field + " '" + path + "' does not exist");
}

TrainConfig to_train_config(const RunConfig& config) {
  TrainConfig t;
  t.arch = ArchDescriptor{config.max_len, config.embed_dim, 2};
  t.batch_size = config.batch_size;
  t.epochs = config.epochs;
  t.lr = config.lr;
  t.dropout = config.dropout;
  t.w_max = config.w_max;
  t.t_ramp = config.t_ramp;
  t.seed = config.seed;
  return t;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

EmbeddingTable load_table_checked(const RunConfig& config) {
  require_file(config.embeddings, "embeddings");
  EmbeddingLoad emb = load_embeddings(config.embeddings);
  print_warnings(emb.warnings);
  if (emb.table.dim != config.embed_dim) {
    throw ConfigError("--embed-dim is " + std::to_string(config.embed_dim) + " but embeddings '" + config.embeddings +
                      "' have dimension " + std::to_string(emb.table.dim));
  }
  return std::move(emb.table);
}

std::vector<TweetRecord> load_corpus_checked(const RunConfig& config) {
  require_file(config.corpus, "corpus");
  CorpusLoad corpus = load_corpus(config.corpus);
  print_warnings(corpus.warnings);
  if (corpus.malformed_lines > 0) {
    std::cerr << "warning: skipped " << corpus.malformed_lines << " malformed corpus lines\n";
  }
  return std::move(corpus.records);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << content;
  if (!os) throw IoError("failed writing '" + path + "'");
}

std::string epoch_log_line(const EpochRecord& rec) {
  nlohmann::json obj = {{"t", rec.epoch},       {"l", rec.loss.l},         {"l_prime", rec.loss.l_prime},
                        {"w", rec.loss.w},      {"total", rec.loss.total}, {"wall_ms", rec.wall_ms}};
  return obj.dump() + "\n";
}

}  // namespace

int run_train(const RunConfig& config) {
  const EmbeddingTable table = load_table_checked(config);
  std::vector<TweetRecord> records = load_corpus_checked(config);
  if (records.empty()) throw ConfigError("--corpus '" + config.corpus + "' holds no records");

  const CorpusSplit split = CorpusSplit::designate(std::move(records), config.labeled_ratio, config.seed);
  const TrainConfig train_config = to_train_config(config);

  const std::string log_path = config.out.empty() ? "train_log.jsonl" : config.out;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot open '" + log_path + "' for writing");

  TrainHooks hooks;
  hooks.on_epoch_end = [&log](const TrainState& state) {
    log << epoch_log_line(state.history.back());
    log.flush();
  };
  const TrainState state = train(split, table, train_config, hooks);

  const std::string ckpt_path = config.checkpoint.empty() ? "dtsl.ckpt" : config.checkpoint;
  save_checkpoint(ckpt_path, state.params, state.optimizer, state.epoch);
  std::cout << "trained " << state.epoch << " epochs on " << split.size() << " samples (" << split.labeled_count()
            << " labeled); checkpoint: " << ckpt_path << ", log: " << log_path << '\n';
  return kExitOk;
}

int run_evaluate(const RunConfig& config) {
  require_file(config.checkpoint, "checkpoint");
  const EmbeddingTable table = load_table_checked(config);
  const std::vector<TweetRecord> records = load_corpus_checked(config);

  const Checkpoint ckpt = load_checkpoint(config.checkpoint);
  if (ckpt.params.arch.embed_dim != table.dim) {
    throw ConfigError("checkpoint embed_dim " + std::to_string(ckpt.params.arch.embed_dim) +
                      " does not match embeddings dimension " + std::to_string(table.dim));
  }

  std::vector<TweetRecord> labeled;
  std::vector<std::size_t> truths;
  for (const TweetRecord& r : records) {
    if (!r.label.has_value()) continue;
    labeled.push_back(r);
    truths.push_back(*r.label);
  }
  if (labeled.empty()) throw ConfigError("--corpus '" + config.corpus + "' has no labeled records to score");

  const std::vector<std::size_t> preds = predict_records(ckpt.params, table, labeled);
  const ConfusionMatrix cm = confusion(truths, preds, ckpt.params.arch.num_classes);

  MetricsReport report;
  report.classes = ckpt.params.arch.num_classes;
  report.labeled_ratio = config.labeled_ratio;
  LoeoConfig fp{to_train_config(config), config.labeled_ratio, ""};
  report.config_fingerprint = config_fingerprint(fp);
  report.pooled = macro_prf(cm);

  const std::string out = config.out.empty() ? "report" : config.out;
  write_file(out + ".json", report_to_json(report));
  write_file(out + ".txt", report_to_table(report));
  std::cout << report_to_table(report);
  return kExitOk;
}

int run_loeo_command(const RunConfig& config) {
  const EmbeddingTable table = load_table_checked(config);
  const std::vector<TweetRecord> records = load_corpus_checked(config);

  LoeoConfig loeo{to_train_config(config), config.labeled_ratio, ""};
  loeo.fingerprint = config_fingerprint(loeo);
  const MetricsReport report = run_loeo(records, table, loeo);

  const std::string out = config.out.empty() ? "report" : config.out;
  write_file(out + ".json", report_to_json(report));
  write_file(out + ".txt", report_to_table(report));
  std::cout << report_to_table(report);
  return kExitOk;
}

int run_predict(const RunConfig& config) {
  require_file(config.checkpoint, "checkpoint");
  const EmbeddingTable table = load_table_checked(config);
  const std::vector<TweetRecord> records = load_corpus_checked(config);
  if (records.empty()) throw ConfigError("--corpus '" + config.corpus + "' holds no records");

  const Checkpoint ckpt = load_checkpoint(config.checkpoint);
  if (ckpt.params.arch.embed_dim != table.dim) {
    throw ConfigError("checkpoint embed_dim " + std::to_string(ckpt.params.arch.embed_dim) +
                      " does not match embeddings dimension " + std::to_string(table.dim));
  }
  if (ckpt.params.arch.max_len != config.max_len) {
    throw ConfigError("checkpoint max_len " + std::to_string(ckpt.params.arch.max_len) +
                      " does not match --max-len " + std::to_string(config.max_len));
  }

  const std::vector<std::size_t> preds = predict_records(ckpt.params, table, records);
  std::string lines;
  for (std::size_t i = 0; i < records.size(); ++i) {
    lines += records[i].id;
    lines += '\t';
    lines += class_name(preds[i]);
    lines += '\n';
  }
  const std::string out = config.out.empty() ? "predictions.tsv" : config.out;
  write_file(out, lines);
  std::cout << "wrote " << records.size() << " predictions to " << out << '\n';
  return kExitOk;
}

int run_gradcheck_command(const RunConfig& config) {
  GradcheckOptions opts;
  opts.tolerance = config.tolerance;
  opts.seed = config.seed;
  const GradcheckReport report = run_gradcheck(opts);
  std::size_t failures = 0;
  for (const GradcheckResult& r : report.results) {
    std::printf("[%s] %-18s max rel err %.3e (tol %.0e)  %s\n", r.passed ? "PASS" : "FAIL", r.component.c_str(),
                r.max_rel_error, report.tolerance, r.note.c_str());
    if (!r.passed) ++failures;
  }
  if (failures > 0) {
    std::printf("%zu component(s) exceeded tolerance\n", failures);
    return kExitGradcheck;
  }
  return kExitOk;
}

int run_command(const RunConfig& config) {
  try {
    if (config.command == "train") return run_train(config);
    if (config.command == "evaluate") return run_evaluate(config);
    if (config.command == "loeo") return run_loeo_command(config);
    if (config.command == "predict") return run_predict(config);
    if (config.command == "gradcheck") return run_gradcheck_command(config);
    std::cerr << "error: unknown command '" << config.command << "'\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace dtsl
