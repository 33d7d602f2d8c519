#include <CLI11.hpp>

#include "dtsl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Two-path semi-supervised CNN for fake-news tweet classification"};
  app.require_subcommand(1);
  app.fallthrough();  // options may follow the subcommand
  app.set_config("--config", "", "Configuration file (flags win over file values)");

  dtsl::RunConfig config;
  app.add_option("--corpus", config.corpus, "Line-delimited JSON corpus");
  app.add_option("--embeddings", config.embeddings, "Word-vector text file");
  app.add_option("--checkpoint", config.checkpoint, "Checkpoint path");
  app.add_option("--out", config.out, "Output path (log, report, or predictions)");
  app.add_option("--labeled-ratio", config.labeled_ratio, "Fraction of training samples with visible labels")
      ->check(CLI::Range(1e-9, 1.0));
  app.add_option("--epochs", config.epochs, "Training epochs");
  app.add_option("--batch-size", config.batch_size, "Minibatch size");
  app.add_option("--lr", config.lr, "Adam learning rate");
  app.add_option("--dropout", config.dropout, "Dropout rate for both path heads");
  app.add_option(
      "--w-max",
      [&config](const std::vector<std::string>& v) {
        config.w_max = std::stod(v.back());
        return true;
      },
      "Consistency weight cap (default: labeled fraction M/N)");
  app.add_option("--t-ramp", config.t_ramp, "Epochs until the consistency weight reaches w_max");
  app.add_option("--seed", config.seed, "Master seed");
  app.add_option("--max-len", config.max_len, "Token rows per sample (L)");
  app.add_option("--embed-dim", config.embed_dim, "Expected embedding dimension (D)");
  app.add_option("--tolerance", config.tolerance, "Gradient check tolerance");

  for (const char* name : {"train", "evaluate", "loeo", "predict", "gradcheck"}) {
    app.add_subcommand(name)->callback([&config, name]() { config.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? dtsl::kExitOk : dtsl::kExitUsage;
  }
  return dtsl::run_command(config);
}
