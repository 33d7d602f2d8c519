#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace dtsl {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad configuration or missing inputs
inline constexpr int kExitRuntime = 2;   // failure while running
inline constexpr int kExitGradcheck = 3; // gradient check found offenders

// Resolved run configuration; one command per process.
struct RunConfig {
  std::string command;  // train | evaluate | loeo | predict | gradcheck
  std::string corpus;
  std::string embeddings;
  std::string checkpoint;
  std::string out;
  double labeled_ratio = 1.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 25;
  double lr = 0.001;
  double dropout = 0.5;
  std::optional<double> w_max;
  double t_ramp = 80.0;
  std::uint64_t seed = 42;
  std::size_t max_len = 64;
  std::size_t embed_dim = 100;
  double tolerance = 1e-5;  // gradcheck
};

int run_train(const RunConfig& config);
int run_evaluate(const RunConfig& config);
int run_loeo_command(const RunConfig& config);
int run_predict(const RunConfig& config);
int run_gradcheck_command(const RunConfig& config);

// Dispatch on config.command; maps exceptions to exit codes.
int run_command(const RunConfig& config);

}  // namespace dtsl
