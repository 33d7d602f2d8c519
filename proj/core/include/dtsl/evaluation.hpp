#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtsl/data.hpp"
#include "dtsl/trainer.hpp"

namespace dtsl {

// One leave-one-event-out fold: the held-out event supplies the whole test
// set; everything else trains.
struct FoldPlan {
  std::string event;
  std::vector<std::size_t> train_ids;  // indices into the record list
  std::vector<std::size_t> test_ids;
};

// One fold per distinct event, ordered by event name. Needs >= 2 events.
std::vector<FoldPlan> loeo_folds(const std::vector<TweetRecord>& records);

// counts[true_class][predicted_class]
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  std::size_t classes() const { return classes_; }
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  void add(std::size_t truth, std::size_t pred);
  std::size_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);  // pooling across folds

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& predictions,
                          std::size_t classes);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

struct PrfSummary {
  std::vector<ClassPrf> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f = 0.0;
};

// Per class: P = diag/colsum, R = diag/rowsum, F = 2PR/(P+R); a zero
// denominator defines the metric as 0. Macro values are unweighted class
// means.
PrfSummary macro_prf(const ConfusionMatrix& cm);

struct EventResult {
  std::string event;
  std::size_t test_count = 0;
  std::size_t fake_count = 0;  // test-set class tallies, for the report
  std::size_t true_count = 0;
  PrfSummary prf;
};

struct MetricsReport {
  std::size_t classes = 2;
  double labeled_ratio = 0.0;
  std::string config_fingerprint;
  PrfSummary pooled;  // all folds' test predictions pooled into one matrix
  std::vector<EventResult> per_event;
};

struct LoeoConfig {
  TrainConfig train;
  double labeled_ratio = 0.1;
  std::string fingerprint;  // stamped into the report; computed when empty
};

std::string config_fingerprint(const LoeoConfig& config);

// Full protocol: per fold, designate the labeled subset inside the training
// portion, train, predict the held-out event, and score. The held-out event
// is always fully ground-truthed.
MetricsReport run_loeo(const std::vector<TweetRecord>& records, const EmbeddingTable& table, const LoeoConfig& config);

// Batched inference over raw records.
std::vector<std::size_t> predict_records(const NetworkParams& params, const EmbeddingTable& table,
                                         std::span<const TweetRecord> records, std::size_t batch_size = 256);

// Macro PRF of the current parameters on a held-out labeled set; pure.
PrfSummary evaluate_epoch_hook(const TrainState& state, const std::vector<TweetRecord>& heldout,
                               const EmbeddingTable& table);

std::string report_to_json(const MetricsReport& report);
std::string report_to_table(const MetricsReport& report);

}  // namespace dtsl
