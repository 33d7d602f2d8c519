#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtsl/objective.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// Class indices: true -> 0, fake -> 1.
inline constexpr std::size_t kClassTrue = 0;
inline constexpr std::size_t kClassFake = 1;

std::string class_name(std::size_t label);  // "true" / "fake"

struct TweetRecord {
  std::string id;
  std::string event;
  std::string text;
  std::optional<std::size_t> label;
};

struct CorpusLoad {
  std::vector<TweetRecord> records;
  std::size_t malformed_lines = 0;
  std::vector<std::string> warnings;
};

// Line-delimited JSON, one object per line with fields id, event, text and
// label ("fake" | "true" | null). Malformed lines are counted and skipped;
// more than 1% malformed is an error.
CorpusLoad load_corpus(const std::string& path);

// Lowercases, maps URLs to "<url>" and mentions to "<user>", splits on
// Unicode whitespace, and strips leading/trailing ASCII punctuation except a
// hashtag's leading '#'.
std::vector<std::string> tokenize(const std::string& text);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  // nullptr for out-of-vocabulary words (encoded as a zero row).
  const std::vector<double>* lookup(const std::string& word) const;
};

struct EmbeddingLoad {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// word2vec text format: an optional "vocab_size dim" header line, then
// "word v1 ... vD" lines. First occurrence of a duplicate word wins.
EmbeddingLoad load_embeddings(const std::string& path);

struct EncodedSample {
  Tensor matrix;  // [1, L, D]
  std::optional<std::size_t> label;
  std::string id;
  std::string event;
};

// Row j is the embedding of token j; unknown words and padding are zero
// rows; tweets beyond L tokens are truncated.
EncodedSample encode(const TweetRecord& record, const EmbeddingTable& table, std::size_t max_len);

// A corpus with a designated labeled subset S. Training-facing accessors
// never expose the held-back labels; ground truth is reachable only through
// the explicitly named evaluation accessor.
class CorpusSplit {
 public:
  // Uniformly random S of size round(ratio * N), deterministic in seed.
  // Every record must carry a ground-truth label.
  static CorpusSplit designate(std::vector<TweetRecord> records, double ratio, std::uint64_t seed);

  std::size_t size() const { return records_.size(); }
  std::size_t labeled_count() const { return labeled_count_; }
  double labeled_ratio_target() const { return ratio_; }

  bool is_labeled(std::size_t i) const { return labeled_[i] != 0; }
  // nullopt for samples outside S, regardless of ground truth.
  std::optional<std::size_t> training_label(std::size_t i) const;
  // Evaluation only; not for the training loop.
  std::size_t ground_truth_label(std::size_t i) const;

  const std::string& id(std::size_t i) const { return records_[i].id; }
  const std::string& event(std::size_t i) const { return records_[i].event; }
  const std::string& text(std::size_t i) const { return records_[i].text; }

 private:
  std::vector<TweetRecord> records_;
  std::vector<char> labeled_;
  std::size_t labeled_count_ = 0;
  double ratio_ = 0.0;
};

struct Minibatch {
  Tensor x;  // [b, 1, L, D]
  BatchLabels labels;
  std::vector<std::string> ids;
  std::vector<std::size_t> indices;  // into the split
};

// Seeded uniform shuffle of 0..N-1, cut into batch_size slices (last one may
// be short). Every sample appears exactly once per epoch.
std::vector<std::vector<std::size_t>> batch_index_plan(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                       std::uint64_t epoch);

Minibatch assemble_minibatch(const CorpusSplit& split, const EmbeddingTable& table, std::size_t max_len,
                             const std::vector<std::size_t>& indices);

}  // namespace dtsl
