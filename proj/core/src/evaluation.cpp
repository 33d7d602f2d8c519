#include "dtsl/evaluation.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dtsl/errors.hpp"
#include "dtsl/rng.hpp"

namespace dtsl {

std::vector<FoldPlan> loeo_folds(const std::vector<TweetRecord>& records) {
  std::map<std::string, std::vector<std::size_t>> by_event;  // ordered by event name
  for (std::size_t i = 0; i < records.size(); ++i) by_event[records[i].event].push_back(i);
  if (by_event.size() < 2) {
    throw ValueError("leave-one-event-out needs at least 2 distinct events, got " + std::to_string(by_event.size()));
  }
  std::vector<FoldPlan> folds;
  for (const auto& [event, test_ids] : by_event) {
    FoldPlan fold;
    fold.event = event;
    fold.test_ids = test_ids;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].event != event) fold.train_ids.push_back(i);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes < 2) throw ValueError("confusion matrix needs at least 2 classes");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred) {
  if (truth >= classes_ || pred >= classes_) {
    throw ValueError("confusion: class pair (" + std::to_string(truth) + "," + std::to_string(pred) +
                     ") outside " + std::to_string(classes_) + " classes");
  }
  ++counts_[truth * classes_ + pred];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts_) n += c;
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ValueError("confusion: pooling matrices of different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& predictions,
                          std::size_t classes) {
  if (labels.size() != predictions.size()) {
    throw ValueError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
  return cm;
}

PrfSummary macro_prf(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  PrfSummary out;
  out.per_class.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t col = 0, row = 0;
    for (std::size_t j = 0; j < c; ++j) {
      col += cm.at(j, k);
      row += cm.at(k, j);
    }
    const double diag = static_cast<double>(cm.at(k, k));
    ClassPrf& prf = out.per_class[k];
    prf.precision = col == 0 ? 0.0 : diag / static_cast<double>(col);
    prf.recall = row == 0 ? 0.0 : diag / static_cast<double>(row);
    const double pr = prf.precision + prf.recall;
    prf.f_score = pr == 0.0 ? 0.0 : 2.0 * prf.precision * prf.recall / pr;
    out.macro_precision += prf.precision;
    out.macro_recall += prf.recall;
    out.macro_f += prf.f_score;
  }
  out.macro_precision /= static_cast<double>(c);
  out.macro_recall /= static_cast<double>(c);
  out.macro_f /= static_cast<double>(c);
  return out;
}

std::string config_fingerprint(const LoeoConfig& config) {
  std::ostringstream os;
  const TrainConfig& t = config.train;
  os << "L=" << t.arch.max_len << ";D=" << t.arch.embed_dim << ";C=" << t.arch.num_classes
     << ";batch=" << t.batch_size << ";epochs=" << t.epochs << ";lr=" << t.lr << ";b1=" << t.beta1
     << ";b2=" << t.beta2 << ";eps=" << t.adam_eps << ";dropout=" << t.dropout
     << ";w_max=" << (t.w_max.has_value() ? std::to_string(*t.w_max) : "auto") << ";t_ramp=" << t.t_ramp
     << ";seed=" << t.seed << ";ratio=" << config.labeled_ratio;
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::size_t> predict_records(const NetworkParams& params, const EmbeddingTable& table,
                                         std::span<const TweetRecord> records, std::size_t batch_size) {
  if (batch_size == 0) throw ValueError("predict_records: batch size must be >= 1");
  const std::size_t l = params.arch.max_len;
  const std::size_t d = table.dim;
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t end = std::min(records.size(), start + batch_size);
    Tensor batch({end - start, 1, l, d});
    for (std::size_t i = start; i < end; ++i) {
      const EncodedSample sample = encode(records[i], table, l);
      std::memcpy(batch.data() + (i - start) * l * d, sample.matrix.data(), l * d * sizeof(double));
    }
    const std::vector<std::size_t> labels = predict(batch, params);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

MetricsReport run_loeo(const std::vector<TweetRecord>& records, const EmbeddingTable& table,
                       const LoeoConfig& config) {
  const std::vector<FoldPlan> folds = loeo_folds(records);

  MetricsReport report;
  report.classes = config.train.arch.num_classes;
  report.labeled_ratio = config.labeled_ratio;
  report.config_fingerprint = config.fingerprint.empty() ? config_fingerprint(config) : config.fingerprint;

  ConfusionMatrix pooled(report.classes);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const FoldPlan& fold = folds[f];
    std::vector<TweetRecord> train_records;
    train_records.reserve(fold.train_ids.size());
    for (std::size_t i : fold.train_ids) train_records.push_back(records[i]);

    const CorpusSplit split =
        CorpusSplit::designate(std::move(train_records), config.labeled_ratio, mix_seed({config.train.seed, f}));
    const TrainState state = train(split, table, config.train);

    std::vector<TweetRecord> test_records;
    test_records.reserve(fold.test_ids.size());
    std::vector<std::size_t> truths;
    for (std::size_t i : fold.test_ids) {
      if (!records[i].label.has_value()) {
        throw ValueError("record '" + records[i].id + "' in held-out event '" + fold.event + "' has no label");
      }
      test_records.push_back(records[i]);
      truths.push_back(*records[i].label);
    }
    const std::vector<std::size_t> preds = predict_records(state.params, table, test_records);
    const ConfusionMatrix cm = confusion(truths, preds, report.classes);
    pooled += cm;

    EventResult result;
    result.event = fold.event;
    result.test_count = fold.test_ids.size();
    for (std::size_t truth : truths) {
      if (truth == kClassFake) {
        ++result.fake_count;
      } else {
        ++result.true_count;
      }
    }
    result.prf = macro_prf(cm);
    report.per_event.push_back(std::move(result));
  }
  report.pooled = macro_prf(pooled);
  return report;
}

PrfSummary evaluate_epoch_hook(const TrainState& state, const std::vector<TweetRecord>& heldout,
                               const EmbeddingTable& table) {
  if (heldout.empty()) throw ValueError("evaluate_epoch_hook: empty held-out set");
  std::vector<std::size_t> truths;
  truths.reserve(heldout.size());
  for (const TweetRecord& r : heldout) {
    if (!r.label.has_value()) throw ValueError("held-out record '" + r.id + "' has no label");
    truths.push_back(*r.label);
  }
  const std::vector<std::size_t> preds = predict_records(state.params, table, heldout);
  return macro_prf(confusion(truths, preds, state.params.arch.num_classes));
}

namespace {

nlohmann::json prf_to_json(const PrfSummary& prf) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < prf.per_class.size(); ++c) {
    per_class.push_back({{"class", class_name(c)},
                         {"precision", prf.per_class[c].precision},
                         {"recall", prf.per_class[c].recall},
                         {"f_score", prf.per_class[c].f_score}});
  }
  return {{"per_class", per_class},
          {"macro_precision", prf.macro_precision},
          {"macro_recall", prf.macro_recall},
          {"macro_f", prf.macro_f}};
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json events = nlohmann::json::array();
  for (const EventResult& e : report.per_event) {
    nlohmann::json obj = {{"event", e.event},
                          {"test_count", e.test_count},
                          {"fake", e.fake_count},
                          {"true", e.true_count}};
    obj["metrics"] = prf_to_json(e.prf);
    events.push_back(obj);
  }
  nlohmann::json doc = {{"labeled_ratio", report.labeled_ratio},
                        {"config_fingerprint", report.config_fingerprint},
                        {"pooled", prf_to_json(report.pooled)},
                        {"per_event", events}};
  return doc.dump(2) + "\n";
}

std::string report_to_table(const MetricsReport& report) {
  std::ostringstream os;
  char line[128];
  os << "Labeled ratio: " << report.labeled_ratio * 100.0 << "%   (config " << report.config_fingerprint << ")\n\n";
  os << "Pooled over all held-out events\n";
  std::snprintf(line, sizeof line, "  %-12s %10s %10s %10s\n", "", "MP", "MR", "MF");
  os << line;
  std::snprintf(line, sizeof line, "  %-12s %9.2f%% %9.2f%% %9.2f%%\n", "DTSL", 100.0 * report.pooled.macro_precision,
                100.0 * report.pooled.macro_recall, 100.0 * report.pooled.macro_f);
  os << line << '\n';
  os << "Per held-out event (macro-averaged)\n";
  std::snprintf(line, sizeof line, "  %-12s %8s %8s %8s %10s %10s %10s\n", "Event", "Tweets", "Fake", "True",
                "Precision", "Recall", "Fscore");
  os << line;
  for (const EventResult& e : report.per_event) {
    std::snprintf(line, sizeof line, "  %-12s %8zu %8zu %8zu %9.2f%% %9.2f%% %9.2f%%\n", e.event.c_str(),
                  e.test_count, e.fake_count, e.true_count, 100.0 * e.prf.macro_precision, 100.0 * e.prf.macro_recall,
                  100.0 * e.prf.macro_f);
    os << line;
  }
  return os.str();
}

}  // namespace dtsl
