#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "../support/synthetic.hpp"
#include "dtsl/errors.hpp"
#include "dtsl/evaluation.hpp"
#include "dtsl/rng.hpp"

using namespace dtsl;
using namespace dtsl::testsupport;

TEST_CASE("fold plans partition by event") {
  SyntheticOptions opts;
  opts.events = {"c", "a", "b"};
  opts.per_event = {10, 10, 10};
  const auto records = make_corpus(opts);
  const auto folds = loeo_folds(records);
  REQUIRE(folds.size() == 3);
  CHECK(folds[0].event == "a");  // deterministic event-name order
  CHECK(folds[1].event == "b");
  CHECK(folds[2].event == "c");
  std::set<std::size_t> all_test;
  for (const FoldPlan& f : folds) {
    CHECK(f.test_ids.size() == 10);
    CHECK(f.train_ids.size() == 20);
    for (std::size_t i : f.test_ids) {
      CHECK(records[i].event == f.event);
      CHECK(all_test.insert(i).second);  // no id in two test sets
    }
    for (std::size_t i : f.train_ids) CHECK(records[i].event != f.event);
  }
  CHECK(all_test.size() == records.size());
}

TEST_CASE("single-event corpora cannot be folded") {
  SyntheticOptions opts;
  opts.events = {"only"};
  opts.per_event = {10};
  CHECK_THROWS_AS(loeo_folds(make_corpus(opts)), ValueError);
}

TEST_CASE("confusion counting") {
  const ConfusionMatrix perfect = confusion({0, 1, 0, 1}, {0, 1, 0, 1}, 2);
  CHECK(perfect.at(0, 0) == 2);
  CHECK(perfect.at(1, 1) == 2);
  CHECK(perfect.at(0, 1) == 0);
  CHECK(perfect.total() == 4);

  const ConfusionMatrix cm = confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);

  CHECK(confusion({}, {}, 2).total() == 0);
  CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), ValueError);
  CHECK_THROWS_AS(confusion({0, 2}, {0, 0}, 2), ValueError);
}

TEST_CASE("macro precision/recall/F on the worked example") {
  const ConfusionMatrix cm = confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  const PrfSummary prf = macro_prf(cm);
  CHECK(prf.per_class[0].precision == 1.0);
  CHECK(prf.per_class[0].recall == 0.5);
  CHECK(prf.per_class[0].f_score == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(prf.per_class[1].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(prf.per_class[1].recall == 1.0);
  CHECK(prf.per_class[1].f_score == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(prf.macro_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(prf.macro_recall == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(prf.macro_f == doctest::Approx(0.7333333333).epsilon(1e-9));

  const PrfSummary ideal = macro_prf(confusion({0, 1}, {0, 1}, 2));
  CHECK(ideal.macro_precision == 1.0);
  CHECK(ideal.macro_recall == 1.0);
  CHECK(ideal.macro_f == 1.0);
}

TEST_CASE("degenerate classes score zero by the zero-denominator rule") {
  // Class 1 never true and never predicted.
  const ConfusionMatrix cm = confusion({0, 0, 0}, {0, 0, 0}, 2);
  const PrfSummary prf = macro_prf(cm);
  CHECK(prf.per_class[1].precision == 0.0);
  CHECK(prf.per_class[1].recall == 0.0);
  CHECK(prf.per_class[1].f_score == 0.0);
  CHECK(prf.macro_f == 0.5);
}

TEST_CASE("macro metrics agree with exhaustive brute force on length-6 vectors") {
  // Independent oracle: count TP/FP/FN per class directly from the pairs.
  for (unsigned labels_bits = 0; labels_bits < 64; ++labels_bits) {
    for (unsigned preds_bits = 0; preds_bits < 64; ++preds_bits) {
      std::vector<std::size_t> labels(6), preds(6);
      for (std::size_t i = 0; i < 6; ++i) {
        labels[i] = (labels_bits >> i) & 1u;
        preds[i] = (preds_bits >> i) & 1u;
      }
      const PrfSummary got = macro_prf(confusion(labels, preds, 2));

      double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
      for (std::size_t c = 0; c < 2; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < 6; ++i) {
          tp += labels[i] == c && preds[i] == c;
          fp += labels[i] != c && preds[i] == c;
          fn += labels[i] == c && preds[i] != c;
        }
        const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        macro_p += p / 2.0;
        macro_r += r / 2.0;
        macro_f += f / 2.0;
        CHECK(got.per_class[c].precision == p);
        CHECK(got.per_class[c].recall == r);
        CHECK(got.per_class[c].f_score == f);
      }
      CHECK(got.macro_precision == macro_p);
      CHECK(got.macro_recall == macro_r);
      CHECK(got.macro_f == macro_f);
    }
  }
}

TEST_CASE("metrics ignore sample order") {
  Rng rng(13);
  std::vector<std::size_t> labels(40), preds(40);
  for (std::size_t i = 0; i < 40; ++i) {
    labels[i] = rng.below(2);
    preds[i] = rng.below(2);
  }
  const PrfSummary base = macro_prf(confusion(labels, preds, 2));
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::size_t> labels2, preds2;
  for (std::size_t i : order) {
    labels2.push_back(labels[i]);
    preds2.push_back(preds[i]);
  }
  const PrfSummary shuffled = macro_prf(confusion(labels2, preds2, 2));
  CHECK(base.macro_precision == shuffled.macro_precision);
  CHECK(base.macro_recall == shuffled.macro_recall);
  CHECK(base.macro_f == shuffled.macro_f);
}

TEST_CASE("loeo on a separable synthetic corpus") {
  SyntheticOptions opts;
  opts.events = {"alpha", "beta"};
  opts.per_event = {40, 40};
  opts.class_token_prob = 0.9;
  opts.seed = 3;
  const auto records = make_corpus(opts);
  const EmbeddingTable table = make_embeddings(8, opts.class_vocab, opts.filler_vocab, 1.0, 0.05, 3);

  LoeoConfig config;
  config.train.arch = ArchDescriptor{8, 8, 2};
  config.train.batch_size = 20;
  config.train.epochs = 12;
  config.train.t_ramp = 4.0;
  config.train.seed = 11;
  config.labeled_ratio = 1.0;

  const MetricsReport report = run_loeo(records, table, config);
  REQUIRE(report.per_event.size() == 2);
  CHECK(report.per_event[0].event == "alpha");
  CHECK(report.per_event[0].test_count == 40);
  CHECK(report.pooled.macro_f >= 0.9);
  CHECK_FALSE(report.config_fingerprint.empty());

  // Determinism of the full protocol.
  const MetricsReport again = run_loeo(records, table, config);
  CHECK(report.pooled.macro_f == again.pooled.macro_f);
  CHECK(report.per_event[1].prf.macro_f == again.per_event[1].prf.macro_f);

  // Report serializations carry the fingerprint and the event blocks.
  const std::string json = report_to_json(report);
  CHECK(json.find(report.config_fingerprint) != std::string::npos);
  CHECK(json.find("alpha") != std::string::npos);
  const std::string table_text = report_to_table(report);
  CHECK(table_text.find("beta") != std::string::npos);
}
