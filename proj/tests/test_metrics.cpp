#include <gtest/gtest.h>

#include "leafwood/eval/metrics.hpp"
#include "test_support.hpp"

using namespace leafwood;

namespace {

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> from_confusion(
    std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  std::vector<std::uint8_t> predicted, truth;
  auto push = [&](std::size_t n, int p, int t) {
    for (std::size_t i = 0; i < n; ++i) {
      predicted.push_back(std::uint8_t(p));
      truth.push_back(std::uint8_t(t));
    }
  };
  push(tp, 1, 1);
  push(fp, 1, 0);
  push(tn, 0, 0);
  push(fn, 0, 1);
  return {predicted, truth};
}

/// Independent reference: per-class recalls computed by filtering, precision
/// from the predicted-positive subset.
eval::ClassificationMetrics brute_metrics(std::span<const std::uint8_t> predicted,
                                          std::span<const std::uint8_t> truth) {
  eval::ClassificationMetrics m;
  std::size_t wood_total = 0, wood_hit = 0, leaf_total = 0, leaf_hit = 0;
  std::size_t pred_pos = 0, pred_pos_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++wood_total;
      wood_hit += predicted[i] == 1;
    } else {
      ++leaf_total;
      leaf_hit += predicted[i] == 0;
    }
    if (predicted[i] == 1) {
      ++pred_pos;
      pred_pos_correct += truth[i] == 1;
    }
  }
  m.confusion.tp = wood_hit;
  m.confusion.fn = wood_total - wood_hit;
  m.confusion.tn = leaf_hit;
  m.confusion.fp = leaf_total - leaf_hit;
  m.recall = double(wood_hit) / double(wood_total);
  m.balanced_accuracy =
      0.5 * (double(wood_hit) / double(wood_total) + double(leaf_hit) / double(leaf_total));
  m.precision = pred_pos == 0 ? 0.0 : double(pred_pos_correct) / double(pred_pos);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

}  // namespace

TEST(Metrics, HandComputedConfusion) {
  const auto [predicted, truth] = from_confusion(8, 10, 90, 2);
  const auto m = eval::classification_metrics(predicted, truth);
  EXPECT_EQ(m.confusion.tp, 8u);
  EXPECT_EQ(m.confusion.fp, 10u);
  EXPECT_EQ(m.confusion.tn, 90u);
  EXPECT_EQ(m.confusion.fn, 2u);
  EXPECT_NEAR(m.balanced_accuracy, 0.85, 1e-12);
  EXPECT_NEAR(m.precision, 8.0 / 18.0, 1e-12);
  EXPECT_NEAR(m.recall, 0.8, 1e-12);
}

TEST(Metrics, PerfectPrediction) {
  const auto [predicted, truth] = from_confusion(40, 0, 60, 0);
  const auto m = eval::classification_metrics(predicted, truth);
  EXPECT_DOUBLE_EQ(m.balanced_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);
}

TEST(Metrics, SingleClassTruthRejected) {
  std::vector<std::uint8_t> truth(50, 1), predicted(50, 1);
  EXPECT_THROW(eval::classification_metrics(predicted, truth), DataError);
}

TEST(Metrics, MatchesBruteForceOn100RandomInstances) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 7 + 1);
    const std::size_t n = 100 + rng.below(9901);
    std::vector<std::uint8_t> truth(n), predicted(n);
    const double wood_rate = rng.uniform(0.05, 0.95);
    const double flip_rate = rng.uniform(0.0, 0.5);
    bool any_wood = false, any_leaf = false;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.uniform() < wood_rate;
      predicted[i] = rng.uniform() < flip_rate ? 1 - truth[i] : truth[i];
      any_wood |= truth[i] == 1;
      any_leaf |= truth[i] == 0;
    }
    if (!any_wood) truth[0] = 1;
    if (!any_leaf) truth[1] = 0;
    const auto got = eval::classification_metrics(predicted, truth);
    const auto ref = brute_metrics(predicted, truth);
    EXPECT_EQ(got.confusion.tp, ref.confusion.tp);
    EXPECT_EQ(got.confusion.fp, ref.confusion.fp);
    EXPECT_EQ(got.confusion.tn, ref.confusion.tn);
    EXPECT_EQ(got.confusion.fn, ref.confusion.fn);
    EXPECT_NEAR(got.balanced_accuracy, ref.balanced_accuracy, 1e-12);
    EXPECT_NEAR(got.precision, ref.precision, 1e-12);
    EXPECT_NEAR(got.recall, ref.recall, 1e-12);
    EXPECT_NEAR(got.f1, ref.f1, 1e-12);
  }
}

TEST(Bap, HandArithmeticTipError) {
  // Wood points at path lengths 0, 1, 2; the tip (l=2) is misclassified.
  const std::vector<std::uint8_t> truth{1, 1, 1, 0, 0};
  const std::vector<std::uint8_t> predicted{1, 1, 0, 0, 0};
  const std::vector<double> lengths{0.0, 1.0, 2.0, 1.0, 2.0};
  const std::vector<std::uint8_t> reachable{1, 1, 1, 1, 1};
  const double bap =
      eval::path_weighted_balanced_accuracy(predicted, truth, lengths, reachable);
  EXPECT_NEAR(bap, (1.0 / 3.0 + 1.0) / 2.0, 1e-12);
}

TEST(Bap, EqualsBaUnderConstantWeights) {
  Rng rng(5);
  const std::size_t n = 4000;
  std::vector<std::uint8_t> truth(n), predicted(n), reachable(n, 1);
  std::vector<double> lengths(n, 2.5);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.uniform() < 0.3;
    predicted[i] = rng.uniform() < 0.2 ? 1 - truth[i] : truth[i];
  }
  truth[0] = 1;
  truth[1] = 0;
  const auto m = eval::classification_metrics(predicted, truth);
  const double bap =
      eval::path_weighted_balanced_accuracy(predicted, truth, lengths, reachable);
  EXPECT_NEAR(bap, m.balanced_accuracy, 1e-12);
}

TEST(Bap, InvariantUnderRescaling) {
  Rng rng(6);
  const std::size_t n = 500;
  std::vector<std::uint8_t> truth(n), predicted(n), reachable(n, 1);
  std::vector<double> lengths(n), scaled(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.uniform() < 0.4;
    predicted[i] = rng.uniform() < 0.25 ? 1 - truth[i] : truth[i];
    lengths[i] = rng.uniform(0.01, 12.0);
    scaled[i] = lengths[i] * 37.5;
  }
  truth[0] = 1;
  truth[1] = 0;
  const double a =
      eval::path_weighted_balanced_accuracy(predicted, truth, lengths, reachable);
  const double b =
      eval::path_weighted_balanced_accuracy(predicted, truth, scaled, reachable);
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Bap, TipErrorsCostMoreThanBaseErrors) {
  // Same number of errors, once at the largest lengths, once at the smallest.
  const std::size_t n = 100;
  std::vector<std::uint8_t> truth(n, 1), reachable(n, 1);
  std::vector<double> lengths(n);
  for (std::size_t i = 0; i < n; ++i) lengths[i] = 0.1 + double(i);
  for (std::size_t i = 0; i < 20; ++i) truth[i] = 0;  // leaf side, kept perfect

  std::vector<std::uint8_t> tip_errors(n, 0), base_errors(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    tip_errors[i] = truth[i];
    base_errors[i] = truth[i];
  }
  tip_errors[n - 1] = 0;
  tip_errors[n - 2] = 0;
  base_errors[20] = 0;
  base_errors[21] = 0;
  const double bap_tip =
      eval::path_weighted_balanced_accuracy(tip_errors, truth, lengths, reachable);
  const double bap_base =
      eval::path_weighted_balanced_accuracy(base_errors, truth, lengths, reachable);
  EXPECT_LT(bap_tip, bap_base);
}

TEST(Bap, ZeroClassWeightRejected) {
  const std::vector<std::uint8_t> truth{1, 0};
  const std::vector<std::uint8_t> predicted{1, 0};
  const std::vector<double> lengths{0.0, 1.0};  // wood has zero total weight
  const std::vector<std::uint8_t> reachable{1, 1};
  EXPECT_THROW(
      eval::path_weighted_balanced_accuracy(predicted, truth, lengths, reachable),
      DataError);
}

TEST(Bap, UnreachablePointsExcluded) {
  const std::vector<std::uint8_t> truth{1, 1, 0, 0};
  const std::vector<std::uint8_t> predicted{1, 0, 0, 0};  // error on unreachable
  const std::vector<double> lengths{1.0, 5.0, 1.0, 2.0};
  const std::vector<std::uint8_t> reachable{1, 0, 1, 1};
  const double bap =
      eval::path_weighted_balanced_accuracy(predicted, truth, lengths, reachable);
  EXPECT_NEAR(bap, 1.0, 1e-12);
}

TEST(Deciles, HundredUniformPoints) {
  const std::size_t n = 100;
  std::vector<std::uint8_t> truth(n, 0), predicted(n, 0), reachable(n, 1);
  std::vector<double> lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    lengths[i] = double(i) * 0.1;
    truth[i] = i % 3 == 0;
    predicted[i] = i % 5 == 0 ? 1 - truth[i] : truth[i];
  }
  const auto rows = eval::path_decile_report(predicted, truth, lengths, reachable);
  ASSERT_EQ(rows.size(), 10u);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].count, 10u);
    EXPECT_GE(rows[i].accuracy, 0.0);
    EXPECT_LE(rows[i].accuracy, 1.0);
    if (i > 0) EXPECT_GE(rows[i].length_min, rows[i - 1].length_max);
    total += rows[i].count;
  }
  EXPECT_EQ(total, n);
}

TEST(Deciles, RemainderSpreadAndReachabilityFilter) {
  const std::size_t n = 47;
  std::vector<std::uint8_t> truth(n, 1), predicted(n, 1), reachable(n, 1);
  std::vector<double> lengths(n);
  for (std::size_t i = 0; i < n; ++i) lengths[i] = double(i);
  reachable[3] = 0;
  reachable[40] = 0;  // 45 reachable -> bins of 5 with 5 bins of +0
  const auto rows = eval::path_decile_report(predicted, truth, lengths, reachable);
  std::uint64_t total = 0;
  for (const auto& row : rows) total += row.count;
  EXPECT_EQ(total, 45u);
  EXPECT_EQ(rows[0].count, 5u);
}

TEST(Deciles, TooFewPointsRejected) {
  std::vector<std::uint8_t> truth(9, 1), predicted(9, 1), reachable(9, 1);
  std::vector<double> lengths(9, 1.0);
  EXPECT_THROW(eval::path_decile_report(predicted, truth, lengths, reachable),
               std::invalid_argument);
}

TEST(Reports, CsvAndTableContainHeadlineNumbers) {
  const auto [predicted, truth] = from_confusion(8, 10, 90, 2);
  eval::EvaluationReport report;
  report.metrics = eval::classification_metrics(predicted, truth);
  report.bap = 0.75;
  report.unreachable_count = 4;
  const std::string csv = eval::report_csv(report);
  EXPECT_NE(csv.find("balanced_accuracy,0.850000"), std::string::npos);
  EXPECT_NE(csv.find("bap,0.750000"), std::string::npos);
  const std::string table = eval::report_table(report);
  EXPECT_NE(table.find("0.850000"), std::string::npos);
}
