#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "leafwood/core/types.hpp"

namespace leafwood::eval {

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
  Confusion confusion;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Standard binary metrics with wood (1) as the positive class. Balanced
/// accuracy needs both classes present in the truth; precision and F1 fall
/// back to 0 when no positives were predicted.
inline ClassificationMetrics classification_metrics(
    std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("metrics: label arrays differ in length (" +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  if (truth.empty()) throw std::invalid_argument("metrics: empty label arrays");

  ClassificationMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      if (predicted[i]) ++m.confusion.tp;
      else ++m.confusion.fn;
    } else {
      if (predicted[i]) ++m.confusion.fp;
      else ++m.confusion.tn;
    }
  }
  const auto& c = m.confusion;
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
    throw DataError("balanced accuracy undefined: a class is absent from the truth labels");
  m.recall = double(c.tp) / double(c.tp + c.fn);
  const double specificity = double(c.tn) / double(c.tn + c.fp);
  m.balanced_accuracy = 0.5 * (m.recall + specificity);
  m.precision = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

/// Balanced accuracy with per-point weights proportional to the path length
/// from the tree base, so branch-tip performance dominates. Only reachable
/// points contribute. `weight_floor` adds a constant to every weight
/// (w = length + floor); the default 0 gives base points zero weight.
inline double path_weighted_balanced_accuracy(
    std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
    std::span<const double> path_length, std::span<const std::uint8_t> reachable,
    double weight_floor = 0.0) {
  const std::size_t n = truth.size();
  if (predicted.size() != n || path_length.size() != n || reachable.size() != n)
    throw std::invalid_argument("path-weighted BA: array lengths differ");
  double wood_weight = 0.0, wood_correct = 0.0;
  double leaf_weight = 0.0, leaf_correct = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!reachable[i]) continue;
    if (path_length[i] < 0.0)
      throw std::invalid_argument("path-weighted BA: negative path length");
    const double w = path_length[i] + weight_floor;
    if (truth[i]) {
      wood_weight += w;
      if (predicted[i]) wood_correct += w;
    } else {
      leaf_weight += w;
      if (!predicted[i]) leaf_correct += w;
    }
  }
  if (wood_weight <= 0.0 || leaf_weight <= 0.0)
    throw DataError("path-weighted BA undefined: zero total weight in a class");
  return 0.5 * (wood_correct / wood_weight + leaf_correct / leaf_weight);
}

struct DecileRow {
  double length_min = 0.0, length_max = 0.0;  // meters
  std::uint64_t count = 0;
  std::uint64_t wood_count = 0;
  double accuracy = 0.0;
};

/// Splits reachable points into 10 equal-count bins by ascending path length
/// and reports plain accuracy plus class mix per bin.
inline std::vector<DecileRow> path_decile_report(
    std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
    std::span<const double> path_length, std::span<const std::uint8_t> reachable) {
  const std::size_t n = truth.size();
  if (predicted.size() != n || path_length.size() != n || reachable.size() != n)
    throw std::invalid_argument("decile report: array lengths differ");
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < n; ++i)
    if (reachable[i]) order.push_back(i);
  if (order.size() < 10)
    throw std::invalid_argument("decile report needs at least 10 reachable points");
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return path_length[a] != path_length[b] ? path_length[a] < path_length[b]
                                            : a < b;
  });

  std::vector<DecileRow> rows(10);
  const std::size_t base = order.size() / 10, extra = order.size() % 10;
  std::size_t at = 0;
  for (std::size_t bin = 0; bin < 10; ++bin) {
    const std::size_t count = base + (bin < extra ? 1 : 0);
    DecileRow& row = rows[bin];
    row.count = count;
    row.length_min = path_length[order[at]];
    row.length_max = path_length[order[at + count - 1]];
    std::uint64_t correct = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t idx = order[at + i];
      correct += predicted[idx] == truth[idx];
      row.wood_count += truth[idx];
    }
    row.accuracy = double(correct) / double(count);
    at += count;
  }
  return rows;
}

/// Everything the `evaluate` command reports.
struct EvaluationReport {
  ClassificationMetrics metrics;
  std::optional<double> bap;
  std::uint64_t unreachable_count = 0;
  std::vector<DecileRow> deciles;
};

namespace detail {
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}
}  // namespace detail

inline std::string report_csv(const EvaluationReport& r) {
  std::ostringstream out;
  const auto& c = r.metrics.confusion;
  out << "metric,value\n";
  out << "tp," << c.tp << "\nfp," << c.fp << "\ntn," << c.tn << "\nfn," << c.fn << "\n";
  out << "balanced_accuracy," << detail::fmt(r.metrics.balanced_accuracy) << "\n";
  out << "precision," << detail::fmt(r.metrics.precision) << "\n";
  out << "recall," << detail::fmt(r.metrics.recall) << "\n";
  out << "f1," << detail::fmt(r.metrics.f1) << "\n";
  out << "bap," << (r.bap ? detail::fmt(*r.bap) : std::string("n/a")) << "\n";
  out << "unreachable_count," << r.unreachable_count << "\n";
  return out.str();
}

inline std::string decile_csv(const std::vector<DecileRow>& rows) {
  std::ostringstream out;
  out << "decile,length_min,length_max,count,wood_count,accuracy\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << i + 1 << ',' << detail::fmt(rows[i].length_min) << ','
        << detail::fmt(rows[i].length_max) << ',' << rows[i].count << ','
        << rows[i].wood_count << ',' << detail::fmt(rows[i].accuracy) << "\n";
  return out.str();
}

inline std::string report_table(const EvaluationReport& r) {
  std::ostringstream out;
  const auto& c = r.metrics.confusion;
  out << "confusion  tp=" << c.tp << " fp=" << c.fp << " tn=" << c.tn
      << " fn=" << c.fn << "\n";
  out << "balanced accuracy  " << detail::fmt(r.metrics.balanced_accuracy) << "\n";
  out << "precision          " << detail::fmt(r.metrics.precision) << "\n";
  out << "recall             " << detail::fmt(r.metrics.recall) << "\n";
  out << "f1                 " << detail::fmt(r.metrics.f1) << "\n";
  out << "path-weighted BA   " << (r.bap ? detail::fmt(*r.bap) : std::string("n/a"))
      << "\n";
  out << "unreachable points " << r.unreachable_count << "\n";
  if (!r.deciles.empty()) {
    out << "\npath-length deciles (meters)\n";
    out << "  bin      range            points  wood   accuracy\n";
    for (std::size_t i = 0; i < r.deciles.size(); ++i) {
      const auto& d = r.deciles[i];
      out << "  " << i + 1 << (i + 1 < 10 ? "    " : "   ") << detail::fmt(d.length_min)
          << " - " << detail::fmt(d.length_max) << "  " << d.count << "  "
          << d.wood_count << "  " << detail::fmt(d.accuracy) << "\n";
    }
  }
  return out.str();
}

}  // namespace leafwood::eval
