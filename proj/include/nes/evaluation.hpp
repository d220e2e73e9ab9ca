#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "nes/error.hpp"
#include "nes/types.hpp"

namespace nes {

struct MetricsRecord {
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  // Set when discoveries were made against an empty ground truth; all
  // ratios are then reported as 0.
  bool degenerate = false;
};

/// Set metrics of discoveries against ground truth. Both empty scores 1
/// everywhere; empty discoveries against a nonempty truth score 0.
inline MetricsRecord set_metrics(const IndexSet& discovered, const IndexSet& ground_truth) {
  const std::set<Index> s(discovered.begin(), discovered.end());
  const std::set<Index> g(ground_truth.begin(), ground_truth.end());
  MetricsRecord r;
  for (Index j : s) (g.count(j) ? r.tp : r.fp) += 1;
  for (Index j : g)
    if (!s.count(j)) ++r.fn;

  if (s.empty() && g.empty()) {
    r.precision = r.recall = r.f1 = r.iou = 1.0;
    return r;
  }
  if (g.empty()) {
    r.degenerate = true;
    return r;
  }
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.iou = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp + r.fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// F1 of predictions against binary labels (positive class = 1).
inline double binary_f1(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
  Index tp = 0, fp = 0, fn = 0;
  for (Index i = 0; i < labels.size(); ++i) {
    if (predicted[i] && labels[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (labels[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

struct GroundTruthAlignment {
  Index neuron = 0;
  double f1 = 0.0;
};

/// Best channel for a binary concept: each channel predicts "active" when
/// its activation is > 0; the highest F1 wins, ties to the lowest index.
inline GroundTruthAlignment align_ground_truth_f1(const CodeMatrix& codes, std::span<const std::uint8_t> labels) {
  require(labels.size() == codes.units(), ErrorKind::invalid_argument, "one label per unit required");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](std::uint8_t y) { return y != 0; });
  require(positives > 0 && static_cast<Index>(positives) < labels.size(), ErrorKind::undefined_f1,
          "labels must contain both classes");
  GroundTruthAlignment best;
  best.f1 = -1.0;
  std::vector<std::uint8_t> active(codes.units());
  for (Index j = 0; j < codes.channels(); ++j) {
    const auto column = codes.column(j);
    std::transform(column.begin(), column.end(), active.begin(), [](double z) { return z > 0.0 ? 1 : 0; });
    const double f1 = binary_f1(active, labels);
    if (f1 > best.f1) best = {j, f1};
  }
  return best;
}

}  // namespace nes
