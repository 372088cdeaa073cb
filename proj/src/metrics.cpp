#include "stormchip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "stormchip/errors.hpp"

namespace stormchip {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw ValidationError("metrics need at least one sample");
  if (scores.size() != labels.size())
    throw ValidationError("score and label counts differ: " + std::to_string(scores.size()) + " vs " +
                          std::to_string(labels.size()));
  for (int y : labels)
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
  for (double s : scores)
    if (std::isnan(s)) throw ValidationError("scores must not be NaN");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

}  // namespace

EvalReport accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++r.n_pos;
      ++(predicted ? r.tp : r.fn);
    } else {
      ++r.n_neg;
      ++(predicted ? r.fp : r.tn);
    }
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(scores.size());
  return r;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw ValidationError("AUC is undefined unless both classes are present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area, in units of 1/(P*N): sum of dFP * (TP_before + TP_after).
  std::uint64_t doubled_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) ++(labels[order[i]] == 1 ? dtp : dfp);
    doubled_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos), s});
  }
  roc.auc = static_cast<double>(doubled_area) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return roc;
}

double auc_pairwise_oracle(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw ValidationError("AUC is undefined unless both classes are present");
  std::uint64_t doubled_wins = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) doubled_wins += 2;
      else if (scores[i] == scores[j]) doubled_wins += 1;
    }
  }
  return static_cast<double>(doubled_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r = accuracy_at(scores, labels, threshold);
  if (r.n_pos > 0 && r.n_neg > 0) {
    RocCurve roc = roc_auc(scores, labels);
    r.roc_points = std::move(roc.points);
    r.auc = roc.auc;
    r.has_auc = true;
  }
  return r;
}

std::vector<Misclassification> misclassification_export(std::span<const std::string> ids,
                                                        std::span<const int> labels,
                                                        std::span<const double> scores, double threshold) {
  if (ids.size() != labels.size() || ids.size() != scores.size())
    throw ValidationError("misclassification export needs aligned ids, labels and scores");
  std::vector<Misclassification> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i] == 0) out.push_back({ids[i], 0, scores[i], ErrorKind::false_positive});
    if (!predicted && labels[i] == 1) out.push_back({ids[i], 1, scores[i], ErrorKind::false_negative});
  }
  std::sort(out.begin(), out.end(), [threshold](const Misclassification& a, const Misclassification& b) {
    const double ca = std::fabs(a.score - threshold), cb = std::fabs(b.score - threshold);
    if (ca != cb) return ca > cb;
    return a.id < b.id;
  });
  return out;
}

}  // namespace stormchip
