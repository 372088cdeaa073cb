#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stormchip {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predict positive iff score >= threshold; +inf for the (0,0) sentinel
};

struct EvalReport {
  std::size_t n_pos = 0, n_neg = 0;
  double threshold = 0.5;
  double accuracy = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<RocPoint> roc_points;  // by decreasing threshold, (0,0) to (1,1)
  double auc = 0.0;
  bool has_auc = false;  // false when only one class is present
};

// Confusion counts and accuracy; a score at or above the threshold is positive.
EvalReport accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// One ROC vertex per distinct score plus the (0,0) sentinel; AUC by the
// trapezoid rule. The area is accumulated in integer units of 1/(2*P*N), so
// it matches auc_pairwise_oracle exactly.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

// Mean over all (positive, negative) pairs of [s+ > s-] + 0.5 [s+ == s-].
double auc_pairwise_oracle(std::span<const double> scores, std::span<const int> labels);

// accuracy_at plus ROC/AUC when both classes are present.
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

enum class ErrorKind { false_positive, false_negative };

struct Misclassification {
  std::string id;
  int label = 0;
  double score = 0.0;
  ErrorKind kind = ErrorKind::false_positive;
};

// Wrong predictions ordered by |score - threshold| descending (ties by id).
std::vector<Misclassification> misclassification_export(std::span<const std::string> ids,
                                                        std::span<const int> labels,
                                                        std::span<const double> scores, double threshold = 0.5);

}  // namespace stormchip
