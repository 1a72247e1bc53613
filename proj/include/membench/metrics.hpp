#pragma once

#include <span>

#include "membench/attacks.hpp"

namespace membench::metrics {

struct AttackMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;

  bool operator==(const AttackMetrics&) const = default;
};

// Member is the positive class. Every verdict needs truth; AUC needs scores
// and both classes present (InvalidInput otherwise). Precision with no
// positive decisions is 0, as is F1 when precision + recall is 0.
AttackMetrics evaluate(std::span<const attacks::MembershipVerdict> verdicts);

// Probability that a random member outscores a random non-member, ties
// counting one half. Exact: computed from integer counts.
double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores);
double auc(std::span<const attacks::MembershipVerdict> verdicts);

double accuracy(std::span<const attacks::MembershipVerdict> verdicts);

}  // namespace membench::metrics
