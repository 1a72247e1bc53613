#include "membench/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#include "membench/error.hpp"

namespace membench::metrics {

namespace {

bool truth_of(const attacks::MembershipVerdict& v) {
  if (!v.truth) throw InvalidInput("verdict " + std::to_string(v.sample_id) + " has no ground truth");
  return *v.truth;
}

}  // namespace

double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw InvalidInput("AUC undefined without both members and non-members");
  }
  std::vector<double> neg(nonmember_scores.begin(), nonmember_scores.end());
  std::sort(neg.begin(), neg.end());
  // 2 * wins + ties, summed over all pairs.
  std::uint64_t twice = 0;
  for (double s : member_scores) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    twice += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(member_scores.size()) * static_cast<double>(neg.size());
  return static_cast<double>(twice) / (2.0 * pairs);
}

double auc(std::span<const attacks::MembershipVerdict> verdicts) {
  std::vector<double> pos, neg;
  for (const auto& v : verdicts) {
    if (!v.score) throw InvalidInput("verdict " + std::to_string(v.sample_id) + " has no score");
    (truth_of(v) ? pos : neg).push_back(*v.score);
  }
  return auc(pos, neg);
}

double accuracy(std::span<const attacks::MembershipVerdict> verdicts) {
  if (verdicts.empty()) throw InvalidInput("no verdicts");
  std::size_t correct = 0;
  for (const auto& v : verdicts) correct += v.member == truth_of(v) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

AttackMetrics evaluate(std::span<const attacks::MembershipVerdict> verdicts) {
  if (verdicts.empty()) throw InvalidInput("no verdicts");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& v : verdicts) {
    const bool t = truth_of(v);
    if (v.member) {
      (t ? tp : fp)++;
    } else {
      (t ? fn : tn)++;
    }
  }
  AttackMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(verdicts.size());
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.auc = auc(verdicts);
  return m;
}

}  // namespace membench::metrics
