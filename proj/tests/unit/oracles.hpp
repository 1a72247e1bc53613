#pragma once

// Brute-force reference implementations the fast paths are checked against.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace membench::testkit {

// Every candidate threshold is evaluated by direct counting; ties keep the
// smaller threshold.
inline double brute_threshold(bool member_if_greater, std::span<const double> members,
                              std::span<const double> nonmembers) {
  std::vector<double> all(members.begin(), members.end());
  all.insert(all.end(), nonmembers.begin(), nonmembers.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (all.size() == 1) return all[0];
  std::vector<double> candidates{all.front() - 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) candidates.push_back((all[i] + all[i + 1]) / 2.0);
  candidates.push_back(all.back() + 1.0);

  const auto m = static_cast<std::int64_t>(members.size());
  const auto n = static_cast<std::int64_t>(nonmembers.size());
  double best_tau = 0.0;
  std::int64_t best = -1;
  for (double tau : candidates) {
    auto says_member = [&](double v) { return member_if_greater ? v >= tau : v <= tau; };
    std::int64_t tp = 0, tn = 0;
    for (double v : members) tp += says_member(v);
    for (double v : nonmembers) tn += !says_member(v);
    // tp / m + tn / n, scaled by m * n.
    const std::int64_t score = tp * n + tn * m;
    if (score > best) {
      best = score;
      best_tau = tau;
    }
  }
  return best_tau;
}

// Mann-Whitney pairwise count; ties count one half.
inline double pairwise_auc(std::span<const double> pos, std::span<const double> neg) {
  double total = 0.0;
  for (double a : pos)
    for (double b : neg) total += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return total / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace membench::testkit
