#pragma once

#include <string>
#include <variant>
#include <vector>

#include "membench/augment.hpp"
#include "membench/nn.hpp"
#include "membench/optim.hpp"
#include "membench/rng.hpp"

namespace membench::defenses {

struct NoDefense {};

struct LabelSmoothing {
  double epsilon = 0.8;
};

struct AdvReg {
  double lambda = 1.0;
};

struct MemGuard {
  double p_apply = 1.0;
  std::size_t max_steps = 100;
  double step_size = 0.5;  // initial logit-space step, halved on rejection
  double max_l1 = 1.0;     // bound on |perturbed - original|_1
};

struct MixupMmd {
  double lambda = 3.0;
  double alpha = 1.0;      // Beta(alpha, alpha) mixing coefficient
  double bandwidth = 0.0;  // 0 selects the median pairwise-distance heuristic
};

struct DpSgd {
  double sigma = 0.001;
  double clip = 1.0;
};

struct DataAug {
  data::AugMode mode{data::AugKind::simple};
};

using DefenseConfig = std::variant<NoDefense, LabelSmoothing, AdvReg, MemGuard, MixupMmd, DpSgd, DataAug>;

std::string defense_name(const DefenseConfig& config);
// Throws ConfigError on out-of-range hyperparameters.
void validate(const DefenseConfig& config);
// AdvReg and MixupMmd consume the reference split.
bool needs_reference(const DefenseConfig& config);

// True class gets 1 - epsilon, every other class epsilon / (k - 1).
nn::Posteriors smooth_labels(int y, std::size_t k, double epsilon);

struct AdvRegRound {
  double classification_loss = 0.0;
  double adversary_loss = 0.0;
};

// One alternating round. The adversary (a 2-way classifier over target
// posteriors, member = class 1) takes a descent step on its cross-entropy
// over train (members) and reference (non-members) posteriors with the target
// frozen. The target then descends
//   CE(train) - lambda * adversary_CE(train, reference),
// i.e. it maximizes the adversary's loss. lambda = 0 reduces to a plain step.
AdvRegRound advreg_round(nn::Network& target, nn::Sgd& target_opt, nn::Network& adversary, nn::Sgd& adversary_opt,
                         const nn::Tensor& train_x, const nn::Tensor& train_targets, const nn::Tensor& reference_x,
                         double lambda, double target_lr, double adversary_lr);

struct MemGuardResult {
  nn::Posteriors posteriors;
  bool perturbed = false;
  bool flagged = false;  // no label-preserving noise found within budget
};

// Surrogate's member probability for one posterior vector.
double surrogate_member_score(const nn::Network& surrogate, const nn::Posteriors& p);

// Phase 1 searches, in logit space, for noise that moves the surrogate's
// membership score toward 0.5 while keeping argmax and the L1 bound; phase 2
// releases the noisy vector with probability p_apply.
MemGuardResult memguard(const nn::Posteriors& p, const nn::Network& surrogate, const MemGuard& config, Rng& rng);

struct MixupSample {
  nn::Tensor x;
  nn::Posteriors y;
  double lambda = 1.0;
};

MixupSample mixup_with(double lambda, const nn::Tensor& x1, const nn::Posteriors& y1, const nn::Tensor& x2,
                       const nn::Posteriors& y2);
// lambda ~ Beta(alpha, alpha).
MixupSample mixup(const nn::Tensor& x1, const nn::Posteriors& y1, const nn::Tensor& x2, const nn::Posteriors& y2,
                  double alpha, Rng& rng);

double sample_beta(double alpha, double beta, Rng& rng);

// Biased squared MMD with a Gaussian kernel of the given bandwidth.
double mmd(const std::vector<nn::Posteriors>& a, const std::vector<nn::Posteriors>& b, double bandwidth);
// Median pairwise Euclidean distance over the pooled rows (1.0 if degenerate).
double median_bandwidth(const nn::Tensor& a, const nn::Tensor& b);

// Rescales g to norm at most `clip`: g * min(1, clip / |g|).
nn::GradSet clip_grad(const nn::GradSet& g, double clip);

// Clip each per-sample gradient, average, then add N(0, (sigma * clip / B)^2)
// per coordinate.
nn::GradSet privatize(const std::vector<nn::GradSet>& per_sample, double clip, double sigma, Rng& rng);

// privatize() followed by an SGD step on `params`.
nn::GradSet dpsgd_step(nn::ParamSet& params, nn::Sgd& opt, const std::vector<nn::GradSet>& per_sample, double clip,
                       double sigma, double lr, Rng& rng);

}  // namespace membench::defenses
