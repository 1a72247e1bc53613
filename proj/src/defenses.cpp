#include "membench/defenses.hpp"

#include <algorithm>
#include <cmath>

#include "membench/error.hpp"

namespace membench::defenses {

using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string defense_name(const DefenseConfig& config) {
  return std::visit(overloaded{
                        [](const NoDefense&) { return std::string("none"); },
                        [](const LabelSmoothing&) { return std::string("label_smoothing"); },
                        [](const AdvReg&) { return std::string("advreg"); },
                        [](const MemGuard&) { return std::string("memguard"); },
                        [](const MixupMmd&) { return std::string("mixupmmd"); },
                        [](const DpSgd&) { return std::string("dpsgd"); },
                        [](const DataAug&) { return std::string("data_aug"); },
                    },
                    config);
}

void validate(const DefenseConfig& config) {
  std::visit(overloaded{
                 [](const NoDefense&) {},
                 [](const LabelSmoothing& c) {
                   if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("label smoothing epsilon must be in (0, 1)");
                 },
                 [](const AdvReg& c) {
                   if (!(c.lambda > 0.0)) throw ConfigError("advreg lambda must be > 0");
                 },
                 [](const MemGuard& c) {
                   if (!(c.p_apply >= 0.0 && c.p_apply <= 1.0)) throw ConfigError("memguard p_apply must be in [0, 1]");
                   if (!(c.step_size > 0.0)) throw ConfigError("memguard step_size must be > 0");
                   if (!(c.max_l1 > 0.0)) throw ConfigError("memguard max_l1 must be > 0");
                 },
                 [](const MixupMmd& c) {
                   if (!(c.lambda > 0.0)) throw ConfigError("mixupmmd lambda must be > 0");
                   if (!(c.alpha > 0.0)) throw ConfigError("mixupmmd alpha must be > 0");
                   if (c.bandwidth < 0.0) throw ConfigError("mixupmmd bandwidth must be >= 0");
                 },
                 [](const DpSgd& c) {
                   if (!(c.sigma >= 0.0)) throw ConfigError("dpsgd sigma must be >= 0");
                   if (!(c.clip > 0.0)) throw ConfigError("dpsgd clip must be > 0");
                 },
                 [](const DataAug& c) { c.mode.validate(); },
             },
             config);
}

bool needs_reference(const DefenseConfig& config) {
  return std::holds_alternative<AdvReg>(config) || std::holds_alternative<MixupMmd>(config);
}

nn::Posteriors smooth_labels(int y, std::size_t k, double epsilon) {
  if (k < 2) throw InvalidInput("smooth_labels: k must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("smooth_labels: epsilon must be in (0, 1)");
  if (y < 0 || static_cast<std::size_t>(y) >= k) throw IndexError("smooth_labels: label out of range");
  nn::Posteriors out(k, epsilon / static_cast<double>(k - 1));
  out[static_cast<std::size_t>(y)] = 1.0 - epsilon;
  return out;
}

namespace {

Var adversary_loss(const nn::Network& adversary, const Var& member_post, const Var& nonmember_post) {
  const std::size_t nm = member_post.shape()[0];
  const std::size_t nr = nonmember_post.shape()[0];
  const std::vector<int> ones(nm, 1), zeros(nr, 0);
  const Var lm = nn::cross_entropy(adversary.forward(member_post), ones);
  const Var lr = nn::cross_entropy(adversary.forward(nonmember_post), zeros);
  const double total = static_cast<double>(nm + nr);
  return nn::add(nn::scale(lm, static_cast<double>(nm) / total), nn::scale(lr, static_cast<double>(nr) / total));
}

}  // namespace

AdvRegRound advreg_round(nn::Network& target, nn::Sgd& target_opt, nn::Network& adversary, nn::Sgd& adversary_opt,
                         const Tensor& train_x, const Tensor& train_targets, const Tensor& reference_x, double lambda,
                         double target_lr, double adversary_lr) {
  if (lambda < 0.0) throw ConfigError("advreg lambda must be >= 0");
  if (reference_x.empty()) throw ConfigError("advreg needs a non-empty reference batch");

  AdvRegRound result;
  // Adversary step on frozen target posteriors.
  {
    Var member_post, nonmember_post;
    {
      nn::NoGradGuard guard;
      member_post = nn::softmax(target.forward(Var(train_x)));
      nonmember_post = nn::softmax(target.forward(Var(reference_x)));
    }
    auto adv_params = adversary.params();
    adv_params.zero_grad();
    Var loss = adversary_loss(adversary, Var(member_post.value()), Var(nonmember_post.value()));
    nn::backward(loss);
    adversary_opt.step(adv_params, adversary_lr);
  }

  // Target step: classification loss minus lambda times the adversary's loss.
  auto target_params = target.params();
  target_params.zero_grad();
  const Var logits = target.forward(Var(train_x));
  const Var cls = nn::soft_cross_entropy(logits, train_targets);
  Var total = cls;
  if (lambda > 0.0) {
    const Var adv = adversary_loss(adversary, nn::softmax(logits), nn::softmax(target.forward(Var(reference_x))));
    result.adversary_loss = adv.value().item();
    total = nn::sub(cls, nn::scale(adv, lambda));
  }
  nn::backward(total);
  target_opt.step(target_params, target_lr);
  adversary.zero_grad();
  result.classification_loss = cls.value().item();
  return result;
}

double surrogate_member_score(const nn::Network& surrogate, const nn::Posteriors& p) {
  const Tensor logits = surrogate.logits(Tensor(Shape{1, p.size()}, p));
  return nn::softmax(logits.data())[1];
}

namespace {

constexpr double kMemGuardTolerance = 1e-3;

double l1(const nn::Posteriors& a, const nn::Posteriors& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

MemGuardResult memguard(const nn::Posteriors& p, const nn::Network& surrogate, const MemGuard& config, Rng& rng) {
  if (p.empty()) throw InvalidInput("memguard: empty posteriors");
  if (!std::bernoulli_distribution(config.p_apply)(rng)) return {p, false, false};

  const int label = nn::argmax(p);
  const std::size_t k = p.size();
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) z[i] = std::log(std::max(p[i], nn::kProbFloor));

  auto deviation = [&](const nn::Posteriors& q) {
    const double s = surrogate_member_score(surrogate, q);
    return (s - 0.5) * (s - 0.5);
  };

  double current = deviation(p);
  if (std::sqrt(current) <= kMemGuardTolerance) return {p, false, false};

  bool moved = false;
  double step = config.step_size;
  for (std::size_t it = 0; it < config.max_steps; ++it) {
    Var zv(Tensor(Shape{1, k}, z), true);
    const Var score = nn::column(nn::softmax(surrogate.forward(nn::softmax(zv))), 1);
    nn::backward(nn::square(nn::add_scalar(score, -0.5)));
    const Tensor g = zv.grad();
    surrogate.zero_grad();
    double gnorm = 0.0;
    for (double v : g.data()) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm == 0.0) break;

    bool accepted = false;
    step = std::min(config.step_size, 2.0 * step);
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      std::vector<double> candidate(k);
      for (std::size_t i = 0; i < k; ++i) candidate[i] = z[i] - step * g[i] / gnorm;
      const nn::Posteriors q = nn::softmax(candidate);
      if (nn::argmax(q) == label && l1(q, p) <= config.max_l1) {
        const double dev = deviation(q);
        if (dev < current) {
          z = std::move(candidate);
          current = dev;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    moved = true;
    if (std::sqrt(current) <= kMemGuardTolerance) break;
  }

  if (!moved) return {p, false, true};
  nn::Posteriors out = nn::softmax(z);
  if (nn::argmax(out) != label) return {p, false, true};
  return {std::move(out), true, false};
}

MixupSample mixup_with(double lambda, const Tensor& x1, const nn::Posteriors& y1, const Tensor& x2,
                       const nn::Posteriors& y2) {
  if (x1.shape() != x2.shape()) throw InvalidInput("mixup: sample shape mismatch");
  if (y1.size() != y2.size()) throw InvalidInput("mixup: label distribution size mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("mixup: lambda must be in [0, 1]");
  MixupSample out{x1, y1, lambda};
  if (lambda == 1.0) return out;
  for (std::size_t i = 0; i < out.x.numel(); ++i) out.x[i] = lambda * x1[i] + (1.0 - lambda) * x2[i];
  for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] = lambda * y1[i] + (1.0 - lambda) * y2[i];
  return out;
}

double sample_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
  const double a = ga(rng);
  const double b = gb(rng);
  if (a + b == 0.0) return 0.5;
  return a / (a + b);
}

MixupSample mixup(const Tensor& x1, const nn::Posteriors& y1, const Tensor& x2, const nn::Posteriors& y2, double alpha,
                  Rng& rng) {
  if (!(alpha > 0.0)) throw InvalidInput("mixup: alpha must be > 0");
  return mixup_with(sample_beta(alpha, alpha, rng), x1, y1, x2, y2);
}

namespace {

Tensor rows_of(const std::vector<nn::Posteriors>& rows) {
  if (rows.empty()) throw InvalidInput("mmd: empty sample set");
  const std::size_t k = rows.front().size();
  Tensor t(Shape{rows.size(), k});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != k) throw InvalidInput("mmd: ragged sample set");
    for (std::size_t j = 0; j < k; ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

}  // namespace

double mmd(const std::vector<nn::Posteriors>& a, const std::vector<nn::Posteriors>& b, double bandwidth) {
  nn::NoGradGuard guard;
  const double v = nn::mmd_rbf(Var(rows_of(a)), Var(rows_of(b)), bandwidth).value().item();
  return std::max(v, 0.0);
}

double median_bandwidth(const Tensor& a, const Tensor& b) {
  std::vector<const double*> rows;
  const std::size_t d = a.dim(1);
  for (std::size_t i = 0; i < a.dim(0); ++i) rows.push_back(&a.data()[i * d]);
  for (std::size_t i = 0; i < b.dim(0); ++i) rows.push_back(&b.data()[i * d]);
  std::vector<double> dists;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += (rows[i][t] - rows[j][t]) * (rows[i][t] - rows[j][t]);
      dists.push_back(std::sqrt(s));
    }
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

nn::GradSet clip_grad(const nn::GradSet& g, double clip) {
  if (!(clip > 0.0)) throw ConfigError("gradient clip norm must be > 0");
  const double norm = nn::grad_norm(g);
  const double factor = norm > clip ? clip / norm : 1.0;
  nn::GradSet out = g;
  if (factor != 1.0)
    for (auto& t : out)
      for (auto& v : t.data()) v *= factor;
  return out;
}

nn::GradSet privatize(const std::vector<nn::GradSet>& per_sample, double clip, double sigma, Rng& rng) {
  if (!(clip > 0.0)) throw ConfigError("dpsgd clip must be > 0");
  if (sigma < 0.0) throw ConfigError("dpsgd sigma must be >= 0");
  if (per_sample.empty()) throw InvalidInput("dpsgd: no per-sample gradients");
  const double batch = static_cast<double>(per_sample.size());
  nn::GradSet sum;
  for (const auto& g : per_sample) {
    const nn::GradSet c = clip_grad(g, clip);
    if (sum.empty()) {
      sum = c;
      continue;
    }
    for (std::size_t i = 0; i < sum.size(); ++i)
      for (std::size_t j = 0; j < sum[i].numel(); ++j) sum[i][j] += c[i][j];
  }
  const double noise_std = sigma * clip / batch;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& t : sum)
    for (auto& v : t.data()) {
      v /= batch;
      if (noise_std > 0.0) v += noise_std * normal(rng);
    }
  return sum;
}

nn::GradSet dpsgd_step(nn::ParamSet& params, nn::Sgd& opt, const std::vector<nn::GradSet>& per_sample, double clip,
                       double sigma, double lr, Rng& rng) {
  nn::GradSet g = privatize(per_sample, clip, sigma, rng);
  opt.step(params, g, lr);
  return g;
}

}  // namespace membench::defenses
