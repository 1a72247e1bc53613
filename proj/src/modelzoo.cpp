#include "membench/modelzoo.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "membench/checkpoint.hpp"
#include "membench/error.hpp"
#include "membench/serialize.hpp"

namespace membench::zoo {

using nn::Shape;
using nn::Tensor;
using nn::Var;

const char* model_kind_name(ModelKind kind) { return kind == ModelKind::mlp ? "mlp" : "small_cnn"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "mlp") return ModelKind::mlp;
  if (name == "small_cnn") return ModelKind::small_cnn;
  throw ConfigError("unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (input_shape.empty()) throw ConfigError("model input_shape is empty");
  for (auto e : input_shape)
    if (e == 0) throw ConfigError("model input_shape has a zero extent");
  for (auto w : widths)
    if (w == 0) throw ConfigError("model widths must be positive");
  if (kind == ModelKind::small_cnn) {
    if (widths.size() != 2) throw ConfigError("small_cnn needs exactly two channel counts");
    if (input_shape.size() != 3) throw ConfigError("small_cnn needs c x h x w inputs");
  }
}

nn::Network build_network(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  nn::Network net;
  if (spec.kind == ModelKind::mlp) {
    net.add(std::make_unique<nn::Flatten>());
    std::size_t in = nn::shape_numel(spec.input_shape);
    for (auto w : spec.widths) {
      net.add(std::make_unique<nn::Dense>(in, w, rng));
      net.add(std::make_unique<nn::Relu>());
      in = w;
    }
    net.add(std::make_unique<nn::Dense>(in, spec.num_classes, rng));
  } else {
    const std::size_t c = spec.input_shape[0];
    const std::size_t h = spec.input_shape[1];
    const std::size_t w = spec.input_shape[2];
    net.add(std::make_unique<nn::Conv2d>(c, spec.widths[0], 3, 1, rng));
    net.add(std::make_unique<nn::Relu>());
    net.add(std::make_unique<nn::Conv2d>(spec.widths[0], spec.widths[1], 3, 1, rng));
    net.add(std::make_unique<nn::Relu>());
    net.add(std::make_unique<nn::Flatten>());
    net.add(std::make_unique<nn::Dense>(spec.widths[1] * h * w, spec.num_classes, rng));
  }
  return net;
}

ModelSpec AttackModelSpec::model_spec() const {
  ModelSpec s;
  s.kind = ModelKind::mlp;
  s.widths = {64, 32};
  s.num_classes = 2;
  s.input_shape = {input_dim};
  return s;
}

nn::TrainRecipe AttackModelSpec::recipe() const {
  nn::TrainRecipe r;
  r.epochs = epochs;
  r.batch_size = batch_size;
  r.lr0 = lr0;
  r.momentum = momentum;
  r.seed = seed;
  return r;
}

TrainingData target_view(const data::Dataset& ds, const data::SplitPlan& plan) {
  return {ds, plan[data::Part::target_train], plan[data::Part::target_reference], plan[data::Part::target_test]};
}

TrainingData shadow_view(const data::Dataset& ds, const data::SplitPlan& plan) {
  return {ds, plan[data::Part::shadow_train], plan[data::Part::shadow_reference], plan[data::Part::shadow_test]};
}

namespace {

double batch_accuracy(const nn::Network& net, const Tensor& inputs, std::span<const int> labels) {
  const Tensor logits = net.logits(inputs);
  const std::size_t k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (nn::argmax(std::span<const double>(&logits.data()[i * k], k)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double split_accuracy(const nn::Network& net, const data::Dataset& ds, std::span<const std::size_t> idx) {
  if (idx.empty()) return -1.0;
  const auto labels = ds.labels_of(idx);
  return batch_accuracy(net, ds.batch(idx), labels);
}

Tensor target_rows(std::span<const int> labels, std::size_t k, const defenses::DefenseConfig& defense) {
  if (const auto* ls = std::get_if<defenses::LabelSmoothing>(&defense)) {
    Tensor t(Shape{labels.size(), k});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto row = defenses::smooth_labels(labels[i], k, ls->epsilon);
      for (std::size_t j = 0; j < k; ++j) t.at(i, j) = row[j];
    }
    return t;
  }
  return nn::one_hot(labels, k);
}

// Cycles through a shuffled index list in fixed-size chunks.
class ReferenceStream {
 public:
  ReferenceStream(std::span<const std::size_t> indices, std::size_t batch) : order_(indices.begin(), indices.end()) {
    batch_ = std::min(batch, order_.size());
  }

  std::vector<std::size_t> next(Rng& rng) {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (pos_ == 0) std::shuffle(order_.begin(), order_.end(), rng);
      out.push_back(order_[pos_]);
      pos_ = (pos_ + 1) % order_.size();
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace

TrainedModel train_target(const ModelSpec& spec, const TrainingData& data, const nn::TrainRecipe& recipe,
                          const defenses::DefenseConfig& defense, const data::AugMode& augmentation,
                          const EpochCallback& on_epoch) {
  recipe.validate();
  defenses::validate(defense);
  spec.validate();
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (defenses::needs_reference(defense) && data.reference.empty()) {
    throw ConfigError("defense " + defenses::defense_name(defense) + " requires a non-empty reference split");
  }
  if (data.dataset.sample_shape() != spec.input_shape) {
    throw InvalidInput("dataset samples " + nn::shape_str(data.dataset.sample_shape()) +
                       " do not match model input " + nn::shape_str(spec.input_shape));
  }
  if (data.dataset.num_classes != spec.num_classes) {
    throw InvalidInput("dataset has " + std::to_string(data.dataset.num_classes) + " classes, model expects " +
                       std::to_string(spec.num_classes));
  }

  data::AugMode aug = augmentation;
  if (const auto* da = std::get_if<defenses::DataAug>(&defense)) aug = da->mode;

  Rng rng(recipe.seed);
  TrainedModel model{spec, build_network(spec, rng), {}, defense, aug, recipe};
  const data::Augmenter augmenter(aug, aug.kind == data::AugKind::none ? std::vector<double>{}
                                                                       : data::feature_std(data.dataset));
  const std::size_t k = spec.num_classes;

  nn::Sgd opt(recipe.momentum, recipe.weight_decay);
  nn::Network adversary;
  nn::Sgd adversary_opt(recipe.momentum);
  const AttackModelSpec adversary_spec{.input_dim = k};
  if (std::holds_alternative<defenses::AdvReg>(defense)) adversary = build_network(adversary_spec.model_spec(), rng);
  ReferenceStream reference(data.reference, recipe.batch_size);

  std::vector<std::size_t> order(data.train.begin(), data.train.end());
  for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    const double lr = nn::cosine_lr(epoch, recipe.epochs, recipe.lr0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += recipe.batch_size) {
      const std::size_t end = std::min(order.size(), start + recipe.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<Tensor> xs;
      xs.reserve(idx.size());
      for (auto i : idx) xs.push_back(augmenter.apply(data.dataset.samples[i], rng));
      const Tensor inputs = nn::stack(xs);
      const auto labels = data.dataset.labels_of(idx);
      const Tensor targets = target_rows(labels, k, defense);
      auto params = model.net.params();

      if (const auto* ar = std::get_if<defenses::AdvReg>(&defense)) {
        const auto ref_idx = reference.next(rng);
        const auto round = defenses::advreg_round(model.net, opt, adversary, adversary_opt, inputs, targets,
                                                  data.dataset.batch(ref_idx), ar->lambda, lr,
                                                  nn::cosine_lr(epoch, recipe.epochs, adversary_spec.lr0));
        loss_sum += round.classification_loss;
      } else if (const auto* mm = std::get_if<defenses::MixupMmd>(&defense)) {
        std::vector<std::size_t> perm(idx.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Tensor> mixed_x;
        Tensor mixed_t(Shape{idx.size(), k});
        for (std::size_t i = 0; i < idx.size(); ++i) {
          const auto yi = std::vector<double>(&targets.data()[i * k], &targets.data()[(i + 1) * k]);
          const auto yj = std::vector<double>(&targets.data()[perm[i] * k], &targets.data()[(perm[i] + 1) * k]);
          auto mixed = defenses::mixup(xs[i], yi, xs[perm[i]], yj, mm->alpha, rng);
          mixed_x.push_back(std::move(mixed.x));
          for (std::size_t j = 0; j < k; ++j) mixed_t.at(i, j) = mixed.y[j];
        }
        const auto ref_idx = reference.next(rng);
        const Var cls = nn::soft_cross_entropy(model.net.forward(Var(nn::stack(mixed_x))), mixed_t);
        const Var post_train = nn::softmax(model.net.forward(Var(inputs)));
        const Var post_ref = nn::softmax(model.net.forward(Var(data.dataset.batch(ref_idx))));
        const double bandwidth =
            mm->bandwidth > 0.0 ? mm->bandwidth : defenses::median_bandwidth(post_train.value(), post_ref.value());
        const Var loss = nn::add(cls, nn::scale(nn::mmd_rbf(post_train, post_ref, bandwidth), mm->lambda));
        nn::backward(loss);
        opt.step(params, lr);
        loss_sum += cls.value().item();
      } else if (const auto* dp = std::get_if<defenses::DpSgd>(&defense)) {
        const auto per_sample = nn::per_sample_grads(model.net, inputs, targets);
        defenses::dpsgd_step(params, opt, per_sample, dp->clip, dp->sigma, lr, rng);
        nn::NoGradGuard guard;
        loss_sum += nn::soft_cross_entropy(model.net.forward(Var(inputs)), targets).value().item();
      } else {
        const Var loss = nn::soft_cross_entropy(model.net.forward(Var(inputs)), targets);
        nn::backward(loss);
        opt.step(params, lr);
        loss_sum += loss.value().item();
      }
      ++batches;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.loss = loss_sum / static_cast<double>(batches);
    stats.train_accuracy = split_accuracy(model.net, data.dataset, data.train);
    stats.test_accuracy = split_accuracy(model.net, data.dataset, data.test);
    if (!std::isfinite(stats.loss)) throw StateError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
    model.history.push_back(stats);
    if (on_epoch) on_epoch(epoch + 1, model);
  }
  return model;
}

TrainedModel train_attack_model(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                const AttackModelSpec& spec) {
  if (features.empty()) throw InvalidInput("attack training set is empty");
  if (features.size() != labels.size()) throw InvalidInput("attack features and labels differ in length");
  const std::size_t dim = features.front().size();
  if (dim == 0) throw InvalidInput("attack features are empty vectors");
  if (spec.input_dim != 0 && spec.input_dim != dim) {
    throw InvalidInput("attack feature dimension " + std::to_string(dim) + " does not match spec input_dim " +
                       std::to_string(spec.input_dim));
  }
  data::Dataset ds;
  ds.num_classes = 2;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) {
      throw InvalidInput("attack feature " + std::to_string(i) + " has dimension " +
                         std::to_string(features[i].size()) + ", expected " + std::to_string(dim));
    }
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("attack labels must be 0 or 1");
    ds.samples.push_back(Tensor::from_vector(features[i]));
    ds.labels.push_back(labels[i]);
  }
  AttackModelSpec resolved = spec;
  resolved.input_dim = dim;
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const TrainingData view{ds, all, {}, {}};
  return train_target(resolved.model_spec(), view, resolved.recipe(), defenses::NoDefense{}, data::AugMode{});
}

nn::Posteriors query(const TrainedModel& model, const Tensor& sample) {
  if (sample.shape() != model.spec.input_shape) {
    throw InvalidInput("query sample " + nn::shape_str(sample.shape()) + " does not match model input " +
                       nn::shape_str(model.spec.input_shape));
  }
  Shape batched{1};
  batched.insert(batched.end(), sample.shape().begin(), sample.shape().end());
  const Tensor logits = model.net.logits(sample.reshaped(batched));
  return nn::softmax(logits.data());
}

std::vector<nn::Posteriors> query_batch(const TrainedModel& model, const Tensor& batch) {
  const Shape inner(batch.shape().begin() + 1, batch.shape().end());
  if (inner != model.spec.input_shape) {
    throw InvalidInput("query batch " + nn::shape_str(batch.shape()) + " does not match model input " +
                       nn::shape_str(model.spec.input_shape));
  }
  const Tensor logits = model.net.logits(batch);
  const std::size_t k = logits.dim(1);
  std::vector<nn::Posteriors> out;
  out.reserve(logits.dim(0));
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    out.push_back(nn::softmax(std::span<const double>(&logits.data()[i * k], k)));
  }
  return out;
}

double accuracy(const TrainedModel& model, const data::Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InvalidInput("accuracy over an empty index set");
  return split_accuracy(model.net, ds, indices);
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  nn::save_checkpoint(path, model.net.params());
  nlohmann::json meta{{"spec", model.spec},
                      {"defense", defenses::defense_to_json(model.defense)},
                      {"augmentation", model.augmentation},
                      {"recipe", model.recipe},
                      {"seed", model.recipe.seed},
                      {"history", model.history}};
  std::ofstream out(path.string() + ".json");
  if (!out) throw IoError("cannot write model metadata next to " + path.string());
  out << meta.dump(2) << '\n';
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw IoError("missing model metadata " + path.string() + ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model metadata: ") + e.what());
  }
  TrainedModel model;
  model.spec = meta.at("spec").get<ModelSpec>();
  model.defense = defenses::defense_from_json(meta.at("defense"));
  model.augmentation = meta.at("augmentation").get<data::AugMode>();
  model.recipe = meta.at("recipe").get<nn::TrainRecipe>();
  model.history = meta.at("history").get<std::vector<EpochStats>>();
  Rng rng(model.recipe.seed);
  model.net = build_network(model.spec, rng);
  auto params = model.net.params();
  nn::restore(params, nn::load_checkpoint(path));
  return model;
}

}  // namespace membench::zoo
