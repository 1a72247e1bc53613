#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "membench/augment.hpp"
#include "membench/data.hpp"
#include "membench/defenses.hpp"
#include "membench/nn.hpp"
#include "membench/optim.hpp"

namespace membench::zoo {

enum class ModelKind { mlp, small_cnn };

const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Desk-scale architecture. For mlp, `widths` are the hidden layer widths;
/// for small_cnn, the two conv channel counts (3x3, padding 1) feeding one
/// dense layer.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::size_t> widths = {64, 64};
  std::size_t num_classes = 2;
  nn::Shape input_shape;  // per sample, without the batch axis

  void validate() const;
};

nn::Network build_network(const ModelSpec& spec, Rng& rng);

/// Attack classifier: dense 64 -> 32 -> 2 over attack features.
struct AttackModelSpec {
  std::size_t input_dim = 0;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr0 = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  ModelSpec model_spec() const;
  nn::TrainRecipe recipe() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based: stats after this many epochs
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = -1.0;  // -1 when no test split was supplied
};

struct TrainedModel {
  ModelSpec spec;
  nn::Network net;
  std::vector<EpochStats> history;
  defenses::DefenseConfig defense;
  data::AugMode augmentation;
  nn::TrainRecipe recipe;

  std::string defense_tag() const { return defenses::defense_name(defense); }
};

/// Index views into one dataset: members, defense reference data, held-out test.
struct TrainingData {
  const data::Dataset& dataset;
  std::span<const std::size_t> train;
  std::span<const std::size_t> reference;
  std::span<const std::size_t> test;
};

TrainingData target_view(const data::Dataset& ds, const data::SplitPlan& plan);
TrainingData shadow_view(const data::Dataset& ds, const data::SplitPlan& plan);

// Called after every epoch with the 1-based epoch count.
using EpochCallback = std::function<void(std::size_t epoch, const TrainedModel& model)>;

// Trains a classifier on data.train with the defense's training hook. A
// DataAug defense overrides `augmentation`. MemGuard leaves training
// untouched (it wraps queries instead).
TrainedModel train_target(const ModelSpec& spec, const TrainingData& data, const nn::TrainRecipe& recipe,
                          const defenses::DefenseConfig& defense, const data::AugMode& augmentation,
                          const EpochCallback& on_epoch = {});

// Binary member (1) / non-member (0) classifier over equal-length features.
TrainedModel train_attack_model(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                const AttackModelSpec& spec);

nn::Posteriors query(const TrainedModel& model, const nn::Tensor& sample);
std::vector<nn::Posteriors> query_batch(const TrainedModel& model, const nn::Tensor& batch);
double accuracy(const TrainedModel& model, const data::Dataset& ds, std::span<const std::size_t> indices);

// Writes `<path>` (parameter checkpoint) and `<path>.json` (metadata sidecar).
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace membench::zoo
