#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccmt/classifier.hpp"
#include "ccmt/dataset.hpp"
#include "ccmt/metrics.hpp"
#include "ccmt/model.hpp"

namespace ccmt {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t eval_every = 1;
  SelectionMetric metric = SelectionMetric::Uar;
  // Token-selection seed used for every evaluation-mode assembly.
  std::uint64_t eval_seed = 0;
  // Also measure eval-mode accuracy on the training split each epoch.
  bool track_train_accuracy = false;
  // Stop once train accuracy reaches this value (implies tracking).
  std::optional<double> stop_at_train_accuracy;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> train_accuracy;
  std::optional<MetricsReport> dev;
};

nlohmann::json to_json(const EpochRecord& e);

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no dev evaluation ran
  double best_metric = 0.0;
};

// Mini-batch softmax cross-entropy with Adam. Token rows and variants are
// resampled every epoch; batch order comes from a seeded shuffle, so the
// result is a pure function of (model init, dataset, split, config). On
// return the model holds the parameters of the best dev epoch (ties keep
// the earliest). Throws ValidationError on empty train/dev splits and
// DivergenceError on a non-finite loss.
TrainResult train(Classifier& model, const Dataset& dataset, const DatasetSplit& split,
                  const TrainConfig& config);

using Predictor = std::function<std::size_t(const UniformTokenSet&)>;

// Evaluation-mode assembly (variant 0, fixed token seed) for every id.
MetricsReport evaluate(const Predictor& predict, std::size_t k, const Dataset& dataset,
                       std::span<const std::uint64_t> ids, std::uint64_t eval_seed = 0);
MetricsReport evaluate(const Classifier& model, const Dataset& dataset,
                       std::span<const std::uint64_t> ids, std::uint64_t eval_seed = 0);

// Mean cross-entropy over a set of assembled samples (no graph).
double mean_loss(const Classifier& model, std::span<const UniformTokenSet> samples);

struct GradCheckOptions {
  double tolerance = 1e-4;
  double h = 1e-5;
  double relative_floor = 1e-6;  // see relative_error()
};

struct ParameterGradCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::vector<std::string> failing;  // parameters with an entry above tolerance
  std::vector<ParameterGradCheck> parameters;
  std::size_t scalar_count = 0;
  double loss = 0.0;
};

// Compares backward() gradients of the sample's cross-entropy with central
// finite differences for every scalar parameter. Failures are reported, not
// thrown. Leaves parameter values unchanged and gradients zeroed.
GradCheckReport grad_check_model(Classifier& model, const UniformTokenSet& sample,
                                 const GradCheckOptions& options = {});

nlohmann::json to_json(const GradCheckReport& r);

// Tab-separated: sample_id, label, then the d values of the final class token.
// Evaluation-mode assembly with `eval_seed`.
void export_class_embeddings(const CCMTModel& model, const Dataset& dataset,
                             const std::filesystem::path& path, std::uint64_t eval_seed = 0);

}  // namespace ccmt
