#include "ccmt/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ccmt/error.hpp"
#include "ccmt/numeric_grad.hpp"
#include "ccmt/optim.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {
constexpr std::uint64_t kSaltShuffle = 0x73687566;  // "shuf"
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("train config: lr must be >= 0");
  if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  if (epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (eval_every == 0) throw ValidationError("train config: eval_every must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ValidationError("train config: betas must lie in (0, 1)");
  if (!(eps > 0.0)) throw ValidationError("train config: eps must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"lr", c.lr},
                   {"batch_size", c.batch_size},
                   {"epochs", c.epochs},
                   {"seed", c.seed},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"eps", c.eps},
                   {"eval_every", c.eval_every},
                   {"metric", to_string(c.metric)},
                   {"eval_seed", c.eval_seed},
                   {"track_train_accuracy", c.track_train_accuracy}};
  if (c.stop_at_train_accuracy) j["stop_at_train_accuracy"] = *c.stop_at_train_accuracy;
  return j;
}

nlohmann::json to_json(const EpochRecord& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"loss", e.train_loss}};
  if (e.train_accuracy) j["train_accuracy"] = *e.train_accuracy;
  if (e.dev) {
    j["dev"] = {{"accuracy", e.dev->accuracy}, {"uar", e.dev->uar}, {"macro_f1", e.dev->macro_f1}};
  }
  return j;
}

MetricsReport evaluate(const Predictor& predict, std::size_t k, const Dataset& dataset,
                       std::span<const std::uint64_t> ids, std::uint64_t eval_seed) {
  if (ids.empty()) throw ValidationError("evaluate: empty split");
  const auto records = select_records(dataset, ids);
  std::vector<std::size_t> labels, preds;
  labels.reserve(records.size());
  preds.reserve(records.size());
  for (const auto* rec : records) {
    const auto sample = assemble(*rec, k, eval_seed, true);
    labels.push_back(rec->label);
    preds.push_back(predict(sample));
  }
  return compute_metrics(labels, preds, dataset.header.num_classes);
}

MetricsReport evaluate(const Classifier& model, const Dataset& dataset,
                       std::span<const std::uint64_t> ids, std::uint64_t eval_seed) {
  if (model.num_classes() != dataset.header.num_classes)
    throw ValidationError("evaluate: model predicts " + std::to_string(model.num_classes()) +
                          " classes, dataset has " + std::to_string(dataset.header.num_classes));
  return evaluate([&](const UniformTokenSet& s) { return predict(model, s); },
                  model.tokens_per_modality(), dataset, ids, eval_seed);
}

double mean_loss(const Classifier& model, std::span<const UniformTokenSet> samples) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : samples) total += cross_entropy(model.forward(s), s.label).item();
  return total / static_cast<double>(samples.size());
}

TrainResult train(Classifier& model, const Dataset& dataset, const DatasetSplit& split,
                  const TrainConfig& config) {
  config.validate();
  if (split.train.empty()) throw ValidationError("train: empty train split");
  if (split.dev.empty()) throw ValidationError("train: empty dev split");
  split.validate(dataset.ids());
  if (model.num_classes() != dataset.header.num_classes)
    throw ValidationError("train: model predicts " + std::to_string(model.num_classes()) +
                          " classes, dataset has " + std::to_string(dataset.header.num_classes));

  const auto train_records = select_records(dataset, split.train);
  const std::size_t k = model.tokens_per_modality();
  auto& params = model.parameters();
  AdamState adam(AdamOptions{config.lr, config.beta1, config.beta2, config.eps});
  params.zero_grad();

  TrainResult result;
  std::vector<std::vector<double>> best;
  bool have_best = false;
  const bool track = config.track_train_accuracy || config.stop_at_train_accuracy.has_value();

  std::vector<std::size_t> order(train_records.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(mix_seed({config.seed, epoch, kSaltShuffle}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);

    const std::uint64_t token_seed = epoch_seed(config.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batch_index = 1;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& rec = *train_records[order[i]];
        const auto sample = assemble(rec, k, token_seed, false);
        Tensor loss = cross_entropy(model.forward(sample), sample.label);
        batch_loss += loss.item();
        scale(loss, inv_batch).backward();
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch_index),
                              epoch, batch_index);
      adam_step(params, adam, /*zero_grad=*/true);
      epoch_loss += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    if (track) rec.train_accuracy = evaluate(model, dataset, split.train, config.eval_seed).accuracy;
    const bool last = epoch == config.epochs;
    const bool reached = config.stop_at_train_accuracy && rec.train_accuracy &&
                         *rec.train_accuracy >= *config.stop_at_train_accuracy;
    if (epoch % config.eval_every == 0 || last || reached) {
      rec.dev = evaluate(model, dataset, split.dev, config.eval_seed);
      const double value = metric_value(*rec.dev, config.metric);
      if (!have_best || value > result.best_metric) {
        result.best_metric = value;
        result.best_epoch = epoch;
        best = params.snapshot();
        have_best = true;
      }
    }
    result.history.push_back(std::move(rec));
    if (reached) break;
  }
  if (have_best) params.restore(best);
  return result;
}

GradCheckReport grad_check_model(Classifier& model, const UniformTokenSet& sample,
                                 const GradCheckOptions& options) {
  auto& params = model.parameters();
  params.zero_grad();
  GradCheckReport report;
  {
    Tensor loss = cross_entropy(model.forward(sample), sample.label);
    report.loss = loss.item();
    loss.backward();
  }
  auto eval_loss = [&] {
    NoGradGuard no_grad;
    return cross_entropy(model.forward(sample), sample.label).item();
  };

  for (auto& p : params.items()) {
    ParameterGradCheck entry{p.name, 0.0, 0.0};
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto values = p.tensor.mutable_values();
    const std::vector<double> original(values.begin(), values.end());
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), values.begin());
          return eval_loss();
        },
        original, options.h);
    std::copy(original.begin(), original.end(), values.begin());

    for (std::size_t i = 0; i < analytic.size(); ++i) {
      entry.max_relative_error =
          std::max(entry.max_relative_error, relative_error(analytic[i], numeric[i], options.relative_floor));
      entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(analytic[i]));
    }
    if (entry.max_relative_error >= options.tolerance || !std::isfinite(entry.max_relative_error))
      report.failing.push_back(p.name);
    if (report.worst_parameter.empty() || entry.max_relative_error > report.max_relative_error) {
      report.max_relative_error = entry.max_relative_error;
      report.worst_parameter = p.name;
    }
    report.scalar_count += analytic.size();
    report.parameters.push_back(std::move(entry));
  }
  params.zero_grad();
  report.passed = report.failing.empty();
  return report;
}

nlohmann::json to_json(const GradCheckReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : r.parameters)
    per.push_back({{"name", p.name}, {"max_relative_error", p.max_relative_error}, {"max_abs_grad", p.max_abs_grad}});
  return {{"passed", r.passed},
          {"max_relative_error", r.max_relative_error},
          {"worst_parameter", r.worst_parameter},
          {"failing", r.failing},
          {"scalar_count", r.scalar_count},
          {"loss", r.loss},
          {"parameters", std::move(per)}};
}

void export_class_embeddings(const CCMTModel& model, const Dataset& dataset,
                             const std::filesystem::path& path, std::uint64_t eval_seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  NoGradGuard no_grad;
  char buf[32];
  for (const auto& rec : dataset.records) {
    const auto sample = assemble(rec, model.tokens_per_modality(), eval_seed, true);
    const auto trace = model.forward_trace(sample);
    out << rec.sample_id << '\t' << rec.label;
    for (double v : trace.class_embedding.values()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace ccmt
