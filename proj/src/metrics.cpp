#include "ccmt/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "ccmt/error.hpp"

namespace ccmt {

std::string to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::Uar: return "uar";
    case SelectionMetric::Accuracy: return "acc";
    case SelectionMetric::MacroF1: return "f1";
  }
  return "uar";
}

SelectionMetric parse_selection_metric(const std::string& s) {
  if (s == "uar") return SelectionMetric::Uar;
  if (s == "acc") return SelectionMetric::Accuracy;
  if (s == "f1") return SelectionMetric::MacroF1;
  throw ValidationError("unknown metric '" + s + "' (expected uar, acc or f1)");
}

double metric_value(const MetricsReport& r, SelectionMetric m) {
  switch (m) {
    case SelectionMetric::Uar: return r.uar;
    case SelectionMetric::Accuracy: return r.accuracy;
    case SelectionMetric::MacroF1: return r.macro_f1;
  }
  return r.uar;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t c = confusion.size();
  for (const auto& row : confusion)
    if (row.size() != c) throw ValidationError("confusion matrix must be square");

  MetricsReport r;
  r.confusion = confusion;
  r.support.assign(c, 0);
  r.per_class_recall.assign(c, 0.0);
  r.per_class_f1.assign(c, 0.0);
  std::vector<std::uint64_t> predicted(c, 0);
  std::uint64_t total = 0, correct = 0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      r.support[i] += confusion[i][j];
      predicted[j] += confusion[i][j];
      total += confusion[i][j];
      if (i == j) correct += confusion[i][j];
    }
  if (total == 0) throw ValidationError("metrics: empty confusion matrix");
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);

  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t recall_classes = 0, f1_classes = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const auto tp = confusion[i][i];
    if (r.support[i] > 0) {
      r.per_class_recall[i] = static_cast<double>(tp) / static_cast<double>(r.support[i]);
      recall_sum += r.per_class_recall[i];
      ++recall_classes;
    }
    if (r.support[i] > 0 || predicted[i] > 0) {
      // F1 = 2 tp / (2 tp + fp + fn) = 2 tp / (support + predicted)
      r.per_class_f1[i] = 2.0 * static_cast<double>(tp) / static_cast<double>(r.support[i] + predicted[i]);
      f1_sum += r.per_class_f1[i];
      ++f1_classes;
    }
  }
  r.uar = recall_sum / static_cast<double>(recall_classes);
  r.macro_f1 = f1_sum / static_cast<double>(f1_classes);
  return r;
}

MetricsReport compute_metrics(std::span<const std::size_t> labels,
                              std::span<const std::size_t> predictions, std::size_t num_classes) {
  if (labels.size() != predictions.size())
    throw ValidationError("metrics: label and prediction counts differ");
  if (labels.empty()) throw ValidationError("metrics: no samples");
  ConfusionMatrix cm(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes)
      throw ValidationError("metrics: class index outside [0, " + std::to_string(num_classes) + ")");
    ++cm[labels[i]][predictions[i]];
  }
  return metrics_from_confusion(cm);
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"accuracy", r.accuracy},         {"uar", r.uar},
          {"macro_f1", r.macro_f1},         {"per_class_recall", r.per_class_recall},
          {"per_class_f1", r.per_class_f1}, {"support", r.support},
          {"confusion", r.confusion}};
}

std::string format_table(const MetricsReport& r, std::span<const std::string> label_names) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "accuracy  %.4f\nuar       %.4f\nmacro_f1  %.4f\n\n", r.accuracy,
                r.uar, r.macro_f1);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s\n", "class", "support", "recall", "f1");
  os << buf;
  for (std::size_t i = 0; i < r.support.size(); ++i) {
    const std::string name = i < label_names.size() && !label_names[i].empty()
                                 ? label_names[i]
                                 : std::to_string(i);
    std::snprintf(buf, sizeof buf, "%-16s %8llu %8.4f %8.4f\n", name.c_str(),
                  static_cast<unsigned long long>(r.support[i]), r.per_class_recall[i],
                  r.per_class_f1[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace ccmt
