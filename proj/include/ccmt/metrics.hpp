#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ccmt {

using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;  // [true][predicted]

struct MetricsReport {
  double accuracy = 0.0;
  double uar = 0.0;       // mean recall over classes with support > 0
  double macro_f1 = 0.0;  // mean F1 over classes that occur in truth or predictions
  std::vector<double> per_class_recall;  // 0 where a class has no support
  std::vector<double> per_class_f1;
  std::vector<std::uint64_t> support;
  ConfusionMatrix confusion;
};

enum class SelectionMetric { Uar, Accuracy, MacroF1 };

std::string to_string(SelectionMetric m);
SelectionMetric parse_selection_metric(const std::string& s);  // uar | acc | f1
double metric_value(const MetricsReport& r, SelectionMetric m);

// All metrics derive from the confusion matrix alone.
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);
// Throws ValidationError for labels or predictions outside [0, num_classes).
MetricsReport compute_metrics(std::span<const std::size_t> labels,
                              std::span<const std::size_t> predictions, std::size_t num_classes);

nlohmann::json to_json(const MetricsReport& r);
std::string format_table(const MetricsReport& r, std::span<const std::string> label_names = {});

}  // namespace ccmt
