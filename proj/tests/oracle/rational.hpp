#pragma once

// Exact rational arithmetic for metric oracles.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rational {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction() = default;
  Fraction(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw std::domain_error("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const auto g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Fraction operator+(Fraction a, Fraction b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Fraction operator/(Fraction a, Fraction b) { return {a.num * b.den, a.den * b.num}; }
  friend bool operator==(Fraction a, Fraction b) { return a.num == b.num && a.den == b.den; }
};

struct ExactMetrics {
  Fraction accuracy, uar, macro_f1;
};

// confusion[true][predicted]
inline ExactMetrics exact_metrics(const std::vector<std::vector<std::uint64_t>>& cm) {
  const std::size_t c = cm.size();
  std::int64_t total = 0, correct = 0;
  std::vector<std::int64_t> support(c, 0), predicted(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const auto v = static_cast<std::int64_t>(cm[i][j]);
      total += v;
      support[i] += v;
      predicted[j] += v;
      if (i == j) correct += v;
    }
  ExactMetrics m;
  m.accuracy = Fraction(correct, total);
  Fraction recall_sum(0), f1_sum(0);
  std::int64_t with_support = 0, f1_classes = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const auto tp = static_cast<std::int64_t>(cm[i][i]);
    if (support[i] > 0) {
      recall_sum = recall_sum + Fraction(tp, support[i]);
      ++with_support;
    }
    if (support[i] + predicted[i] > 0) {
      f1_sum = f1_sum + Fraction(2 * tp, support[i] + predicted[i]);
      ++f1_classes;
    }
  }
  m.uar = recall_sum / Fraction(with_support);
  m.macro_f1 = f1_sum / Fraction(f1_classes);
  return m;
}

}  // namespace rational
