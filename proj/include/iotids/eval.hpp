#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace iotids {

// Positive class = attack = label 1.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t positives() const { return tp + fn; }  // P
  std::size_t negatives() const { return fp + tn; }  // N

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A sample is predicted positive iff p >= threshold.
inline ConfusionCounts confusion(std::span<const int> labels, std::span<const double> probabilities,
                                 double threshold = 0.5) {
  if (labels.size() != probabilities.size()) throw std::invalid_argument("confusion: length mismatch");
  if (labels.empty()) throw std::invalid_argument("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Metrics with a zero denominator are undefined (nullopt), never 0.
namespace detail {
inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline std::optional<double> fpr(const ConfusionCounts& c) { return detail::ratio(c.fp, c.negatives()); }
inline std::optional<double> frr(const ConfusionCounts& c) { return detail::ratio(c.fn, c.positives()); }
inline std::optional<double> accuracy(const ConfusionCounts& c) { return detail::ratio(c.tp + c.tn, c.total()); }
inline std::optional<double> precision(const ConfusionCounts& c) { return detail::ratio(c.tp, c.tp + c.fp); }
inline std::optional<double> recall(const ConfusionCounts& c) { return detail::ratio(c.tp, c.positives()); }

// harmonic mean of precision and recall
inline std::optional<double> f_measure(const ConfusionCounts& c) {
  const auto p = precision(c);
  const auto r = recall(c);
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

enum class Metric { fpr, frr, accuracy, precision, recall, f_measure };
inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::fpr,       Metric::frr,    Metric::accuracy,
                                                     Metric::precision, Metric::recall, Metric::f_measure};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::fpr: return "fpr";
    case Metric::frr: return "frr";
    case Metric::accuracy: return "accuracy";
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::f_measure: return "f_measure";
  }
  return "?";
}

struct MetricsReport {
  std::optional<double> fpr, frr, accuracy, precision, recall, f_measure;
  ConfusionCounts counts;
  double threshold = 0.5;

  static MetricsReport from_counts(const ConfusionCounts& c, double threshold = 0.5) {
    return {iotids::fpr(c),    iotids::frr(c),    iotids::accuracy(c), iotids::precision(c),
            iotids::recall(c), iotids::f_measure(c), c,                 threshold};
  }

  std::optional<double> get(Metric m) const {
    switch (m) {
      case Metric::fpr: return fpr;
      case Metric::frr: return frr;
      case Metric::accuracy: return accuracy;
      case Metric::precision: return precision;
      case Metric::recall: return recall;
      case Metric::f_measure: return f_measure;
    }
    return std::nullopt;
  }

  // fixed key order; undefined metrics serialize as null
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (Metric m : kAllMetrics) {
      const auto v = get(m);
      j[metric_name(m)] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    }
    j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}};
    j["threshold"] = threshold;
    return j;
  }
};

inline MetricsReport evaluate(std::span<const int> labels, std::span<const double> probabilities,
                              double threshold = 0.5) {
  return MetricsReport::from_counts(confusion(labels, probabilities, threshold), threshold);
}

struct MetricSummary {
  std::optional<double> mean;
  std::optional<double> stddev;  // sample standard deviation; 0 for a single value
  std::optional<double> min;
  std::optional<double> max;
  std::size_t count = 0;     // folds where the metric was defined
  std::size_t excluded = 0;  // folds where it was undefined

  nlohmann::ordered_json to_json() const {
    auto opt = [](const std::optional<double>& v) {
      return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    return {{"mean", opt(mean)}, {"std", opt(stddev)}, {"min", opt(min)},
            {"max", opt(max)},   {"count", count},     {"excluded", excluded}};
  }
};

inline MetricSummary summarize(std::span<const double> values, std::size_t excluded = 0) {
  MetricSummary s;
  s.count = values.size();
  s.excluded = excluded;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  s.mean = mean;
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

struct FoldSummary {
  std::vector<MetricsReport> folds;
  std::array<MetricSummary, kAllMetrics.size()> metrics;

  const MetricSummary& get(Metric m) const { return metrics[static_cast<std::size_t>(m)]; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (Metric m : kAllMetrics) j[metric_name(m)] = get(m).to_json();
    return j;
  }
};

// Per-metric mean and sample std over the folds where the metric is defined.
inline FoldSummary aggregate(std::span<const MetricsReport> folds) {
  if (folds.empty()) throw std::invalid_argument("aggregate: no fold reports");
  FoldSummary out;
  out.folds.assign(folds.begin(), folds.end());
  for (Metric m : kAllMetrics) {
    std::vector<double> values;
    std::size_t excluded = 0;
    for (const auto& f : folds) {
      if (const auto v = f.get(m)) values.push_back(*v);
      else ++excluded;
    }
    out.metrics[static_cast<std::size_t>(m)] = summarize(values, excluded);
  }
  return out;
}

}  // namespace iotids
