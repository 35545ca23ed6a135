#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "iotids/csv.hpp"
#include "iotids/dataset.hpp"
#include "iotids/error.hpp"
#include "iotids/format.hpp"
#include "iotids/nn/model.hpp"
#include "iotids/nn/train.hpp"

namespace iotids {

// ---- chi-squared filter -----------------------------------------------------

// Pearson statistic of a (bin x class) contingency table; cells with zero
// expected count are skipped.
inline double chi_square_statistic(std::span<const std::array<std::size_t, 2>> table) {
  std::array<double, 2> col{0.0, 0.0};
  std::vector<double> row(table.size(), 0.0);
  double n = 0.0;
  for (std::size_t b = 0; b < table.size(); ++b) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double o = static_cast<double>(table[b][c]);
      row[b] += o;
      col[c] += o;
      n += o;
    }
  }
  if (n == 0.0) return 0.0;
  double chi = 0.0;
  for (std::size_t b = 0; b < table.size(); ++b) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double expected = row[b] * col[c] / n;
      if (expected == 0.0) continue;
      const double diff = static_cast<double>(table[b][c]) - expected;
      chi += diff * diff / expected;
    }
  }
  return chi;
}

// Cut points at the bins-quantiles of `values`, deduplicated. A value falls in
// bin upper_bound(cuts, x).
inline std::vector<double> quantile_cuts(std::vector<double> values, std::size_t bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> cuts;
  const std::size_t n = values.size();
  for (std::size_t b = 1; b < bins; ++b) cuts.push_back(values[b * n / bins]);
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

struct ChiSquareReport {
  std::vector<double> scores;
  std::size_t bins = 0;
  std::vector<std::size_t> selected;  // descending score, ties by ascending index
};

inline ChiSquareReport chi_square_scores(const DatasetTable& table, std::size_t bins = 10) {
  if (bins < 2) throw std::invalid_argument("chi_square_scores: bins must be >= 2");
  if (table.rows() == 0) throw std::invalid_argument("chi_square_scores: empty table");
  const std::size_t pos = table.positives();
  if (pos == 0 || pos == table.rows())
    throw DataError("chi_square_scores: single-class table, scores undefined");

  ChiSquareReport report;
  report.bins = bins;
  for (std::size_t j = 0; j < table.cols(); ++j) {
    const auto column = table.features.column(j);
    const auto cuts = quantile_cuts(column, bins);
    std::vector<std::array<std::size_t, 2>> counts(cuts.size() + 1, {0, 0});
    for (std::size_t r = 0; r < column.size(); ++r) {
      const auto b = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), column[r]) - cuts.begin());
      ++counts[b][table.labels[r] == 1];
    }
    report.scores.push_back(chi_square_statistic(counts));
  }
  report.selected.resize(table.cols());
  std::iota(report.selected.begin(), report.selected.end(), std::size_t{0});
  std::stable_sort(report.selected.begin(), report.selected.end(),
                   [&](std::size_t a, std::size_t b) { return report.scores[a] > report.scores[b]; });
  return report;
}

// Top-m features, returned in ascending index order.
inline std::vector<std::size_t> select_top_chi(const ChiSquareReport& report, std::size_t m) {
  if (m < 1 || m > report.selected.size())
    throw std::invalid_argument("select_top_chi: m = " + std::to_string(m) + " out of range [1, " +
                                std::to_string(report.selected.size()) + "]");
  std::vector<std::size_t> out(report.selected.begin(), report.selected.begin() + m);
  std::sort(out.begin(), out.end());
  return out;
}

// ---- weight ablation ----------------------------------------------------------

// Disconnects input feature k from the network. A dense first layer gets its
// weight column k zeroed; other first layers get the input masked instead.
inline nn::Model zero_input_weights(const nn::Model& model, std::size_t k) {
  if (k >= model.spec().input_width())
    throw std::invalid_argument("zero_input_weights: feature " + std::to_string(k) + " out of range");
  nn::Model out = model;
  if (std::holds_alternative<nn::DenseLayer>(model.spec().layers.front())) {
    auto& w = out.parameters().front().tensor;
    const std::size_t width = w.shape[1];
    for (std::size_t r = 0; r < w.shape[0]; ++r) w.values[r * width + k] = 0.0;
  } else {
    out.input_mask()[k] = 0.0;
  }
  return out;
}

struct SelectionConfig {
  double max_drop = 0.005;                 // R
  std::optional<std::size_t> max_removals;
  bool retrain = false;

  void validate() const {
    if (!(max_drop >= 0.0)) throw std::invalid_argument("SelectionConfig: max_drop must be >= 0");
  }
};

struct DataSplit {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

struct FeatureScore {
  std::size_t feature = 0;
  double train_accuracy = 0.0;  // R_k
  double test_accuracy = 0.0;   // R'_k
  double drop = 0.0;            // full test accuracy - R'_k
  bool removed = false;
};

struct FeatureRanking {
  double full_train_accuracy = 0.0;
  double full_test_accuracy = 0.0;
  std::vector<FeatureScore> entries;  // one per input feature, by feature index
  std::vector<std::size_t> order;     // candidate order: ascending drop
  bool guard_hit = false;             // stopped to keep the last feature
};

struct AblationResult {
  std::vector<std::size_t> selected;  // surviving features, ascending
  FeatureRanking ranking;
};

namespace detail {

inline std::vector<std::size_t> ablation_order(const std::vector<FeatureScore>& entries) {
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].drop != entries[b].drop) return entries[a].drop < entries[b].drop;
    return entries[a].train_accuracy > entries[b].train_accuracy;
  });
  return order;
}

// Trains N on `features` of the train split and scores every single-feature
// ablation. Entry i refers to features[i].
inline FeatureRanking score_ablations(const DatasetTable& train, const DatasetTable& test,
                                      const std::vector<std::size_t>& features, nn::ModelSpec spec,
                                      const nn::TrainConfig& cfg) {
  const DatasetTable tr = train.select_columns(features);
  const DatasetTable te = test.select_columns(features);
  spec.input_length = features.size() / spec.input_channels;
  const nn::Model net = nn::train(spec, tr, cfg).model;
  FeatureRanking ranking;
  ranking.full_train_accuracy = nn::accuracy(net, tr);
  ranking.full_test_accuracy = nn::accuracy(net, te);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const nn::Model ablated = zero_input_weights(net, i);
    FeatureScore s;
    s.feature = features[i];
    s.train_accuracy = nn::accuracy(ablated, tr);
    s.test_accuracy = nn::accuracy(ablated, te);
    s.drop = ranking.full_test_accuracy - s.test_accuracy;
    ranking.entries.push_back(s);
  }
  ranking.order = ablation_order(ranking.entries);
  return ranking;
}

}  // namespace detail

// Train N on all features, score each N_k with input k zeroed, then remove
// features in ascending order of test-accuracy drop while the drop stays
// within R. At least one feature always survives.
inline AblationResult ablation_select(const DatasetTable& table, const DataSplit& split,
                                      const nn::ModelSpec& spec, const nn::TrainConfig& train_cfg,
                                      const SelectionConfig& sel) {
  sel.validate();
  if (table.cols() < 2) throw std::invalid_argument("ablation_select: need at least 2 features");
  if (split.train_rows.empty() || split.test_rows.empty())
    throw std::invalid_argument("ablation_select: split needs train and test rows");
  if (spec.input_channels != 1) throw std::invalid_argument("ablation_select: expects a 1-channel input");
  if (spec.input_width() != table.cols())
    throw std::invalid_argument("ablation_select: model width does not match table");

  const DatasetTable train = table.subset(split.train_rows);
  const DatasetTable test = table.subset(split.test_rows);
  std::vector<std::size_t> active(table.cols());
  std::iota(active.begin(), active.end(), std::size_t{0});

  AblationResult result;
  result.ranking = detail::score_ablations(train, test, active, spec, train_cfg);
  auto& entries = result.ranking.entries;
  std::set<std::size_t> removed;

  auto may_remove = [&](const FeatureScore& s) {
    if (s.drop > sel.max_drop) return false;
    if (sel.max_removals && removed.size() >= *sel.max_removals) return false;
    if (active.size() - removed.size() <= 1) {
      result.ranking.guard_hit = true;
      return false;
    }
    return true;
  };

  if (!sel.retrain) {
    for (std::size_t idx : result.ranking.order) {
      if (!may_remove(entries[idx])) break;
      removed.insert(entries[idx].feature);
      entries[idx].removed = true;
    }
  } else {
    // retrain N on the surviving inputs after every removal
    FeatureRanking round = result.ranking;
    while (true) {
      const FeatureScore& best = round.entries[round.order.front()];
      if (!may_remove(best)) break;
      removed.insert(best.feature);
      entries[best.feature].removed = true;
      std::vector<std::size_t> survivors;
      for (std::size_t f : active)
        if (!removed.count(f)) survivors.push_back(f);
      if (survivors.size() < 2) {
        if (survivors.size() == 1 && active.size() > 1) result.ranking.guard_hit = true;
        break;
      }
      round = detail::score_ablations(train, test, survivors, spec, train_cfg);
    }
  }
  for (std::size_t f : active)
    if (!removed.count(f)) result.selected.push_back(f);
  return result;
}

// ---- CSV reports --------------------------------------------------------------

inline void write_chi_square_csv(std::ostream& out, const ChiSquareReport& report,
                                 const std::vector<std::string>& names,
                                 std::span<const std::size_t> kept) {
  const std::set<std::size_t> keep(kept.begin(), kept.end());
  out << "feature,name,score,rank,removed\n";
  std::vector<std::size_t> rank(report.scores.size());
  for (std::size_t r = 0; r < report.selected.size(); ++r) rank[report.selected[r]] = r + 1;
  for (std::size_t j = 0; j < report.scores.size(); ++j) {
    out << j << ',' << csv::escape(names.at(j)) << ',' << format_double(report.scores[j]) << ','
        << rank[j] << ',' << (keep.count(j) ? 0 : 1) << '\n';
  }
}

inline void write_ranking_csv(std::ostream& out, const FeatureRanking& ranking,
                              const std::vector<std::string>& names) {
  out << "feature,name,train_accuracy,test_accuracy,drop,removed\n";
  for (const auto& e : ranking.entries) {
    out << e.feature << ',' << csv::escape(names.at(e.feature)) << ','
        << format_double(e.train_accuracy) << ',' << format_double(e.test_accuracy) << ','
        << format_double(e.drop) << ',' << (e.removed ? 1 : 0) << '\n';
  }
}

}  // namespace iotids
