#include <algorithm>
#include <array>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "iotids/featsel.hpp"
#include "iotids/ingest.hpp"
#include "support/synthetic.hpp"

using namespace iotids;
using iotids::testing::recovery_split;
using iotids::testing::recovery_train_config;
using iotids::testing::signal_plus_noise;

namespace {

DatasetTable table_from(const std::vector<std::vector<double>>& cols, const std::vector<int>& labels) {
  DatasetTable t;
  t.features = Matrix(labels.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    t.feature_names.push_back("c" + std::to_string(j));
    for (std::size_t i = 0; i < labels.size(); ++i) t.features(i, j) = cols[j][i];
  }
  t.labels = labels;
  return t;
}

nn::ModelSpec dense_first(std::size_t width) {
  return {1, width, {nn::DenseLayer{8, nn::Activation::relu}, nn::DenseLayer{1, nn::Activation::sigmoid}}};
}

// small quick-to-train ablation setup
AblationResult quick_select(const DatasetTable& t, SelectionConfig sel, std::uint64_t seed = 3) {
  return ablation_select(t, recovery_split(t, seed), nn::ModelSpec::cnn_selector(t.cols()),
                         recovery_train_config(seed), sel);
}

}  // namespace

// ---- chi-squared ------------------------------------------------------------

TEST(ChiSquare, PerfectAssociationEqualsRowCount) {
  std::vector<int> y;
  std::vector<double> x;
  for (int i = 0; i < 100; ++i) {
    y.push_back(i % 2);
    x.push_back(i % 2);
  }
  const auto r = chi_square_scores(table_from({x}, y));
  EXPECT_NEAR(r.scores[0], 100.0, 1e-9);
}

TEST(ChiSquare, ConstantFeatureScoresZero) {
  const std::vector<int> y = {0, 1, 0, 1, 1, 0};
  const auto r = chi_square_scores(table_from({{7, 7, 7, 7, 7, 7}}, y));
  EXPECT_EQ(r.scores[0], 0.0);
}

TEST(ChiSquare, ContingencyExample) {
  const std::array<std::array<std::size_t, 2>, 2> table{{{10, 0}, {0, 10}}};
  EXPECT_NEAR(chi_square_statistic(table), 20.0, 1e-12);
  const std::array<std::array<std::size_t, 2>, 2> indep{{{5, 5}, {5, 5}}};
  EXPECT_EQ(chi_square_statistic(indep), 0.0);
}

TEST(ChiSquare, IndependentOracle) {
  // textbook 2x3 example: expected counts from margins
  const std::array<std::array<std::size_t, 2>, 3> t{{{20, 30}, {30, 20}, {25, 25}}};
  double chi = 0.0;
  const double n = 150, c0 = 75, c1 = 75;
  const double rows[3] = {50, 50, 50};
  for (int b = 0; b < 3; ++b) {
    const double e0 = rows[b] * c0 / n, e1 = rows[b] * c1 / n;
    chi += (t[b][0] - e0) * (t[b][0] - e0) / e0 + (t[b][1] - e1) * (t[b][1] - e1) / e1;
  }
  EXPECT_NEAR(chi_square_statistic(t), chi, 1e-12);
  EXPECT_NEAR(chi, 4.0, 1e-12);
}

TEST(ChiSquare, TopMSelection) {
  ChiSquareReport r;
  r.scores = {5, 1, 5, 0};
  r.selected = {0, 2, 1, 3};
  EXPECT_EQ(select_top_chi(r, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_top_chi(r, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(select_top_chi(r, 0), std::invalid_argument);
  EXPECT_THROW(select_top_chi(r, 5), std::invalid_argument);
}

TEST(ChiSquare, TiesBreakByIndex) {
  const std::vector<int> y = {0, 1, 0, 1};
  const auto r = chi_square_scores(table_from({{1, 1, 1, 1}, {2, 2, 2, 2}, {0, 1, 0, 1}}, y));
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{2, 0, 1}));
}

TEST(ChiSquare, InvariantUnderMonotoneAffineMap) {
  const auto t = signal_plus_noise(300, 5, 9);
  DatasetTable u = t;
  for (double& v : u.features.values()) v = 2.0 * v + 7.0;
  EXPECT_EQ(chi_square_scores(t).scores, chi_square_scores(u).scores);
}

TEST(ChiSquare, SignalFeaturesRankFirst) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = chi_square_scores(signal_plus_noise(500, 10, seed));
    const std::set<std::size_t> top3(r.selected.begin(), r.selected.begin() + 3);
    EXPECT_TRUE(top3.count(0) && top3.count(1)) << "seed " << seed;
  }
}

TEST(ChiSquare, Errors) {
  const auto t = table_from({{1, 2, 3}}, {1, 1, 1});
  EXPECT_THROW(chi_square_scores(t), DataError);
  EXPECT_THROW(chi_square_scores(table_from({{1, 2}}, {0, 1}), 1), std::invalid_argument);
}

// ---- weight zeroing -----------------------------------------------------------

TEST(ZeroInputWeights, DenseColumnZeroedOthersUntouched) {
  const auto m = nn::Model::initialize(dense_first(4), 11);
  const auto z = zero_input_weights(m, 2);
  const auto& w = z.parameters()[0].tensor;
  const auto& w0 = m.parameters()[0].tensor;
  for (std::size_t r = 0; r < w.shape[0]; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (c == 2) EXPECT_EQ(w.values[r * 4 + c], 0.0);
      else EXPECT_EQ(w.values[r * 4 + c], w0.values[r * 4 + c]);
    }
  }
  for (std::size_t p = 1; p < m.parameters().size(); ++p) EXPECT_EQ(z.parameters()[p], m.parameters()[p]);
  EXPECT_EQ(z.input_mask(), m.input_mask());
}

TEST(ZeroInputWeights, OutputIgnoresAblatedFeature) {
  for (const auto& spec : {dense_first(5), nn::ModelSpec::cnn_selector(5), nn::ModelSpec::lstm_classifier(5, 4)}) {
    const auto m = nn::Model::initialize(spec, 4);
    const auto z = zero_input_weights(m, 1);
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> x(5);
      for (double& v : x) v = rng.normal();
      std::vector<double> x2 = x;
      x2[1] = 100.0 * rng.normal();
      EXPECT_EQ(z.forward(x), z.forward(x2));
      // equivalent to feeding a zero in that slot to the original network
      std::vector<double> x0 = x;
      x0[1] = 0.0;
      EXPECT_NEAR(z.forward(x), m.forward(x0), 1e-15);
    }
  }
}

TEST(ZeroInputWeights, AllZeroedGivesConstantOutput) {
  for (const auto& spec : {dense_first(3), nn::ModelSpec::cnn_selector(3)}) {
    auto z = nn::Model::initialize(spec, 5);
    for (std::size_t k = 0; k < 3; ++k) z = zero_input_weights(z, k);
    const double c = z.forward(std::vector<double>{0, 0, 0});
    EXPECT_EQ(z.forward(std::vector<double>{3, -2, 9}), c);
    EXPECT_EQ(z.forward(std::vector<double>{-1e3, 1e3, 0.5}), c);
  }
}

TEST(ZeroInputWeights, OutOfRange) {
  const auto m = nn::Model::initialize(dense_first(3), 1);
  EXPECT_THROW(zero_input_weights(m, 3), std::invalid_argument);
}

// ---- ablation selection ---------------------------------------------------------

TEST(Ablation, RecoversSignalFeatures) {
  int passes = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t = signal_plus_noise(500, 10, seed);
    const auto r = quick_select(t, {}, seed);
    const std::set<std::size_t> kept(r.selected.begin(), r.selected.end());
    const bool ok = kept.count(0) && kept.count(1) && kept.size() - 2 <= 2;
    passes += ok;
  }
  EXPECT_GE(passes, 9);
}

TEST(Ablation, ZeroToleranceRemovesInertFeature) {
  auto t = signal_plus_noise(300, 4, 5);
  for (std::size_t i = 0; i < t.rows(); ++i) t.features(i, 3) = 0.0;  // carries nothing
  SelectionConfig sel;
  sel.max_drop = 0.0;
  const auto r = quick_select(t, sel);
  EXPECT_EQ(r.ranking.entries[3].drop, 0.0);
  EXPECT_TRUE(r.ranking.entries[3].removed);
  EXPECT_EQ(std::count(r.selected.begin(), r.selected.end(), 3), 0);
}

TEST(Ablation, NeverRemovesLastFeature) {
  const auto t = signal_plus_noise(200, 5, 2);
  SelectionConfig sel;
  sel.max_drop = 1.0;
  const auto r = quick_select(t, sel);
  EXPECT_EQ(r.selected.size(), 1u);
  EXPECT_TRUE(r.ranking.guard_hit);

  sel.retrain = true;
  const auto rr = quick_select(t, sel);
  EXPECT_EQ(rr.selected.size(), 1u);
  EXPECT_TRUE(rr.ranking.guard_hit);
}

TEST(Ablation, MaxRemovalsCaps) {
  const auto t = signal_plus_noise(200, 6, 4);
  SelectionConfig sel;
  sel.max_drop = 1.0;
  sel.max_removals = 2;
  const auto r = quick_select(t, sel);
  EXPECT_EQ(r.selected.size(), 4u);
  EXPECT_FALSE(r.ranking.guard_hit);
}

TEST(Ablation, RankingCoversEveryFeatureOnce) {
  const auto t = signal_plus_noise(300, 7, 6);
  const auto r = quick_select(t, {});
  ASSERT_EQ(r.ranking.entries.size(), 7u);
  std::vector<std::size_t> order = r.ranking.order;
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(order[i], i);
    EXPECT_EQ(r.ranking.entries[i].feature, i);
    EXPECT_DOUBLE_EQ(r.ranking.entries[i].drop,
                     r.ranking.full_test_accuracy - r.ranking.entries[i].test_accuracy);
    const bool kept = std::count(r.selected.begin(), r.selected.end(), i) == 1;
    EXPECT_NE(kept, r.ranking.entries[i].removed);
  }
  for (std::size_t i = 1; i < r.ranking.order.size(); ++i)
    EXPECT_LE(r.ranking.entries[r.ranking.order[i - 1]].drop, r.ranking.entries[r.ranking.order[i]].drop);
  EXPECT_TRUE(std::is_sorted(r.selected.begin(), r.selected.end()));
  for (const auto& e : r.ranking.entries) {
    if (e.removed) {
      EXPECT_LE(e.drop, 0.005);
    }
  }
}

TEST(Ablation, Deterministic) {
  const auto t = signal_plus_noise(300, 6, 7);
  const auto a = quick_select(t, {}, 12);
  const auto b = quick_select(t, {}, 12);
  EXPECT_EQ(a.selected, b.selected);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.ranking.entries[i].test_accuracy, b.ranking.entries[i].test_accuracy);
    EXPECT_EQ(a.ranking.entries[i].train_accuracy, b.ranking.entries[i].train_accuracy);
  }
}

TEST(Ablation, RetrainKeepsSignal) {
  const auto t = signal_plus_noise(400, 5, 1);
  SelectionConfig sel;
  sel.retrain = true;
  const auto r = quick_select(t, sel, 1);
  EXPECT_TRUE(std::count(r.selected.begin(), r.selected.end(), 0));
  EXPECT_TRUE(std::count(r.selected.begin(), r.selected.end(), 1));
}

TEST(Ablation, Errors) {
  const auto t = signal_plus_noise(50, 3, 1);
  const auto split = recovery_split(t, 1);
  const auto cfg = recovery_train_config(1);
  SelectionConfig bad;
  bad.max_drop = -0.1;
  EXPECT_THROW(ablation_select(t, split, nn::ModelSpec::cnn_selector(3), cfg, bad), std::invalid_argument);
  EXPECT_THROW(ablation_select(t, split, nn::ModelSpec::cnn_selector(4), cfg, {}), std::invalid_argument);
  EXPECT_THROW(ablation_select(t, DataSplit{split.train_rows, {}}, nn::ModelSpec::cnn_selector(3), cfg, {}),
               std::invalid_argument);
  const auto one = t.select_columns(std::vector<std::size_t>{0});
  EXPECT_THROW(ablation_select(one, split, nn::ModelSpec::cnn_selector(1), cfg, {}), std::invalid_argument);
}

// ---- reports --------------------------------------------------------------------

TEST(FeatselCsv, ChiSquareFile) {
  ChiSquareReport r;
  r.scores = {0.5, 2.0, 1.0};
  r.selected = {1, 2, 0};
  std::ostringstream out;
  write_chi_square_csv(out, r, {"a", "b,c", "d"}, std::vector<std::size_t>{1, 2});
  EXPECT_EQ(out.str(),
            "feature,name,score,rank,removed\n"
            "0,a,0.5,3,1\n"
            "1,\"b,c\",2,1,0\n"
            "2,d,1,2,0\n");
}

TEST(FeatselCsv, RankingFile) {
  FeatureRanking r;
  r.entries = {{0, 0.9, 0.8, 0.1, false}, {1, 0.95, 0.9, 0.0, true}};
  std::ostringstream out;
  write_ranking_csv(out, r, {"x", "y"});
  EXPECT_EQ(out.str(),
            "feature,name,train_accuracy,test_accuracy,drop,removed\n"
            "0,x,0.9,0.8,0.1,0\n"
            "1,y,0.95,0.9,0,1\n");
}
