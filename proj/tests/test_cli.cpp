#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kData = IOTIDS_TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "iotids_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// runs the CLI with `args`, output captured in <dir>/log.txt
int cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + IOTIDS_CLI_PATH + "\" " + args + " > \"" +
                          (dir / "log.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kMiniConfig = "--config " + quoted(kData / "mini_config.json");
const std::string kMiniData = "--data " + quoted(kData / "unsw_mini.csv");

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(cli("", dir), 2);
  EXPECT_EQ(cli("frobnicate", dir), 2);
  EXPECT_EQ(cli("run --no-such-flag", dir), 2);
  EXPECT_EQ(cli("evaluate " + kMiniData, dir), 2);  // --model is required
  EXPECT_EQ(cli("--help", dir), 0);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("config");
  EXPECT_EQ(cli("--config " + quoted(dir / "nope.json") + " ingest", dir), 2);
  EXPECT_EQ(cli("--schema kdd99 " + kMiniData + " ingest", dir), 2);
  std::ofstream(dir / "bad.json") << R"({"k_folds": 1})";
  EXPECT_EQ(cli("--config " + quoted(dir / "bad.json") + " run", dir), 2);
  EXPECT_NE(slurp(dir / "log.txt").find("k_folds"), std::string::npos);
  EXPECT_EQ(cli(kMiniConfig + " --out " + quoted(dir / "svd") + " svd --rank 500", dir), 2);
}

TEST(Cli, DataErrorsExitThree) {
  const auto dir = scratch("data");
  EXPECT_EQ(cli("--data " + quoted(dir / "missing.csv") + " ingest", dir), 3);
  std::ofstream(dir / "ragged.csv") << "dur,label\n1,0\n2\n";
  EXPECT_EQ(cli("--data " + quoted(dir / "ragged.csv") + " ingest", dir), 3);
  EXPECT_EQ(cli(kMiniData + " evaluate --model " + quoted(dir / "no_model"), dir), 3);
}

TEST(Cli, Ingest) {
  const auto dir = scratch("ingest");
  ASSERT_EQ(cli(kMiniData + " --out " + quoted(dir) + " ingest", dir), 0) << slurp(dir / "log.txt");
  const auto j = nlohmann::json::parse(slurp(dir / "ingest.json"));
  EXPECT_EQ(j["rows"], 400);
  EXPECT_EQ(j["schema"], "unsw-nb15");
  EXPECT_EQ(j["feature_names"].size(), j["features"].get<std::size_t>());

  ASSERT_EQ(cli(kMiniData + " --sample-rows 50 --out " + quoted(dir) + " ingest", dir), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "ingest.json"))["rows"], 50);
}

TEST(Cli, SvdDump) {
  const auto dir = scratch("svd");
  ASSERT_EQ(cli(kMiniData + " --out " + quoted(dir) + " svd --rank 4", dir), 0) << slurp(dir / "log.txt");
  const auto s = slurp(dir / "S.csv");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
  const auto v = slurp(dir / "V.csv");
  EXPECT_EQ(v.substr(0, v.find('\n')), "v0,v1,v2,v3");
  const auto u = slurp(dir / "U.csv");
  EXPECT_EQ(std::count(u.begin(), u.end(), '\n'), 401);
}

TEST(Cli, SelectWritesRankings) {
  const auto dir = scratch("select");
  ASSERT_EQ(cli(kMiniConfig + " --out " + quoted(dir) + " select", dir), 0) << slurp(dir / "log.txt");
  const auto chi = slurp(dir / "chi2.csv");
  EXPECT_EQ(chi.substr(0, chi.find('\n')), "feature,name,score,rank,removed");
  EXPECT_EQ(std::count(chi.begin(), chi.end(), '\n'), 9);  // header + 8 svd components
  const auto ranking = slurp(dir / "ranking.csv");
  EXPECT_EQ(ranking.substr(0, ranking.find('\n')), "feature,name,train_accuracy,test_accuracy,drop,removed");
}

TEST(Cli, TrainThenEvaluate) {
  const auto dir = scratch("train");
  ASSERT_EQ(cli(kMiniConfig + " --out " + quoted(dir / "model") + " train", dir), 0) << slurp(dir / "log.txt");
  EXPECT_TRUE(fs::exists(dir / "model" / "model.mgnn"));
  ASSERT_EQ(cli(kMiniConfig + " --out " + quoted(dir / "eval") + " evaluate --model " + quoted(dir / "model"), dir),
            0)
      << slurp(dir / "log.txt");
  const auto m = nlohmann::json::parse(slurp(dir / "eval" / "metrics.json"));
  EXPECT_EQ(m["counts"]["tp"].get<int>() + m["counts"]["fp"].get<int>() + m["counts"]["tn"].get<int>() +
                m["counts"]["fn"].get<int>(),
            400);
  EXPECT_GT(m["accuracy"].get<double>(), 0.5);
}

TEST(Cli, RunIsByteIdenticalAcrossThreadCounts) {
  const auto dir = scratch("run");
  ASSERT_EQ(cli(kMiniConfig + " --out " + quoted(dir / "a") + " run", dir), 0) << slurp(dir / "log.txt");
  ASSERT_EQ(cli(kMiniConfig + " --threads 3 --out " + quoted(dir / "b") + " run", dir), 0);
  for (const char* f : {"report.json", "metrics.csv", "chart_data.csv"}) {
    const auto a = slurp(dir / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(cli(kMiniConfig + " --seed 8 --out " + quoted(dir / "c") + " run", dir), 0);
  EXPECT_NE(slurp(dir / "a" / "report.json"), slurp(dir / "c" / "report.json"));
}
