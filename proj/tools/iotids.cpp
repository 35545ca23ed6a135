// iotids command-line tool: ingest, svd, select, train, evaluate, run.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iotids/iotids.hpp"

namespace fs = std::filesystem;
using namespace iotids;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> sample_rows;
  std::optional<std::size_t> threads;
  std::vector<std::string> data;
  std::string schema;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg = g.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.sample_rows) cfg.dataset.sample_rows = *g.sample_rows;
  if (g.threads) cfg.threads = *g.threads;
  if (!g.data.empty()) {
    cfg.dataset.paths = g.data;
    cfg.base_dir.clear();  // command-line paths are relative to the working directory
  }
  if (!g.schema.empty()) {
    cfg.dataset.preset = g.schema;
    cfg.dataset.schema.reset();
  }
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return out;
}

std::string matrix_csv(const Matrix& m, const std::string& prefix) {
  std::string text;
  for (std::size_t j = 0; j < m.cols(); ++j) text += (j ? "," : "") + prefix + std::to_string(j);
  text += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) text += (j ? "," : "") + format_double(m(i, j));
    text += '\n';
  }
  return text;
}

std::vector<std::size_t> all_rows(const DatasetTable& t) {
  std::vector<std::size_t> rows(t.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

int cmd_ingest(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  const auto data = load_dataset(cfg);
  ordered_json j = data.summary();
  j["feature_names"] = data.table().feature_names;
  if (data.encoded.single_class) std::cerr << "warning: dataset contains a single class\n";
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  write_file(prepare_out(g.out) / "ingest.json", text);
  return kOk;
}

int cmd_svd(const GlobalOptions& g, std::optional<std::size_t> rank) {
  auto cfg = resolve_config(g);
  if (rank) cfg.svd.rank = *rank;
  const auto data = load_dataset(cfg);
  const auto& table = data.table();
  const auto stats = fit_normalizer(table, all_rows(table));
  const auto normalized = apply_normalizer(table, stats);
  const auto f = randomized_svd(normalized.features,
                                detail::rsvd_config(cfg.svd, table.rows(), table.cols(), derive_seed(cfg.seed, 1)));
  const auto dir = prepare_out(g.out);
  write_file(dir / "U.csv", matrix_csv(f.u, "u"));
  write_file(dir / "V.csv", matrix_csv(f.v, "v"));
  std::string s = "index,singular_value\n";
  for (std::size_t i = 0; i < f.s.size(); ++i) s += std::to_string(i) + "," + format_double(f.s[i]) + "\n";
  write_file(dir / "S.csv", s);
  std::cout << "wrote U.csv, S.csv, V.csv (rank " << f.rank() << ") to " << dir.string() << "\n";
  return kOk;
}

int cmd_select(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  const auto data = load_dataset(cfg);
  const auto& table = data.table();
  const auto rows = all_rows(table);
  const FoldArtifacts a = fit_preprocessing(table, rows, cfg, derive_seed(cfg.seed, 0x7261), "select");

  DatasetTable stage = apply_normalizer(table, a.stats);
  if (a.svd) stage = project(stage, *a.svd);
  const auto chi = a.selection.chi ? *a.selection.chi : chi_square_scores(stage, cfg.selection.bins);
  const auto dir = prepare_out(g.out);
  {
    std::ofstream out(dir / "chi2.csv", std::ios::binary);
    write_chi_square_csv(out, chi, stage.feature_names, a.selected());
  }
  if (a.selection.ranking) {
    std::ofstream out(dir / "ranking.csv", std::ios::binary);
    write_ranking_csv(out, *a.selection.ranking, stage.feature_names);
  }
  std::cout << "selected " << a.selected().size() << " of " << stage.cols() << " features:";
  for (const auto& name : stage_names(table, a)) std::cout << ' ' << name;
  std::cout << '\n';
  return kOk;
}

int cmd_train(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  const auto data = load_dataset(cfg);
  if (data.encoded.single_class) std::cerr << "warning: training data contains a single class\n";
  const auto p = fit_pipeline(data, cfg);
  p.save(g.out);
  std::cout << "saved model (" << p.artifacts.selected().size() << " inputs) to " << g.out << "\n";
  return kOk;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& model_dir) {
  const auto cfg = resolve_config(g);
  const auto p = FittedPipeline::load(model_dir);
  if (cfg.dataset.paths.empty()) throw ConfigError("evaluate: no dataset given (use --data or a config)");
  RawTable raw;
  for (std::size_t i = 0; i < cfg.dataset.paths.size(); ++i) {
    RawTable part = load_csv(cfg.resolve(cfg.dataset.paths[i]).string(), p.schema);
    if (i == 0) raw = std::move(part);
    else raw.append(part);
  }
  const auto encoded = encode(raw, p.schema, p.encoding);
  if (encoded.table.feature_names != p.input_names)
    throw DataError("evaluate: encoded columns do not match the trained model");
  const auto probs = p.predict(encoded.table);
  const auto report = evaluate(encoded.table.labels, probs, p.threshold);
  const std::string text = report.to_json().dump(2) + "\n";
  std::cout << text;
  write_file(prepare_out(g.out) / "metrics.json", text);
  return kOk;
}

int cmd_run(const GlobalOptions& g) {
  const auto cfg = resolve_config(g);
  const auto doc = run_experiment(cfg);
  emit_report(doc, g.out);
  std::cout << "accuracy " << format_double(doc.overall_accuracy()) << " over " << cfg.repetitions << "x"
            << cfg.k_folds << " folds; report written to " << g.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IoT intrusion detection experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON experiment config");
  app.add_option("--seed", g.seed, "base seed (overrides config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--sample-rows", g.sample_rows, "stratified subsample size");
  app.add_option("--threads", g.threads, "worker threads for folds");
  app.add_option("--data", g.data, "dataset CSV path(s); overrides the config");
  app.add_option("--schema", g.schema, "schema preset (unsw-nb15, bot-iot, cse-cic-ids2018)");

  auto* ingest = app.add_subcommand("ingest", "validate and summarize a dataset");
  auto* svd = app.add_subcommand("svd", "dump randomized SVD factors of the normalized data");
  std::optional<std::size_t> rank;
  svd->add_option("--rank", rank, "target rank (overrides config)");
  auto* select = app.add_subcommand("select", "run feature selection and write ranking CSVs");
  auto* train = app.add_subcommand("train", "fit the full pipeline and save the model");
  auto* eval = app.add_subcommand("evaluate", "score a saved model on a dataset");
  std::string model_dir;
  eval->add_option("--model", model_dir, "directory written by `train`")->required();
  auto* run = app.add_subcommand("run", "full cross-validated experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*ingest) return cmd_ingest(g);
    if (*svd) return cmd_svd(g, rank);
    if (*select) return cmd_select(g);
    if (*train) return cmd_train(g);
    if (*eval) return cmd_evaluate(g, model_dir);
    if (*run) return cmd_run(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
