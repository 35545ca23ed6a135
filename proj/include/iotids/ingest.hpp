#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iotids/csv.hpp"
#include "iotids/dataset.hpp"
#include "iotids/error.hpp"
#include "iotids/random.hpp"

namespace iotids {

enum class ColumnKind { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

/// Describes which CSV columns feed the feature matrix and how the label
/// column maps onto {normal, attack}.
struct DatasetSchema {
  std::string name;
  std::vector<ColumnSpec> feature_columns;
  std::string label_column;
  std::set<std::string> positive_label_values;
  char delimiter = ',';

  void validate() const {
    if (feature_columns.empty()) throw ConfigError("schema '" + name + "': no feature columns");
    if (label_column.empty()) throw ConfigError("schema '" + name + "': no label column");
    std::set<std::string> seen;
    for (const auto& c : feature_columns) {
      if (!seen.insert(c.name).second)
        throw ConfigError("schema '" + name + "': duplicate column '" + c.name + "'");
      if (c.name == label_column)
        throw ConfigError("schema '" + name + "': label column '" + c.name +
                          "' listed as a feature");
    }
  }

  std::vector<std::string> required_columns() const {
    std::vector<std::string> out;
    for (const auto& c : feature_columns) out.push_back(c.name);
    out.push_back(label_column);
    return out;
  }
};

namespace detail {

inline DatasetSchema make_schema(std::string name, std::initializer_list<const char*> numeric,
                                 std::initializer_list<const char*> categorical,
                                 std::string label, std::set<std::string> positives) {
  DatasetSchema s;
  s.name = std::move(name);
  // categorical columns first, then numeric
  for (const char* c : categorical) s.feature_columns.push_back({c, ColumnKind::categorical});
  for (const char* c : numeric) s.feature_columns.push_back({c, ColumnKind::numeric});
  s.label_column = std::move(label);
  s.positive_label_values = std::move(positives);
  return s;
}

}  // namespace detail

inline std::vector<std::string> schema_preset_names() {
  return {"unsw-nb15", "bot-iot", "cse-cic-ids2018"};
}

// Built-in layouts of the public CSV exports of the three datasets.
inline DatasetSchema schema_preset(std::string_view preset) {
  if (preset == "unsw-nb15") {
    // UNSW_NB15_training-set.csv / testing-set.csv; `id` and `attack_cat` are ignored
    return detail::make_schema(
        "unsw-nb15",
        {"dur",          "spkts",          "dpkts",           "sbytes",           "dbytes",
         "rate",         "sttl",           "dttl",            "sload",            "dload",
         "sloss",        "dloss",          "sinpkt",          "dinpkt",           "sjit",
         "djit",         "swin",           "stcpb",           "dtcpb",            "dwin",
         "tcprtt",       "synack",         "ackdat",          "smean",            "dmean",
         "trans_depth",  "response_body_len", "ct_srv_src",   "ct_state_ttl",     "ct_dst_ltm",
         "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd",
         "ct_flw_http_mthd", "ct_src_ltm",  "ct_srv_dst",      "is_sm_ips_ports"},
        {"proto", "service", "state"}, "label", {"1"});
  }
  if (preset == "bot-iot") {
    // the "10 best features" CSV export
    return detail::make_schema(
        "bot-iot",
        {"seq", "stddev", "N_IN_Conn_P_SrcIP", "min", "state_number", "mean",
         "N_IN_Conn_P_DstIP", "drate", "srate", "max"},
        {"proto"}, "attack", {"1"});
  }
  if (preset == "cse-cic-ids2018") {
    return detail::make_schema(
        "cse-cic-ids2018",
        {"Dst Port",         "Flow Duration",    "Tot Fwd Pkts",     "Tot Bwd Pkts",
         "TotLen Fwd Pkts",  "TotLen Bwd Pkts",  "Fwd Pkt Len Max",  "Fwd Pkt Len Min",
         "Fwd Pkt Len Mean", "Bwd Pkt Len Max",  "Bwd Pkt Len Mean", "Flow Byts/s",
         "Flow Pkts/s",      "Flow IAT Mean",    "Flow IAT Max",     "Fwd IAT Tot",
         "Bwd IAT Tot",      "Fwd Pkts/s",       "Bwd Pkts/s",       "Pkt Len Mean",
         "Pkt Len Std",      "SYN Flag Cnt",     "ACK Flag Cnt",     "Init Fwd Win Byts",
         "Init Bwd Win Byts", "Active Mean",     "Idle Mean"},
        {"Protocol"}, "Label",
        {"DDoS attacks-LOIC-HTTP", "DDOS attack-HOIC", "DDOS attack-LOIC-UDP",
         "DoS attacks-Hulk", "DoS attacks-SlowHTTPTest", "DoS attacks-GoldenEye",
         "DoS attacks-Slowloris", "Bot", "FTP-BruteForce", "SSH-Bruteforce",
         "Brute Force -Web", "Brute Force -XSS", "SQL Injection", "Infilteration"});
  }
  throw ConfigError("unknown schema preset '" + std::string(preset) + "'");
}

// String cells of the schema columns, column-major, in schema order
// (features first, label last).
struct RawTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<std::string>> columns;
  std::size_t row_count = 0;

  const std::vector<std::string>& column(std::string_view name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
      if (column_names[i] == name) return columns[i];
    throw std::invalid_argument("RawTable: no column '" + std::string(name) + "'");
  }

  void append(const RawTable& other) {
    if (other.column_names != column_names)
      throw DataError("cannot concatenate tables with different columns");
    for (std::size_t c = 0; c < columns.size(); ++c)
      columns[c].insert(columns[c].end(), other.columns[c].begin(), other.columns[c].end());
    row_count += other.row_count;
  }
};

inline RawTable parse_csv(std::string_view text, const DatasetSchema& schema,
                          const std::string& source = "<memory>") {
  schema.validate();
  csv::Reader reader(text, schema.delimiter);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw DataError(source + ": empty file (no header row)");

  std::unordered_map<std::string, std::size_t> header_index;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name = fields[i];
    while (!name.empty() && (name.front() == ' ' || name.front() == '\t')) name.erase(0, 1);
    while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
    header_index.emplace(std::move(name), i);
  }
  const std::size_t header_width = fields.size();

  RawTable raw;
  raw.column_names = schema.required_columns();
  std::vector<std::size_t> source_index;
  for (const auto& name : raw.column_names) {
    auto it = header_index.find(name);
    if (it == header_index.end()) throw DataError(source + ": missing column '" + name + "'");
    source_index.push_back(it->second);
  }
  raw.columns.resize(raw.column_names.size());

  std::size_t row = 0;
  while (reader.next(fields)) {
    ++row;
    if (fields.size() != header_width) {
      throw DataError(source + ": ragged row " + std::to_string(row) + " (line " +
                      std::to_string(reader.record_line()) + "): expected " +
                      std::to_string(header_width) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < source_index.size(); ++c)
      raw.columns[c].push_back(std::move(fields[source_index[c]]));
  }
  raw.row_count = row;
  return raw;
}

inline RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  return parse_csv(csv::read_file(path), schema, path);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Full-cell numeric parse; rejects partial parses and non-finite values.
inline bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

}  // namespace detail

inline constexpr std::size_t kMaxCategories = 32;
inline constexpr const char* kOtherCategory = "other";

/// Indicator columns chosen for one categorical column.
struct CategoryEncoding {
  std::string column;
  std::vector<std::string> categories;
  bool has_other = false;
};

struct Encoding {
  std::vector<CategoryEncoding> categorical;

  const CategoryEncoding* find(std::string_view column) const {
    for (const auto& c : categorical)
      if (c.column == column) return &c;
    return nullptr;
  }
};

struct EncodeResult {
  DatasetTable table;
  Encoding encoding;
  std::size_t parse_warnings = 0;  // numeric cells replaced by 0
  bool single_class = false;
};

// Most frequent categories first, ties broken lexicographically; anything past
// kMaxCategories falls into an "other" indicator.
inline CategoryEncoding fit_categories(const std::string& column,
                                       const std::vector<std::string>& cells) {
  std::map<std::string, std::size_t> counts;
  for (const auto& cell : cells) ++counts[std::string(detail::trim(cell))];
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  CategoryEncoding enc;
  enc.column = column;
  const std::size_t keep = std::min(kMaxCategories, ordered.size());
  for (std::size_t i = 0; i < keep; ++i) enc.categories.push_back(ordered[i].first);
  enc.has_other = ordered.size() > kMaxCategories;
  return enc;
}

namespace detail {

inline EncodeResult encode_impl(const RawTable& raw, const DatasetSchema& schema,
                                const Encoding* fitted) {
  schema.validate();
  if (raw.row_count == 0) throw DataError("encode: table has zero rows");

  EncodeResult result;
  const std::size_t n = raw.row_count;

  // Resolve the output column layout first.
  std::size_t width = 0;
  std::vector<CategoryEncoding> encodings;
  for (const auto& col : schema.feature_columns) {
    if (col.kind == ColumnKind::numeric) {
      ++width;
      continue;
    }
    CategoryEncoding enc;
    if (fitted) {
      const auto* f = fitted->find(col.name);
      if (!f) throw ConfigError("encode: no fitted categories for column '" + col.name + "'");
      enc = *f;
    } else {
      enc = fit_categories(col.name, raw.column(col.name));
    }
    width += enc.categories.size() + (enc.has_other ? 1 : 0);
    encodings.push_back(std::move(enc));
  }

  auto& table = result.table;
  table.features = Matrix(n, width);
  std::size_t out_col = 0;
  std::size_t cat_idx = 0;
  for (const auto& col : schema.feature_columns) {
    const auto& cells = raw.column(col.name);
    if (col.kind == ColumnKind::numeric) {
      table.feature_names.push_back(col.name);
      for (std::size_t r = 0; r < n; ++r) {
        double v = 0.0;
        if (!parse_number(cells[r], v)) {
          ++result.parse_warnings;
          v = 0.0;
        }
        table.features(r, out_col) = v;
      }
      ++out_col;
      continue;
    }
    const auto& enc = encodings[cat_idx++];
    std::unordered_map<std::string_view, std::size_t> slot;
    for (std::size_t i = 0; i < enc.categories.size(); ++i) {
      slot.emplace(enc.categories[i], i);
      table.feature_names.push_back(col.name + "=" + enc.categories[i]);
    }
    if (enc.has_other) table.feature_names.push_back(col.name + "=" + kOtherCategory);
    for (std::size_t r = 0; r < n; ++r) {
      auto it = slot.find(trim(cells[r]));
      if (it != slot.end()) {
        table.features(r, out_col + it->second) = 1.0;
      } else if (enc.has_other) {
        table.features(r, out_col + enc.categories.size()) = 1.0;
      }
    }
    out_col += enc.categories.size() + (enc.has_other ? 1 : 0);
  }

  const auto& label_cells = raw.column(schema.label_column);
  table.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    table.labels[r] = schema.positive_label_values.count(std::string(trim(label_cells[r]))) ? 1 : 0;
  }
  const std::size_t pos = table.positives();
  result.single_class = pos == 0 || pos == n;
  result.encoding.categorical = std::move(encodings);
  return result;
}

}  // namespace detail

inline EncodeResult encode(const RawTable& raw, const DatasetSchema& schema) {
  return detail::encode_impl(raw, schema, nullptr);
}

// Re-applies categories fitted on another table (unseen values go to "other"
// when that column has one, otherwise to no indicator).
inline EncodeResult encode(const RawTable& raw, const DatasetSchema& schema,
                           const Encoding& fitted) {
  return detail::encode_impl(raw, schema, &fitted);
}

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStdFloor = 1e-8;

// Population mean/std over the given rows only.
inline NormalizationStats fit_normalizer(const DatasetTable& table,
                                         std::span<const std::size_t> training_rows) {
  if (training_rows.empty()) throw std::invalid_argument("fit_normalizer: empty training row set");
  const std::size_t d = table.cols();
  NormalizationStats stats;
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 0.0);
  for (std::size_t r : training_rows) {
    if (r >= table.rows()) throw std::invalid_argument("fit_normalizer: row index out of range");
    const auto row = table.features.row(r);
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += row[j];
  }
  const double count = static_cast<double>(training_rows.size());
  for (double& m : stats.mean) m /= count;
  for (std::size_t r : training_rows) {
    const auto row = table.features.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row[j] - stats.mean[j];
      stats.stddev[j] += dev * dev;
    }
  }
  for (double& s : stats.stddev) s = std::max(std::sqrt(s / count), kStdFloor);
  return stats;
}

inline DatasetTable apply_normalizer(const DatasetTable& table, const NormalizationStats& stats) {
  if (stats.mean.size() != table.cols() || stats.stddev.size() != table.cols())
    throw std::invalid_argument("apply_normalizer: stats length " +
                                std::to_string(stats.mean.size()) + " does not match " +
                                std::to_string(table.cols()) + " columns");
  DatasetTable out = table;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.features.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - stats.mean[j]) / stats.stddev[j];
  }
  return out;
}

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }
};

// Within each class: seeded shuffle, then round-robin dealing. Class 1 resumes
// dealing where class 0 stopped so total fold sizes also differ by at most 1.
inline FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("stratified_kfold: labels must be 0 or 1");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < k) {
      throw DataError("stratified_kfold: class " + std::to_string(c) + " has " +
                      std::to_string(by_class[c].size()) + " rows, fewer than k=" +
                      std::to_string(k));
    }
  }
  if (labels.size() < k) throw DataError("stratified_kfold: fewer rows than folds");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), 0);
  Rng rng(seed);
  std::size_t next_fold = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      plan.assignments[idx] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return plan;
}

// Seeded stratified subsample of `count` rows; returned indices are ascending
// so the original row order is preserved.
inline std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t count,
                                                  std::uint64_t seed) {
  if (count >= labels.size()) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1].push_back(i);
  const double frac = static_cast<double>(count) / static_cast<double>(labels.size());
  std::size_t take1 = static_cast<std::size_t>(std::llround(frac * by_class[1].size()));
  take1 = std::min(take1, std::min(count, by_class[1].size()));
  std::size_t take0 = std::min(count - take1, by_class[0].size());
  Rng rng(seed);
  std::vector<std::size_t> out;
  const std::size_t takes[2] = {take0, take1};
  for (int c = 0; c < 2; ++c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    out.insert(out.end(), by_class[c].begin(), by_class[c].begin() + takes[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace iotids
