#pragma once

#include <cstddef>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iotids/error.hpp"

namespace iotids::csv {

// RFC-4180 record reader over an in-memory buffer. Handles quoted fields,
// doubled quotes, embedded delimiters/newlines, CRLF and a leading UTF-8 BOM.
class Reader {
 public:
  explicit Reader(std::string_view text, char delimiter = ',') : text_(text), delim_(delimiter) {
    if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  // Reads the next record into `fields`. Returns false at end of input.
  // Blank lines are skipped.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    while (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == '\r')) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= text_.size()) return false;
    record_line_ = line_ + 1;

    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (in_quotes) {
        if (ch == '"') {
          if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
            field.push_back('"');
            pos_ += 2;
            continue;
          }
          in_quotes = false;
          ++pos_;
          continue;
        }
        if (ch == '\n') ++line_;
        field.push_back(ch);
        ++pos_;
        continue;
      }
      if (ch == '"' && field.empty() && !was_quoted) {
        in_quotes = true;
        was_quoted = true;
        ++pos_;
        continue;
      }
      if (ch == delim_) {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
        ++pos_;
        continue;
      }
      if (ch == '\r' || ch == '\n') {
        if (ch == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        ++line_;
        break;
      }
      field.push_back(ch);
      ++pos_;
    }
    if (in_quotes) {
      throw DataError("csv: unterminated quoted field starting on line " +
                      std::to_string(record_line_));
    }
    fields.push_back(std::move(field));
    return true;
  }

  // 1-based physical line where the last returned record started
  std::size_t record_line() const { return record_line_; }

 private:
  std::string_view text_;
  char delim_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// Quotes a field only when it needs quoting.
inline std::string escape(std::string_view field, char delimiter = ',') {
  if (field.find_first_of(std::string{'"', '\n', '\r', delimiter}) == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace iotids::csv
