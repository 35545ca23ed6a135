#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iotids/error.hpp"
#include "iotids/nn/tensor.hpp"

namespace iotids::nn {

// Binary tensor container:
//   "MGNN" | u32 version | repeated { u32 name_len | name | u32 rank |
//   u64 extent * rank | f64 value * prod(extents) }
// All integers and floats little-endian. Records run to end of file.
inline constexpr char kMgnnMagic[4] = {'M', 'G', 'N', 'N'};
inline constexpr std::uint32_t kMgnnVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("MGNN: truncated file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_mgnn(const std::vector<NamedTensor>& tensors) {
  std::string out(kMgnnMagic, 4);
  detail::put_le<std::uint32_t>(out, kMgnnVersion);
  for (const auto& t : tensors) {
    if (t.tensor.values.size() != Tensor::element_count(t.tensor.shape))
      throw std::invalid_argument("MGNN: tensor '" + t.name + "' shape/value mismatch");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor.shape.size()));
    for (std::size_t e : t.tensor.shape) detail::put_le<std::uint64_t>(out, e);
    for (double v : t.tensor.values) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline std::vector<NamedTensor> decode_mgnn(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.take(4) != std::string_view(kMgnnMagic, 4)) throw DataError("MGNN: bad magic");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kMgnnVersion) throw DataError("MGNN: unsupported version " + std::to_string(version));
  std::vector<NamedTensor> out;
  while (!in.done()) {
    NamedTensor t;
    t.name = std::string(in.take(in.get_le<std::uint32_t>()));
    const auto rank = in.get_le<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) t.tensor.shape.push_back(in.get_le<std::uint64_t>());
    const std::size_t count = Tensor::element_count(t.tensor.shape);
    if (count > bytes.size() / 8) throw DataError("MGNN: tensor '" + t.name + "' larger than file");
    t.tensor.values.resize(count);
    for (double& v : t.tensor.values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_mgnn(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::string bytes = encode_mgnn(tensors);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

inline std::vector<NamedTensor> read_mgnn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_mgnn(ss.str());
}

}  // namespace iotids::nn
