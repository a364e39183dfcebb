#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "msana/core.hpp"

namespace msana {

static_assert(std::endian::native == std::endian::little,
              "binary snapshots assume a little-endian host");

class SnapshotError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class BinaryWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T> || std::is_enum_v<T>
  void put(T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(raw, sizeof(T));
  }

  void put_size(std::size_t n) { put<std::uint64_t>(n); }

  void put_string(std::string_view s) {
    put_size(s.size());
    buf_.append(s.data(), s.size());
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void put_vector(const std::vector<T>& v) {
    put_size(v.size());
    for (const T& x : v) put(x);
  }

  const std::string& bytes() const noexcept { return buf_; }
  std::string release() { return std::move(buf_); }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  template <class T>
    requires std::is_arithmetic_v<T> || std::is_enum_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::size_t get_size() { return static_cast<std::size_t>(get<std::uint64_t>()); }

  std::string get_string() {
    const std::size_t n = get_size();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_vector() {
    const std::size_t n = get_size();
    need(n * sizeof(T));
    std::vector<T> v(n);
    for (auto& x : v) x = get<T>();
    return v;
  }

  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw SnapshotError("snapshot truncated");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace msana
