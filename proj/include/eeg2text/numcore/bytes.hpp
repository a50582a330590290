#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

// Little-endian byte writer/reader shared by the binary file formats.

namespace eeg2text::numcore {

template <class U>
U to_little_endian(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out{};
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  } else {
    return v;
  }
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(to_little_endian(v)); }
  void u64(std::uint64_t v) { raw(to_little_endian(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string take() { return std::move(buf_); }
  const std::string& buffer() const { return buf_; }

 private:
  template <class U>
  void raw(U v) {
    char tmp[sizeof(U)];
    std::memcpy(tmp, &v, sizeof(U));
    buf_.append(tmp, sizeof(U));
  }
  std::string buf_;
};

class TruncatedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const auto n = u32();
    return std::string(take(n));
  }
  std::string_view take(std::size_t n) {
    if (remaining() < n) {
      throw TruncatedError("unexpected end of data: need " + std::to_string(n) + " bytes, have " +
                           std::to_string(remaining()));
    }
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  template <class U>
  U raw() {
    U v;
    std::memcpy(&v, take(sizeof(U)).data(), sizeof(U));
    return to_little_endian(v);
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace eeg2text::numcore
