#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace flarecast {

/// Incremental FNV-1a (64-bit) used for dataset and config fingerprints.
/// std::hash is not stable across runs, so fingerprints use this instead.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (const char ch : bytes) {
      state_ ^= static_cast<unsigned char>(ch);
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }

  Fnv1a& update(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= static_cast<unsigned char>(v >> (8 * i));
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xF];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace flarecast
