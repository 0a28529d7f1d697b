#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dpost {

// 64-bit FNV-1a. Stable across platforms, which std::hash is not.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  template <typename T>
  void update_pod(const T& value) {
    update(std::as_bytes(std::span<const T, 1>(&value, 1)));
  }
  uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view text);
std::string to_hex(uint64_t value);

}  // namespace dpost
