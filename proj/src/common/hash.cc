#include "dpost/common/hash.h"

#include <cstdio>

namespace dpost {

void Fnv1a::update(std::span<const std::byte> bytes) {
  for (std::byte b : bytes) {
    state_ ^= static_cast<uint64_t>(b);
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::update(std::string_view text) {
  update(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::string Fnv1a::hex() const { return to_hex(state_); }

std::string to_hex(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string fnv1a_hex(std::string_view text) {
  Fnv1a h;
  h.update(text);
  return h.hex();
}

}  // namespace dpost
