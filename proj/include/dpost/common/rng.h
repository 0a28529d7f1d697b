#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpost {

// Every random draw in an experiment comes from a stream keyed by
// (experiment seed, stream id). Stream ids are derived from the role of the
// draw (which phase, which question, which sample), never from the order in
// which lanes happen to be scheduled.
uint64_t splitmix64(uint64_t x);

// Combines a tag and any number of indices into a stream id.
uint64_t stream_id(std::initializer_list<uint64_t> parts);

class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream);

  uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits; independent of libstdc++'s
  // distribution implementations.
  double uniform();
  // Standard normal via Box-Muller (no cached spare, so draws are stateless
  // beyond the engine).
  double normal();
  // Uniform integer in [lo, hi] by rejection.
  int64_t uniform_int(int64_t lo, int64_t hi);

  template <typename T>
  void shuffle(T& range) {
    for (size_t i = range.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(range[i - 1], range[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stream tags. Values are part of the determinism contract; do not renumber.
enum class StreamTag : uint64_t {
  kCorpus = 1,
  kInit = 2,
  kShuffle = 3,
  kDpoSample = 4,
  kSftSample = 5,
  kPassAtK = 6,
  kBench = 7,
  kSplit = 8,
};

inline uint64_t tag(StreamTag t) { return static_cast<uint64_t>(t); }

}  // namespace dpost
