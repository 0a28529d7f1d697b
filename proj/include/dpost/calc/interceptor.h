#pragma once

#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpost/engine/decoder.h"
#include "dpost/engine/tokenizer.h"

namespace dpost::calc {

using engine::TokenId;

enum class LaneMode { kPassthrough, kInExpr, kForcing };

const char* to_string(LaneMode mode);

struct CalcEvent {
  enum class Kind { kForced, kMalformed };
  Kind kind = Kind::kForced;
  int step = 0;            // lane step at which the event happened
  std::string expression;  // buffered expression text
  std::string result;      // canonical result (forced events)
  std::string reason;      // malformed events
};

struct LaneState {
  LaneMode mode = LaneMode::kPassthrough;
  std::string expr_buffer;
  std::deque<TokenId> force_queue;
  std::vector<CalcEvent> events;
  int steps = 0;

  size_t malformed_count() const;
  size_t forced_count() const;
};

// Token-level calculator. Inside `<<...=` the buffered expression is
// evaluated when `=` arrives, and the lane is then forced to emit the
// canonical result, `>>` and (with echo) the result again.
class Calculator {
 public:
  explicit Calculator(const engine::Tokenizer& tokenizer, bool echo_result = true);

  // Returns the token the lane actually emits for `proposed`.
  TokenId step(LaneState& state, TokenId proposed) const;
  // One step for every lane; lanes never interact.
  std::vector<TokenId> step(std::span<LaneState> states, std::span<const TokenId> proposed) const;
  // Called when a lane stops; an open annotation is recorded as malformed.
  void finish(LaneState& state) const;

  bool echo_result() const { return echo_; }

 private:
  const engine::Tokenizer& tokenizer_;
  bool echo_;
  TokenId open_, close_, equals_;
};

// Adapts a Calculator to the decoder's per-lane filter hook.
class CalculatorLane : public engine::LaneFilter {
 public:
  explicit CalculatorLane(const Calculator& calculator) : calculator_(calculator) {}
  TokenId filter(TokenId proposed) override { return calculator_.step(state_, proposed); }
  void finish() override { calculator_.finish(state_); }
  const LaneState& state() const { return state_; }

 private:
  const Calculator& calculator_;
  LaneState state_;
};

// Factory for Decoder::generate. `calculator` must outlive the decode.
engine::LaneFilterFactory calculator_lanes(const Calculator& calculator);

}  // namespace dpost::calc
