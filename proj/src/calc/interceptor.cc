#include "dpost/calc/interceptor.h"

#include <stdexcept>

#include "dpost/calc/expr.h"
#include "dpost/common/error.h"

namespace dpost::calc {

const char* to_string(LaneMode mode) {
  switch (mode) {
    case LaneMode::kPassthrough: return "PASSTHROUGH";
    case LaneMode::kInExpr: return "IN_EXPR";
    case LaneMode::kForcing: return "FORCING";
  }
  return "PASSTHROUGH";
}

size_t LaneState::malformed_count() const {
  size_t n = 0;
  for (const auto& e : events) n += e.kind == CalcEvent::Kind::kMalformed;
  return n;
}

size_t LaneState::forced_count() const {
  size_t n = 0;
  for (const auto& e : events) n += e.kind == CalcEvent::Kind::kForced;
  return n;
}

Calculator::Calculator(const engine::Tokenizer& tokenizer, bool echo_result)
    : tokenizer_(tokenizer),
      echo_(echo_result),
      open_(tokenizer.id_of("<<")),
      close_(tokenizer.id_of(">>")),
      equals_(tokenizer.id_of("=")) {
  if (open_ == engine::Tokenizer::kUnk || close_ == engine::Tokenizer::kUnk || equals_ == engine::Tokenizer::kUnk) {
    throw std::invalid_argument("tokenizer lacks annotation delimiters");
  }
}

TokenId Calculator::step(LaneState& s, TokenId proposed) const {
  ++s.steps;
  switch (s.mode) {
    case LaneMode::kForcing: {
      TokenId out = s.force_queue.front();
      s.force_queue.pop_front();
      if (s.force_queue.empty()) s.mode = LaneMode::kPassthrough;
      return out;
    }
    case LaneMode::kPassthrough:
      if (proposed == open_) {
        s.mode = LaneMode::kInExpr;
        s.expr_buffer.clear();
      }
      return proposed;
    case LaneMode::kInExpr:
      break;
  }

  auto abandon = [&](std::string reason) {
    s.events.push_back({CalcEvent::Kind::kMalformed, s.steps, s.expr_buffer, "", std::move(reason)});
    s.expr_buffer.clear();
    s.mode = LaneMode::kPassthrough;
  };

  if (proposed == equals_) {
    try {
      std::string result = eval_expr(s.expr_buffer).canonical();
      engine::Tokens digits = tokenizer_.encode(result);
      s.force_queue.assign(digits.begin(), digits.end());
      s.force_queue.push_back(close_);
      if (echo_) s.force_queue.insert(s.force_queue.end(), digits.begin(), digits.end());
      s.events.push_back({CalcEvent::Kind::kForced, s.steps, s.expr_buffer, result, ""});
      s.expr_buffer.clear();
      s.mode = LaneMode::kForcing;
    } catch (const DivisionByZero&) {
      abandon("division by zero");
    } catch (const ParseError& e) {
      abandon(e.what());
    }
    return proposed;
  }
  if (proposed == close_) {
    abandon("closed without '='");
    return proposed;
  }
  if (proposed == open_) {
    abandon("nested '<<'");
    s.mode = LaneMode::kInExpr;
    return proposed;
  }
  if (proposed == engine::Tokenizer::kEos) {
    abandon("unclosed at end of sequence");
    return proposed;
  }
  s.expr_buffer += tokenizer_.piece(proposed);
  return proposed;
}

std::vector<TokenId> Calculator::step(std::span<LaneState> states, std::span<const TokenId> proposed) const {
  if (states.size() != proposed.size()) throw std::invalid_argument("one proposal per lane is required");
  std::vector<TokenId> out(states.size());
  for (size_t i = 0; i < states.size(); ++i) out[i] = step(states[i], proposed[i]);
  return out;
}

void Calculator::finish(LaneState& s) const {
  if (s.mode == LaneMode::kInExpr) {
    s.events.push_back({CalcEvent::Kind::kMalformed, s.steps, s.expr_buffer, "", "unclosed at end of generation"});
  } else if (s.mode == LaneMode::kForcing) {
    s.events.push_back({CalcEvent::Kind::kMalformed, s.steps, "", "", "forced result truncated"});
  }
  s.mode = LaneMode::kPassthrough;
  s.expr_buffer.clear();
  s.force_queue.clear();
}

engine::LaneFilterFactory calculator_lanes(const Calculator& calculator) {
  return [&calculator]() -> std::unique_ptr<engine::LaneFilter> { return std::make_unique<CalculatorLane>(calculator); };
}

}  // namespace dpost::calc
