#include "dpost/corpus/answer.h"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "dpost/common/error.h"

namespace dpost::corpus {

double parse_number(std::string_view token) {
  std::string_view body = token;
  bool negative = false;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  bool digit = false;
  bool point = false;
  for (char c : body) {
    if (c == '.') {
      if (point) throw UnparseableAnswer("two decimal points in '" + std::string(token) + "'");
      point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else {
      throw UnparseableAnswer("not a number: '" + std::string(token) + "'");
    }
  }
  if (!digit) throw UnparseableAnswer("not a number: '" + std::string(token) + "'");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc() || ptr != body.data() + body.size()) {
    throw UnparseableAnswer("not a number: '" + std::string(token) + "'");
  }
  return negative ? -value : value;
}

double extract_answer(std::string_view text) {
  size_t at = text.rfind(kAnswerMarker);
  if (at == std::string_view::npos) throw NoAnswerMarker("no '#### ' marker");
  std::string_view rest = text.substr(at + kAnswerMarker.size());
  size_t begin = 0;
  while (begin < rest.size() && (rest[begin] == ' ' || rest[begin] == '\t')) ++begin;
  size_t end = begin;
  while (end < rest.size() && !std::isspace(static_cast<unsigned char>(rest[end]))) ++end;
  if (begin == end) throw UnparseableAnswer("nothing after '#### '");
  return parse_number(rest.substr(begin, end - begin));
}

bool numeric_equal(double a, double b) { return std::fabs(a - b) <= kAnswerTolerance; }

bool answer_matches(std::string_view rationale_text, double gold) {
  try {
    return numeric_equal(extract_answer(rationale_text), gold);
  } catch (const NoAnswerMarker&) {
    return false;
  } catch (const UnparseableAnswer&) {
    return false;
  }
}

std::string format_number(double value) {
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", value);
    return std::string(buf) == "-0" ? "0" : buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  std::string out = buf;
  while (!out.empty() && out.back() == '0') out.pop_back();
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

}  // namespace dpost::corpus
