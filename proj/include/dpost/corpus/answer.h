#pragma once

#include <string>
#include <string_view>

namespace dpost::corpus {

inline constexpr std::string_view kAnswerMarker = "#### ";
inline constexpr double kAnswerTolerance = 1e-6;

// Number after the final `#### ` marker. Throws NoAnswerMarker or
// UnparseableAnswer.
double extract_answer(std::string_view rationale_text);

// Accepts an optional sign, digits and at most one decimal point. Leading `+`
// and trailing zeros are allowed. Throws UnparseableAnswer.
double parse_number(std::string_view token);

// |a - b| <= 1e-6
bool numeric_equal(double a, double b);

// True when the rationale's extracted answer matches `gold`. Missing or
// unparseable answers count as incorrect.
bool answer_matches(std::string_view rationale_text, double gold);

// Shortest decimal rendering used for answer fields (integers without a
// fractional part).
std::string format_number(double value);

}  // namespace dpost::corpus
