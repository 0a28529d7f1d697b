#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dpost/corpus/problem.h"

namespace dpost::corpus {

struct MalformedSpan {
  size_t start = 0;
  std::string reason;
};

struct AnnotationScan {
  std::vector<AnnotationSpan> spans;
  std::vector<MalformedSpan> malformed;
};

// All well-formed `<<expr=result>>` spans in order. Spans that are unclosed,
// have an empty expression, lack `=`, or whose expression/result do not
// parse are skipped and listed in `malformed`.
AnnotationScan parse_annotations(std::string_view rationale_text);

// True when every span's recorded result equals the calculator's value of its
// expression.
bool annotations_consistent(const std::vector<AnnotationSpan>& spans);

// The text with every `<<...>>` span removed, leaving the surface result that
// follows it: "3*2=<<3*2=6>>6" becomes "3*2=6".
std::string strip_annotations(std::string_view rationale_text);

}  // namespace dpost::corpus
