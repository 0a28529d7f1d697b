#include "dpost/corpus/annotations.h"

#include "dpost/calc/expr.h"
#include "dpost/common/error.h"
#include "dpost/corpus/answer.h"

namespace dpost::corpus {

AnnotationScan parse_annotations(std::string_view text) {
  AnnotationScan scan;
  size_t pos = 0;
  while (true) {
    size_t open = text.find("<<", pos);
    if (open == std::string_view::npos) break;
    size_t close = text.find(">>", open + 2);
    size_t next_open = text.find("<<", open + 2);
    if (close == std::string_view::npos) {
      scan.malformed.push_back({open, "unclosed annotation"});
      break;
    }
    if (next_open != std::string_view::npos && next_open < close) {
      scan.malformed.push_back({open, "unclosed annotation"});
      pos = next_open;
      continue;
    }
    std::string_view body = text.substr(open + 2, close - open - 2);
    pos = close + 2;
    size_t eq = body.rfind('=');
    if (eq == std::string_view::npos) {
      scan.malformed.push_back({open, "annotation without '='"});
      continue;
    }
    std::string_view expr = body.substr(0, eq);
    std::string_view result = body.substr(eq + 1);
    if (expr.find_first_not_of(' ') == std::string_view::npos) {
      scan.malformed.push_back({open, "empty expression"});
      continue;
    }
    try {
      calc::parse_expr(expr);
    } catch (const Error& e) {
      scan.malformed.push_back({open, std::string("expression: ") + e.what()});
      continue;
    }
    AnnotationSpan span;
    span.start = open;
    span.end = close + 2;
    span.expression = std::string(expr);
    span.result_text = std::string(result);
    try {
      span.result = parse_number(result);
    } catch (const Error& e) {
      scan.malformed.push_back({open, std::string("result: ") + e.what()});
      continue;
    }
    scan.spans.push_back(std::move(span));
  }
  return scan;
}

bool annotations_consistent(const std::vector<AnnotationSpan>& spans) {
  for (const auto& span : spans) {
    try {
      if (!numeric_equal(calc::eval_expr(span.expression).to_double(), span.result)) return false;
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

std::string strip_annotations(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  size_t pos = 0;
  while (pos < text.size()) {
    size_t open = text.find("<<", pos);
    if (open == std::string_view::npos) break;
    size_t close = text.find(">>", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

}  // namespace dpost::corpus
