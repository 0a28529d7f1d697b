#include "dpost/corpus/problem.h"

#include "dpost/common/error.h"
#include "dpost/corpus/annotations.h"
#include "dpost/corpus/answer.h"

namespace dpost::corpus {

Rationale Rationale::from_text(std::string text) {
  Rationale r;
  r.annotations = parse_annotations(text).spans;
  try {
    r.answer = extract_answer(text);
  } catch (const NoAnswerMarker&) {
  } catch (const UnparseableAnswer&) {
  }
  r.text = std::move(text);
  return r;
}

const char* to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kLabeled: return "labeled";
    case DatasetKind::kUnlabeled: return "unlabeled";
    case DatasetKind::kPseudo: return "pseudo";
    case DatasetKind::kFiltered: return "filtered";
  }
  return "unknown";
}

Dataset Dataset::unlabeled() const {
  Dataset out;
  out.kind = DatasetKind::kUnlabeled;
  out.items = items;
  for (auto& p : out.items) p.gold_rationale.reset();
  return out;
}

std::string prompt_text(const std::string& question) { return question + "\n"; }

}  // namespace dpost::corpus
