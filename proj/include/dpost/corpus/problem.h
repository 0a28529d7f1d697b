#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dpost::corpus {

// One `<<expression=result>>` calculator annotation. Offsets index the owning
// rationale text; [start, end) covers the delimiters.
struct AnnotationSpan {
  size_t start = 0;
  size_t end = 0;
  std::string expression;
  std::string result_text;
  double result = 0.0;

  friend bool operator==(const AnnotationSpan&, const AnnotationSpan&) = default;
};

struct Rationale {
  std::string text;
  std::vector<AnnotationSpan> annotations;
  std::optional<double> answer;

  // Parses annotations and the terminal `#### ` answer out of `text`.
  // Malformed annotations are dropped; a missing answer leaves `answer` empty.
  static Rationale from_text(std::string text);

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

struct Problem {
  std::string id;
  std::string question;
  std::optional<Rationale> gold_rationale;
  double gold_answer = 0.0;
  std::string answer_text;

  friend bool operator==(const Problem&, const Problem&) = default;
};

enum class DatasetKind { kLabeled, kUnlabeled, kPseudo, kFiltered };

const char* to_string(DatasetKind kind);

struct Dataset {
  DatasetKind kind = DatasetKind::kLabeled;
  std::vector<Problem> items;
  // Parallel to `items` for pseudo and filtered sets: which checkpoint
  // produced each rationale. Empty for labeled/unlabeled sets.
  std::vector<std::string> provenance;

  size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  // Same questions and answers with rationales removed.
  Dataset unlabeled() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Prompt fed to the model for a question.
std::string prompt_text(const std::string& question);

}  // namespace dpost::corpus
