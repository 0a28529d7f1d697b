#include <doctest.h>

#include <cmath>

#include "dpost/calc/expr.h"
#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/corpus/annotations.h"
#include "dpost/corpus/answer.h"
#include "dpost/corpus/dedup.h"
#include "dpost/corpus/jsonl.h"
#include "dpost/corpus/synthetic.h"

using namespace dpost;
using namespace dpost::corpus;

TEST_CASE("extract_answer reads the number after the final marker") {
  CHECK(extract_answer("Weng writes 12*52=<<12*52=624>>624 pages a year.\n#### 624") == 624.0);
  CHECK_THROWS_AS(extract_answer("no marker here"), NoAnswerMarker);
  CHECK(extract_answer("#### -3.50") == -3.5);
  CHECK(extract_answer("#### +7") == 7.0);
  CHECK(extract_answer("#### 1\n#### 2") == 2.0);
  CHECK_THROWS_AS(extract_answer("#### seven"), UnparseableAnswer);
  CHECK_THROWS_AS(extract_answer("#### "), UnparseableAnswer);
  CHECK_THROWS_AS(extract_answer("#### 1.2.3"), UnparseableAnswer);
}

TEST_CASE("numeric_equal uses an absolute tolerance") {
  CHECK(numeric_equal(3.0, 3.0000005));
  CHECK_FALSE(numeric_equal(3.0, 3.00001));
  CHECK(answer_matches("x\n#### 3.000", 3.0));
  CHECK_FALSE(answer_matches("no answer", 3.0));
  CHECK_FALSE(answer_matches("#### abc", 3.0));
}

TEST_CASE("format_number drops trailing zeros") {
  CHECK(format_number(624.0) == "624");
  CHECK(format_number(2.5) == "2.5");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1.0 / 3.0) == "0.333333");
}

TEST_CASE("parse_annotations finds well-formed spans in order") {
  auto one = parse_annotations("3*2=<<3*2=6>>6 pages");
  REQUIRE(one.spans.size() == 1);
  CHECK(one.spans[0].expression == "3*2");
  CHECK(one.spans[0].result == 6.0);
  CHECK(one.spans[0].start == 4);
  CHECK(one.spans[0].end == 13);
  CHECK(one.malformed.empty());

  CHECK(parse_annotations("").spans.empty());

  auto two = parse_annotations("a <<1+2=3>> b <<10/4=2.5>> c");
  REQUIRE(two.spans.size() == 2);
  for (const auto& span : two.spans) {
    CHECK(calc::eval_expr(span.expression).to_double() == span.result);
  }
  CHECK(two.spans[0].result == 3.0);
  CHECK(two.spans[1].result == 2.5);
  CHECK(two.spans[0].end <= two.spans[1].start);
}

TEST_CASE("malformed annotations are reported and skipped") {
  auto unclosed = parse_annotations("x <<3*2=6 and more");
  CHECK(unclosed.spans.empty());
  CHECK(unclosed.malformed.size() == 1);

  auto empty_expr = parse_annotations("<<=6>> then <<2+2=4>>");
  CHECK(empty_expr.malformed.size() == 1);
  REQUIRE(empty_expr.spans.size() == 1);
  CHECK(empty_expr.spans[0].result == 4.0);

  auto nested = parse_annotations("<<1+ <<2+3=5>>");
  CHECK(nested.malformed.size() == 1);
  CHECK(nested.spans.size() == 1);

  CHECK(parse_annotations("<<3*2>>").malformed.size() == 1);
  CHECK(parse_annotations("<<3*=6>>").malformed.size() == 1);
}

TEST_CASE("annotations_consistent checks recorded results") {
  CHECK(annotations_consistent(parse_annotations("<<3*2=6>>6").spans));
  CHECK_FALSE(annotations_consistent(parse_annotations("<<3*2=7>>7").spans));
  CHECK_FALSE(annotations_consistent(parse_annotations("<<3/0=1>>1").spans));
}

TEST_CASE("strip_annotations keeps the surface result") {
  CHECK(strip_annotations("3*2=<<3*2=6>>6 pages") == "3*2=6 pages");
  CHECK(strip_annotations("none") == "none");
}

TEST_CASE("generate_synthetic is deterministic") {
  auto a = generate_synthetic(7, 1, {2, 2});
  auto b = generate_synthetic(7, 1, {2, 2});
  CHECK(to_jsonl(a) == to_jsonl(b));
  CHECK(generate_synthetic(7, 50, {1, 3}) == generate_synthetic(7, 50, {1, 3}));
  CHECK_FALSE(generate_synthetic(7, 50, {1, 3}) == generate_synthetic(8, 50, {1, 3}));
}

TEST_CASE("generate_synthetic respects the step range") {
  for (int steps = 1; steps <= 5; ++steps) {
    auto data = generate_synthetic(11, 40, {steps, steps});
    for (const auto& p : data.items) {
      REQUIRE(p.gold_rationale);
      CHECK(parse_annotations(p.gold_rationale->text).spans.size() == static_cast<size_t>(steps));
    }
  }
  CHECK_THROWS_AS(generate_synthetic(1, 0, {1, 3}), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(1, 5, {0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(1, 5, {1, 6}), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(1, 5, {3, 2}), std::invalid_argument);
}

TEST_CASE("2000 synthetic problems all validate") {
  auto data = generate_synthetic(7, 2000, {1, 3});
  REQUIRE(data.size() == 2000);
  CHECK(data.kind == DatasetKind::kLabeled);
  std::set<std::string> questions;
  for (const auto& p : data.items) {
    auto issues = validate_problem(p);
    INFO(p.id << ": " << (issues.empty() ? "" : issues.front()));
    CHECK(issues.empty());
    questions.insert(p.question);

    auto scan = parse_annotations(p.gold_rationale->text);
    REQUIRE_FALSE(scan.spans.empty());
    CHECK(scan.malformed.empty());
    for (const auto& span : scan.spans) {
      calc::Rational value = calc::eval_expr(span.expression);
      CHECK(value.is_integer());
      CHECK(value.canonical() == span.result_text);
      CHECK(value.num() >= 0);
    }
    double answer = extract_answer(p.gold_rationale->text);
    CHECK(answer == scan.spans.back().result);
    CHECK(answer == p.gold_answer);
  }
  CHECK(questions.size() == data.size());
}

TEST_CASE("validate_problem reports broken problems") {
  auto p = generate_synthetic(5, 1, {2, 2}).items[0];
  CHECK(validate_problem(p).empty());

  Problem wrong_answer = p;
  wrong_answer.gold_answer += 1;
  CHECK_FALSE(validate_problem(wrong_answer).empty());

  Problem empty_question = p;
  empty_question.question.clear();
  CHECK_FALSE(validate_problem(empty_question).empty());

  Problem bad_span = p;
  bad_span.gold_rationale = Rationale::from_text("<<2+2=5>>5\n#### 5");
  bad_span.gold_answer = 5;
  CHECK_FALSE(validate_problem(bad_span).empty());
}

TEST_CASE("jaccard similarity") {
  TokenSet abc{"a", "b", "c"};
  CHECK(jaccard(abc, abc) == 1.0);
  CHECK(jaccard(abc, TokenSet{"x", "y"}) == 0.0);
  CHECK(jaccard(abc, TokenSet{"b", "c", "d"}) == 0.5);
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard(abc, {}) == 0.0);
}

TEST_CASE("jaccard tokens ignore annotation contents") {
  auto a = jaccard_tokens("So 3*2=<<3*2=6>>6 pens.");
  auto b = jaccard_tokens("So 3*2=<<2*3=6>>6 pens.");
  CHECK(a == b);
  CHECK(a == TokenSet{"So", "3*2=6", "pens."});
}

namespace {

std::vector<Rationale> rationales(const std::vector<std::string>& texts) {
  std::vector<Rationale> out;
  for (const auto& t : texts) out.push_back(Rationale::from_text(t));
  return out;
}

}  // namespace

TEST_CASE("deduplicate keeps the first of near-duplicates") {
  auto same = rationales({"a b c\n#### 1", "a b c\n#### 1"});
  CHECK(deduplicate(same, 0.7).size() == 1);

  auto disjoint = rationales({"a b", "c d", "e f", "g h"});
  CHECK(deduplicate(disjoint, 0.7) == disjoint);

  auto mixed = rationales({"a b c d", "x y", "a b c e", "a b c d z"});
  auto kept = deduplicate(mixed, 0.7);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].text == "a b c d");
  CHECK(kept[1].text == "x y");
  CHECK(kept[2].text == "a b c e");
  CHECK(deduplicate(kept, 0.7) == kept);

  CHECK_THROWS_AS(deduplicate(mixed, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(deduplicate(mixed, 1.5), std::invalid_argument);
  CHECK(deduplicate(same, 1.0).size() == 1);
}

TEST_CASE("deduplicate output has no pair at or above the threshold") {
  RngStream rng(21, 0);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> texts;
    int n = static_cast<int>(rng.uniform_int(0, 12));
    for (int i = 0; i < n; ++i) {
      std::string t;
      for (const auto& w : words) {
        if (rng.uniform() < 0.5) t += w + " ";
      }
      texts.push_back(t);
    }
    double threshold = 0.3 + 0.7 * rng.uniform();
    auto in = rationales(texts);
    auto out = deduplicate(in, threshold);
    for (size_t i = 0; i < out.size(); ++i) {
      for (size_t j = i + 1; j < out.size(); ++j) {
        CHECK(jaccard(jaccard_tokens(out[i].text), jaccard_tokens(out[j].text)) < threshold);
      }
    }
    CHECK(deduplicate(out, threshold) == out);
    auto idx = deduplicate_indices(texts, threshold);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
  }
}

TEST_CASE("JSONL round-trips every dataset kind") {
  auto labeled = generate_synthetic(9, 30, {1, 4});
  CHECK(from_jsonl(to_jsonl(labeled), DatasetKind::kLabeled) == labeled);

  auto unlabeled = labeled.unlabeled();
  CHECK(unlabeled.kind == DatasetKind::kUnlabeled);
  for (const auto& p : unlabeled.items) CHECK_FALSE(p.gold_rationale);
  CHECK(from_jsonl(to_jsonl(unlabeled), DatasetKind::kUnlabeled) == unlabeled);

  Dataset pseudo = labeled;
  pseudo.kind = DatasetKind::kPseudo;
  for (size_t i = 0; i < pseudo.size(); ++i) pseudo.provenance.push_back("sft:" + std::to_string(i));
  CHECK(from_jsonl(to_jsonl(pseudo, "cafe"), DatasetKind::kPseudo) == pseudo);
  CHECK(to_jsonl(pseudo, "cafe").find("\"config_hash\":\"cafe\"") != std::string::npos);

  Dataset odd;
  Problem p;
  p.id = "q\"1";
  p.question = "Line one\nline \"two\" \\ done?";
  p.gold_rationale = Rationale::from_text("x=<<1/3=0.333333>>0.333333\n#### -2.5");
  p.gold_answer = -2.5;
  p.answer_text = "-2.5";
  odd.items.push_back(p);
  CHECK(from_jsonl(to_jsonl(odd), DatasetKind::kLabeled) == odd);
}

TEST_CASE("malformed JSONL is a DataError") {
  CHECK_THROWS_AS(from_jsonl("{not json}\n", DatasetKind::kLabeled), DataError);
  CHECK_THROWS_AS(from_jsonl("{\"id\": \"a\"}\n", DatasetKind::kLabeled), DataError);
  CHECK_THROWS_AS(read_jsonl("/nonexistent/file.jsonl", DatasetKind::kLabeled), DataError);
}
