#include "dpost/corpus/synthetic.h"

#include <array>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "dpost/calc/expr.h"
#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/corpus/annotations.h"
#include "dpost/corpus/answer.h"

namespace dpost::corpus {
namespace {

struct Person {
  std::string_view name;
  bool female;
};

constexpr std::array<Person, 12> kPeople{{{"Mia", true}, {"Ana", true}, {"Lily", true}, {"Zoe", true},
                                          {"Emma", true}, {"Nina", true}, {"Tom", false}, {"Ben", false},
                                          {"Sam", false}, {"Max", false}, {"Leo", false}, {"Omar", false}}};
constexpr std::array<std::string_view, 12> kItems{"apples", "pens",  "cards",   "books",  "cookies", "stickers",
                                                  "marbles", "coins", "shells", "eggs",   "candies", "stamps"};
constexpr std::array<std::string_view, 4> kLeads{"So", "Then", "Now", "Next"};

// Words used by the fixed sentence templates below.
constexpr std::array<std::string_view, 32> kTemplateWords{
    "has",  "buys",   "more",   "gives", "to",    "loses",  "ends",  "up",   "with",  "times", "as",
    "many", "The",    "number", "of",    "grows", "splits", "the",   "into", "equal", "groups", "and",
    "keeps", "one",   "group",  "only",  "every", "How",    "does",  "have", "now",   "She"};

constexpr int64_t kMaxValue = 9999;

enum class Op { kAdd, kSub, kMul, kDiv };

std::string pronoun(const Person& p, bool capital) {
  if (p.female) return capital ? "She" : "she";
  return capital ? "He" : "he";
}

std::vector<int64_t> divisors(int64_t x) {
  std::vector<int64_t> out;
  for (int64_t d = 2; d <= std::min<int64_t>(99, x - 1); ++d) {
    if (x % d == 0) out.push_back(d);
  }
  return out;
}

struct Builder {
  RngStream& rng;
  const Person& hero;
  const Person& other;
  std::string item;

  template <typename C>
  const auto& pick(const C& c) {
    return c[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(c.size()) - 1))];
  }
  bool coin() { return rng.uniform_int(0, 1) == 1; }

  // Appends one question sentence and one rationale line; returns the new value.
  int64_t step(int64_t x, std::string& question, std::string& rationale) {
    std::vector<Op> feasible;
    if (x + 2 <= kMaxValue) feasible.push_back(Op::kAdd);
    if (x >= 3) feasible.push_back(Op::kSub);
    if (x * 2 <= kMaxValue) feasible.push_back(Op::kMul);
    std::vector<int64_t> divs = divisors(x);
    if (!divs.empty()) feasible.push_back(Op::kDiv);
    Op op = pick(feasible);

    std::string P = pronoun(hero, true);
    std::string hero_name(hero.name);
    std::string other_name(other.name);
    int64_t n = 0;
    int64_t r = 0;
    char sym = '+';
    bool commutative = false;
    switch (op) {
      case Op::kAdd:
        n = rng.uniform_int(2, std::min<int64_t>(99, kMaxValue - x));
        r = x + n;
        sym = '+';
        commutative = true;
        question += coin() ? " " + P + " buys " + std::to_string(n) + " more " + item + "."
                           : " " + other_name + " gives " + hero_name + " " + std::to_string(n) + " more " + item + ".";
        break;
      case Op::kSub:
        n = rng.uniform_int(2, std::min<int64_t>(99, x - 1));
        r = x - n;
        sym = '-';
        question += coin() ? " " + P + " gives " + std::to_string(n) + " " + item + " to " + other_name + "."
                           : " " + P + " loses " + std::to_string(n) + " " + item + ".";
        break;
      case Op::kMul:
        n = rng.uniform_int(2, std::min<int64_t>(99, kMaxValue / x));
        r = x * n;
        sym = '*';
        commutative = true;
        question += coin() ? " " + P + " ends up with " + std::to_string(n) + " times as many " + item + "."
                           : " The number of " + item + " grows " + std::to_string(n) + " times.";
        break;
      case Op::kDiv:
        n = pick(divs);
        r = x / n;
        sym = '/';
        question += coin() ? " " + P + " splits the " + item + " into " + std::to_string(n) +
                                 " equal groups and keeps one group."
                           : " " + P + " keeps only one of every " + std::to_string(n) + " " + item + ".";
        break;
    }
    std::string lhs = std::to_string(x);
    std::string rhs = std::to_string(n);
    if (commutative && coin()) std::swap(lhs, rhs);
    std::string expr = lhs + sym + rhs;
    std::string result = std::to_string(r);
    std::string subject = coin() ? pronoun(hero, false) : hero_name;
    rationale += std::string(pick(kLeads)) + " " + subject + " has " + expr + "=<<" + expr + "=" + result + ">>" +
                 result + " " + item + ".\n";
    return r;
  }
};

}  // namespace

Dataset generate_synthetic(uint64_t seed, int count, StepRange steps, const std::string& id_prefix) {
  if (count <= 0) throw std::invalid_argument("synthetic count must be positive");
  if (steps.min < 1 || steps.max > 5 || steps.min > steps.max) {
    throw std::invalid_argument("synthetic steps must lie within [1, 5]");
  }
  Dataset out;
  out.kind = DatasetKind::kLabeled;
  std::unordered_set<std::string> seen;
  RngStream rng(seed, stream_id({tag(StreamTag::kCorpus)}));
  int attempts = 0;
  while (static_cast<int>(out.items.size()) < count) {
    if (++attempts > count * 50) throw std::runtime_error("synthetic generator cannot produce enough unique problems");
    const Person& hero = kPeople[static_cast<size_t>(rng.uniform_int(0, kPeople.size() - 1))];
    const Person* other = &hero;
    while (other == &hero) other = &kPeople[static_cast<size_t>(rng.uniform_int(0, kPeople.size() - 1))];
    Builder b{rng, hero, *other, std::string(kItems[static_cast<size_t>(rng.uniform_int(0, kItems.size() - 1))])};

    int64_t value = rng.uniform_int(2, 99);
    std::string question = std::string(hero.name) + " has " + std::to_string(value) + " " + b.item + ".";
    std::string rationale;
    int n_steps = static_cast<int>(rng.uniform_int(steps.min, steps.max));
    for (int s = 0; s < n_steps; ++s) value = b.step(value, question, rationale);
    question += " How many " + b.item + " does " + std::string(hero.name) + " have now?";
    rationale += std::string(kAnswerMarker) + std::to_string(value);
    if (!seen.insert(question).second) continue;

    Problem p;
    p.id = id_prefix + std::to_string(out.items.size());
    p.question = std::move(question);
    p.gold_rationale = Rationale::from_text(std::move(rationale));
    p.gold_answer = static_cast<double>(value);
    p.answer_text = std::to_string(value);
    out.items.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> synthetic_vocabulary() {
  std::vector<std::string> words;
  for (const auto& p : kPeople) words.emplace_back(p.name);
  for (auto w : kItems) words.emplace_back(w);
  for (auto w : kLeads) words.emplace_back(w);
  for (auto w : kTemplateWords) words.emplace_back(w);
  for (auto w : {"he", "she", "He"}) words.emplace_back(w);
  return words;
}

std::vector<std::string> validate_problem(const Problem& problem) {
  std::vector<std::string> issues;
  if (problem.question.empty()) issues.emplace_back("empty question");
  if (!problem.gold_rationale) return issues;
  const Rationale& r = *problem.gold_rationale;
  AnnotationScan scan = parse_annotations(r.text);
  for (const auto& m : scan.malformed) issues.push_back("malformed annotation at " + std::to_string(m.start) + ": " + m.reason);
  size_t last_end = 0;
  for (const auto& span : scan.spans) {
    if (span.start >= span.end || span.start < last_end) issues.push_back("annotation spans overlap or are out of order");
    last_end = span.end;
    try {
      calc::Rational value = calc::eval_expr(span.expression);
      if (!numeric_equal(value.to_double(), span.result)) {
        issues.push_back("annotation " + span.expression + " records " + span.result_text + " but evaluates to " +
                         value.canonical());
      }
    } catch (const Error& e) {
      issues.push_back("annotation " + span.expression + ": " + e.what());
    }
  }
  try {
    if (!numeric_equal(extract_answer(r.text), problem.gold_answer)) issues.emplace_back("rationale answer differs from gold");
  } catch (const Error& e) {
    issues.emplace_back(std::string("rationale answer: ") + e.what());
  }
  return issues;
}

}  // namespace dpost::corpus
