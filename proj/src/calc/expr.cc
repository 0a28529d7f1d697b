#include "dpost/calc/expr.h"

#include <cctype>

#include "dpost/common/error.h"

namespace dpost::calc {
namespace {

constexpr int kMaxDepth = 64;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprAst parse() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("empty expression");
    ExprAst ast = expr(0);
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "' in expression");
    }
    return ast;
  }

 private:
  ExprAst expr(int depth) {
    ExprAst lhs = term(depth);
    for (;;) {
      char op = peek();
      if (op != '+' && op != '-') return lhs;
      ++pos_;
      lhs = binary(op, std::move(lhs), term(depth));
    }
  }

  ExprAst term(int depth) {
    ExprAst lhs = factor(depth);
    for (;;) {
      char op = peek();
      if (op != '*' && op != '/') return lhs;
      ++pos_;
      lhs = binary(op, std::move(lhs), factor(depth));
    }
  }

  ExprAst factor(int depth) {
    if (depth > kMaxDepth) throw ParseError("expression nested too deeply");
    char c = peek();
    if (c == '-' || c == '+') {
      ++pos_;
      ExprAst operand = factor(depth + 1);
      if (c == '+') return operand;
      return ExprAst{ExprAst::Negate{std::make_unique<ExprAst>(std::move(operand))}};
    }
    if (c == '(') {
      ++pos_;
      ExprAst inner = expr(depth + 1);
      if (peek() != ')') throw ParseError("missing ')'");
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '\0') throw ParseError("expression ends early");
    throw ParseError("unexpected '" + std::string(1, c) + "' in expression");
  }

  ExprAst number() {
    size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    return ExprAst{Rational::from_decimal(text_.substr(start, pos_ - start))};
  }

  static ExprAst binary(char op, ExprAst lhs, ExprAst rhs) {
    return ExprAst{ExprAst::Binary{op, std::make_unique<ExprAst>(std::move(lhs)),
                                   std::make_unique<ExprAst>(std::move(rhs))}};
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  size_t pos_ = 0;
};

int precedence(const ExprAst& ast) {
  if (const auto* b = std::get_if<ExprAst::Binary>(&ast.node)) return (b->op == '+' || b->op == '-') ? 1 : 2;
  if (std::holds_alternative<ExprAst::Negate>(ast.node)) return 3;
  return 4;
}

}  // namespace

ExprAst parse_expr(std::string_view text) { return Parser(text).parse(); }

Rational evaluate(const ExprAst& ast) {
  struct Visitor {
    Rational operator()(const Rational& r) const { return r; }
    Rational operator()(const ExprAst::Negate& n) const { return -evaluate(*n.operand); }
    Rational operator()(const ExprAst::Binary& b) const {
      Rational lhs = evaluate(*b.lhs);
      Rational rhs = evaluate(*b.rhs);
      switch (b.op) {
        case '+': return lhs + rhs;
        case '-': return lhs - rhs;
        case '*': return lhs * rhs;
        default: return lhs / rhs;
      }
    }
  };
  return std::visit(Visitor{}, ast.node);
}

Rational eval_expr(std::string_view text) { return evaluate(parse_expr(text)); }

std::string to_string(const ExprAst& ast) {
  if (const auto* r = std::get_if<Rational>(&ast.node)) return r->canonical();
  if (const auto* n = std::get_if<ExprAst::Negate>(&ast.node)) {
    std::string inner = to_string(*n->operand);
    return precedence(*n->operand) < 3 ? "-(" + inner + ")" : "-" + inner;
  }
  const auto& b = std::get<ExprAst::Binary>(ast.node);
  int p = precedence(ast);
  std::string lhs = to_string(*b.lhs);
  std::string rhs = to_string(*b.rhs);
  if (precedence(*b.lhs) < p) lhs = "(" + lhs + ")";
  // right operand needs parentheses at equal precedence: a-(b-c), a/(b*c)
  if (precedence(*b.rhs) <= p && std::holds_alternative<ExprAst::Binary>(b.rhs->node)) rhs = "(" + rhs + ")";
  return lhs + b.op + rhs;
}

}  // namespace dpost::calc
