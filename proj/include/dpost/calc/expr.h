#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "dpost/calc/rational.h"

namespace dpost::calc {

// Arithmetic syntax tree over + - * / with numeric leaves. Parentheses are
// resolved into the tree shape; unary minus is a Negate node.
struct ExprAst {
  struct Binary {
    char op;  // one of + - * /
    std::unique_ptr<ExprAst> lhs;
    std::unique_ptr<ExprAst> rhs;
  };
  struct Negate {
    std::unique_ptr<ExprAst> operand;
  };
  std::variant<Rational, Binary, Negate> node;
};

// Recursive-descent parse of `expr := term (('+'|'-') term)*`,
// `term := factor (('*'|'/') factor)*`,
// `factor := ('+'|'-') factor | number | '(' expr ')'`. Spaces are ignored.
// Throws ParseError.
ExprAst parse_expr(std::string_view text);

// Throws DivisionByZero, or ParseError on 64-bit overflow.
Rational evaluate(const ExprAst& ast);

// parse_expr + evaluate.
Rational eval_expr(std::string_view text);

// Renders the tree back to text with minimal parentheses.
std::string to_string(const ExprAst& ast);

}  // namespace dpost::calc
