#pragma once

#include <string>
#include <vector>

#include "smanifold/errors.hpp"

namespace smanifold {

// Compiled scalar expression over variables u1..uN.
//
// Grammar:
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := ('-'|'+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'u' digits | func '(' expr ')' | '(' expr ')'
//   func    := exp | ln | log | sqrt | sin | cos
//
// '^' is right associative and binds tighter than unary minus, so -u1^2 is -(u1^2).
class Expr {
 public:
  Expr() = default;

  // Throws ParseError with 1-based line/column of the offending token.
  static Expr parse(const std::string& text, int dim);

  double eval(const double* u) const;
  // Value and exact gradient (forward-mode automatic differentiation).
  double eval_grad(const double* u, double* grad) const;

  const std::string& text() const { return text_; }
  int dim() const { return dim_; }
  // Highest variable index referenced (0 if none).
  int max_var() const { return max_var_; }

  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, PowInt, Pow, Exp, Ln, Sqrt, Sin, Cos };
  struct Instr {
    Op op;
    double value = 0.0;
    int index = 0;
  };

 private:
  std::string text_;
  int dim_ = 0;
  int max_var_ = 0;
  std::vector<Instr> code_;
  int max_stack_ = 0;

  template <class T>
  T run(const T* u) const;

  friend class ExprCompiler;
};

}  // namespace smanifold
