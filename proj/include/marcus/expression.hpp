#pragma once

#include <string>
#include <vector>

namespace marcus {

/// Arithmetic expression in one variable `x`, compiled to a small stack
/// program. Supports + - * / ^, unary minus, parentheses, the constants pi
/// and e, and sqrt, exp, log, sin, cos, tan, sinh, cosh, tanh,
/// arcsinh (asinh), abs.
class Expression {
 public:
  static Expression parse(const std::string& text);

  double operator()(double x) const;
  const std::string& source() const { return source_; }

 private:
  enum class Op : unsigned char {
    push_const, push_x, add, sub, mul, div, pow, neg,
    sqrt, exp, log, sin, cos, tan, sinh, cosh, tanh, asinh, abs
  };
  struct Instr {
    Op op;
    double value = 0.0;
  };
  friend class ExpressionParser;

  std::string source_;
  std::vector<Instr> program_;
  std::size_t max_depth_ = 0;
};

}  // namespace marcus
