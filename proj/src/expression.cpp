#include "marcus/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <utility>

#include "marcus/errors.hpp"

namespace marcus {

class ExpressionParser {
 public:
  explicit ExpressionParser(const std::string& text) : s_(text) {}

  Expression run() {
    Expression e;
    e.source_ = s_;
    out_ = &e.program_;
    parse_sum();
    skip_space();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    if (out_->empty()) fail("empty expression");
    // Stack depth for the evaluator.
    std::size_t depth = 0;
    for (const auto& in : e.program_) {
      switch (in.op) {
        case Expression::Op::push_const:
        case Expression::Op::push_x: ++depth; break;
        case Expression::Op::add:
        case Expression::Op::sub:
        case Expression::Op::mul:
        case Expression::Op::div:
        case Expression::Op::pow: --depth; break;
        default: break;
      }
      e.max_depth_ = std::max(e.max_depth_, depth);
    }
    return e;
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("expression '" + s_ + "' at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, double v = 0.0) { out_->push_back({op, v}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::add);
      } else if (accept('-')) {
        parse_product();
        emit(Op::sub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::div);
      } else {
        return;
      }
    }
  }

  // Unary minus binds looser than ^, so -x^2 = -(x^2).
  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::neg);
      return;
    }
    if (accept('+')) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();  // right associative
      emit(Op::pow);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Op::push_const, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return emit(Op::push_x);
      if (name == "pi") return emit(Op::push_const, std::numbers::pi);
      if (name == "e") return emit(Op::push_const, std::numbers::e);
      static const std::pair<const char*, Op> functions[] = {
          {"sqrt", Op::sqrt}, {"exp", Op::exp},   {"log", Op::log},     {"ln", Op::log},
          {"sin", Op::sin},   {"cos", Op::cos},   {"tan", Op::tan},     {"sinh", Op::sinh},
          {"cosh", Op::cosh}, {"tanh", Op::tanh}, {"arcsinh", Op::asinh}, {"asinh", Op::asinh},
          {"abs", Op::abs}};
      for (const auto& [fname, op] : functions) {
        if (name != fname) continue;
        if (!accept('(')) fail("expected '(' after " + name);
        parse_sum();
        if (!accept(')')) fail("expected ')'");
        emit(op);
        return;
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  std::vector<Expression::Instr>* out_ = nullptr;
};

Expression Expression::parse(const std::string& text) { return ExpressionParser(text).run(); }

double Expression::operator()(double x) const {
  double stack[64] = {};
  std::vector<double> heap;
  double* st = stack;
  if (max_depth_ > 64) {
    heap.resize(max_depth_);
    st = heap.data();
  }
  std::size_t n = 0;
  for (const auto& in : program_) {
    switch (in.op) {
      case Op::push_const: st[n++] = in.value; break;
      case Op::push_x: st[n++] = x; break;
      case Op::add: --n; st[n - 1] += st[n]; break;
      case Op::sub: --n; st[n - 1] -= st[n]; break;
      case Op::mul: --n; st[n - 1] *= st[n]; break;
      case Op::div: --n; st[n - 1] /= st[n]; break;
      case Op::pow: --n; st[n - 1] = std::pow(st[n - 1], st[n]); break;
      case Op::neg: st[n - 1] = -st[n - 1]; break;
      case Op::sqrt: st[n - 1] = std::sqrt(st[n - 1]); break;
      case Op::exp: st[n - 1] = std::exp(st[n - 1]); break;
      case Op::log: st[n - 1] = std::log(st[n - 1]); break;
      case Op::sin: st[n - 1] = std::sin(st[n - 1]); break;
      case Op::cos: st[n - 1] = std::cos(st[n - 1]); break;
      case Op::tan: st[n - 1] = std::tan(st[n - 1]); break;
      case Op::sinh: st[n - 1] = std::sinh(st[n - 1]); break;
      case Op::cosh: st[n - 1] = std::cosh(st[n - 1]); break;
      case Op::tanh: st[n - 1] = std::tanh(st[n - 1]); break;
      case Op::asinh: st[n - 1] = std::asinh(st[n - 1]); break;
      case Op::abs: st[n - 1] = std::abs(st[n - 1]); break;
    }
  }
  return st[0];
}

}  // namespace marcus
