#pragma once

#include <functional>
#include <string>

#include "marcus/levy_driver.hpp"

namespace marcus {

/// Coefficients of
///   du = (grad u . a + u b + c) dt + (grad u . A + u B + C) o dW
///        + (grad u . alpha + u beta + sigma) <> dZ
/// with x in R^d and W, Z in R^m. Unset evaluators are identically zero.
struct CoefficientSet {
  using VecField = std::function<Vec(const Vec&)>;      // R^d -> R^d
  using Scalar = std::function<double(const Vec&)>;     // R^d -> R
  using MatField = std::function<Mat(const Vec&)>;      // R^d -> R^{d x m}
  using RowField = std::function<Vec(const Vec&)>;      // R^d -> R^m
  /// Jacobian (d x d) of column j of A.
  using ColumnJacobian = std::function<Mat(const Vec&, int)>;

  int d = 1;
  int m = 1;
  VecField a;
  Scalar b;
  Scalar c;
  MatField A;
  RowField B;
  RowField C;
  MatField alpha;
  RowField beta;
  RowField sigma;
  ColumnJacobian dA;
  bool smoothness_declared = false;

  static CoefficientSet zero(int d, int m);

  Vec eval_a(const Vec& x) const { return a ? a(x) : Vec::Zero(d); }
  double eval_b(const Vec& x) const { return b ? b(x) : 0.0; }
  double eval_c(const Vec& x) const { return c ? c(x) : 0.0; }
  Mat eval_A(const Vec& x) const { return A ? A(x) : Mat::Zero(d, m); }
  Vec eval_B(const Vec& x) const { return B ? B(x) : Vec::Zero(m); }
  Vec eval_C(const Vec& x) const { return C ? C(x) : Vec::Zero(m); }
  Mat eval_alpha(const Vec& x) const { return alpha ? alpha(x) : Mat::Zero(d, m); }
  Vec eval_beta(const Vec& x) const { return beta ? beta(x) : Vec::Zero(m); }
  Vec eval_sigma(const Vec& x) const { return sigma ? sigma(x) : Vec::Zero(m); }
  /// Jacobian of column j of A; central differences when dA is unset.
  Mat eval_dA(const Vec& x, int j) const;

  bool has_brownian_terms() const { return A || B || C; }
  bool has_jump_terms() const { return alpha || beta || sigma; }
  bool noise_free() const { return !has_brownian_terms() && !has_jump_terms(); }

  /// Throws InputError when evaluator outputs disagree with (d, m) at x.
  void check_dimensions(const Vec& x) const;

  /// Drift f, Brownian matrix F and jump matrix Sigma of the (d+2)-dimensional
  /// characteristics system at X = (x, xi, zeta).
  Vec system_drift(const Vec& X) const;
  Mat system_brownian(const Vec& X) const;
  Mat system_jump(const Vec& X) const;
};

/// Helpers for one-dimensional coefficient construction.
namespace scalar {
CoefficientSet::VecField vec_field(std::function<double(double)> f);
CoefficientSet::Scalar scalar(std::function<double(double)> f);
CoefficientSet::MatField mat_field(std::function<double(double)> f);
CoefficientSet::RowField row_field(std::function<double(double)> f);
}  // namespace scalar

}  // namespace marcus
