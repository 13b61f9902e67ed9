#include "marcus/coefficients.hpp"

#include <cmath>

#include "marcus/errors.hpp"

namespace marcus {

CoefficientSet CoefficientSet::zero(int d, int m) {
  if (d < 1 || m < 1) throw InputError("coefficient dimensions must be >= 1");
  CoefficientSet c;
  c.d = d;
  c.m = m;
  return c;
}

Mat CoefficientSet::eval_dA(const Vec& x, int j) const {
  if (dA) return dA(x, j);
  Mat jac = Mat::Zero(d, d);
  if (!A) return jac;
  for (int k = 0; k < d; ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(x(k)));
    Vec xp = x;
    Vec xm = x;
    xp(k) += h;
    xm(k) -= h;
    jac.col(k) = (A(xp).col(j) - A(xm).col(j)) / (2.0 * h);
  }
  return jac;
}

void CoefficientSet::check_dimensions(const Vec& x) const {
  if (x.size() != d) throw InputError("point dimension does not match d");
  auto check = [](bool ok, const char* name) {
    if (!ok) throw InputError(std::string("coefficient '") + name + "' has wrong shape");
  };
  check(eval_a(x).size() == d, "a");
  const Mat a_mat = eval_A(x);
  check(a_mat.rows() == d && a_mat.cols() == m, "A");
  const Mat al = eval_alpha(x);
  check(al.rows() == d && al.cols() == m, "alpha");
  check(eval_B(x).size() == m, "B");
  check(eval_C(x).size() == m, "C");
  check(eval_beta(x).size() == m, "beta");
  check(eval_sigma(x).size() == m, "sigma");
}

Vec CoefficientSet::system_drift(const Vec& X) const {
  const Vec x = X.head(d);
  const double xi = X(d);
  Vec f(d + 2);
  f.head(d) = -eval_a(x);
  f(d) = -xi * eval_b(x);
  f(d + 1) = -xi * eval_c(x);
  return f;
}

Mat CoefficientSet::system_brownian(const Vec& X) const {
  const Vec x = X.head(d);
  const double xi = X(d);
  Mat F(d + 2, m);
  F.topRows(d) = -eval_A(x);
  F.row(d) = -xi * eval_B(x).transpose();
  F.row(d + 1) = -xi * eval_C(x).transpose();
  return F;
}

Mat CoefficientSet::system_jump(const Vec& X) const {
  const Vec x = X.head(d);
  const double xi = X(d);
  Mat S(d + 2, m);
  S.topRows(d) = -eval_alpha(x);
  S.row(d) = -xi * eval_beta(x).transpose();
  S.row(d + 1) = -xi * eval_sigma(x).transpose();
  return S;
}

namespace scalar {

CoefficientSet::VecField vec_field(std::function<double(double)> f) {
  return [f = std::move(f)](const Vec& x) { return Vec::Constant(1, f(x(0))); };
}

CoefficientSet::Scalar scalar(std::function<double(double)> f) {
  return [f = std::move(f)](const Vec& x) { return f(x(0)); };
}

CoefficientSet::MatField mat_field(std::function<double(double)> f) {
  return [f = std::move(f)](const Vec& x) { return Mat::Constant(1, 1, f(x(0))); };
}

CoefficientSet::RowField row_field(std::function<double(double)> f) {
  return [f = std::move(f)](const Vec& x) { return Vec::Constant(1, f(x(0))); };
}

}  // namespace scalar

}  // namespace marcus
