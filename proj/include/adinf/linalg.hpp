#ifndef ADINF_LINALG_HPP
#define ADINF_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "adinf/errors.hpp"

namespace adinf {

// Small dense row-major matrix. Everything here runs on K x K or J x J
// problems with single-digit dimensions, so simplicity beats tuning.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw numeric_error("matmul: dimension mismatch");
  Matrix r(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double v = x.at(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) r.at(i, j) += v * y.at(k, j);
    }
  return r;
}

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  if (m.cols != static_cast<int>(v.size()))
    throw numeric_error("matvec: dimension mismatch");
  std::vector<double> r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m.at(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

// A * B * A^T for symmetric B; used to project covariances through contrasts.
inline Matrix sandwich(const Matrix& a, const Matrix& b) {
  return matmul(matmul(a, b), transpose(a));
}

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors
};

// Cyclic Jacobi iteration for symmetric matrices. Dimensions here are tiny,
// so convergence is a handful of sweeps.
inline SymEigen eigen_sym(Matrix s) {
  if (s.rows != s.cols) throw numeric_error("eigen_sym: matrix not square");
  const int n = s.rows;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += s.at(p, q) * s.at(p, q);
    double diag = 0.0;
    for (int p = 0; p < n; ++p) diag += s.at(p, p) * s.at(p, p);
    if (off <= 1e-30 * (diag + 1e-300)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = s.at(p, q);
        if (apq == 0.0) continue;
        const double app = s.at(p, p);
        const double aqq = s.at(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int i = 0; i < n; ++i) {
          const double sip = s.at(i, p);
          const double siq = s.at(i, q);
          s.at(i, p) = c * sip - sn * siq;
          s.at(i, q) = sn * sip + c * siq;
        }
        for (int j = 0; j < n; ++j) {
          const double spj = s.at(p, j);
          const double sqj = s.at(q, j);
          s.at(p, j) = c * spj - sn * sqj;
          s.at(q, j) = sn * spj + c * sqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v.at(i, p);
          const double viq = v.at(i, q);
          v.at(i, p) = c * vip - sn * viq;
          v.at(i, q) = sn * vip + c * viq;
        }
      }
    }
  }
  SymEigen e;
  e.values.resize(n);
  for (int i = 0; i < n; ++i) e.values[i] = s.at(i, i);
  e.vectors = Matrix(n, n);
  // sort ascending by eigenvalue, reordering the vector columns
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (e.values[idx[j]] < e.values[idx[i]]) std::swap(idx[i], idx[j]);
  std::vector<double> sorted(n);
  for (int i = 0; i < n; ++i) {
    sorted[i] = e.values[idx[i]];
    for (int r = 0; r < n; ++r) e.vectors.at(r, i) = v.at(r, idx[i]);
  }
  e.values = sorted;
  return e;
}

// Solves S x = b for symmetric S through its eigendecomposition. Returns
// false without touching x when S is singular at the given relative cutoff.
inline bool solve_sym(const Matrix& s, const std::vector<double>& b,
                      std::vector<double>& x, double rel_cutoff) {
  const SymEigen e = eigen_sym(s);
  const int n = s.rows;
  double amax = 0.0;
  for (double ev : e.values) amax = std::max(amax, std::fabs(ev));
  if (amax <= 0.0) return false;
  for (double ev : e.values)
    if (std::fabs(ev) <= rel_cutoff * amax) return false;
  // x = V diag(1/ev) V^T b
  std::vector<double> w(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (int r = 0; r < n; ++r) s2 += e.vectors.at(r, i) * b[r];
    w[i] = s2 / e.values[i];
  }
  x.assign(n, 0.0);
  for (int r = 0; r < n; ++r) {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) s2 += e.vectors.at(r, i) * w[i];
    x[r] = s2;
  }
  return true;
}

// x^T S^{-1} x with the same singularity contract as solve_sym.
inline bool quad_form_inv(const Matrix& s, const std::vector<double>& x,
                          double& out, double rel_cutoff) {
  std::vector<double> y;
  if (!solve_sym(s, x, y, rel_cutoff)) return false;
  double q = 0.0;
  for (size_t i = 0; i < x.size(); ++i) q += x[i] * y[i];
  out = q;
  return true;
}

// Numerical row rank via the eigenvalues of C C^T.
inline bool has_full_row_rank(const Matrix& c, double rel_cutoff = 1e-10) {
  const Matrix g = matmul(c, transpose(c));
  const SymEigen e = eigen_sym(g);
  const double amax = e.values.empty() ? 0.0 : e.values.back();
  if (amax <= 0.0) return false;
  // singular values are sqrt(eigenvalues); compare on that scale
  const double smax = std::sqrt(amax);
  const double smin = std::sqrt(std::max(e.values.front(), 0.0));
  return smin > rel_cutoff * smax;
}

// Compensated accumulation; the enumeration oracle certifies identities at
// 1e-9 over up to 2^20 weighted terms, which plain summation can miss.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct KahanVec {
  std::vector<KahanSum> acc;
  explicit KahanVec(size_t n = 0) : acc(n) {}
  void add(const std::vector<double>& x, double w) {
    for (size_t i = 0; i < x.size(); ++i) acc[i].add(w * x[i]);
  }
  std::vector<double> value() const {
    std::vector<double> v(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) v[i] = acc[i].sum;
    return v;
  }
};

}  // namespace adinf

#endif
