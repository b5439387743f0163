#pragma once

// Reference computations used only by tests. Each one is written from the
// defining formula with no shared code paths into the library.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Real = long double;

inline Real sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  Real s = 0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    const Real d = static_cast<Real>(a(k, i)) - static_cast<Real>(b(k, j));
    s += d * d;
  }
  return s;
}

inline Real dot(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  Real s = 0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) s += static_cast<Real>(a(k, i)) * static_cast<Real>(b(k, j));
  return s;
}

// L = -Σᵢ log[exp(-|zᵢ-zᵢ′|²/2) / (Σ_{j≠i} exp(-|zᵢ-zⱼ|²/2) + exp(-|zᵢ-zᵢ′|²/2))], term by term.
inline Real infonce_literal(const Matrix& Z, const Matrix& Zp) {
  Real loss = 0;
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    const Real num = std::exp(-sq_dist(Z, i, Zp, i) / 2);
    Real den = num;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      if (j != i) den += std::exp(-sq_dist(Z, i, Z, j) / 2);
    }
    loss -= std::log(num / den);
  }
  return loss;
}

// Cosine form on unit columns: positive ẑᵢ·ẑᵢ′, negatives ẑᵢ·ẑⱼ for j≠i.
inline Real cosine_literal(const Matrix& Z, const Matrix& Zp) {
  Real loss = 0;
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    const Real num = std::exp(dot(Z, i, Zp, i));
    Real den = num;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      if (j != i) den += std::exp(dot(Z, i, Z, j));
    }
    loss -= std::log(num / den);
  }
  return loss;
}

// Central differences of a scalar function of a matrix argument.
inline Matrix fd_gradient(const std::function<Real(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double keep = probe(r, c);
      probe(r, c) = keep + h;
      const Real up = f(probe);
      probe(r, c) = keep - h;
      const Real down = f(probe);
      probe(r, c) = keep;
      g(r, c) = static_cast<double>((up - down) / (2 * static_cast<Real>(h)));
    }
  }
  return g;
}

// Largest entrywise relative error, each entry measured against
// max(|reference entry|, 1e-3 · max|reference|).
inline double max_rel_error(const Matrix& value, const Matrix& reference) {
  const double floor = 1e-3 * reference.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index c = 0; c < value.cols(); ++c) {
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      const double denom = std::max(std::abs(reference(r, c)), floor);
      const double err = std::abs(value(r, c) - reference(r, c));
      worst = std::max(worst, denom > 0.0 ? err / denom : err);
    }
  }
  return worst;
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
  const double scale = b.norm();
  return scale > 0.0 ? (a - b).norm() / scale : (a - b).norm();
}

// exp(M) by scaling and squaring with a degree-20 Taylor series.
inline Matrix expm_taylor(const Matrix& m) {
  const double nrm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix a = m / std::ldexp(1.0, squarings);
  Matrix term = Matrix::Identity(m.rows(), m.cols());
  Matrix sum = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

// X from the double sums, with rᵢ = Σ_{j≠i} αᵢⱼ:
//   Σᵢ Σ_{j≠i} [αᵢⱼ(xᵢ′ - xⱼ) + αⱼᵢ(xᵢ - xⱼ)] xᵢᵀ - Σᵢ rᵢ (xᵢ′ - xᵢ) xᵢ′ᵀ.
inline Matrix contrast_brute_force(const Matrix& X, const Matrix& Xp, const Matrix& alpha) {
  const Eigen::Index d = X.rows();
  const Eigen::Index n = X.cols();
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector acc = Vector::Zero(d);
    double r = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      acc += alpha(i, j) * (Xp.col(i) - X.col(j)) + alpha(j, i) * (X.col(i) - X.col(j));
      r += alpha(i, j);
    }
    out += acc * X.col(i).transpose();
    out -= r * (Xp.col(i) - X.col(i)) * Xp.col(i).transpose();
  }
  return out;
}

// Softmax weights straight from the definition.
inline Matrix alpha_literal(const Matrix& Z, const Matrix& Zp) {
  const Eigen::Index n = Z.cols();
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Real total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Real e = std::exp(-(j == i ? sq_dist(Z, i, Zp, i) : sq_dist(Z, i, Z, j)) / 2);
      a(i, j) = static_cast<double>(e);
      total += e;
    }
    a.row(i) /= static_cast<double>(total);
  }
  return a;
}

}  // namespace oracle
