#include "dimcollapse/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dimcollapse/errors.hpp"

namespace dimcollapse::numerics {

void require_finite(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw InvalidInputError(std::string(what) + ": empty matrix");
  }
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite entry");
  }
}

void require_symmetric(const Matrix& m, double tol, const char* what) {
  require_finite(m, what);
  if (m.rows() != m.cols()) {
    throw InvalidInputError(std::string(what) + ": not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw InvalidInputError(std::string(what) + ": not symmetric within tolerance");
  }
}

Matrix SVDFactors::reconstruct() const { return U * S.asDiagonal() * V.transpose(); }

SVDFactors svd(const Matrix& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SVDFactors f{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  for (Eigen::Index k = 0; k < f.U.cols(); ++k) {
    Eigen::Index arg = 0;
    f.U.col(k).cwiseAbs().maxCoeff(&arg);
    if (f.U(arg, k) < 0.0) {
      f.U.col(k) *= -1.0;
      f.V.col(k) *= -1.0;
    }
  }
  return f;
}

Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  Eigen::JacobiSVD<Matrix> solver(m);
  return solver.singularValues();
}

SymmetricEigen eigh(const Matrix& m) {
  require_symmetric(m, kSymmetryTolerance, "eigh");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double min_eigenvalue(const Matrix& symmetric) { return eigh(symmetric).values.minCoeff(); }

Matrix matrix_exp_symmetric(const Matrix& m) {
  const SymmetricEigen e = eigh(m);
  const Vector expd = e.values.array().exp().matrix();
  Matrix out = e.vectors * expd.asDiagonal() * e.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct SkewEigen {
  CMatrix q;
  CVector lambda;  // eigenvalues of S itself (purely imaginary)
};

SkewEigen skew_eigen(const Matrix& s) {
  require_finite(s, "matrix_exp_skew");
  if (s.rows() != s.cols()) throw InvalidInputError("matrix_exp_skew: not square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s + s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw InvalidInputError("matrix_exp_skew: not skew-symmetric within tolerance");
  }
  const Matrix skew = 0.5 * (s - s.transpose());
  const CMatrix hermitian = std::complex<double>(0.0, 1.0) * skew.cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian);
  // iS = Q Λ Q^H  =>  S = Q (-iΛ) Q^H
  const CVector lam = std::complex<double>(0.0, -1.0) * solver.eigenvalues().cast<std::complex<double>>();
  return {solver.eigenvectors(), lam};
}

}  // namespace

Matrix matrix_exp_skew(const Matrix& s) {
  const SkewEigen e = skew_eigen(s);
  const CVector expd = e.lambda.array().exp().matrix();
  const CMatrix out = e.q * expd.asDiagonal() * e.q.adjoint();
  return out.real();
}

Matrix matrix_exp_skew_adjoint(const Matrix& s, const Matrix& upstream) {
  const SkewEigen e = skew_eigen(s);
  if (upstream.rows() != s.rows() || upstream.cols() != s.cols()) {
    throw InvalidInputError("matrix_exp_skew_adjoint: shape mismatch");
  }
  const Eigen::Index n = s.rows();
  // Daleckii-Krein divided differences; the adjoint uses the conjugate table.
  CMatrix phi(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto la = e.lambda(a);
      const auto lb = e.lambda(b);
      const auto diff = la - lb;
      phi(a, b) = std::abs(diff) < 1e-12 ? std::exp(0.5 * (la + lb)) : (std::exp(la) - std::exp(lb)) / diff;
    }
  }
  const CMatrix inner = e.q.adjoint() * upstream.cast<std::complex<double>>() * e.q;
  const CMatrix out = e.q * phi.conjugate().cwiseProduct(inner) * e.q.adjoint();
  return out.real();
}

SpectrumReport make_spectrum(const Vector& singular_values, std::size_t source_dim, double log_floor) {
  SpectrumReport r;
  r.source_dim = source_dim;
  r.singular_values.assign(singular_values.data(), singular_values.data() + singular_values.size());
  std::sort(r.singular_values.begin(), r.singular_values.end(), std::greater<>());
  r.log10_values.reserve(r.singular_values.size());
  for (double s : r.singular_values) r.log10_values.push_back(std::log10(std::max(s, log_floor)));
  return r;
}

CovarianceSpectrum covariance_spectrum(const Matrix& vectors) {
  require_finite(vectors, "covariance_spectrum");
  const Eigen::Index d = vectors.rows();
  const Eigen::Index n = vectors.cols();
  if (n < 2) throw DegenerateInputError("covariance_spectrum: need at least 2 vectors");

  // Fixed accumulation order makes the result invariant under input permutation.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < d; ++r) {
      if (vectors(r, a) != vectors(r, b)) return vectors(r, a) < vectors(r, b);
    }
    return false;
  });

  Vector mean = Vector::Zero(d);
  for (auto i : order) mean += vectors.col(i);
  mean /= static_cast<double>(n);

  Matrix cov = Matrix::Zero(d, d);
  for (auto i : order) {
    const Vector c = vectors.col(i) - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());

  return {cov, make_spectrum(singular_values(cov), static_cast<std::size_t>(d))};
}

CovarianceSpectrum covariance_spectrum(std::span<const std::vector<double>> vectors) {
  if (vectors.size() < 2) throw DegenerateInputError("covariance_spectrum: need at least 2 vectors");
  const std::size_t d = vectors.front().size();
  if (d == 0) throw InvalidInputError("covariance_spectrum: zero-dimensional vectors");
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) {
      throw InvalidInputError("covariance_spectrum: vector " + std::to_string(i) + " has dimension " +
                              std::to_string(vectors[i].size()) + ", expected " + std::to_string(d));
    }
    for (std::size_t r = 0; r < d; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = vectors[i][r];
  }
  return covariance_spectrum(m);
}

double relative_frobenius(const Matrix& value, const Matrix& reference) {
  const double denom = reference.norm();
  const double diff = (value - reference).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace dimcollapse::numerics
