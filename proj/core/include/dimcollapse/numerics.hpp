#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dimcollapse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-10;

// Throws InvalidInputError naming `what` on empty or non-finite matrices.
void require_finite(const Matrix& m, const char* what);
void require_symmetric(const Matrix& m, double tol, const char* what);

// Thin SVD. U is rows x k, V is cols x k, k = min(rows, cols); S is
// non-increasing. Each left singular vector has its largest-magnitude entry
// made positive (the matching right vector is flipped with it).
struct SVDFactors {
  Matrix U;
  Vector S;
  Matrix V;

  Matrix reconstruct() const;
};

SVDFactors svd(const Matrix& m);
Vector singular_values(const Matrix& m);

// Eigendecomposition of a symmetric matrix with ascending eigenvalues.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen eigh(const Matrix& m);
double min_eigenvalue(const Matrix& symmetric);

// exp(M) = U exp(Λ) Uᵀ for symmetric M.
Matrix matrix_exp_symmetric(const Matrix& m);

// exp(S) for skew-symmetric S. iS is Hermitian, so exp(S) = Q exp(-iΛ) Q^H
// with (Q, Λ) the Hermitian eigendecomposition of iS; the result is orthogonal.
Matrix matrix_exp_skew(const Matrix& s);

// Adjoint of the Fréchet derivative of exp at skew-symmetric S, applied to an
// upstream gradient dL/dexp(S). Returns dL/dS (not projected onto skew matrices).
Matrix matrix_exp_skew_adjoint(const Matrix& s, const Matrix& upstream);

struct SpectrumReport {
  std::vector<double> singular_values;
  std::vector<double> log10_values;
  std::size_t source_dim = 0;
};

SpectrumReport make_spectrum(const Vector& singular_values, std::size_t source_dim,
                             double log_floor = kLogFloor);

struct CovarianceSpectrum {
  Matrix covariance;
  SpectrumReport spectrum;
};

// C = (1/N) Σ (zᵢ - z̄)(zᵢ - z̄)ᵀ over the columns of `vectors` (d x N).
// Accumulation is order-independent: columns are sorted lexicographically first.
CovarianceSpectrum covariance_spectrum(const Matrix& vectors);
CovarianceSpectrum covariance_spectrum(std::span<const std::vector<double>> vectors);

double relative_frobenius(const Matrix& value, const Matrix& reference);

}  // namespace numerics
}  // namespace dimcollapse
