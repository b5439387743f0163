#include "dimcollapse/infonce.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dimcollapse/errors.hpp"

namespace dimcollapse::infonce {
namespace {

constexpr double kUnitNormTolerance = 1e-10;

// logits(i, j) = -|zᵢ - zⱼ|²/2 off the diagonal, -|zᵢ - zᵢ′|²/2 on it.
// Off-diagonal distances come from the Gram matrix, |zᵢ|² + |zⱼ|² - 2zᵢ·zⱼ,
// clamped at zero; the positive-pair distances are formed from differences.
Matrix similarity_logits(const EmbeddingBatch& emb) {
  const Eigen::Index n = emb.Z.cols();
  Matrix logits(n, n);
  logits.triangularView<Eigen::Lower>() = emb.Z.transpose() * emb.Z;
  const Vector sq = logits.diagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    double* col = logits.data() + j * n;
    for (Eigen::Index i = j + 1; i < n; ++i) col[i] = -0.5 * std::max(0.0, sq(i) + sq(j) - 2.0 * col[i]);
    col[j] = -0.5 * (emb.Z.col(j) - emb.Zp.col(j)).squaredNorm();
  }
  logits.triangularView<Eigen::StrictlyUpper>() = logits.transpose();
  return logits;
}

// Row-wise softmax of the symmetric logits matrix; returns the per-row log
// partition. Row i equals column i, so the work runs over contiguous columns
// and the result is transposed once at the end.
Vector softmax_rows(Matrix& logits) {
  const Eigen::Index n = logits.rows();
  Vector lse(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto col = logits.col(i);
    const double m = col.maxCoeff();
    col.array() = (col.array() - m).exp();
    const double s = col.sum();
    col /= s;
    lse(i) = m + std::log(s);
  }
  logits.transposeInPlace();
  return lse;
}

GradientBundle grads_from_weights(const EmbeddingBatch& emb, const SoftmaxWeights& w) {
  Matrix offdiag = w.alpha;
  offdiag.diagonal().setZero();
  const Vector rows = offdiag.rowwise().sum();
  const Vector cols = offdiag.colwise().sum().transpose();

  GradientBundle g;
  // g_zᵢ = Σ_{j≠i} αᵢⱼ(zⱼ - zᵢ′) + Σ_{j≠i} αⱼᵢ(zⱼ - zᵢ)
  const Matrix both = offdiag + offdiag.transpose();
  g.g_z.noalias() = emb.Z * both;
  g.g_z -= emb.Zp * rows.asDiagonal();
  g.g_z -= emb.Z * cols.asDiagonal();
  // g_zᵢ′ = Σ_{j≠i} αᵢⱼ (zᵢ′ - zᵢ)
  g.g_zp = (emb.Zp - emb.Z) * rows.asDiagonal();
  return g;
}

}  // namespace

void EmbeddingBatch::validate() const {
  numerics::require_finite(Z, "embeddings Z");
  numerics::require_finite(Zp, "embeddings Z'");
  if (Z.rows() != Zp.rows() || Z.cols() != Zp.cols()) {
    throw InvalidInputError("embedding branches differ in shape");
  }
  if (Z.cols() < 2) throw DegenerateInputError("InfoNCE needs N >= 2 samples");
  if (normalized) {
    for (Eigen::Index i = 0; i < Z.cols(); ++i) {
      if (std::abs(Z.col(i).norm() - 1.0) > kUnitNormTolerance ||
          std::abs(Zp.col(i).norm() - 1.0) > kUnitNormTolerance) {
        throw InvalidInputError("embedding column " + std::to_string(i) + " is flagged normalized but not unit norm");
      }
    }
  }
}

double SoftmaxWeights::partition(int i) const { return std::exp(log_partition(i)); }

Vector SoftmaxWeights::offdiag_row_sums() const {
  Matrix off = alpha;
  off.diagonal().setZero();
  return off.rowwise().sum();
}

Vector SoftmaxWeights::offdiag_col_sums() const {
  Matrix off = alpha;
  off.diagonal().setZero();
  return off.colwise().sum().transpose();
}

double infonce_loss(const EmbeddingBatch& emb) { return evaluate(emb).loss; }

SoftmaxWeights softmax_weights(const EmbeddingBatch& emb) {
  emb.validate();
  Matrix logits = similarity_logits(emb);
  SoftmaxWeights w;
  w.log_partition = softmax_rows(logits);
  w.alpha = std::move(logits);
  return w;
}

GradientBundle embedding_grads(const EmbeddingBatch& emb) { return embedding_grads(emb, softmax_weights(emb)); }

GradientBundle embedding_grads(const EmbeddingBatch& emb, const SoftmaxWeights& weights) {
  if (emb.normalized) {
    throw UnsupportedModeError("embedding_grads covers unnormalized embeddings; use directclr for cosine InfoNCE");
  }
  emb.validate();
  if (weights.alpha.rows() != emb.Z.cols() || weights.alpha.cols() != emb.Z.cols()) {
    throw InvalidInputError("softmax weights do not match the embedding batch");
  }
  return grads_from_weights(emb, weights);
}

Evaluation evaluate(const EmbeddingBatch& emb) {
  emb.validate();
  Matrix logits = similarity_logits(emb);
  const Vector positive = logits.diagonal();
  Evaluation ev;
  ev.weights.log_partition = softmax_rows(logits);
  ev.weights.alpha = std::move(logits);
  ev.loss = (ev.weights.log_partition - positive).sum();
  if (!emb.normalized) ev.grads = grads_from_weights(emb, ev.weights);
  return ev;
}

Matrix assemble_G(const GradientBundle& grads, const Batch& batch) {
  if (grads.g_z.cols() != batch.X.cols() || grads.g_zp.cols() != batch.Xp.cols() ||
      grads.g_z.rows() != grads.g_zp.rows() || batch.X.rows() != batch.Xp.rows()) {
    throw InvalidInputError("assemble_G: gradient and batch shapes are inconsistent");
  }
  Matrix G = grads.g_z * batch.X.transpose();
  G.noalias() += grads.g_zp * batch.Xp.transpose();
  return G;
}

ContrastDecomposition build_X(const Batch& batch, const SoftmaxWeights& weights) {
  const Eigen::Index n = batch.X.cols();
  const Eigen::Index d = batch.X.rows();
  if (weights.alpha.rows() != n || weights.alpha.cols() != n || batch.Xp.cols() != n || batch.Xp.rows() != d) {
    throw InvalidInputError("build_X: weights and batch are inconsistent");
  }
  const Matrix& x = batch.X;
  const Matrix& xp = batch.Xp;
  const Vector rows = weights.offdiag_row_sums();
  const Vector cols = weights.offdiag_col_sums();
  Matrix offdiag = weights.alpha;
  offdiag.diagonal().setZero();

  ContrastDecomposition out;

  // Direct form: Σᵢ (Σ_{j≠i} αᵢⱼ(xᵢ′ - xⱼ) + Σ_{j≠i} αⱼᵢ(xᵢ - xⱼ)) xᵢᵀ - Σᵢ (1 - αᵢᵢ)(xᵢ′ - xᵢ) xᵢ′ᵀ
  Matrix coeff = xp * rows.asDiagonal();
  coeff.noalias() -= x * offdiag.transpose();
  coeff.noalias() += x * cols.asDiagonal();
  coeff.noalias() -= x * offdiag;
  out.X = coeff * x.transpose();
  out.X.noalias() -= (xp - x) * rows.asDiagonal() * xp.transpose();

  // Split form, accumulated pair by pair.
  out.sigma0 = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vector diff = x.col(i) - x.col(j);
      out.sigma0.noalias() += (weights.alpha(i, j) + weights.alpha(j, i)) * (diff * diff.transpose());
    }
  }
  out.sigma1 = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector diff = xp.col(i) - x.col(i);
    out.sigma1.noalias() += rows(i) * (diff * diff.transpose());
  }

  out.split_error = numerics::relative_frobenius(out.X, out.sigma0 - out.sigma1);
  return out;
}

}  // namespace dimcollapse::infonce
