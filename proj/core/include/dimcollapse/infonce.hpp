#pragma once

#include "dimcollapse/numerics.hpp"
#include "dimcollapse/synthdata.hpp"

namespace dimcollapse::infonce {

using synthdata::Batch;

// Two embedding branches, columns are samples. When `normalized` is set every
// column must have unit norm.
struct EmbeddingBatch {
  Matrix Z;
  Matrix Zp;
  bool normalized = false;

  int n() const { return static_cast<int>(Z.cols()); }
  void validate() const;
};

// alpha(i, j) = exp(-|zᵢ - zⱼ|²/2) / Zᵢ for j != i, alpha(i, i) = exp(-|zᵢ - zᵢ′|²/2) / Zᵢ.
// Rows sum to one. The partition functions are kept in log form; for widely
// separated embeddings Zᵢ itself underflows.
struct SoftmaxWeights {
  Matrix alpha;
  Vector log_partition;

  double partition(int i) const;
  // Σ_{j≠i} αᵢⱼ, summed directly rather than as 1 - αᵢᵢ.
  Vector offdiag_row_sums() const;
  // Σ_{j≠i} αⱼᵢ.
  Vector offdiag_col_sums() const;
};

// g_z, g_zp are dL/dz and dL/dz′ per sample. G is d_out x d_in once assembled.
struct GradientBundle {
  Matrix g_z;
  Matrix g_zp;
  Matrix G;
};

// X = Σ̂₀ - Σ̂₁. `split_error` is the relative Frobenius gap between the direct
// sum over samples and the two-PSD-matrix form; it is zero up to rounding.
struct ContrastDecomposition {
  Matrix X;
  Matrix sigma0;
  Matrix sigma1;
  double split_error = 0.0;
};

double infonce_loss(const EmbeddingBatch& emb);
SoftmaxWeights softmax_weights(const EmbeddingBatch& emb);

// Closed-form gradients of the unnormalized loss; G is left empty.
GradientBundle embedding_grads(const EmbeddingBatch& emb);
GradientBundle embedding_grads(const EmbeddingBatch& emb, const SoftmaxWeights& weights);

// G = Σᵢ (g_zᵢ xᵢᵀ + g_zᵢ′ xᵢ′ᵀ). For a single linear layer this is dL/dW.
Matrix assemble_G(const GradientBundle& grads, const Batch& batch);

ContrastDecomposition build_X(const Batch& batch, const SoftmaxWeights& weights);

// Loss, weights and embedding gradients from one pass over the pairwise distances.
struct Evaluation {
  double loss = 0.0;
  SoftmaxWeights weights;
  GradientBundle grads;
};

Evaluation evaluate(const EmbeddingBatch& emb);

}  // namespace dimcollapse::infonce
