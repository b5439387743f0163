#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dimcollapse/infonce.hpp"
#include "dimcollapse/models.hpp"
#include "dimcollapse/numerics.hpp"
#include "dimcollapse/synthdata.hpp"

namespace dimcollapse::directclr {

// Leading sub-vector length d0 of the representation fed to the loss.
struct SubvectorSpec {
  int d0 = 8;

  void validate(int rep_dim) const;
};

// Loss value and its gradients with respect to whatever inputs the producing
// function received (normalized or raw, as documented per function).
struct LossGradients {
  double loss = 0.0;
  Matrix grad_first;
  Matrix grad_second;
};

// L = Σᵢ [log(exp(ẑᵢ·ẑᵢ′) + Σ_{j≠i} exp(ẑᵢ·ẑⱼ)) - ẑᵢ·ẑᵢ′]. Columns must be unit norm.
double cosine_infonce(const infonce::EmbeddingBatch& emb);
// Same loss with gradients with respect to the unit-norm columns.
LossGradients cosine_infonce_grads(const infonce::EmbeddingBatch& emb);

struct NormalizedColumns {
  Matrix unit;
  Vector norms;
};

// Throws NormalizationError naming the first zero-norm column.
NormalizedColumns normalize_columns(const Matrix& Z, std::string_view what);
// Pulls dL/dẑ back through ẑ = z/|z|: (I - ẑẑᵀ) g / |z| per column.
Matrix normalize_backward(const NormalizedColumns& cols, const Matrix& grad_unit);

// Cosine InfoNCE on raw embeddings; gradients with respect to the raw columns.
LossGradients normalized_infonce(const Matrix& Z, const Matrix& Zp);

// z = r[0:d0], ẑ = z/|z|, cosine InfoNCE. Gradients are with respect to R and
// Rp; rows at and beyond d0 are exactly zero.
LossGradients directclr_loss(const Matrix& R, const Matrix& Rp, const SubvectorSpec& spec);

enum class ProjectorVariant {
  none,
  trainable_linear,
  trainable_diagonal,
  orthogonal,
  fixed_lowrank,
  fixed_lowrank_diagonal,
  random_dropout,
};

std::string_view to_string(ProjectorVariant v);
// Throws ConfigError for unknown names.
ProjectorVariant parse_projector_variant(std::string_view s);
const std::vector<ProjectorVariant>& all_projector_variants();

struct ProjectorSpec {
  ProjectorVariant variant = ProjectorVariant::none;
  int rank_or_d0 = 8;
  std::uint64_t seed = 0;
  // Initial skew-symmetric parameter for the orthogonal variant; empty means zero.
  Matrix skew_params;

  void validate(int dim) const;
};

// Realized projector parameters. Only the fields used by the variant are set.
struct Projector {
  ProjectorSpec spec;
  int dim = 0;
  Matrix linear;       // trainable_linear
  Vector diagonal;     // trainable_diagonal
  Matrix skew;         // orthogonal, Q = exp(skew)
  Matrix left, right;  // fixed_lowrank, P = left · diag(1×d0, 0…) · rightᵀ
};

Projector make_projector(const ProjectorSpec& spec, int dim);

// Effective matrix at a training step. The dropout subset depends on the step
// and is shared by both branches.
Matrix projector_matrix(const Projector& p, long step = 0);
std::vector<int> dropout_subset(const Projector& p, long step);

Matrix apply_projector(const Projector& p, const Matrix& R, long step = 0);

struct GradientRankReport {
  double loss = 0.0;
  Matrix grad_r;  // both branches side by side, d_r x 2N
  Matrix grad_h;
  // Every entry of grad_r at rows ≥ d0 is exactly 0.0.
  bool masked_exact = false;
  // Fraction of grad_h entries with magnitude > 1e-12.
  double grad_h_nonzero_fraction = 0.0;
  // Fraction of grad_h rows (channels) with any entry above 1e-12.
  double grad_h_channel_fraction = 0.0;
};

GradientRankReport gradient_rank_probe(const models::ResidualEncoder& encoder, const synthdata::Batch& batch,
                                       const SubvectorSpec& spec);

// Joint SGD on the toy residual encoder and the projector under cosine InfoNCE.
// Like the linear trainer, each step descends the batch-mean loss.
struct ProjectorTrainConfig {
  synthdata::DataSpec data;
  synthdata::AugmentationSpec aug;
  int rep_dim = 32;
  double learning_rate = 0.1;
  long steps = 500;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProjectorTrace {
  ProjectorVariant variant = ProjectorVariant::none;
  std::vector<double> losses;
  Projector final_projector;
  models::ResidualEncoder final_encoder;
};

ProjectorTrace train_projector_variant(const ProjectorSpec& spec, const ProjectorTrainConfig& cfg);

}  // namespace dimcollapse::directclr
