#include "dimcollapse/directclr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dimcollapse/errors.hpp"
#include "dimcollapse/rng.hpp"

namespace dimcollapse::directclr {
namespace {

constexpr double kUnitNormTolerance = 1e-10;
constexpr double kNonzeroThreshold = 1e-12;
constexpr std::uint64_t kLowRankStream = 21;
constexpr std::uint64_t kDropoutStream = 23;

void require_unit_columns(const Matrix& m, const char* what) {
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double nrm = m.col(i).norm();
    if (!(std::abs(nrm - 1.0) <= kUnitNormTolerance)) {
      throw InvalidInputError(std::string(what) + ": column " + std::to_string(i) + " is not unit norm (" +
                              std::to_string(nrm) + ")");
    }
  }
}

void check_pair(const Matrix& Z, const Matrix& Zp, const char* what) {
  if (Z.rows() != Zp.rows() || Z.cols() != Zp.cols()) {
    throw InvalidInputError(std::string(what) + ": branch shapes differ");
  }
  if (Z.cols() < 2) throw DegenerateInputError(std::string(what) + ": need at least 2 samples");
  numerics::require_finite(Z, what);
  numerics::require_finite(Zp, what);
}

bool uses_rank(ProjectorVariant v) {
  return v == ProjectorVariant::fixed_lowrank || v == ProjectorVariant::fixed_lowrank_diagonal ||
         v == ProjectorVariant::random_dropout;
}

}  // namespace

void SubvectorSpec::validate(int rep_dim) const {
  if (d0 < 1 || d0 > rep_dim) {
    throw InvalidInputError("subvector d0 = " + std::to_string(d0) + " must lie in [1, " + std::to_string(rep_dim) +
                            "]");
  }
}

LossGradients cosine_infonce_grads(const infonce::EmbeddingBatch& emb) {
  check_pair(emb.Z, emb.Zp, "cosine_infonce");
  require_unit_columns(emb.Z, "cosine_infonce first branch");
  require_unit_columns(emb.Zp, "cosine_infonce second branch");

  const Eigen::Index n = emb.Z.cols();
  // Row i holds the logits of sample i: ẑᵢ·ẑⱼ for j≠i, ẑᵢ·ẑᵢ′ at j=i.
  Matrix logits = emb.Z.transpose() * emb.Z;
  const Vector positive = (emb.Z.cwiseProduct(emb.Zp)).colwise().sum().transpose();
  logits.diagonal() = positive;

  Matrix beta = logits.transpose();  // column i = softmax row i
  LossGradients out;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto col = beta.col(i);
    const double m = col.maxCoeff();
    col.array() = (col.array() - m).exp();
    const double s = col.sum();
    col /= s;
    out.loss += m + std::log(s) - positive(i);
  }
  beta.transposeInPlace();

  const Vector pos_weight = beta.diagonal();
  Matrix off = beta;
  off.diagonal().setZero();
  // dL/dẑᵢ = Σ_{j≠i} βᵢⱼ ẑⱼ + Σ_{j≠i} βⱼᵢ ẑⱼ - (1 - βᵢᵢ) ẑᵢ′
  out.grad_first.noalias() = emb.Z * off.transpose();
  out.grad_first.noalias() += emb.Z * off;
  out.grad_first.noalias() += emb.Zp * (pos_weight.array() - 1.0).matrix().asDiagonal();
  // dL/dẑᵢ′ = -(1 - βᵢᵢ) ẑᵢ
  out.grad_second.noalias() = emb.Z * (pos_weight.array() - 1.0).matrix().asDiagonal();
  return out;
}

double cosine_infonce(const infonce::EmbeddingBatch& emb) { return cosine_infonce_grads(emb).loss; }

NormalizedColumns normalize_columns(const Matrix& Z, std::string_view what) {
  NormalizedColumns out;
  out.norms = Z.colwise().norm().transpose();
  out.unit.resize(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    const double nrm = out.norms(i);
    if (!(nrm >= std::numeric_limits<double>::min())) {
      throw NormalizationError(std::string(what) + ": sample " + std::to_string(i) + " has zero norm");
    }
    out.unit.col(i) = Z.col(i) / nrm;
  }
  return out;
}

Matrix normalize_backward(const NormalizedColumns& cols, const Matrix& grad_unit) {
  if (grad_unit.rows() != cols.unit.rows() || grad_unit.cols() != cols.unit.cols()) {
    throw InvalidInputError("normalize_backward: gradient shape mismatch");
  }
  Matrix g(grad_unit.rows(), grad_unit.cols());
  for (Eigen::Index i = 0; i < g.cols(); ++i) {
    const auto u = cols.unit.col(i);
    g.col(i) = (grad_unit.col(i) - u * u.dot(grad_unit.col(i))) / cols.norms(i);
  }
  return g;
}

LossGradients normalized_infonce(const Matrix& Z, const Matrix& Zp) {
  check_pair(Z, Zp, "normalized_infonce");
  const auto a = normalize_columns(Z, "first branch");
  const auto b = normalize_columns(Zp, "second branch");
  LossGradients unit = cosine_infonce_grads({a.unit, b.unit, true});
  return {unit.loss, normalize_backward(a, unit.grad_first), normalize_backward(b, unit.grad_second)};
}

LossGradients directclr_loss(const Matrix& R, const Matrix& Rp, const SubvectorSpec& spec) {
  check_pair(R, Rp, "directclr_loss");
  spec.validate(static_cast<int>(R.rows()));
  const auto a = normalize_columns(R.topRows(spec.d0), "directclr sub-vector, first branch");
  const auto b = normalize_columns(Rp.topRows(spec.d0), "directclr sub-vector, second branch");
  const LossGradients unit = cosine_infonce_grads({a.unit, b.unit, true});

  LossGradients out;
  out.loss = unit.loss;
  out.grad_first = Matrix::Zero(R.rows(), R.cols());
  out.grad_second = Matrix::Zero(R.rows(), R.cols());
  out.grad_first.topRows(spec.d0) = normalize_backward(a, unit.grad_first);
  out.grad_second.topRows(spec.d0) = normalize_backward(b, unit.grad_second);
  return out;
}

std::string_view to_string(ProjectorVariant v) {
  switch (v) {
    case ProjectorVariant::none: return "none";
    case ProjectorVariant::trainable_linear: return "trainable_linear";
    case ProjectorVariant::trainable_diagonal: return "trainable_diagonal";
    case ProjectorVariant::orthogonal: return "orthogonal";
    case ProjectorVariant::fixed_lowrank: return "fixed_lowrank";
    case ProjectorVariant::fixed_lowrank_diagonal: return "fixed_lowrank_diagonal";
    case ProjectorVariant::random_dropout: return "random_dropout";
  }
  return "unknown";
}

const std::vector<ProjectorVariant>& all_projector_variants() {
  static const std::vector<ProjectorVariant> all = {
      ProjectorVariant::none,          ProjectorVariant::trainable_linear,       ProjectorVariant::trainable_diagonal,
      ProjectorVariant::orthogonal,    ProjectorVariant::fixed_lowrank,          ProjectorVariant::fixed_lowrank_diagonal,
      ProjectorVariant::random_dropout};
  return all;
}

ProjectorVariant parse_projector_variant(std::string_view s) {
  for (const auto v : all_projector_variants()) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown projector variant '" + std::string(s) + "'");
}

void ProjectorSpec::validate(int dim) const {
  if (dim < 1) throw InvalidInputError("projector dim must be positive");
  if (uses_rank(variant) && (rank_or_d0 < 1 || rank_or_d0 > dim)) {
    throw ConfigError("projector.rank must lie in [1, " + std::to_string(dim) + "] for variant " +
                      std::string(to_string(variant)));
  }
  if (skew_params.size() != 0) {
    if (variant != ProjectorVariant::orthogonal) {
      throw ConfigError("skew parameters are only meaningful for the orthogonal projector");
    }
    if (skew_params.rows() != dim || skew_params.cols() != dim) {
      throw InvalidInputError("orthogonal projector: skew parameter must be dim x dim");
    }
    numerics::require_finite(skew_params, "orthogonal projector skew parameter");
    const double asym = (skew_params + skew_params.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, skew_params.cwiseAbs().maxCoeff())) {
      throw InvalidInputError("orthogonal projector: parameter is not skew-symmetric");
    }
  }
}

Projector make_projector(const ProjectorSpec& spec, int dim) {
  spec.validate(dim);
  Projector p;
  p.spec = spec;
  p.dim = dim;
  switch (spec.variant) {
    case ProjectorVariant::trainable_linear:
      p.linear = Matrix::Identity(dim, dim);
      break;
    case ProjectorVariant::trainable_diagonal:
      p.diagonal = Vector::Ones(dim);
      break;
    case ProjectorVariant::orthogonal:
      p.skew = spec.skew_params.size() != 0 ? spec.skew_params : Matrix::Zero(dim, dim);
      break;
    case ProjectorVariant::fixed_lowrank: {
      CounterRng rng(spec.seed, kLowRankStream);
      p.left = models::random_orthogonal(dim, rng);
      p.right = models::random_orthogonal(dim, rng);
      break;
    }
    case ProjectorVariant::none:
    case ProjectorVariant::fixed_lowrank_diagonal:
    case ProjectorVariant::random_dropout:
      break;
  }
  return p;
}

std::vector<int> dropout_subset(const Projector& p, long step) {
  if (p.spec.variant != ProjectorVariant::random_dropout) {
    throw StateError("dropout_subset: projector is not random_dropout");
  }
  CounterRng rng(derive_seed(p.spec.seed, static_cast<std::uint64_t>(step)), kDropoutStream);
  auto idx = rng.sample_without_replacement(p.dim, p.spec.rank_or_d0);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Matrix projector_matrix(const Projector& p, long step) {
  const int d = p.dim;
  switch (p.spec.variant) {
    case ProjectorVariant::none:
      return Matrix::Identity(d, d);
    case ProjectorVariant::trainable_linear:
      return p.linear;
    case ProjectorVariant::trainable_diagonal:
      return p.diagonal.asDiagonal();
    case ProjectorVariant::orthogonal:
      return numerics::matrix_exp_skew(p.skew);
    case ProjectorVariant::fixed_lowrank: {
      const int r = p.spec.rank_or_d0;
      return p.left.leftCols(r) * p.right.leftCols(r).transpose();
    }
    case ProjectorVariant::fixed_lowrank_diagonal: {
      Matrix m = Matrix::Zero(d, d);
      m.diagonal().head(p.spec.rank_or_d0).setOnes();
      return m;
    }
    case ProjectorVariant::random_dropout: {
      Matrix m = Matrix::Zero(d, d);
      for (const int i : dropout_subset(p, step)) m(i, i) = 1.0;
      return m;
    }
  }
  throw ConfigError("unknown projector variant");
}

Matrix apply_projector(const Projector& p, const Matrix& R, long step) {
  if (R.rows() != p.dim) throw InvalidInputError("apply_projector: representation dim does not match projector");
  numerics::require_finite(R, "apply_projector input");
  if (p.spec.variant == ProjectorVariant::fixed_lowrank_diagonal) {
    Matrix out = Matrix::Zero(R.rows(), R.cols());
    out.topRows(p.spec.rank_or_d0) = R.topRows(p.spec.rank_or_d0);
    return out;
  }
  if (p.spec.variant == ProjectorVariant::none) return R;
  return projector_matrix(p, step) * R;
}

GradientRankReport gradient_rank_probe(const models::ResidualEncoder& encoder, const synthdata::Batch& batch,
                                       const SubvectorSpec& spec) {
  const auto first = models::residual_forward(encoder, batch.X);
  const auto second = models::residual_forward(encoder, batch.Xp);
  const LossGradients g = directclr_loss(first.r, second.r, spec);

  const Eigen::Index n = first.r.cols();
  const Eigen::Index dr = first.r.rows();
  GradientRankReport rep;
  rep.loss = g.loss;
  rep.grad_r.resize(dr, 2 * n);
  rep.grad_r << g.grad_first, g.grad_second;
  rep.grad_h.resize(dr, 2 * n);
  rep.grad_h << models::residual_backprop_h(encoder, first, g.grad_first),
      models::residual_backprop_h(encoder, second, g.grad_second);

  rep.masked_exact = true;
  for (Eigen::Index c = 0; c < rep.grad_r.cols(); ++c) {
    for (Eigen::Index r = spec.d0; r < dr; ++r) {
      if (rep.grad_r(r, c) != 0.0) rep.masked_exact = false;
    }
  }
  const auto above = (rep.grad_h.array().abs() > kNonzeroThreshold);
  rep.grad_h_nonzero_fraction = static_cast<double>(above.count()) / static_cast<double>(rep.grad_h.size());
  rep.grad_h_channel_fraction =
      static_cast<double>(above.rowwise().any().count()) / static_cast<double>(rep.grad_h.rows());
  return rep;
}

void ProjectorTrainConfig::validate() const {
  data.validate();
  aug.validate();
  if (aug.dim != data.dim) throw InvalidInputError("aug.dim must equal data.dim");
  if (rep_dim < 1) throw InvalidInputError("directclr.rep_dim must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("flow.learning_rate must be finite and >= 0");
  }
  if (steps < 1) throw InvalidInputError("flow.steps must be >= 1");
  if (batch_size < 2) throw InvalidInputError("flow.batch_size must be >= 2");
}

ProjectorTrace train_projector_variant(const ProjectorSpec& spec, const ProjectorTrainConfig& cfg) {
  cfg.validate();
  ProjectorTrace trace;
  trace.variant = spec.variant;
  models::ResidualEncoder enc = models::init_residual_encoder(cfg.data.dim, cfg.rep_dim, derive_seed(cfg.seed, 1));
  Projector proj = make_projector(spec, cfg.rep_dim);
  const std::uint64_t batch_root = derive_seed(cfg.seed, 2);
  const double scale = cfg.learning_rate / static_cast<double>(cfg.batch_size);
  trace.losses.reserve(static_cast<std::size_t>(cfg.steps));

  for (long t = 0; t < cfg.steps; ++t) {
    const auto batch =
        synthdata::sample_batch(cfg.data, cfg.aug, cfg.batch_size, derive_seed(batch_root, static_cast<std::uint64_t>(t)));
    const auto o1 = models::residual_forward(enc, batch.X);
    const auto o2 = models::residual_forward(enc, batch.Xp);
    const Matrix P = projector_matrix(proj, t);
    const LossGradients g = normalized_infonce(P * o1.r, P * o2.r);
    if (!std::isfinite(g.loss)) throw DivergenceError(t, "non-finite projector loss");
    trace.losses.push_back(g.loss);

    const Matrix grad_P = g.grad_first * o1.r.transpose() + g.grad_second * o2.r.transpose();
    Matrix grad_base = Matrix::Zero(enc.base.rows(), enc.base.cols());
    Matrix grad_in = Matrix::Zero(enc.block_in.rows(), enc.block_in.cols());
    Matrix grad_out = Matrix::Zero(enc.block_out.rows(), enc.block_out.cols());
    auto accumulate = [&](const models::EncoderOutput& o, const Matrix& grad_e, const Matrix& X) {
      const Matrix grad_r = P.transpose() * grad_e;
      grad_out.noalias() += grad_r * o.block_hidden.transpose();
      Matrix hidden = enc.block_out.transpose() * grad_r;
      hidden.array() *= (o.block_preact.array() > 0.0).cast<double>();
      grad_in.noalias() += hidden * o.h.transpose();
      Matrix grad_h = grad_r;
      grad_h.noalias() += enc.block_in.transpose() * hidden;
      grad_base.noalias() += grad_h * X.transpose();
    };
    accumulate(o1, g.grad_first, batch.X);
    accumulate(o2, g.grad_second, batch.Xp);

    enc.base -= scale * grad_base;
    enc.block_in -= scale * grad_in;
    enc.block_out -= scale * grad_out;
    switch (proj.spec.variant) {
      case ProjectorVariant::trainable_linear:
        proj.linear -= scale * grad_P;
        break;
      case ProjectorVariant::trainable_diagonal:
        proj.diagonal -= scale * grad_P.diagonal();
        break;
      case ProjectorVariant::orthogonal: {
        const Matrix D = numerics::matrix_exp_skew_adjoint(proj.skew, grad_P);
        proj.skew -= scale * (D - D.transpose());
        break;
      }
      default:
        break;
    }
    if (!enc.base.allFinite() || !enc.block_in.allFinite() || !enc.block_out.allFinite()) {
      throw DivergenceError(t, "encoder weights became non-finite");
    }
  }
  trace.final_projector = std::move(proj);
  trace.final_encoder = std::move(enc);
  return trace;
}

}  // namespace dimcollapse::directclr
