#include "dimcollapse/dynamics.hpp"

#include <cmath>
#include <string>

#include "dimcollapse/directclr.hpp"
#include "dimcollapse/errors.hpp"
#include "dimcollapse/infonce.hpp"

namespace dimcollapse::dynamics {

void FlowConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("flow.learning_rate must be finite and >= 0");
  }
  if (steps < 1) throw InvalidInputError("flow.steps must be >= 1");
  if (batch_size < 2) throw InvalidInputError("flow.batch_size must be >= 2");
  if (record_every < 1) throw InvalidInputError("flow.record_every must be >= 1");
}

Trainer::Trainer(models::LinearStack stack, synthdata::DataSpec data, synthdata::AugmentationSpec aug, FlowConfig cfg)
    : stack_(std::move(stack)), data_(data), aug_(aug), cfg_(cfg) {
  stack_.validate();
  cfg_.validate();
  if (stack_.input_dim() != data_.dim) throw InvalidInputError("stack input dim does not match data.dim");
  if (!cfg_.resample) fixed_batch_ = synthdata::sample_batch(data_, aug_, cfg_.batch_size, derive_seed(cfg_.seed, 0));
}

synthdata::Batch Trainer::batch_for_step(long t) const {
  if (!cfg_.resample) return fixed_batch_;
  return synthdata::sample_batch(data_, aug_, cfg_.batch_size, derive_seed(cfg_.seed, static_cast<std::uint64_t>(t)));
}

StepResult Trainer::evaluate(const synthdata::Batch& batch) const {
  const auto first = models::forward(stack_, batch.X);
  const auto second = models::forward(stack_, batch.Xp);

  StepResult out;
  infonce::GradientBundle grads;
  if (cfg_.normalize_embeddings) {
    const auto cos = directclr::normalized_infonce(first.Z, second.Z);
    out.loss = cos.loss;
    grads.g_z = cos.grad_first;
    grads.g_zp = cos.grad_second;
  } else {
    auto ev = infonce::evaluate({first.Z, second.Z, false});
    out.loss = ev.loss;
    grads = std::move(ev.grads);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.n);
  out.G = infonce::assemble_G(grads, batch) * inv_n;
  out.layer_grads = models::backprop(stack_, first, second, grads);
  out.velocity.reserve(out.layer_grads.size());
  for (const auto& g : out.layer_grads) out.velocity.push_back(-inv_n * g);
  return out;
}

StepResult Trainer::step() {
  StepResult r = evaluate(batch_for_step(step_));
  if (!std::isfinite(r.loss)) throw DivergenceError(step_, "non-finite loss");
  for (std::size_t l = 0; l < stack_.layers.size(); ++l) {
    stack_.layers[l].noalias() += cfg_.learning_rate * r.velocity[l];
    const auto& w = stack_.layers[l];
    if (!w.allFinite() || w.cwiseAbs().maxCoeff() > kDivergenceBound) {
      throw DivergenceError(step_, "layer " + std::to_string(l) + " entry exceeds 1e12 or is non-finite");
    }
  }
  ++step_;
  return r;
}

Trajectory train(models::LinearStack stack, const synthdata::DataSpec& data, const synthdata::AugmentationSpec& aug,
                 const FlowConfig& cfg, const StepObserver& observer) {
  Trainer trainer(std::move(stack), data, aug, cfg);
  Trajectory traj;
  traj.nonlinearity = trainer.stack().nonlinearity;
  traj.losses.reserve(static_cast<std::size_t>(cfg.steps));
  traj.snapshots.push_back({0, trainer.stack().layers});
  for (long t = 0; t < cfg.steps; ++t) {
    const StepResult r = trainer.step();
    traj.losses.push_back(r.loss);
    if (observer) observer(trainer, r);
    const long done = trainer.steps_taken();
    if (done % cfg.record_every == 0 || done == cfg.steps) {
      traj.snapshots.push_back({done, trainer.stack().layers});
    }
  }
  traj.final_stack = trainer.stack();
  return traj;
}

Matrix closed_form_flow(const Matrix& W0, const Matrix& X, double t) {
  numerics::require_finite(W0, "closed_form_flow W0");
  numerics::require_symmetric(X, numerics::kSymmetryTolerance, "closed_form_flow X");
  if (W0.cols() != X.rows()) throw InvalidInputError("closed_form_flow: W0 cols != X dim");
  return W0 * numerics::matrix_exp_symmetric(X * t);
}

Matrix euler_linear_flow(const Matrix& W0, const Matrix& X, double step, long steps) {
  numerics::require_finite(W0, "euler_linear_flow W0");
  numerics::require_finite(X, "euler_linear_flow X");
  if (W0.cols() != X.rows() || X.rows() != X.cols()) throw InvalidInputError("euler_linear_flow: shape mismatch");
  // W ← W (I + step X)
  const Matrix propagator = Matrix::Identity(X.rows(), X.cols()) + step * X;
  Matrix w = W0;
  Matrix next(w.rows(), w.cols());
  for (long s = 0; s < steps; ++s) {
    next.noalias() = w * propagator;
    w.swap(next);
  }
  return w;
}

void require_nondegenerate(const Vector& sigma, double gap, const char* what) {
  for (Eigen::Index k = 0; k + 1 < sigma.size(); ++k) {
    if (std::abs(sigma(k) - sigma(k + 1)) < gap) {
      throw DegenerateSpectrumError(std::string(what) + ": singular values " + std::to_string(k) + " and " +
                                    std::to_string(k + 1) + " are closer than " + std::to_string(gap));
    }
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInputError(std::string(what) + ": shape mismatch");
}

Matrix h_matrix(const Vector& s) {
  const Eigen::Index n = s.size();
  Matrix h = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a != b) h(a, b) = 1.0 / (s(a) * s(a) - s(b) * s(b));
    }
  }
  return h;
}

}  // namespace

Vector singular_value_rates(const Matrix& W, const Matrix& Wdot) {
  require_same_shape(W, Wdot, "singular_value_rates");
  numerics::require_finite(Wdot, "singular_value_rates Wdot");
  const auto f = numerics::svd(W);
  require_nondegenerate(f.S, kDegenerateGap, "singular_value_rates");
  return (f.U.transpose() * Wdot * f.V).diagonal();
}

RateReport singular_vector_rates(const Matrix& W, const Matrix& Wdot) {
  require_same_shape(W, Wdot, "singular_vector_rates");
  numerics::require_finite(Wdot, "singular_vector_rates Wdot");
  if (W.rows() != W.cols()) throw InvalidInputError("singular_vector_rates: square matrices only");
  const auto f = numerics::svd(W);
  require_nondegenerate(f.S, kDegenerateGap, "singular_vector_rates");

  RateReport r;
  r.H = h_matrix(f.S);
  const Matrix M = f.U.transpose() * Wdot * f.V;  // UᵀẆV
  const auto S = f.S.asDiagonal();
  r.sigma_rates = M.diagonal();
  // UᵀU̇ = -(H ∘ (UᵀẆVS + SVᵀẆᵀU)); likewise for V with Ẇ transposed.
  const Matrix inner_u = M * S + S * M.transpose();
  const Matrix inner_v = M.transpose() * S + S * M;
  r.U_rate = -f.U * r.H.cwiseProduct(inner_u);
  r.V_rate = -f.V * r.H.cwiseProduct(inner_v);
  return r;
}

AlignmentRateReport alignment_rate(const Matrix& W1, const Matrix& W2, const Matrix& G) {
  if (W1.rows() != W1.cols() || W2.rows() != W2.cols() || W1.rows() != W2.cols() || G.rows() != W2.rows() ||
      G.cols() != W1.cols()) {
    throw InvalidInputError("alignment_rate: expects square W1, W2 and G of matching size");
  }
  numerics::require_finite(G, "alignment_rate G");
  const auto f1 = numerics::svd(W1);
  const auto f2 = numerics::svd(W2);
  require_nondegenerate(f1.S, kDegenerateGap, "alignment_rate W1");
  require_nondegenerate(f2.S, kDegenerateGap, "alignment_rate W2");

  AlignmentRateReport r;
  r.A = f2.V.transpose() * f1.U;
  r.F = f2.S.asDiagonal() * f2.U.transpose() * G * f1.V * f1.S.asDiagonal();
  const Matrix H1 = h_matrix(f1.S);
  const Matrix H2 = h_matrix(f2.S);
  r.A_rate = r.A * H1.cwiseProduct(r.A.transpose() * r.F + r.F.transpose() * r.A) -
             H2.cwiseProduct(r.A * r.F.transpose() + r.F * r.A.transpose()) * r.A;
  return r;
}

PairedRates paired_rates_full(const Matrix& W1, const Matrix& W2, const Matrix& G) {
  if (W1.rows() != W2.cols() || G.rows() != W2.rows() || G.cols() != W1.cols()) {
    throw InvalidInputError("paired_rates_full: shape mismatch");
  }
  numerics::require_finite(G, "paired_rates_full G");
  const auto f1 = numerics::svd(W1);
  const auto f2 = numerics::svd(W2);
  require_nondegenerate(f1.S, kDegenerateGap, "paired_rates_full W1");
  require_nondegenerate(f2.S, kDegenerateGap, "paired_rates_full W2");

  const Matrix align = f2.V.transpose() * f1.U;        // (k', k) = v₂ᵏ'ᵀ u₁ᵏ
  const Matrix proj = f2.U.transpose() * G * f1.V;     // (k', k) = u₂ᵏ'ᵀ G v₁ᵏ
  const Eigen::Index n1 = f1.S.size();
  const Eigen::Index n2 = f2.S.size();
  PairedRates r;
  r.sigma1_rate = Vector::Zero(n1);
  r.sigma2_rate = Vector::Zero(n2);
  for (Eigen::Index k = 0; k < n1; ++k) {
    for (Eigen::Index kp = 0; kp < n2; ++kp) r.sigma1_rate(k) -= align(kp, k) * f2.S(kp) * proj(kp, k);
  }
  for (Eigen::Index k = 0; k < n2; ++k) {
    for (Eigen::Index kp = 0; kp < n1; ++kp) r.sigma2_rate(k) -= align(k, kp) * f1.S(kp) * proj(k, kp);
  }
  return r;
}

PairedRates paired_rates_aligned(const Vector& s1, const Vector& s2, const Matrix& V1, const Matrix& X) {
  numerics::require_symmetric(X, numerics::kSymmetryTolerance, "paired_rates_aligned X");
  if (s1.size() != s2.size() || V1.cols() < s1.size() || V1.rows() != X.rows()) {
    throw InvalidInputError("paired_rates_aligned: shape mismatch");
  }
  PairedRates r;
  r.sigma1_rate.resize(s1.size());
  r.sigma2_rate.resize(s2.size());
  for (Eigen::Index k = 0; k < s1.size(); ++k) {
    const double q = V1.col(k).dot(X * V1.col(k));
    r.sigma1_rate(k) = s1(k) * s2(k) * s2(k) * q;
    r.sigma2_rate(k) = s2(k) * s1(k) * s1(k) * q;
  }
  return r;
}

}  // namespace dimcollapse::dynamics
