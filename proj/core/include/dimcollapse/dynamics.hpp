#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dimcollapse/models.hpp"
#include "dimcollapse/numerics.hpp"
#include "dimcollapse/synthdata.hpp"

namespace dimcollapse::dynamics {

inline constexpr double kDegenerateGap = 1e-8;
inline constexpr double kDivergenceBound = 1e12;

// Plain SGD viewed as explicit Euler on the gradient flow. Each step moves
// every layer by -(learning_rate / N) dL/dW_l, i.e. descends the batch-mean loss.
struct FlowConfig {
  double learning_rate = 1e-2;
  long steps = 10000;
  int batch_size = 512;
  bool resample = true;
  long record_every = 100;
  std::uint64_t seed = 0;
  // Unit-normalize embeddings before the loss (cosine InfoNCE).
  bool normalize_embeddings = false;

  void validate() const;
  bool operator==(const FlowConfig&) const = default;
};

struct Snapshot {
  long step = 0;
  std::vector<Matrix> layers;
};

struct Trajectory {
  models::Nonlinearity nonlinearity = models::Nonlinearity::none;
  std::vector<Snapshot> snapshots;  // step 0, every record_every, and the final step
  std::vector<double> losses;       // loss (batch-sum form) before each step
  models::LinearStack final_stack;
};

struct StepResult {
  double loss = 0.0;
  // dL/dW_l on the step's batch (sum form, not divided by N).
  std::vector<Matrix> layer_grads;
  // The gradient-flow velocity actually applied: -(1/N) layer_grads.
  std::vector<Matrix> velocity;
  // G = Σ (g_z xᵀ + g_z′ x′ᵀ), scaled by 1/N to match `velocity`.
  Matrix G;
};

// Owns the only mutable copy of the stack during training.
class Trainer {
 public:
  Trainer(models::LinearStack stack, synthdata::DataSpec data, synthdata::AugmentationSpec aug, FlowConfig cfg);

  // Loss and velocity at the current weights on `batch`, without stepping.
  StepResult evaluate(const synthdata::Batch& batch) const;
  StepResult step();

  // Batch used by step number `t` (fixed when resample is off).
  synthdata::Batch batch_for_step(long t) const;

  const models::LinearStack& stack() const { return stack_; }
  long steps_taken() const { return step_; }
  const FlowConfig& config() const { return cfg_; }

 private:
  models::LinearStack stack_;
  synthdata::DataSpec data_;
  synthdata::AugmentationSpec aug_;
  FlowConfig cfg_;
  long step_ = 0;
  synthdata::Batch fixed_batch_;
};

// Observer is called after each step with the trainer state; may be empty.
using StepObserver = std::function<void(const Trainer&, const StepResult&)>;

Trajectory train(models::LinearStack stack, const synthdata::DataSpec& data, const synthdata::AugmentationSpec& aug,
                 const FlowConfig& cfg, const StepObserver& observer = {});

// W(t) = W(0) exp(X t) for symmetric X.
Matrix closed_form_flow(const Matrix& W0, const Matrix& X, double t);

// Explicit Euler for Ẇ = W X with X held fixed.
Matrix euler_linear_flow(const Matrix& W0, const Matrix& X, double step, long steps);

// σ̇ᵏ = uᵏᵀ Ẇ vᵏ.
Vector singular_value_rates(const Matrix& W, const Matrix& Wdot);

// H(k, k') = 1/(σᵏ² - σᵏ'²) off the diagonal, 0 on it.
struct RateReport {
  Vector sigma_rates;
  Matrix U_rate;
  Matrix V_rate;
  Matrix H;
};

RateReport singular_vector_rates(const Matrix& W, const Matrix& Wdot);

struct AlignmentRateReport {
  Matrix A;
  Matrix A_rate;
  Matrix F;  // S₂ U₂ᵀ G V₁ S₁
};

// Ȧ for A = V₂ᵀU₁ under Ẇ₁ = -W₂ᵀG, Ẇ₂ = -GW₁ᵀ.
AlignmentRateReport alignment_rate(const Matrix& W1, const Matrix& W2, const Matrix& G);

struct PairedRates {
  Vector sigma1_rate;
  Vector sigma2_rate;
};

// Singular-value rates of both layers from the full (unaligned) expansion.
PairedRates paired_rates_full(const Matrix& W1, const Matrix& W2, const Matrix& G);

// Aligned-layer rates: σ̇₁ᵏ = σ₁ᵏ(σ₂ᵏ)²(v₁ᵏᵀXv₁ᵏ), σ̇₂ᵏ = σ₂ᵏ(σ₁ᵏ)²(v₁ᵏᵀXv₁ᵏ).
PairedRates paired_rates_aligned(const Vector& s1, const Vector& s2, const Matrix& V1, const Matrix& X);

// Throws DegenerateSpectrumError if adjacent singular values are closer than `gap`.
void require_nondegenerate(const Vector& sigma, double gap, const char* what);

}  // namespace dimcollapse::dynamics
