#pragma once

#include <filesystem>
#include <vector>

#include "dimcollapse/dynamics.hpp"
#include "dimcollapse/models.hpp"
#include "dimcollapse/numerics.hpp"
#include "dimcollapse/synthdata.hpp"

namespace dimcollapse::analysis {

inline constexpr double kDefaultCollapseEpsilon = 1e-3;

// A = V₂ᵀU₁ from sign-fixed SVDs. When either layer has singular values closer
// than `degenerate_gap`, the affected indices form a group and the summary
// statistics treat each group as one diagonal block: the "diagonal" value of
// index k is the norm of A's column k restricted to its group.
struct AlignmentReport {
  Matrix A;
  double abs_diag_min = 0.0;
  double offdiag_max = 0.0;
  bool block_level = false;
  std::vector<std::vector<int>> groups;
};

AlignmentReport alignment_matrix(const Matrix& W1, const Matrix& W2,
                                 double degenerate_gap = dynamics::kDegenerateGap);

// C(t) = W₁W₁ᵀ - W₂ᵀW₂.
Matrix conserved_quantity(const Matrix& W1, const Matrix& W2);

struct ConservationTrace {
  std::vector<long> steps;
  std::vector<double> drift;  // ‖C(t) - C(0)‖_F
  double baseline_norm = 0.0;

  double max_drift() const;
};

// Requires a two-layer linear trajectory.
ConservationTrace conserved_gap(const dynamics::Trajectory& traj);

struct CollapseReport {
  int effective_rank = 0;
  double epsilon = kDefaultCollapseEpsilon;
  numerics::SpectrumReport spectrum;
};

// Counts singular values ≥ epsilon·σ_max; an all-zero spectrum has rank 0.
CollapseReport effective_rank(const numerics::SpectrumReport& spectrum, double epsilon = kDefaultCollapseEpsilon);

// (σ₁ᵏ)² - (σ₂ᵏ)².
Vector pairing_gap(const Vector& s1, const Vector& s2);

// Spectrum of the covariance of first-branch embeddings of `stack` on `X`.
numerics::CovarianceSpectrum embedding_spectrum(const models::LinearStack& stack, const Matrix& X);

// Diagnostic CSVs. Alignment uses the first two layers; conservation requires a
// two-layer linear trajectory.
void write_spectrum_trace(const dynamics::Trajectory& traj, const std::filesystem::path& path);
void write_alignment_trace(const dynamics::Trajectory& traj, const std::filesystem::path& path);
void write_conservation_trace(const ConservationTrace& trace, const std::filesystem::path& path);
void write_loss_trace(const std::vector<double>& losses, const std::filesystem::path& path);
void write_spectrum(const numerics::SpectrumReport& spectrum, const std::filesystem::path& path);

}  // namespace dimcollapse::analysis
