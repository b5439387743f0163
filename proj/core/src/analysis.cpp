#include "dimcollapse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dimcollapse/csv.hpp"
#include "dimcollapse/errors.hpp"

namespace dimcollapse::analysis {
namespace {

// Union of runs of near-equal adjacent singular values from both layers.
std::vector<int> group_labels(const Vector& s1, const Vector& s2, double gap) {
  const Eigen::Index n = std::min(s1.size(), s2.size());
  std::vector<int> label(static_cast<std::size_t>(n), 0);
  int current = 0;
  for (Eigen::Index k = 1; k < n; ++k) {
    const bool tied = std::abs(s1(k - 1) - s1(k)) < gap || std::abs(s2(k - 1) - s2(k)) < gap;
    if (!tied) ++current;
    label[static_cast<std::size_t>(k)] = current;
  }
  return label;
}

}  // namespace

AlignmentReport alignment_matrix(const Matrix& W1, const Matrix& W2, double degenerate_gap) {
  if (W2.cols() != W1.rows()) throw InvalidInputError("alignment_matrix: W2 cols must equal W1 rows");
  numerics::require_finite(W1, "alignment_matrix W1");
  numerics::require_finite(W2, "alignment_matrix W2");
  const auto f1 = numerics::svd(W1);
  const auto f2 = numerics::svd(W2);

  AlignmentReport rep;
  rep.A = f2.V.transpose() * f1.U;
  const auto label = group_labels(f1.S, f2.S, degenerate_gap);
  const Eigen::Index n = std::min(rep.A.rows(), rep.A.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const int g = label[static_cast<std::size_t>(k)];
    if (static_cast<int>(rep.groups.size()) <= g) rep.groups.emplace_back();
    rep.groups[static_cast<std::size_t>(g)].push_back(static_cast<int>(k));
  }
  rep.block_level = static_cast<Eigen::Index>(rep.groups.size()) < n;

  rep.abs_diag_min = std::numeric_limits<double>::infinity();
  rep.offdiag_max = 0.0;
  for (Eigen::Index c = 0; c < rep.A.cols(); ++c) {
    double in_block = 0.0;
    for (Eigen::Index r = 0; r < rep.A.rows(); ++r) {
      const double v = std::abs(rep.A(r, c));
      const bool same = r < n && c < n && label[static_cast<std::size_t>(r)] == label[static_cast<std::size_t>(c)];
      if (same) {
        in_block += v * v;
      } else {
        rep.offdiag_max = std::max(rep.offdiag_max, v);
      }
    }
    if (c < n) rep.abs_diag_min = std::min(rep.abs_diag_min, std::sqrt(in_block));
  }
  if (n == 0) rep.abs_diag_min = 0.0;
  return rep;
}

Matrix conserved_quantity(const Matrix& W1, const Matrix& W2) {
  if (W2.cols() != W1.rows()) throw InvalidInputError("conserved_quantity: W2 cols must equal W1 rows");
  return W1 * W1.transpose() - W2.transpose() * W2;
}

double ConservationTrace::max_drift() const {
  double m = 0.0;
  for (const double d : drift) m = std::max(m, d);
  return m;
}

ConservationTrace conserved_gap(const dynamics::Trajectory& traj) {
  if (traj.snapshots.empty()) throw InvalidInputError("conserved_gap: empty trajectory");
  if (traj.nonlinearity != models::Nonlinearity::none) {
    throw InvalidInputError("conserved_gap: requires a linear trajectory");
  }
  ConservationTrace out;
  Matrix baseline;
  for (const auto& snap : traj.snapshots) {
    if (snap.layers.size() != 2) {
      throw InvalidInputError("conserved_gap: requires depth 2, got " + std::to_string(snap.layers.size()));
    }
    const Matrix c = conserved_quantity(snap.layers[0], snap.layers[1]);
    if (out.steps.empty()) {
      baseline = c;
      out.baseline_norm = c.norm();
    }
    out.steps.push_back(snap.step);
    out.drift.push_back((c - baseline).norm());
  }
  return out;
}

CollapseReport effective_rank(const numerics::SpectrumReport& spectrum, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInputError("effective_rank: epsilon must lie in (0, 1)");
  CollapseReport rep;
  rep.epsilon = epsilon;
  rep.spectrum = spectrum;
  double smax = 0.0;
  for (const double s : spectrum.singular_values) smax = std::max(smax, s);
  if (smax <= 0.0) return rep;
  const double cut = epsilon * smax;
  for (const double s : spectrum.singular_values) {
    if (s >= cut) ++rep.effective_rank;
  }
  return rep;
}

Vector pairing_gap(const Vector& s1, const Vector& s2) {
  if (s1.size() != s2.size()) throw InvalidInputError("pairing_gap: length mismatch");
  return s1.array().square() - s2.array().square();
}

numerics::CovarianceSpectrum embedding_spectrum(const models::LinearStack& stack, const Matrix& X) {
  return numerics::covariance_spectrum(models::forward(stack, X).Z);
}

void write_spectrum_trace(const dynamics::Trajectory& traj, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"step", "layer", "index", "sigma"});
  for (const auto& snap : traj.snapshots) {
    for (std::size_t l = 0; l < snap.layers.size(); ++l) {
      const Vector s = numerics::singular_values(snap.layers[l]);
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        w.row(static_cast<long long>(snap.step), static_cast<long long>(l), static_cast<long long>(k), s(k));
      }
    }
  }
}

void write_alignment_trace(const dynamics::Trajectory& traj, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"step", "row", "col", "abs_value"});
  for (const auto& snap : traj.snapshots) {
    if (snap.layers.size() < 2) throw InvalidInputError("alignment trace requires depth >= 2");
    const auto rep = alignment_matrix(snap.layers[0], snap.layers[1]);
    for (Eigen::Index r = 0; r < rep.A.rows(); ++r) {
      for (Eigen::Index c = 0; c < rep.A.cols(); ++c) {
        w.row(static_cast<long long>(snap.step), static_cast<long long>(r), static_cast<long long>(c),
              std::abs(rep.A(r, c)));
      }
    }
  }
}

void write_conservation_trace(const ConservationTrace& trace, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"step", "frobenius_drift"});
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    w.row(static_cast<long long>(trace.steps[i]), trace.drift[i]);
  }
}

void write_loss_trace(const std::vector<double>& losses, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"step", "loss"});
  for (std::size_t i = 0; i < losses.size(); ++i) w.row(static_cast<long long>(i), losses[i]);
}

void write_spectrum(const numerics::SpectrumReport& spectrum, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"index", "singular_value", "log10_value"});
  for (std::size_t i = 0; i < spectrum.singular_values.size(); ++i) {
    w.row(static_cast<long long>(i), spectrum.singular_values[i], spectrum.log10_values[i]);
  }
}

}  // namespace dimcollapse::analysis
