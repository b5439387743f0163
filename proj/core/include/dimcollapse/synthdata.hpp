#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dimcollapse/numerics.hpp"

namespace dimcollapse::synthdata {

// x ~ N(0, scale² I). The default makes Σ_{i,j}(xᵢ-xⱼ)(xᵢ-xⱼ)ᵀ/N² ≈ I.
struct DataSpec {
  int dim = 16;
  double scale = 0.70710678118654752;

  void validate() const;
  bool operator==(const DataSpec&) const = default;
};

// Additive noise η ~ N(0, amplitude² I) on coordinates [block_start, block_start + block_size), 0 elsewhere.
struct AugmentationSpec {
  int dim = 16;
  int block_start = 8;
  int block_size = 8;
  double amplitude = 0.0;

  void validate() const;
  bool operator==(const AugmentationSpec&) const = default;
};

// Columns are samples: X(:, i) = xᵢ, Xp(:, i) = xᵢ′.
struct Batch {
  Matrix X;
  Matrix Xp;
  int n = 0;
  std::uint64_t seed = 0;
};

Batch sample_batch(const DataSpec& data, const AugmentationSpec& aug, int n, std::uint64_t seed);

// One row per sample and view: view (0 = x, 1 = x′), sample index, d values.
void write_batch_csv(const Batch& batch, const std::filesystem::path& path);

}  // namespace dimcollapse::synthdata
