#include "dimcollapse/synthdata.hpp"

#include <string>

#include "dimcollapse/csv.hpp"
#include "dimcollapse/errors.hpp"
#include "dimcollapse/rng.hpp"

namespace dimcollapse::synthdata {

void DataSpec::validate() const {
  if (dim < 1) throw InvalidInputError("data.dim must be >= 1");
  if (!(scale > 0.0)) throw InvalidInputError("data.scale must be > 0");
}

void AugmentationSpec::validate() const {
  if (dim < 1) throw InvalidInputError("aug.dim must be >= 1");
  if (block_start < 0 || block_size < 0 || block_start + block_size > dim) {
    throw InvalidInputError("aug block [" + std::to_string(block_start) + ", " +
                            std::to_string(block_start + block_size) + ") exceeds dim " + std::to_string(dim));
  }
  if (!(amplitude >= 0.0)) throw InvalidInputError("aug.amplitude must be >= 0");
}

Batch sample_batch(const DataSpec& data, const AugmentationSpec& aug, int n, std::uint64_t seed) {
  data.validate();
  aug.validate();
  if (aug.dim != data.dim) throw InvalidInputError("aug.dim must equal data.dim");
  if (n < 2) throw DegenerateInputError("sample_batch: need n >= 2 (InfoNCE needs negatives)");

  // Separate streams so the data draw does not depend on the augmentation.
  CounterRng data_rng(seed, 0);
  CounterRng noise_rng(seed, 1);

  Batch b;
  b.n = n;
  b.seed = seed;
  b.X.resize(data.dim, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < data.dim; ++r) b.X(r, i) = data.scale * data_rng.normal();
  }
  b.Xp = b.X;
  if (aug.amplitude > 0.0) {
    for (int i = 0; i < n; ++i) {
      for (int r = aug.block_start; r < aug.block_start + aug.block_size; ++r) {
        b.Xp(r, i) += aug.amplitude * noise_rng.normal();
      }
    }
  }
  return b;
}

void write_batch_csv(const Batch& batch, const std::filesystem::path& path) {
  csv::Writer w(path);
  std::vector<std::string> header{"view", "sample"};
  for (Eigen::Index r = 0; r < batch.X.rows(); ++r) header.push_back("x" + std::to_string(r));
  w.header(header);
  for (int view = 0; view < 2; ++view) {
    const Matrix& m = view == 0 ? batch.X : batch.Xp;
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      w.begin_row();
      w.field(static_cast<long long>(view));
      w.field(static_cast<long long>(i));
      for (Eigen::Index r = 0; r < m.rows(); ++r) w.field(m(r, i));
      w.end_row();
    }
  }
}

}  // namespace dimcollapse::synthdata
