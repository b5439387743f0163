#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dimcollapse/infonce.hpp"
#include "dimcollapse/numerics.hpp"
#include "dimcollapse/rng.hpp"

namespace dimcollapse::models {

enum class Nonlinearity { none, rectifier };

std::string_view to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(std::string_view s);

// z = W_L ... W_1 x, no biases. With a rectifier it is applied between layers,
// never after the last one.
struct LinearStack {
  std::vector<Matrix> layers;
  Nonlinearity nonlinearity = Nonlinearity::none;

  int depth() const { return static_cast<int>(layers.size()); }
  int input_dim() const { return static_cast<int>(layers.front().cols()); }
  int output_dim() const { return static_cast<int>(layers.back().rows()); }
  void validate() const;
};

// inputs[l] feeds layer l, preactivations[l] = layers[l] * inputs[l].
struct ForwardPass {
  Matrix Z;
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
};

ForwardPass forward(const LinearStack& stack, const Matrix& X);

// dL/dW_l for one branch, given dL/dZ.
std::vector<Matrix> backprop_branch(const LinearStack& stack, const ForwardPass& pass, const Matrix& grad_out);

// Sums both branches. For L = 1 the single gradient is G; for two linear
// layers it is (W₂ᵀG, GW₁ᵀ).
std::vector<Matrix> backprop(const LinearStack& stack, const ForwardPass& first, const ForwardPass& second,
                             const infonce::GradientBundle& grads);

enum class InitMode { distinct_singular_values, gaussian };

std::string_view to_string(InitMode m);
InitMode parse_init_mode(std::string_view s);

struct InitSpec {
  std::uint64_t seed = 0;
  double sv_min = 0.1;
  double sv_max = 1.0;
  InitMode mode = InitMode::distinct_singular_values;

  void validate() const;
  bool operator==(const InitSpec&) const = default;
};

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed R).
Matrix random_orthogonal(int d, CounterRng& rng);

// distinct_singular_values: W_l = Q_l diag(s) P_lᵀ with s equally spaced from
// sv_max down to sv_min. gaussian: iid N(0, (sv_max / (2√d))²) entries, which
// puts the top singular value near sv_max.
LinearStack init_stack(int d, int depth, const InitSpec& spec, Nonlinearity nonlinearity = Nonlinearity::none);

// Toy stand-in for a residual backbone's last block:
//   h = base X,  r = h + block_out · relu(block_in · h).
struct ResidualEncoder {
  Matrix base;
  Matrix block_in;
  Matrix block_out;

  int rep_dim() const { return static_cast<int>(base.rows()); }
  void validate() const;
};

struct EncoderOutput {
  Matrix r;
  Matrix h;
  Matrix block_preact;
  Matrix block_hidden;
};

ResidualEncoder init_residual_encoder(int input_dim, int rep_dim, std::uint64_t seed, double block_scale = 1.0);
EncoderOutput residual_forward(const ResidualEncoder& enc, const Matrix& X);
// dL/dh = dL/dr + block_inᵀ((block_outᵀ dL/dr) ∘ 1[block_preact > 0]).
Matrix residual_backprop_h(const ResidualEncoder& enc, const EncoderOutput& out, const Matrix& grad_r);

// Checkpoint directory: layer_<l>.csv (one matrix row per line) + manifest.txt.
void save_stack(const LinearStack& stack, std::uint64_t seed, const std::filesystem::path& dir);
LinearStack load_stack(const std::filesystem::path& dir, std::uint64_t* seed = nullptr);

}  // namespace dimcollapse::models
