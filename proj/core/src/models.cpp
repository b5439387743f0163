#include "dimcollapse/models.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <Eigen/QR>

#include "dimcollapse/csv.hpp"
#include "dimcollapse/errors.hpp"

namespace dimcollapse::models {

std::string_view to_string(Nonlinearity n) { return n == Nonlinearity::none ? "none" : "rectifier"; }

Nonlinearity parse_nonlinearity(std::string_view s) {
  if (s == "none" || s == "linear") return Nonlinearity::none;
  if (s == "rectifier" || s == "relu") return Nonlinearity::rectifier;
  throw InvalidInputError("unknown nonlinearity '" + std::string(s) + "'");
}

std::string_view to_string(InitMode m) {
  return m == InitMode::distinct_singular_values ? "distinct_singular_values" : "gaussian";
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "distinct_singular_values") return InitMode::distinct_singular_values;
  if (s == "gaussian") return InitMode::gaussian;
  throw InvalidInputError("unknown init mode '" + std::string(s) + "'");
}

void LinearStack::validate() const {
  if (layers.empty()) throw InvalidInputError("stack has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    numerics::require_finite(layers[l], "stack layer");
    if (l > 0 && layers[l].cols() != layers[l - 1].rows()) {
      throw InvalidInputError("layer " + std::to_string(l) + " input dim does not match previous output dim");
    }
  }
}

ForwardPass forward(const LinearStack& stack, const Matrix& X) {
  stack.validate();
  if (X.rows() != stack.layers.front().cols()) {
    throw InvalidInputError("forward: input dim " + std::to_string(X.rows()) + " != first layer dim " +
                            std::to_string(stack.layers.front().cols()));
  }
  ForwardPass pass;
  const auto L = stack.layers.size();
  pass.inputs.reserve(L);
  pass.preactivations.reserve(L);
  Matrix h = X;
  for (std::size_t l = 0; l < L; ++l) {
    Matrix a = stack.layers[l] * h;
    pass.inputs.push_back(std::move(h));
    if (stack.nonlinearity == Nonlinearity::rectifier && l + 1 < L) {
      h = a.cwiseMax(0.0);
    } else {
      h = a;
    }
    pass.preactivations.push_back(std::move(a));
  }
  pass.Z = std::move(h);
  return pass;
}

std::vector<Matrix> backprop_branch(const LinearStack& stack, const ForwardPass& pass, const Matrix& grad_out) {
  const auto L = stack.layers.size();
  if (pass.inputs.size() != L || pass.preactivations.size() != L) {
    throw StateError("backprop: forward intermediates missing or from a different stack");
  }
  if (grad_out.rows() != pass.Z.rows() || grad_out.cols() != pass.Z.cols()) {
    throw InvalidInputError("backprop: output gradient shape does not match forward output");
  }
  std::vector<Matrix> grads(L);
  Matrix g = grad_out;
  for (std::size_t l = L; l-- > 0;) {
    grads[l].noalias() = g * pass.inputs[l].transpose();
    if (l > 0) {
      Matrix back = stack.layers[l].transpose() * g;
      if (stack.nonlinearity == Nonlinearity::rectifier) {
        back.array() *= (pass.preactivations[l - 1].array() > 0.0).cast<double>();
      }
      g = std::move(back);
    }
  }
  return grads;
}

std::vector<Matrix> backprop(const LinearStack& stack, const ForwardPass& first, const ForwardPass& second,
                             const infonce::GradientBundle& grads) {
  auto a = backprop_branch(stack, first, grads.g_z);
  const auto b = backprop_branch(stack, second, grads.g_zp);
  for (std::size_t l = 0; l < a.size(); ++l) a[l] += b[l];
  return a;
}

void InitSpec::validate() const {
  if (!(sv_min > 0.0) || !(sv_max > 0.0)) throw InvalidInputError("init singular values must be positive");
  if (!(sv_min < sv_max)) throw InvalidInputError("init.sv_min must be < init.sv_max");
}

Matrix random_orthogonal(int d, CounterRng& rng) {
  Matrix g(d, d);
  for (int c = 0; c < d; ++c) {
    for (int r = 0; r < d; ++r) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  }
  return q;
}

LinearStack init_stack(int d, int depth, const InitSpec& spec, Nonlinearity nonlinearity) {
  if (d < 2) throw InvalidInputError("init_stack: d must be >= 2");
  if (depth < 1) throw InvalidInputError("init_stack: depth must be >= 1");
  spec.validate();
  LinearStack stack;
  stack.nonlinearity = nonlinearity;
  for (int l = 0; l < depth; ++l) {
    CounterRng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(l)), 7);
    if (spec.mode == InitMode::distinct_singular_values) {
      Vector s(d);
      for (int k = 0; k < d; ++k) s(k) = spec.sv_max - (spec.sv_max - spec.sv_min) * k / (d - 1);
      const Matrix q = random_orthogonal(d, rng);
      const Matrix p = random_orthogonal(d, rng);
      stack.layers.push_back(q * s.asDiagonal() * p.transpose());
    } else {
      const double sd = spec.sv_max / (2.0 * std::sqrt(static_cast<double>(d)));
      Matrix w(d, d);
      for (int c = 0; c < d; ++c) {
        for (int r = 0; r < d; ++r) w(r, c) = sd * rng.normal();
      }
      stack.layers.push_back(std::move(w));
    }
  }
  return stack;
}

void ResidualEncoder::validate() const {
  numerics::require_finite(base, "encoder base");
  numerics::require_finite(block_in, "encoder block_in");
  numerics::require_finite(block_out, "encoder block_out");
  if (block_in.cols() != base.rows() || block_out.rows() != base.rows() || block_out.cols() != block_in.rows()) {
    throw InvalidInputError("residual encoder: block shapes do not match representation dim");
  }
}

ResidualEncoder init_residual_encoder(int input_dim, int rep_dim, std::uint64_t seed, double block_scale) {
  if (input_dim < 1 || rep_dim < 1) throw InvalidInputError("residual encoder dims must be positive");
  CounterRng rng(seed, 11);
  auto gaussian = [&](int rows, int cols, double sd) {
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) m(r, c) = sd * rng.normal();
    }
    return m;
  };
  ResidualEncoder enc;
  enc.base = gaussian(rep_dim, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  enc.block_in = gaussian(rep_dim, rep_dim, block_scale / std::sqrt(static_cast<double>(rep_dim)));
  enc.block_out = gaussian(rep_dim, rep_dim, block_scale / std::sqrt(static_cast<double>(rep_dim)));
  return enc;
}

EncoderOutput residual_forward(const ResidualEncoder& enc, const Matrix& X) {
  enc.validate();
  if (X.rows() != enc.base.cols()) throw InvalidInputError("residual_forward: input dim mismatch");
  EncoderOutput out;
  out.h = enc.base * X;
  out.block_preact = enc.block_in * out.h;
  out.block_hidden = out.block_preact.cwiseMax(0.0);
  out.r = out.h + enc.block_out * out.block_hidden;
  return out;
}

Matrix residual_backprop_h(const ResidualEncoder& enc, const EncoderOutput& out, const Matrix& grad_r) {
  if (grad_r.rows() != out.r.rows() || grad_r.cols() != out.r.cols()) {
    throw InvalidInputError("residual_backprop_h: gradient shape mismatch");
  }
  Matrix hidden = enc.block_out.transpose() * grad_r;
  hidden.array() *= (out.block_preact.array() > 0.0).cast<double>();
  Matrix grad_h = grad_r;
  grad_h.noalias() += enc.block_in.transpose() * hidden;
  return grad_h;
}

void save_stack(const LinearStack& stack, std::uint64_t seed, const std::filesystem::path& dir) {
  stack.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  for (int l = 0; l < stack.depth(); ++l) {
    csv::Writer w(dir / ("layer_" + std::to_string(l) + ".csv"));
    const Matrix& m = stack.layers[static_cast<std::size_t>(l)];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      w.begin_row();
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.field(m(r, c));
      w.end_row();
    }
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write checkpoint manifest in " + dir.string());
  manifest << "d = " << stack.input_dim() << "\n"
           << "L = " << stack.depth() << "\n"
           << "nonlinearity = " << to_string(stack.nonlinearity) << "\n"
           << "seed = " << seed << "\n";
}

LinearStack load_stack(const std::filesystem::path& dir, std::uint64_t* seed) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("missing checkpoint manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const char* key : {"d", "L", "nonlinearity", "seed"}) {
    if (!kv.count(key)) throw InvalidInputError(std::string("checkpoint manifest lacks '") + key + "'");
  }
  LinearStack stack;
  stack.nonlinearity = parse_nonlinearity(kv["nonlinearity"]);
  const int depth = std::stoi(kv["L"]);
  for (int l = 0; l < depth; ++l) {
    const auto rows = csv::read_numeric_rows(dir / ("layer_" + std::to_string(l) + ".csv"));
    if (rows.empty()) throw InvalidInputError("checkpoint layer " + std::to_string(l) + " is empty");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) throw InvalidInputError("ragged checkpoint layer");
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
    stack.layers.push_back(std::move(m));
  }
  stack.validate();
  if (stack.input_dim() != std::stoi(kv["d"])) throw InvalidInputError("checkpoint d does not match layer 0");
  if (seed) *seed = std::stoull(kv["seed"]);
  return stack;
}

}  // namespace dimcollapse::models
