#include "dimcollapse/experiments.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <thread>

#include <openssl/evp.h>

#include "dimcollapse/analysis.hpp"
#include "dimcollapse/csv.hpp"
#include "dimcollapse/directclr.hpp"
#include "dimcollapse/dynamics.hpp"
#include "dimcollapse/errors.hpp"
#include "dimcollapse/infonce.hpp"
#include "dimcollapse/models.hpp"
#include "json.hpp"

#ifndef DIMCOLLAPSE_VERSION
#define DIMCOLLAPSE_VERSION "0.0.0"
#endif

namespace dimcollapse::experiments {
namespace {

namespace fs = std::filesystem;
using config::Command;
using config::ExperimentConfig;

// Seed tags for quantities shared by every trajectory of a run.
constexpr std::uint64_t kEvalBatchTag = 0xE7A1;
constexpr std::uint64_t kProbeBatchTag = 0x9B0E;

// Runs fn(0..n-1), at most hardware_concurrency at a time; results keep index order.
template <typename R>
std::vector<R> parallel_map(std::size_t n, const std::function<R(std::size_t)>& fn) {
  const std::size_t width = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::vector<R> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += width) {
    std::vector<std::future<R>> batch;
    const std::size_t stop = std::min(n, start + width);
    for (std::size_t i = start; i < stop; ++i) batch.push_back(std::async(std::launch::async, fn, i));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

std::string label_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

Matrix eval_inputs(const ExperimentConfig& cfg) {
  return synthdata::sample_batch(cfg.data, cfg.aug, cfg.eval_batch_size, derive_seed(cfg.seed, kEvalBatchTag)).X;
}

int count_below(const numerics::SpectrumReport& s, double eps) {
  double smax = 0.0;
  for (const double v : s.singular_values) smax = std::max(smax, v);
  int n = 0;
  for (const double v : s.singular_values) {
    if (v < eps * smax) ++n;
  }
  return n;
}

// Minimum eigenvalue of X for a linear stack at its current weights.
double contrast_min_eigenvalue(const models::LinearStack& stack, const synthdata::Batch& batch) {
  const auto z1 = models::forward(stack, batch.X);
  const auto z2 = models::forward(stack, batch.Xp);
  const auto w = infonce::softmax_weights({z1.Z, z2.Z, false});
  return numerics::min_eigenvalue(infonce::build_X(batch, w).X);
}

struct TrajectoryJob {
  std::string subdir;
  std::uint64_t seed = 0;
  synthdata::AugmentationSpec aug;
  int depth = 1;
  models::Nonlinearity nonlinearity = models::Nonlinearity::none;
};

struct TrajectoryResult {
  TrajectoryJob job;
  dynamics::Trajectory traj;
  numerics::SpectrumReport embedding;
  double x_min_eig = std::numeric_limits<double>::quiet_NaN();
};

TrajectoryResult run_trajectory(const ExperimentConfig& cfg, const TrajectoryJob& job, const Matrix& eval_x) {
  models::InitSpec init = cfg.init;
  init.seed = job.seed;
  auto stack = models::init_stack(cfg.data.dim, job.depth, init, job.nonlinearity);
  dynamics::FlowConfig flow = cfg.flow;
  flow.seed = job.seed;

  TrajectoryResult r;
  r.job = job;
  if (job.nonlinearity == models::Nonlinearity::none) {
    const auto probe = synthdata::sample_batch(cfg.data, job.aug, cfg.flow.batch_size, derive_seed(job.seed, kEvalBatchTag));
    r.x_min_eig = contrast_min_eigenvalue(stack, probe);
  }
  r.traj = dynamics::train(std::move(stack), cfg.data, job.aug, flow);
  r.embedding = analysis::embedding_spectrum(r.traj.final_stack, eval_x).spectrum;
  return r;
}

// Collects emitted files in creation order for the manifest.
class Collector {
 public:
  explicit Collector(fs::path root) : root_(std::move(root)) { ensure_dir(root_); }

  fs::path path(const std::string& rel) {
    const fs::path p = root_ / rel;
    ensure_dir(p.parent_path());
    files_.push_back(rel);
    return p;
  }
  const fs::path& root() const { return root_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

void write_trajectory(Collector& out, const std::string& prefix, const TrajectoryResult& r) {
  analysis::write_spectrum_trace(r.traj, out.path(prefix + "spectrum_trace.csv"));
  analysis::write_loss_trace(r.traj.losses, out.path(prefix + "loss_trace.csv"));
  analysis::write_spectrum(r.embedding, out.path(prefix + "embedding_spectrum.csv"));
  if (r.job.depth >= 2) analysis::write_alignment_trace(r.traj, out.path(prefix + "alignment_trace.csv"));
  if (r.job.depth == 2 && r.job.nonlinearity == models::Nonlinearity::none) {
    analysis::write_conservation_trace(analysis::conserved_gap(r.traj), out.path(prefix + "conservation_trace.csv"));
  }
}

void run_sim_single(const ExperimentConfig& cfg, Collector& out) {
  std::vector<TrajectoryJob> jobs;
  for (std::size_t i = 0; i < cfg.amplitude_sweep.size(); ++i) {
    TrajectoryJob j;
    j.subdir = "k_" + label_real(cfg.amplitude_sweep[i]);
    j.seed = cfg.seed + i;
    j.aug = cfg.aug;
    j.aug.amplitude = cfg.amplitude_sweep[i];
    j.depth = cfg.depth;
    j.nonlinearity = cfg.nonlinearity;
    jobs.push_back(j);
  }
  const Matrix eval_x = eval_inputs(cfg);
  const auto results = parallel_map<TrajectoryResult>(
      jobs.size(), [&](std::size_t i) { return run_trajectory(cfg, jobs[i], eval_x); });

  csv::Writer summary(out.path("summary.csv"));
  summary.header({"trajectory", "amplitude", "seed", "x_min_eigenvalue", "sigma_max_final", "sigma_min_final",
                  "min_ratio_to_initial", "collapsed_count", "embedding_effective_rank"});
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    write_trajectory(out, r.job.subdir + "/", r);
    const Vector s0 = numerics::singular_values(r.traj.snapshots.front().layers.front());
    const Vector s1 = numerics::singular_values(r.traj.snapshots.back().layers.front());
    // Singular values are matched by rank order.
    const double min_ratio = (s1.array() / s0.array()).minCoeff();
    const auto rank = analysis::effective_rank(numerics::make_spectrum(s1, static_cast<std::size_t>(s1.size())), cfg.epsilon);
    summary.row(static_cast<long long>(i), r.job.aug.amplitude, static_cast<long long>(r.job.seed), r.x_min_eig,
                s1.maxCoeff(), s1.minCoeff(), min_ratio, static_cast<long long>(s1.size() - rank.effective_rank),
                analysis::effective_rank(r.embedding, cfg.epsilon).effective_rank);
  }
}

void run_sim_two_layer(const ExperimentConfig& cfg, Collector& out) {
  if (cfg.depth < 2) throw ConfigError("model.depth: sim-two-layer needs at least 2 layers");
  TrajectoryJob job;
  job.subdir = ".";
  job.seed = cfg.seed;
  job.aug = cfg.aug;
  job.depth = cfg.depth;
  job.nonlinearity = cfg.nonlinearity;
  const TrajectoryResult r = run_trajectory(cfg, job, eval_inputs(cfg));
  write_trajectory(out, "", r);

  {
    csv::Writer w(out.path("pairing_gap_trace.csv"));
    w.header({"step", "index", "gap"});
    for (const auto& snap : r.traj.snapshots) {
      const Vector gap =
          analysis::pairing_gap(numerics::singular_values(snap.layers[0]), numerics::singular_values(snap.layers[1]));
      for (Eigen::Index k = 0; k < gap.size(); ++k) {
        w.row(static_cast<long long>(snap.step), static_cast<long long>(k), gap(k));
      }
    }
  }

  const auto& last = r.traj.snapshots.back().layers;
  const auto align = analysis::alignment_matrix(last[0], last[1]);
  csv::Writer summary(out.path("summary.csv"));
  summary.header({"metric", "value"});
  summary.row("abs_diag_min", align.abs_diag_min);
  summary.row("offdiag_max", align.offdiag_max);
  summary.row("block_level", static_cast<long long>(align.block_level));
  if (cfg.depth == 2 && cfg.nonlinearity == models::Nonlinearity::none) {
    const auto cons = analysis::conserved_gap(r.traj);
    summary.row("conservation_max_drift", cons.max_drift());
    summary.row("conservation_baseline_norm", cons.baseline_norm);
  }
  summary.row("embedding_effective_rank", static_cast<long long>(analysis::effective_rank(r.embedding, cfg.epsilon).effective_rank));
  summary.row("final_loss", r.traj.losses.back());
}

void run_depth_sweep(const ExperimentConfig& cfg, Collector& out) {
  std::vector<TrajectoryJob> jobs;
  for (const auto nl : cfg.nonlinearities) {
    for (const int depth : cfg.depths) {
      TrajectoryJob j;
      j.subdir = std::string(models::to_string(nl)) + "_L" + std::to_string(depth);
      j.seed = cfg.seed + jobs.size();
      j.aug = cfg.aug;
      j.depth = depth;
      j.nonlinearity = nl;
      jobs.push_back(j);
    }
  }
  const Matrix eval_x = eval_inputs(cfg);
  const auto results = parallel_map<TrajectoryResult>(
      jobs.size(), [&](std::size_t i) { return run_trajectory(cfg, jobs[i], eval_x); });

  csv::Writer summary(out.path("summary.csv"));
  summary.header({"trajectory", "nonlinearity", "depth", "seed", "collapsed_count", "embedding_effective_rank",
                  "final_loss"});
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    write_trajectory(out, r.job.subdir + "/", r);
    summary.row(static_cast<long long>(i), models::to_string(r.job.nonlinearity), static_cast<long long>(r.job.depth),
                static_cast<long long>(r.job.seed), static_cast<long long>(count_below(r.embedding, cfg.epsilon)),
                static_cast<long long>(analysis::effective_rank(r.embedding, cfg.epsilon).effective_rank),
                r.traj.losses.back());
  }
}

void run_directclr_probe(const ExperimentConfig& cfg, Collector& out) {
  const directclr::SubvectorSpec sub{cfg.d0};
  sub.validate(cfg.rep_dim);
  const auto encoder = models::init_residual_encoder(cfg.data.dim, cfg.rep_dim, cfg.seed);
  const auto batch = synthdata::sample_batch(cfg.data, cfg.aug, cfg.flow.batch_size, derive_seed(cfg.seed, kProbeBatchTag));
  const auto probe = directclr::gradient_rank_probe(encoder, batch, sub);
  {
    csv::Writer w(out.path("gradient_mask.csv"));
    w.header({"channel", "grad_r_max_abs", "grad_h_max_abs", "grad_h_nonzero_fraction"});
    for (Eigen::Index c = 0; c < probe.grad_r.rows(); ++c) {
      const auto gh = probe.grad_h.row(c).array().abs();
      w.row(static_cast<long long>(c), probe.grad_r.row(c).cwiseAbs().maxCoeff(), gh.maxCoeff(),
            static_cast<double>((gh > 1e-12).count()) / static_cast<double>(gh.size()));
    }
  }

  directclr::ProjectorTrainConfig train_cfg;
  train_cfg.data = cfg.data;
  train_cfg.aug = cfg.aug;
  train_cfg.rep_dim = cfg.rep_dim;
  train_cfg.learning_rate = cfg.flow.learning_rate;
  train_cfg.steps = cfg.flow.steps;
  train_cfg.batch_size = cfg.flow.batch_size;

  const Matrix eval_x = eval_inputs(cfg);
  struct VariantResult {
    directclr::ProjectorTrace trace;
    numerics::SpectrumReport rep_spectrum;
    numerics::SpectrumReport emb_spectrum;
  };
  const auto results = parallel_map<VariantResult>(cfg.variants.size(), [&](std::size_t i) {
    directclr::ProjectorSpec spec;
    spec.variant = cfg.variants[i];
    spec.rank_or_d0 = cfg.d0;
    spec.seed = cfg.seed + i;
    auto tc = train_cfg;
    tc.seed = cfg.seed + i;
    VariantResult v;
    v.trace = directclr::train_projector_variant(spec, tc);
    const Matrix r = models::residual_forward(v.trace.final_encoder, eval_x).r;
    v.rep_spectrum = numerics::covariance_spectrum(r).spectrum;
    v.emb_spectrum = numerics::covariance_spectrum(directclr::apply_projector(v.trace.final_projector, r, tc.steps)).spectrum;
    return v;
  });

  {
    csv::Writer w(out.path("projector_losses.csv"));
    w.header({"step", "variant", "loss"});
    for (const auto& v : results) {
      for (std::size_t t = 0; t < v.trace.losses.size(); ++t) {
        w.row(static_cast<long long>(t), directclr::to_string(v.trace.variant), v.trace.losses[t]);
      }
    }
  }
  for (const auto& v : results) {
    const std::string name(directclr::to_string(v.trace.variant));
    analysis::write_spectrum(v.rep_spectrum, out.path("representation_spectrum_" + name + ".csv"));
  }

  csv::Writer summary(out.path("summary.csv"));
  summary.header({"variant", "final_loss", "representation_effective_rank", "embedding_effective_rank"});
  for (const auto& v : results) {
    summary.row(directclr::to_string(v.trace.variant), v.trace.losses.back(),
                static_cast<long long>(analysis::effective_rank(v.rep_spectrum, cfg.epsilon).effective_rank),
                static_cast<long long>(analysis::effective_rank(v.emb_spectrum, cfg.epsilon).effective_rank));
  }
  {
    csv::Writer w(out.path("probe_summary.csv"));
    w.header({"metric", "value"});
    w.row("d0", static_cast<long long>(cfg.d0));
    w.row("rep_dim", static_cast<long long>(cfg.rep_dim));
    w.row("grad_r_masked_exact", static_cast<long long>(probe.masked_exact));
    w.row("grad_h_nonzero_fraction", probe.grad_h_nonzero_fraction);
    w.row("grad_h_channel_fraction", probe.grad_h_channel_fraction);
    w.row("loss", probe.loss);
  }
}

void run_spectrum(const ExperimentConfig& cfg, Collector& out) {
  const auto rows = csv::read_numeric_rows(cfg.spectrum_input);
  const auto cov = numerics::covariance_spectrum(std::span<const std::vector<double>>(rows));
  const auto rank = analysis::effective_rank(cov.spectrum, cfg.epsilon);
  analysis::write_spectrum(cov.spectrum, out.path("embedding_spectrum.csv"));
  csv::Writer summary(out.path("summary.csv"));
  summary.header({"metric", "value"});
  summary.row("dim", static_cast<long long>(cov.spectrum.source_dim));
  summary.row("vectors", static_cast<long long>(rows.size()));
  summary.row("epsilon", cfg.epsilon);
  summary.row("effective_rank", static_cast<long long>(rank.effective_rank));
}

}  // namespace

std::string_view version() { return DIMCOLLAPSE_VERSION; }

void apply_environment(config::ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') cfg.output_dir = env;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
      throw Error("SHA-256 update failed");
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw Error("SHA-256 finalisation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

RunManifest run(const config::ExperimentConfig& cfg) {
  config::validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  Collector out(cfg.output_dir);

  RunManifest manifest;
  manifest.command = std::string(config::to_string(cfg.command));
  manifest.version = std::string(version());
  manifest.config_text = config::serialize(cfg);
  manifest.output_dir = cfg.output_dir;
  {
    std::ofstream echo(out.path("config.txt"), std::ios::binary | std::ios::trunc);
    if (!echo) throw IoError("cannot write config echo in " + cfg.output_dir.string());
    echo << manifest.config_text;
  }

  switch (cfg.command) {
    case Command::sim_single: run_sim_single(cfg, out); break;
    case Command::sim_two_layer: run_sim_two_layer(cfg, out); break;
    case Command::depth_sweep: run_depth_sweep(cfg, out); break;
    case Command::directclr_probe: run_directclr_probe(cfg, out); break;
    case Command::spectrum: run_spectrum(cfg, out); break;
  }

  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& rel : out.files()) {
    const fs::path p = out.root() / rel;
    manifest.files.push_back({fs::path(rel).lexically_normal().generic_string(), sha256_file(p), fs::file_size(p)});
  }

  nlohmann::ordered_json j;
  j["command"] = manifest.command;
  j["version"] = manifest.version;
  j["seed"] = cfg.seed;
  j["wall_clock_seconds"] = manifest.wall_seconds;
  j["config"] = manifest.config_text;
  auto& files = j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : manifest.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  std::ofstream mf(out.root() / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest.json in " + cfg.output_dir.string());
  mf << j.dump(2) << "\n";
  if (!mf) throw IoError("failed writing manifest.json");
  return manifest;
}

}  // namespace dimcollapse::experiments
