#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sfkit/fusion.hpp"
#include "sfkit/metrics.hpp"
#include "sfkit/scene.hpp"
#include "sfkit/voxel.hpp"

namespace sfkit {

/// Plain-text key-value pipeline configuration (window, paradigm, order,
/// bidirectional, xy_fusion, depths, dims, seed). The grid is filled in per
/// fusion stage at build time.
struct PipelineConfig {
  HybridBlockConfig block;
  std::size_t depth_aligner = 2;
  std::size_t depth_image = 2;
  std::size_t depth_bev = 2;
  std::uint64_t seed = 7;

  static PipelineConfig parse_string(const std::string& text);
  static PipelineConfig parse_file(const std::string& path);
  /// Canonical key-value form; hashing this equals hashing an equivalent
  /// config file written by this toolkit.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Voxel tokens of a synthetic scene: voxelize, downsample `stages` times
/// (z-merging factors), attach seeded features. `in_box[i]` marks tokens
/// whose centroid lies inside a ground-truth box.
struct SceneTokens {
  Scene scene;
  SparseVoxelSet voxels;
  TokenSequence tokens;  // coords = continuous centroids, meters
  std::vector<char> in_box;
};

SceneTokens make_scene_tokens(const SceneSpec& spec, std::size_t channels, int stages,
                              const std::array<int, 3>& stage_factor, CentroidMode mode,
                              std::uint64_t feature_seed);

// --- alignment eval (height-fidelity vs discrete baseline) ---

struct AlignmentOptions {
  std::uint64_t seed = 3;
  int scenes = 100;
  int stages = 2;
  std::array<int, 3> stage_factor{1, 1, 2};  // applied once per stage
  bool run_continuous = true;
  bool run_discrete = true;
};

/// Voxelize -> downsample -> project object voxels; reports the mean and
/// 95th-percentile pixel distance from each projected voxel to the nearest
/// ground-truth object pixel, per centroid mode, plus the per-scene paired
/// win fraction when both modes run.
MetricsReport run_alignment_eval(const AlignmentOptions& options);

// --- ERF eval ---

struct ErfOptions {
  std::uint64_t scene_seed = 5;
  std::size_t queries = 8;
  std::size_t token_budget = 512;
  std::string out_prefix;  // empty = no CSV/PGM emission
};

/// Samples query tokens inside ground-truth boxes, probes gradients through
/// local-only / global-only / hybrid pipelines (and hybrid over
/// height-fidelity coordinates), and reports coverage fractions.
MetricsReport run_erf_eval(const PipelineConfig& config, const ErfOptions& options);

// --- scaling bench ---

struct BenchOptions {
  std::vector<std::size_t> lengths{4096, 8192, 16384, 32768};
  int reps = 20;
  int warmups = 5;
  int attention_reps = 3;   // the quadratic baseline is costly at large N
  int attention_warmups = 1;
  bool run_attention = true;
  std::size_t channels = 16;
  std::size_t state_dim = 16;
  Precision precision = Precision::Single;
  std::uint64_t seed = 11;
};

/// Median wall-clock per forward pass for the selective scan and the
/// in-repo quadratic attention baseline, with consecutive-size ratios and
/// fitted log-log slopes.
MetricsReport bench_scaling(const BenchOptions& options);

/// Reference all-pairs softmax attention over x[N,C] (queries = keys =
/// values = x), the quadratic contrast for the bench.
Tensor attention_baseline(const Tensor& x, Precision precision = Precision::Single);

// --- full fusion pipeline ---

struct FuseOptions {
  std::uint64_t scene_seed = 9;
  int image_token_stride = 16;  // pixel grid stride for synthetic image tokens
};

struct FuseOutput {
  MetricsReport report;
  TokenSequence bev;  // exactly one token per LiDAR-occupied BEV cell
};

/// Scene -> height-fidelity voxels -> modality aligner -> image-space fusion
/// -> lift-splat to BEV -> BEV fusion with compression to LiDAR cells.
FuseOutput run_fuse_pipeline(const PipelineConfig& config, const FuseOptions& options);

}  // namespace sfkit
