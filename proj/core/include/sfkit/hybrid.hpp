#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sfkit/curves.hpp"
#include "sfkit/pos_embed.hpp"
#include "sfkit/serialize.hpp"
#include "sfkit/ssm.hpp"
#include "sfkit/token.hpp"

namespace sfkit {

/// Configuration of one hybrid block and of the grid it quantizes against.
struct HybridBlockConfig {
  std::size_t channels = 16;   // C, must be even
  std::size_t state_dim = 8;   // S
  int window = 4;              // local region size w, in cells
  CurveParadigm paradigm = CurveParadigm::Hilbert;
  int curve_bits = 0;          // 0 = smallest order covering the grid
  bool bidirectional = true;
  bool xy_fusion = true;
  bool local_enabled = true;
  bool global_enabled = true;
  bool use_pos_embedding = true;
  bool residual = true;
  bool pre_norm = true;  // RMS-normalize stage inputs before each scan
  int pos_frequencies = 4;
  MergeRule merge = MergeRule::Mean;
  GridSpec grid;

  void validate() const;
  CurveOrder curve_order() const;
};

/// Scan parameter sets for one block: one for the local regions, a pair
/// for the bidirectional global scan.
struct HybridBlockParams {
  SsmParams local;
  SsmParams global_fwd;
  SsmParams global_bwd;

  static HybridBlockParams init(const HybridBlockConfig& config, Rng& rng);
};

// --- local Mamba ---

struct LocalScanCache {
  std::vector<std::size_t> rows;  // token rows in scan order
  ScanCache scan;
};

struct LocalCache {
  std::vector<LocalScanCache> x_dir;
  std::vector<LocalScanCache> y_dir;  // populated when xy_fusion is on
  bool xy_fusion = false;
  bool valid = false;
};

/// Groups tokens into w x w regions and scans each region independently in
/// row-major (x-direction) order; with xy fusion the column-major scan is
/// averaged in. Output rows stay in input order.
TokenSequence local_mamba(const TokenSequence& tokens, const SsmParams& params,
                          const HybridBlockConfig& config, LocalCache* cache = nullptr);

Tensor local_mamba_backward(const SsmParams& params, const LocalCache& cache,
                            const Tensor& upstream);

// --- global Mamba ---

struct GlobalCache {
  std::vector<std::size_t> perm;
  bool bidirectional = false;
  BidirCache bidir;
  ScanCache mono;
  bool valid = false;
};

/// Adds the positional embedding, orders tokens along the configured curve,
/// scans (bidirectionally unless configured otherwise) and restores the
/// original order. Coordinates pass through unchanged.
TokenSequence global_mamba(const TokenSequence& tokens, const SsmParams& params_fwd,
                           const SsmParams& params_bwd, const HybridBlockConfig& config,
                           GlobalCache* cache = nullptr);

Tensor global_mamba_backward(const SsmParams& params_fwd, const SsmParams& params_bwd,
                             const HybridBlockConfig& config, const GlobalCache& cache,
                             const Tensor& upstream);

// --- full block ---

/// Per-token RMS normalization, y = x / sqrt(mean(x^2) + 1e-12). Keeps
/// stacked blocks bounded; zero rows stay zero.
Tensor rms_normalize(const Tensor& features, std::vector<double>* inv_r = nullptr);
Tensor rms_normalize_backward(const Tensor& x, const std::vector<double>& inv_r,
                              const Tensor& upstream);

struct StageNormCache {
  Tensor x;                    // stage input rows
  std::vector<double> inv_r;   // 1/r per row
  bool used = false;
};

struct HybridBlockCache {
  LocalCache local;
  GlobalCache global;
  StageNormCache local_norm;
  StageNormCache global_norm;
  bool local_ran = false;
  bool global_ran = false;
  bool residual = true;
  bool valid = false;
};

/// Local stage then global stage, each wrapped in a residual connection
/// when config.residual is set. Disabling a stage skips it entirely, so a
/// single-stage config reproduces that stage standalone bit-exactly.
TokenSequence hybrid_block_forward(const TokenSequence& tokens, const HybridBlockParams& params,
                                   const HybridBlockConfig& config,
                                   HybridBlockCache* cache = nullptr);

Tensor hybrid_block_backward(const HybridBlockParams& params, const HybridBlockConfig& config,
                             const HybridBlockCache& cache, const Tensor& upstream);

// --- stacked pipeline ---

/// Anything the ERF probe can differentiate through: a forward pass that
/// caches, and a vector-Jacobian product with respect to input features.
class FeaturePipeline {
 public:
  virtual ~FeaturePipeline() = default;
  virtual TokenSequence forward(const TokenSequence& tokens) = 0;
  virtual Tensor backward(const Tensor& upstream) = 0;
};

class IdentityPipeline final : public FeaturePipeline {
 public:
  TokenSequence forward(const TokenSequence& tokens) override { return tokens; }
  Tensor backward(const Tensor& upstream) override { return upstream; }
};

/// A stack of hybrid blocks sharing one config.
class HybridStack final : public FeaturePipeline {
 public:
  HybridStack(HybridBlockConfig config, std::vector<HybridBlockParams> blocks);
  /// Depth blocks initialized from one seeded stream.
  static HybridStack make(const HybridBlockConfig& config, std::size_t depth, Rng& rng);

  TokenSequence forward(const TokenSequence& tokens) override;
  Tensor backward(const Tensor& upstream) override;

  const HybridBlockConfig& config() const { return config_; }
  std::vector<HybridBlockParams>& blocks() { return blocks_; }

 private:
  HybridBlockConfig config_;
  std::vector<HybridBlockParams> blocks_;
  std::vector<HybridBlockCache> caches_;
  bool have_forward_ = false;
};

}  // namespace sfkit
