#include "sfkit/hybrid.hpp"

#include <algorithm>
#include <map>

namespace sfkit {

void HybridBlockConfig::validate() const {
  if (channels < 2 || channels % 2 != 0) throw InputError("config: channels must be even, >= 2");
  if (state_dim < 1) throw InputError("config: state_dim must be >= 1");
  if (window < 1) throw InputError("config: window must be >= 1");
  if (pos_frequencies < 1) throw InputError("config: pos_frequencies must be >= 1");
  if (curve_bits < 0 || curve_bits > 21) throw InputError("config: curve order out of range");
}

CurveOrder HybridBlockConfig::curve_order() const {
  const int bits = curve_bits > 0 ? curve_bits : curve_bits_for_grid(grid);
  return CurveOrder(paradigm, bits);
}

HybridBlockParams HybridBlockParams::init(const HybridBlockConfig& config, Rng& rng) {
  HybridBlockParams p;
  p.local = hippo_init(config.channels, config.state_dim, rng);
  p.global_fwd = hippo_init(config.channels, config.state_dim, rng);
  p.global_bwd = hippo_init(config.channels, config.state_dim, rng);
  return p;
}

namespace {

// scan orders inside a region: row-major traverses x fastest
std::vector<std::size_t> region_scan_order(const std::vector<std::size_t>& members,
                                           const RegionAssignment& regions, bool x_direction) {
  std::vector<std::size_t> order = members;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = regions.in_region[a];
    const auto& pb = regions.in_region[b];
    if (x_direction) {
      if (pa[1] != pb[1]) return pa[1] < pb[1];
      return pa[0] < pb[0];
    }
    if (pa[0] != pb[0]) return pa[0] < pb[0];
    return pa[1] < pb[1];
  });
  return order;
}

Tensor gather_scan_rows(const Tensor& features, const std::vector<std::size_t>& rows) {
  const std::size_t c = features.extent(1);
  Tensor out({rows.size(), c}, features.precision());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = features[rows[r] * c + j];
  }
  return out;
}

}  // namespace

TokenSequence local_mamba(const TokenSequence& tokens, const SsmParams& params,
                          const HybridBlockConfig& config, LocalCache* cache) {
  tokens.validate();
  config.validate();
  const std::size_t n = tokens.size();
  const std::size_t c = tokens.channels();
  const auto cells = quantize_to_cells(tokens.coords, config.grid);
  const auto regions = region_partition(cells, config.window, config.grid.dims()[1]);

  // deterministic region iteration: ascending region id, members in input order
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[regions.region[i]].push_back(i);

  Tensor out_features({n, c}, tokens.features.precision());
  if (cache) {
    cache->x_dir.clear();
    cache->y_dir.clear();
    cache->xy_fusion = config.xy_fusion;
  }

  for (const auto& [region_id, members] : groups) {
    (void)region_id;
    const auto order_x = region_scan_order(members, regions, /*x_direction=*/true);
    Tensor x_in = gather_scan_rows(tokens.features, order_x);
    LocalScanCache cx;
    cx.rows = order_x;
    Tensor y_x = selective_scan_seq(params, x_in, cache ? &cx.scan : nullptr);
    if (cache) cache->x_dir.push_back(std::move(cx));

    if (config.xy_fusion) {
      const auto order_y = region_scan_order(members, regions, /*x_direction=*/false);
      Tensor y_in = gather_scan_rows(tokens.features, order_y);
      LocalScanCache cy;
      cy.rows = order_y;
      Tensor y_y = selective_scan_seq(params, y_in, cache ? &cy.scan : nullptr);
      if (cache) cache->y_dir.push_back(std::move(cy));
      // scatter the average of the two directional scans
      std::vector<std::size_t> rank_in_y(tokens.size());
      for (std::size_t r = 0; r < order_y.size(); ++r) rank_in_y[order_y[r]] = r;
      for (std::size_t r = 0; r < order_x.size(); ++r) {
        const std::size_t row = order_x[r];
        const std::size_t ry = rank_in_y[row];
        for (std::size_t j = 0; j < c; ++j) {
          out_features[row * c + j] = 0.5 * (y_x[r * c + j] + y_y[ry * c + j]);
        }
      }
    } else {
      for (std::size_t r = 0; r < order_x.size(); ++r) {
        const std::size_t row = order_x[r];
        for (std::size_t j = 0; j < c; ++j) out_features[row * c + j] = y_x[r * c + j];
      }
    }
  }

  if (cache) cache->valid = true;
  TokenSequence out = tokens;
  out.features = std::move(out_features);
  return out;
}

Tensor local_mamba_backward(const SsmParams& params, const LocalCache& cache,
                            const Tensor& upstream) {
  if (!cache.valid) throw InputError("local_mamba_backward: cache is missing");
  const std::size_t n = upstream.extent(0), c = upstream.extent(1);
  Tensor grad({n, c});
  const double direction_weight = cache.xy_fusion ? 0.5 : 1.0;

  auto accumulate = [&](const LocalScanCache& lsc) {
    Tensor g_up({lsc.rows.size(), c});
    for (std::size_t r = 0; r < lsc.rows.size(); ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        g_up[r * c + j] = direction_weight * upstream[lsc.rows[r] * c + j];
      }
    }
    Tensor g = scan_backward(params, lsc.scan, g_up);
    for (std::size_t r = 0; r < lsc.rows.size(); ++r) {
      for (std::size_t j = 0; j < c; ++j) grad[lsc.rows[r] * c + j] += g[r * c + j];
    }
  };

  for (const auto& lsc : cache.x_dir) accumulate(lsc);
  for (const auto& lsc : cache.y_dir) accumulate(lsc);
  return grad;
}

TokenSequence global_mamba(const TokenSequence& tokens, const SsmParams& params_fwd,
                           const SsmParams& params_bwd, const HybridBlockConfig& config,
                           GlobalCache* cache) {
  tokens.validate();
  config.validate();
  const std::size_t n = tokens.size();
  const std::size_t c = tokens.channels();

  Tensor augmented = tokens.features;
  if (config.use_pos_embedding) {
    const auto unit =
        normalize_coords(tokens.coords, config.grid.range_min, config.grid.range_max);
    const Tensor emb = pos_embedding(unit, c, config.pos_frequencies);
    for (std::size_t i = 0; i < augmented.size(); ++i) augmented[i] += emb[i];
  }

  const SortResult sorted = sort_tokens(tokens, config.curve_order(), config.grid);
  Tensor x = gather_rows(augmented, sorted.perm);

  Tensor y;
  if (cache) {
    cache->perm = sorted.perm;
    cache->bidirectional = config.bidirectional;
  }
  if (config.bidirectional) {
    y = bidirectional_scan(params_fwd, params_bwd, x, config.merge,
                           cache ? &cache->bidir : nullptr);
  } else {
    y = selective_scan_seq(params_fwd, x, cache ? &cache->mono : nullptr);
  }
  if (cache) cache->valid = true;

  Tensor restored({n, c}, tokens.features.precision());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = sorted.perm[r];
    for (std::size_t j = 0; j < c; ++j) restored[row * c + j] = y[r * c + j];
  }
  TokenSequence out = tokens;
  out.features = std::move(restored);
  return out;
}

Tensor global_mamba_backward(const SsmParams& params_fwd, const SsmParams& params_bwd,
                             const HybridBlockConfig& config, const GlobalCache& cache,
                             const Tensor& upstream) {
  if (!cache.valid) throw InputError("global_mamba_backward: cache is missing");
  const std::size_t n = upstream.extent(0), c = upstream.extent(1);
  Tensor g_sorted({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = cache.perm[r];
    for (std::size_t j = 0; j < c; ++j) g_sorted[r * c + j] = upstream[row * c + j];
  }
  Tensor g_x;
  if (cache.bidirectional) {
    g_x = bidirectional_backward(params_fwd, params_bwd, cache.bidir, g_sorted, config.merge);
  } else {
    g_x = scan_backward(params_fwd, cache.mono, g_sorted);
  }
  // un-sort; the positional embedding is coordinate-only, so the add is
  // identity with respect to features
  Tensor grad({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = cache.perm[r];
    for (std::size_t j = 0; j < c; ++j) grad[row * c + j] = g_x[r * c + j];
  }
  return grad;
}

Tensor rms_normalize(const Tensor& features, std::vector<double>* inv_r) {
  const std::size_t n = features.extent(0), c = features.extent(1);
  Tensor out({n, c}, features.precision());
  if (inv_r) inv_r->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = features[i * c + j];
      mean_sq += v * v;
    }
    mean_sq /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(mean_sq + 1e-12);
    if (inv_r) (*inv_r)[i] = inv;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = features[i * c + j] * inv;
  }
  return out;
}

Tensor rms_normalize_backward(const Tensor& x, const std::vector<double>& inv_r,
                              const Tensor& upstream) {
  const std::size_t n = x.extent(0), c = x.extent(1);
  Tensor grad({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = inv_r[i];
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += upstream[i * c + j] * x[i * c + j];
    // y_j = x_j * inv, inv = (mean(x^2) + eps)^(-1/2)
    // dL/dx_j = g_j*inv - x_j * inv^3 * <g, x> / C
    const double scale = inv * inv * inv * dot / static_cast<double>(c);
    for (std::size_t j = 0; j < c; ++j) {
      grad[i * c + j] = upstream[i * c + j] * inv - x[i * c + j] * scale;
    }
  }
  return grad;
}

namespace {

TokenSequence stage_input(const TokenSequence& cur, const HybridBlockConfig& config,
                          StageNormCache* norm) {
  if (!config.pre_norm) {
    if (norm) norm->used = false;
    return cur;
  }
  TokenSequence normed = cur;
  if (norm) {
    norm->x = cur.features;
    norm->used = true;
    normed.features = rms_normalize(cur.features, &norm->inv_r);
  } else {
    normed.features = rms_normalize(cur.features);
  }
  return normed;
}

}  // namespace

TokenSequence hybrid_block_forward(const TokenSequence& tokens, const HybridBlockParams& params,
                                   const HybridBlockConfig& config, HybridBlockCache* cache) {
  config.validate();
  TokenSequence cur = tokens;
  if (cache) {
    cache->local_ran = false;
    cache->global_ran = false;
    cache->residual = config.residual;
  }
  if (config.local_enabled) {
    const TokenSequence sub_in = stage_input(cur, config, cache ? &cache->local_norm : nullptr);
    TokenSequence stage =
        local_mamba(sub_in, params.local, config, cache ? &cache->local : nullptr);
    if (config.residual) {
      for (std::size_t i = 0; i < stage.features.size(); ++i) {
        stage.features[i] += cur.features[i];
      }
    }
    cur = std::move(stage);
    if (cache) cache->local_ran = true;
  }
  if (config.global_enabled) {
    const TokenSequence sub_in = stage_input(cur, config, cache ? &cache->global_norm : nullptr);
    TokenSequence stage = global_mamba(sub_in, params.global_fwd, params.global_bwd, config,
                                       cache ? &cache->global : nullptr);
    if (config.residual) {
      for (std::size_t i = 0; i < stage.features.size(); ++i) {
        stage.features[i] += cur.features[i];
      }
    }
    cur = std::move(stage);
    if (cache) cache->global_ran = true;
  }
  if (cache) cache->valid = true;
  return cur;
}

Tensor hybrid_block_backward(const HybridBlockParams& params, const HybridBlockConfig& config,
                             const HybridBlockCache& cache, const Tensor& upstream) {
  if (!cache.valid) throw InputError("hybrid_block_backward: cache is missing");
  Tensor g = upstream;
  if (cache.global_ran) {
    Tensor g_sub = global_mamba_backward(params.global_fwd, params.global_bwd, config,
                                         cache.global, g);
    if (cache.global_norm.used) {
      g_sub = rms_normalize_backward(cache.global_norm.x, cache.global_norm.inv_r, g_sub);
    }
    if (cache.residual) {
      for (std::size_t i = 0; i < g.size(); ++i) g_sub[i] += g[i];
    }
    g = std::move(g_sub);
  }
  if (cache.local_ran) {
    Tensor g_sub = local_mamba_backward(params.local, cache.local, g);
    if (cache.local_norm.used) {
      g_sub = rms_normalize_backward(cache.local_norm.x, cache.local_norm.inv_r, g_sub);
    }
    if (cache.residual) {
      for (std::size_t i = 0; i < g.size(); ++i) g_sub[i] += g[i];
    }
    g = std::move(g_sub);
  }
  return g;
}

HybridStack::HybridStack(HybridBlockConfig config, std::vector<HybridBlockParams> blocks)
    : config_(std::move(config)), blocks_(std::move(blocks)) {
  config_.validate();
  if (blocks_.empty()) throw InputError("HybridStack needs at least one block");
}

HybridStack HybridStack::make(const HybridBlockConfig& config, std::size_t depth, Rng& rng) {
  std::vector<HybridBlockParams> blocks;
  blocks.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) blocks.push_back(HybridBlockParams::init(config, rng));
  return HybridStack(config, std::move(blocks));
}

TokenSequence HybridStack::forward(const TokenSequence& tokens) {
  caches_.assign(blocks_.size(), HybridBlockCache{});
  TokenSequence cur = tokens;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    cur = hybrid_block_forward(cur, blocks_[i], config_, &caches_[i]);
  }
  have_forward_ = true;
  return cur;
}

Tensor HybridStack::backward(const Tensor& upstream) {
  if (!have_forward_) throw InputError("HybridStack::backward before forward");
  Tensor g = upstream;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    g = hybrid_block_backward(blocks_[i], config_, caches_[i], g);
  }
  return g;
}

}  // namespace sfkit
