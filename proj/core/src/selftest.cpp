#include "sfkit/selftest.hpp"

#include <cmath>
#include <functional>

#include "sfkit/curves.hpp"
#include "sfkit/fusion.hpp"
#include "sfkit/grad_check.hpp"
#include "sfkit/hybrid.hpp"
#include "sfkit/scene.hpp"
#include "sfkit/serialize.hpp"
#include "sfkit/ssm.hpp"
#include "sfkit/voxel.hpp"

namespace sfkit {

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double max_rel_error(const Tensor& got, const Tensor& want) {
  double peak = 0.0;
  for (double v : want.values()) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) peak = 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - want[i]) / peak);
  }
  return worst;
}

bool check_rng(std::uint64_t seed) {
  Rng a(seed), b(seed);
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() != b.next_u64()) return false;
  }
  return true;
}

bool check_softplus() {
  if (!close(softplus(0.0), std::log(2.0), 1e-15)) return false;
  // overflow-safe form at a large logit
  return close(softplus(20.0), 20.0 + std::log1p(std::exp(-20.0)), 1e-12) &&
         close(softplus(20.0), 20.0000000021, 1e-9);
}

bool check_affine() {
  const Tensor x = Tensor::matrix({{1.0, 1.0}});
  const Tensor w = Tensor::matrix({{2.0, 0.0}, {0.0, 3.0}});
  const Tensor b = Tensor::vector({1.0, 1.0});
  const Tensor y = affine_apply(x, w, b);
  return close(y[0], 3.0, 1e-15) && close(y[1], 4.0, 1e-15);
}

bool check_finite_diff(std::uint64_t) {
  const Tensor x = Tensor::vector({1.0});
  const Tensor g = finite_diff_grad(
      [](const Tensor& t) { return silu(t[0]); }, x, 1e-6);
  const double s = sigmoid(1.0);
  const double analytic = s + 1.0 * s * (1.0 - s);
  return close(g[0], analytic, 1e-6 * std::abs(analytic));
}

bool check_hilbert() {
  for (int b = 1; b <= 3; ++b) {
    const std::uint64_t count = std::uint64_t{1} << (3 * b);
    std::vector<char> seen(count, 0);
    for (std::uint32_t x = 0; x < (1u << b); ++x) {
      for (std::uint32_t y = 0; y < (1u << b); ++y) {
        for (std::uint32_t z = 0; z < (1u << b); ++z) {
          const std::uint64_t h = hilbert_index(x, y, z, b);
          if (h >= count || seen[h]) return false;
          seen[h] = 1;
        }
      }
    }
    if (hilbert_index(0, 0, 0, b) != 0) return false;
    for (std::uint64_t i = 0; i + 1 < count; ++i) {
      const auto a = hilbert_inverse(i, b);
      const auto c = hilbert_inverse(i + 1, b);
      int dist = 0;
      for (int axis = 0; axis < 3; ++axis) {
        dist += std::abs(static_cast<int>(a[axis]) - static_cast<int>(c[axis]));
      }
      if (dist != 1) return false;
    }
  }
  return true;
}

bool check_morton() {
  if (morton_index(1, 0, 0, 2) != 1 || morton_index(0, 1, 0, 2) != 2 ||
      morton_index(0, 0, 1, 2) != 4 || morton_index(1, 1, 1, 2) != 7) {
    return false;
  }
  std::vector<char> seen(64, 0);
  for (std::uint32_t x = 0; x < 4; ++x) {
    for (std::uint32_t y = 0; y < 4; ++y) {
      for (std::uint32_t z = 0; z < 4; ++z) {
        const std::uint64_t m = morton_index(x, y, z, 2);
        if (m >= 64 || seen[m]) return false;
        seen[m] = 1;
        const auto back = morton_inverse(m, 2);
        if (back[0] != x || back[1] != y || back[2] != z) return false;
      }
    }
  }
  return true;
}

bool check_voxelize() {
  PointCloud pc;
  pc.points = {{0.0, 0.0, 0.0}, {0.1, 0.1, 0.1}};
  const GridSpec grid({0, 0, 0}, {3, 3, 2.5}, {0.3, 0.3, 0.25});
  const auto vs = voxelize(pc, grid);
  if (vs.size() != 1) return false;
  return close(vs.continuous_centroids[0][0], 0.05, 1e-15) &&
         close(vs.continuous_centroids[0][2], 0.05, 1e-15);
}

bool check_conservation(std::uint64_t seed) {
  Rng rng(seed ^ 0xc0ffee);
  PointCloud pc;
  for (int i = 0; i < 500; ++i) {
    pc.points.push_back({rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 2.5)});
  }
  const GridSpec grid({0, 0, 0}, {3, 3, 2.5}, {0.3, 0.3, 0.25});
  auto vs = voxelize(pc, grid);
  const Vec3 before = vs.global_centroid();
  for (int s = 0; s < 3; ++s) vs = downsample_voxels(vs, {2, 2, 2}, CentroidMode::Continuous);
  const Vec3 after = vs.global_centroid();
  for (int a = 0; a < 3; ++a) {
    if (!close(after[a], before[a], 1e-12 * std::max(1.0, std::abs(before[a])))) return false;
  }
  return true;
}

bool check_conflict_test() {
  SparseVoxelSet vs;
  vs.grid = GridSpec({0, 0, 0}, {4, 4, 4}, {1, 1, 1});
  vs.effective_voxel_size = {1, 1, 1};
  vs.discrete_coords = {{2, 2, 1}, {1, 1, 1}};
  vs.continuous_centroids = {{2.5, 2.5, 1.5}, {1.5, 1.5, 1.5}};
  vs.features = Tensor({2, 1}, {1.0, 2.0});
  vs.counts = {1, 1};
  Tensor saliency({2}, {0.1, 0.9});
  const auto gen = generate_salient_voxels(vs, 1, 2, saliency);
  if (gen.size() != 3) return false;
  for (const auto& c : gen.discrete_coords) {
    if (c == Cell3{2, 2, 1}) return false;
  }
  return true;
}

bool check_scan_examples() {
  // pinned selectivity: delta = ln 2, B = C = 1, A = -1, D = 0
  const auto params = pinned_params(1, 1, std::log(2.0), {1.0}, {1.0});
  const Tensor x1({1, 1}, {1.0});
  const Tensor y1 = selective_scan_seq(params, x1);
  if (!close(y1[0], std::log(2.0), 1e-12)) return false;
  const Tensor x2({2, 1}, {1.0, 1.0});
  const Tensor y2 = selective_scan_seq(params, x2);
  return close(y2[1], 1.5 * std::log(2.0), 1e-12);
}

bool check_parallel_scan(std::uint64_t seed) {
  Rng rng(seed ^ 0x5ca1);
  const auto params = hippo_init(4, 4, rng);
  Tensor x({512, 4});
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  const Tensor seq = selective_scan_seq(params, x);
  const Tensor par = selective_scan_parallel(params, x);
  return max_rel_error(par, seq) <= 1e-10;
}

bool check_scan_gradient(std::uint64_t seed) {
  Rng rng(seed ^ 0x9add);
  const auto params = hippo_init(2, 3, rng);
  Tensor x({4, 2});
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  Tensor weights({4, 2});
  for (double& v : weights.values()) v = rng.normal(0.0, 1.0);
  ScanCache cache;
  selective_scan_seq(params, x, &cache);
  Tensor upstream = weights;
  const Tensor grad = scan_backward(params, cache, upstream);
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& probe) {
        const Tensor y = selective_scan_seq(params, probe);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
        return acc;
      },
      x, 1e-6);
  return max_rel_error(grad, fd) <= 1e-6;
}

bool check_causality(std::uint64_t seed) {
  Rng rng(seed ^ 0xca05ULL);
  const auto params = hippo_init(3, 4, rng);
  Tensor x({32, 3});
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  const Tensor base = selective_scan_seq(params, x);
  Tensor poked = x;
  poked[20 * 3 + 1] += 2.0;
  const Tensor after = selective_scan_seq(params, poked);
  for (std::size_t t = 0; t < 20; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (base[t * 3 + c] != after[t * 3 + c]) return false;
    }
  }
  return true;
}

bool check_region() {
  const std::vector<Cell3> cells = {{3, 5, 0}};
  const auto r = region_partition(cells, 2, 6);
  return r.region[0] == 5 && r.in_region[0][0] == 1 && r.in_region[0][1] == 1;
}

bool check_local_isolation(std::uint64_t seed) {
  Rng rng(seed ^ 0x10ca1);
  HybridBlockConfig cfg;
  cfg.channels = 4;
  cfg.state_dim = 3;
  cfg.window = 2;
  cfg.grid = GridSpec({0, 0, 0}, {8, 8, 1}, {1, 1, 1});
  cfg.xy_fusion = true;
  const auto params = hippo_init(cfg.channels, cfg.state_dim, rng);
  TokenSequence tokens;
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 4; ++y) {
      tokens.coords.push_back({static_cast<double>(x), static_cast<double>(y), 0.0});
      tokens.modality.push_back(Modality::Lidar);
    }
  }
  tokens.features = Tensor({16, 4});
  for (double& v : tokens.features.values()) v = rng.normal(0.0, 1.0);
  const TokenSequence base = local_mamba(tokens, params, cfg);
  TokenSequence poked = tokens;
  poked.features[0] += 1.0;  // token (0,0), region 0
  const TokenSequence after = local_mamba(poked, params, cfg);
  for (std::size_t i = 0; i < 16; ++i) {
    const bool same_region = tokens.coords[i][0] < 2 && tokens.coords[i][1] < 2;
    if (same_region) continue;
    for (std::size_t j = 0; j < 4; ++j) {
      if (base.features[i * 4 + j] != after.features[i * 4 + j]) return false;
    }
  }
  return true;
}

}  // namespace

MetricsReport run_selftest(std::uint64_t seed) {
  MetricsReport report("selftest", seed, fnv1a_hash("selftest " + std::to_string(seed)),
                       "double", 1);
  bool all = true;
  nlohmann::ordered_json checks;
  const std::pair<const char*, std::function<bool()>> suite[] = {
      {"rng_reproducible", [&] { return check_rng(seed); }},
      {"softplus_overflow_safe", [] { return check_softplus(); }},
      {"affine_example", [] { return check_affine(); }},
      {"finite_diff_vs_analytic", [&] { return check_finite_diff(seed); }},
      {"hilbert_bijective_adjacent", [] { return check_hilbert(); }},
      {"morton_interleave", [] { return check_morton(); }},
      {"voxelize_centroid", [] { return check_voxelize(); }},
      {"centroid_conservation", [&] { return check_conservation(seed); }},
      {"conflict_test_disjoint", [] { return check_conflict_test(); }},
      {"scan_pinned_examples", [] { return check_scan_examples(); }},
      {"parallel_matches_sequential", [&] { return check_parallel_scan(seed); }},
      {"scan_gradient_vs_fd", [&] { return check_scan_gradient(seed); }},
      {"scan_causality", [&] { return check_causality(seed); }},
      {"region_index_example", [] { return check_region(); }},
      {"local_region_isolation", [&] { return check_local_isolation(seed); }},
  };
  for (const auto& [name, fn] : suite) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception&) {
      ok = false;
    }
    checks[name] = ok;
    all = all && ok;
  }
  report.set_json("checks", std::move(checks));
  report.set_bool("all_pass", all);
  return report;
}

}  // namespace sfkit
