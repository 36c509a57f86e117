#include "sfkit/evals.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sfkit/lift.hpp"
#include "sfkit/serialize.hpp"

namespace sfkit {

PipelineConfig PipelineConfig::parse_string(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "window") ls >> cfg.block.window;
    else if (key == "paradigm") {
      std::string v;
      ls >> v;
      cfg.block.paradigm = paradigm_from_name(v);
    } else if (key == "order") ls >> cfg.block.curve_bits;
    else if (key == "bidirectional") ls >> cfg.block.bidirectional;
    else if (key == "xy_fusion") ls >> cfg.block.xy_fusion;
    else if (key == "local_enabled") ls >> cfg.block.local_enabled;
    else if (key == "global_enabled") ls >> cfg.block.global_enabled;
    else if (key == "pos_embedding") ls >> cfg.block.use_pos_embedding;
    else if (key == "residual") ls >> cfg.block.residual;
    else if (key == "pre_norm") ls >> cfg.block.pre_norm;
    else if (key == "channels") ls >> cfg.block.channels;
    else if (key == "state_dim") ls >> cfg.block.state_dim;
    else if (key == "pos_frequencies") ls >> cfg.block.pos_frequencies;
    else if (key == "depth_aligner") ls >> cfg.depth_aligner;
    else if (key == "depth_image") ls >> cfg.depth_image;
    else if (key == "depth_bev") ls >> cfg.depth_bev;
    else if (key == "seed") ls >> cfg.seed;
    else throw InputError("unknown config key '" + key + "'");
    if (!ls) throw InputError("malformed config line: " + line);
  }
  cfg.block.validate();
  return cfg;
}

PipelineConfig PipelineConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

std::string PipelineConfig::canonical() const {
  std::ostringstream os;
  os << "window " << block.window << "\n";
  os << "paradigm " << paradigm_name(block.paradigm) << "\n";
  os << "order " << block.curve_bits << "\n";
  os << "bidirectional " << (block.bidirectional ? 1 : 0) << "\n";
  os << "xy_fusion " << (block.xy_fusion ? 1 : 0) << "\n";
  os << "local_enabled " << (block.local_enabled ? 1 : 0) << "\n";
  os << "global_enabled " << (block.global_enabled ? 1 : 0) << "\n";
  os << "pos_embedding " << (block.use_pos_embedding ? 1 : 0) << "\n";
  os << "residual " << (block.residual ? 1 : 0) << "\n";
  os << "pre_norm " << (block.pre_norm ? 1 : 0) << "\n";
  os << "channels " << block.channels << "\n";
  os << "state_dim " << block.state_dim << "\n";
  os << "pos_frequencies " << block.pos_frequencies << "\n";
  os << "depth_aligner " << depth_aligner << "\n";
  os << "depth_image " << depth_image << "\n";
  os << "depth_bev " << depth_bev << "\n";
  os << "seed " << seed << "\n";
  return os.str();
}

std::uint64_t PipelineConfig::hash() const { return fnv1a_hash(canonical()); }

SceneTokens make_scene_tokens(const SceneSpec& spec, std::size_t channels, int stages,
                              const std::array<int, 3>& stage_factor, CentroidMode mode,
                              std::uint64_t feature_seed) {
  SceneTokens out;
  out.scene = synth_scene(spec);
  out.voxels = voxelize(out.scene.cloud, spec.grid);
  for (int s = 0; s < stages; ++s) {
    out.voxels = downsample_voxels(out.voxels, stage_factor, mode);
  }
  const std::size_t n = out.voxels.size();
  out.tokens.coords = out.voxels.continuous_centroids;
  out.tokens.modality.assign(n, Modality::Lidar);
  out.tokens.features = Tensor({n, channels});
  Rng frng(feature_seed);
  for (double& v : out.tokens.features.values()) v = frng.normal(0.0, 1.0);
  // blend in the voxel's own (height) feature so tokens are scene-coupled
  for (std::size_t i = 0; i < n; ++i) {
    out.tokens.features[i * channels] += out.voxels.features[i * out.voxels.features.extent(1)];
  }
  out.in_box.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& box : out.scene.boxes) {
      if (box_contains(box, out.voxels.continuous_centroids[i])) {
        out.in_box[i] = 1;
        break;
      }
    }
  }
  return out;
}

namespace {

struct PixelErrorStats {
  double mean = 0.0;
  double p95 = 0.0;
  std::size_t samples = 0;
};

// distance from each projected object voxel to the nearest mask pixel
PixelErrorStats pixel_error_for(const SparseVoxelSet& voxels, const std::vector<char>& is_object,
                                const Scene& scene, const std::vector<CameraModel>& cameras) {
  std::vector<double> distances;
  for (std::size_t cam_idx = 0; cam_idx < cameras.size(); ++cam_idx) {
    const PixelMask& mask = scene.masks[cam_idx];
    std::vector<std::pair<double, double>> mask_pixels;
    for (int v = 0; v < mask.height; ++v) {
      for (int u = 0; u < mask.width; ++u) {
        if (mask.at(u, v)) mask_pixels.emplace_back(u + 0.5, v + 0.5);
      }
    }
    if (mask_pixels.empty()) continue;
    std::vector<Vec3> object_centroids;
    for (std::size_t j = 0; j < voxels.size(); ++j) {
      if (is_object[j]) object_centroids.push_back(voxels.continuous_centroids[j]);
    }
    const auto projections = project_to_image(object_centroids, cameras[cam_idx]);
    for (const auto& p : projections) {
      double best = 1e30;
      for (const auto& [mu, mv] : mask_pixels) {
        const double du = p.u - mu, dv = p.v - mv;
        const double d2 = du * du + dv * dv;
        if (d2 < best) best = d2;
      }
      distances.push_back(std::sqrt(best));
    }
  }
  PixelErrorStats stats;
  stats.samples = distances.size();
  if (distances.empty()) return stats;
  double sum = 0.0;
  for (double d : distances) sum += d;
  stats.mean = sum / static_cast<double>(distances.size());
  std::sort(distances.begin(), distances.end());
  const std::size_t idx = static_cast<std::size_t>(
      std::min<double>(distances.size() - 1.0, std::ceil(0.95 * distances.size()) - 1.0));
  stats.p95 = distances[idx];
  return stats;
}

// object voxels: at least half of the contained points came from a box
std::vector<char> object_voxels(const SparseVoxelSet& stage0,
                                const std::vector<SparseVoxelSet>& later_stages,
                                const std::vector<int>& point_object,
                                const PointCloud& cloud, const GridSpec& grid) {
  // recompute the surviving-point order used by voxelize
  std::vector<std::size_t> surviving;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (grid.contains(cloud.points[i])) surviving.push_back(i);
  }
  const SparseVoxelSet& last = later_stages.empty() ? stage0 : later_stages.back();
  std::vector<double> object_mass(last.size(), 0.0);
  std::vector<double> total_mass(last.size(), 0.0);
  for (std::size_t k = 0; k < surviving.size(); ++k) {
    std::size_t vox = stage0.point_assignment[k];
    for (const auto& stage : later_stages) vox = stage.point_assignment[vox];
    total_mass[vox] += 1.0;
    if (point_object[surviving[k]] >= 0) object_mass[vox] += 1.0;
  }
  std::vector<char> is_object(last.size(), 0);
  for (std::size_t j = 0; j < last.size(); ++j) {
    if (total_mass[j] > 0.0 && object_mass[j] / total_mass[j] >= 0.5) is_object[j] = 1;
  }
  return is_object;
}

PixelErrorStats alignment_one_scene(const SceneSpec& spec, int stages,
                                    const std::array<int, 3>& factor, CentroidMode mode,
                                    const Scene& scene) {
  SparseVoxelSet stage0 = voxelize(scene.cloud, spec.grid);
  std::vector<SparseVoxelSet> later;
  for (int s = 0; s < stages; ++s) {
    later.push_back(downsample_voxels(later.empty() ? stage0 : later.back(), factor, mode));
  }
  const SparseVoxelSet& last = later.empty() ? stage0 : later.back();
  const auto is_object =
      object_voxels(stage0, later, scene.point_object, scene.cloud, spec.grid);
  return pixel_error_for(last, is_object, scene, spec.cameras);
}

}  // namespace

MetricsReport run_alignment_eval(const AlignmentOptions& options) {
  if (options.scenes < 1) throw InputError("alignment eval needs at least one scene");
  std::ostringstream opt;
  opt << "align seed " << options.seed << " scenes " << options.scenes << " stages "
      << options.stages << " factor " << options.stage_factor[0] << " "
      << options.stage_factor[1] << " " << options.stage_factor[2] << " cont "
      << options.run_continuous << " disc " << options.run_discrete;
  MetricsReport report("align-eval", options.seed, fnv1a_hash(opt.str()), "double", 1);

  double sum_cont = 0.0, sum_disc = 0.0;
  double sum_p95_cont = 0.0, sum_p95_disc = 0.0;
  std::size_t samples_cont = 0, samples_disc = 0;
  int wins = 0, comparable = 0;

  for (int s = 0; s < options.scenes; ++s) {
    Rng scene_rng(options.seed + 1000003ULL * static_cast<std::uint64_t>(s));
    SceneSpec spec = SceneSpec::alignment_spec(scene_rng.next_u64());
    spec.num_objects = 3 + scene_rng.uniform_index(3);
    const Scene scene = synth_scene(spec);

    PixelErrorStats cont, disc;
    if (options.run_continuous) {
      cont = alignment_one_scene(spec, options.stages, options.stage_factor,
                                 CentroidMode::Continuous, scene);
      sum_cont += cont.mean * static_cast<double>(cont.samples);
      sum_p95_cont += cont.p95;
      samples_cont += cont.samples;
    }
    if (options.run_discrete) {
      disc = alignment_one_scene(spec, options.stages, options.stage_factor,
                                 CentroidMode::Discrete, scene);
      sum_disc += disc.mean * static_cast<double>(disc.samples);
      sum_p95_disc += disc.p95;
      samples_disc += disc.samples;
    }
    if (options.run_continuous && options.run_discrete && cont.samples > 0 && disc.samples > 0) {
      ++comparable;
      if (cont.mean < disc.mean) ++wins;
    }
  }

  report.set_int("scenes", options.scenes);
  report.set_int("stages", options.stages);
  if (options.run_continuous) {
    report.set("mean_pixel_error_continuous",
               samples_cont ? sum_cont / static_cast<double>(samples_cont) : 0.0);
    report.set("p95_pixel_error_continuous",
               options.scenes ? sum_p95_cont / options.scenes : 0.0);
    report.set_int("projected_voxels_continuous", static_cast<std::int64_t>(samples_cont));
  }
  if (options.run_discrete) {
    report.set("mean_pixel_error_discrete",
               samples_disc ? sum_disc / static_cast<double>(samples_disc) : 0.0);
    report.set("p95_pixel_error_discrete",
               options.scenes ? sum_p95_disc / options.scenes : 0.0);
    report.set_int("projected_voxels_discrete", static_cast<std::int64_t>(samples_disc));
  }
  if (options.run_continuous && options.run_discrete) {
    report.set_int("scenes_compared", comparable);
    report.set_int("continuous_wins", wins);
    report.set("continuous_win_fraction",
               comparable ? static_cast<double>(wins) / comparable : 0.0);
  }
  report.check_finite();
  return report;
}

namespace {

HybridBlockConfig erf_block_config(const PipelineConfig& config, const GridSpec& grid,
                                   bool local_on, bool global_on) {
  HybridBlockConfig block = config.block;
  block.grid = grid;
  block.local_enabled = local_on;
  block.global_enabled = global_on;
  return block;
}

double coverage_fraction(const std::vector<double>& map) {
  std::size_t nonzero = 0;
  for (double v : map) {
    if (v != 0.0) ++nonzero;
  }
  return map.empty() ? 0.0 : static_cast<double>(nonzero) / static_cast<double>(map.size());
}

void emit_erf_artifacts(const std::string& prefix, const std::string& tag,
                        const SceneTokens& st, const std::vector<double>& map,
                        const GridSpec& grid) {
  // CSV: token index, x, y, z, magnitude
  std::ofstream csv(prefix + "." + tag + ".csv", std::ios::binary);
  if (!csv) throw InputError("cannot write ERF csv for " + tag);
  csv << "token,x,y,z,magnitude\n";
  csv.precision(17);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto& c = st.tokens.coords[i];
    csv << i << "," << c[0] << "," << c[1] << "," << c[2] << "," << map[i] << "\n";
  }
  // dense BEV heatmap, max-normalized
  const auto dims = grid.dims();
  const int w = static_cast<int>(dims[0]);
  const int h = static_cast<int>(dims[1]);
  std::vector<double> image(static_cast<std::size_t>(w) * h, 0.0);
  double peak = 0.0;
  for (double v : map) peak = std::max(peak, v);
  const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
  const auto cells = quantize_to_cells(st.tokens.coords, grid);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::size_t px = static_cast<std::size_t>(cells[i][1]) * w +
                           static_cast<std::size_t>(cells[i][0]);
    image[px] = std::max(image[px], map[i] * scale);
  }
  write_pgm(prefix + "." + tag + ".pgm", w, h, image);
}

}  // namespace

MetricsReport run_erf_eval(const PipelineConfig& config, const ErfOptions& options) {
  SceneSpec spec = SceneSpec::default_spec(options.scene_seed);
  spec.seed = options.scene_seed;
  spec.density = 110.0;  // enough stage-1 voxels to fill the token budget
  spec.num_objects = 4;

  SceneTokens st = make_scene_tokens(spec, config.block.channels, 1, {2, 2, 2},
                                     CentroidMode::Continuous, config.seed ^ 0xabcdef);
  if (st.tokens.size() > options.token_budget) {
    // keep the first token_budget tokens (storage order is deterministic)
    TokenSequence trimmed;
    const std::size_t c = st.tokens.channels();
    trimmed.coords.assign(st.tokens.coords.begin(),
                          st.tokens.coords.begin() + options.token_budget);
    trimmed.modality.assign(options.token_budget, Modality::Lidar);
    trimmed.features = Tensor({options.token_budget, c});
    for (std::size_t i = 0; i < options.token_budget * c; ++i) {
      trimmed.features[i] = st.tokens.features[i];
    }
    st.tokens = std::move(trimmed);
    st.in_box.resize(options.token_budget);
  }
  const std::size_t n = st.tokens.size();

  std::vector<std::size_t> box_tokens;
  for (std::size_t i = 0; i < n; ++i) {
    if (st.in_box[i]) box_tokens.push_back(i);
  }
  if (box_tokens.empty()) throw InputError("erf eval: no tokens inside ground-truth boxes");
  Rng qrng(options.scene_seed ^ 0x51c3ULL);
  std::vector<std::size_t> queries;
  for (std::size_t q = 0; q < options.queries; ++q) {
    queries.push_back(box_tokens[qrng.uniform_index(box_tokens.size())]);
  }

  MetricsReport report("erf", options.scene_seed, config.hash(), "double", 1);
  report.set_int("tokens", static_cast<std::int64_t>(n));
  report.set_int("queries", static_cast<std::int64_t>(queries.size()));

  struct Variant {
    const char* tag;
    bool local_on;
    bool global_on;
  };
  const Variant variants[] = {{"local_only", true, false},
                              {"global_only", false, true},
                              {"hybrid", true, true}};
  for (const auto& v : variants) {
    Rng prng(config.seed);
    HybridStack stack = HybridStack::make(
        erf_block_config(config, spec.grid, v.local_on, v.global_on), 1, prng);
    const auto map = erf_probe(stack, st.tokens, queries);
    report.set(std::string("coverage_") + v.tag, coverage_fraction(map));
    if (!options.out_prefix.empty()) {
      emit_erf_artifacts(options.out_prefix, v.tag, st, map, spec.grid);
    }
  }

  // height-fidelity contrast: same pipeline over discrete-mode coordinates
  {
    SceneTokens discrete = make_scene_tokens(spec, config.block.channels, 1, {2, 2, 2},
                                             CentroidMode::Discrete, config.seed ^ 0xabcdef);
    if (discrete.tokens.size() > n) {
      discrete.tokens.coords.resize(n);
      discrete.tokens.modality.resize(n);
      Tensor f({n, discrete.tokens.channels()});
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = discrete.tokens.features[i];
      discrete.tokens.features = std::move(f);
    }
    Rng prng(config.seed);
    HybridStack stack =
        HybridStack::make(erf_block_config(config, spec.grid, true, true), 1, prng);
    const auto map = erf_probe(stack, discrete.tokens, queries);
    report.set("coverage_hybrid_discrete", coverage_fraction(map));
  }

  report.check_finite();
  return report;
}

Tensor attention_baseline(const Tensor& x, Precision precision) {
  if (x.rank() != 2) throw InputError("attention_baseline expects x[N,C]");
  const std::size_t n = x.extent(0), c = x.extent(1);
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
  Tensor out({n, c}, precision);
  if (precision == Precision::Single) {
    std::vector<float> xf(x.values().begin(), x.values().end());
    std::vector<float> scores(n);
    for (std::size_t t = 0; t < n; ++t) {
      const float* xt = xf.data() + t * c;
      float peak = -1e30f;
      for (std::size_t u = 0; u < n; ++u) {
        const float* xu = xf.data() + u * c;
        float dot = 0.0f;
        for (std::size_t j = 0; j < c; ++j) dot += xt[j] * xu[j];
        scores[u] = dot * static_cast<float>(inv_sqrt_c);
        peak = std::max(peak, scores[u]);
      }
      float mass = 0.0f;
      std::vector<float> acc(c, 0.0f);
      for (std::size_t u = 0; u < n; ++u) {
        const float w = std::exp(scores[u] - peak);
        mass += w;
        const float* xu = xf.data() + u * c;
        for (std::size_t j = 0; j < c; ++j) acc[j] += w * xu[j];
      }
      for (std::size_t j = 0; j < c; ++j) out[t * c + j] = acc[j] / mass;
    }
  } else {
    std::vector<double> scores(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double* xt = x.data() + t * c;
      double peak = -1e300;
      for (std::size_t u = 0; u < n; ++u) {
        const double* xu = x.data() + u * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += xt[j] * xu[j];
        scores[u] = dot * inv_sqrt_c;
        peak = std::max(peak, scores[u]);
      }
      double mass = 0.0;
      std::vector<double> acc(c, 0.0);
      for (std::size_t u = 0; u < n; ++u) {
        const double w = std::exp(scores[u] - peak);
        mass += w;
        const double* xu = x.data() + u * c;
        for (std::size_t j = 0; j < c; ++j) acc[j] += w * xu[j];
      }
      for (std::size_t j = 0; j < c; ++j) out[t * c + j] = acc[j] / mass;
    }
  }
  out.check_finite("attention_baseline");
  return out;
}

namespace {

double median_of(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double loglog_slope(const std::vector<std::size_t>& sizes, const std::vector<double>& times) {
  // least-squares slope of log(time) against log(size)
  const std::size_t n = sizes.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(static_cast<double>(sizes[i]));
    const double ly = std::log(times[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

template <typename F>
double timed_median_ms(F&& run, int warmups, int reps) {
  for (int i = 0; i < warmups; ++i) run();
  std::vector<double> samples;
  samples.reserve(reps);
  for (int i = 0; i < reps; ++i) {
    const auto start = std::chrono::steady_clock::now();
    run();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return median_of(std::move(samples));
}

}  // namespace

FuseOutput run_fuse_pipeline(const PipelineConfig& config, const FuseOptions& options) {
  SceneSpec spec = SceneSpec::default_spec(options.scene_seed);
  spec.seed = options.scene_seed;
  const std::size_t channels = config.block.channels;
  SceneTokens st = make_scene_tokens(spec, channels, 1, {2, 2, 2}, CentroidMode::Continuous,
                                     config.seed ^ 0xfade);
  const CameraModel& cam = spec.cameras.front();

  // synthetic image tokens on a strided pixel grid
  TokenSequence image_tokens;
  Rng img_rng(config.seed ^ 0x1396);
  for (int v = options.image_token_stride / 2; v < cam.height; v += options.image_token_stride) {
    for (int u = options.image_token_stride / 2; u < cam.width; u += options.image_token_stride) {
      image_tokens.coords.push_back({static_cast<double>(u), static_cast<double>(v), 0.0});
      image_tokens.modality.push_back(Modality::Camera);
    }
  }
  image_tokens.features = Tensor({image_tokens.coords.size(), channels});
  for (double& v : image_tokens.features.values()) v = img_rng.normal(0.0, 1.0);

  const GridSpec image_grid({0.0, 0.0, 0.0},
                            {static_cast<double>(cam.width), static_cast<double>(cam.height), 1.0},
                            {1.0, 1.0, 1.0});

  // stage 1: modality aligner, one shared parameter set for both modalities
  Rng prng(config.seed);
  std::vector<HybridBlockParams> aligner_params;
  HybridBlockConfig lidar_cfg = config.block;
  lidar_cfg.grid = spec.grid;
  HybridBlockConfig camera_cfg = config.block;
  camera_cfg.grid = image_grid;
  for (std::size_t d = 0; d < config.depth_aligner; ++d) {
    aligner_params.push_back(HybridBlockParams::init(lidar_cfg, prng));
  }
  auto [lidar_aligned, camera_aligned] =
      modality_align(st.tokens, image_tokens, aligner_params, lidar_cfg, camera_cfg);

  // stage 2: image-space fusion over the merged curve order
  HybridStack image_stack = HybridStack::make(camera_cfg, config.depth_image, prng);
  const ImageFusionResult image_fused =
      fuse_image_space(lidar_aligned, camera_aligned, cam, image_stack);

  // fold fused features back onto the surviving voxels
  TokenSequence lidar_updated = lidar_aligned;
  for (std::size_t i = 0; i < image_fused.surviving_voxels.size(); ++i) {
    const std::size_t row = image_fused.surviving_voxels[i];
    for (std::size_t j = 0; j < channels; ++j) {
      lidar_updated.features[row * channels + j] = image_fused.lidar.features[i * channels + j];
    }
  }

  // compress voxels to BEV cells (count-weighted features per cell)
  struct BevAcc {
    std::vector<double> feat;
    double mass = 0.0;
  };
  std::vector<Cell3> bev_keys;
  std::vector<BevAcc> acc;
  {
    const auto cells = quantize_to_cells(lidar_updated.coords, spec.grid);
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> index_of;
    for (std::size_t i = 0; i < lidar_updated.size(); ++i) {
      const auto key = std::make_pair(cells[i][0], cells[i][1]);
      auto [it, inserted] = index_of.try_emplace(key, bev_keys.size());
      if (inserted) {
        bev_keys.push_back({key.first, key.second, 0});
        acc.push_back({std::vector<double>(channels, 0.0), 0.0});
      }
      const double w = static_cast<double>(st.voxels.counts[i]);
      for (std::size_t j = 0; j < channels; ++j) {
        acc[it->second].feat[j] += w * lidar_updated.features[i * channels + j];
      }
      acc[it->second].mass += w;
    }
  }
  TokenSequence lidar_bev;
  lidar_bev.features = Tensor({bev_keys.size(), channels});
  lidar_bev.coords.resize(bev_keys.size());
  lidar_bev.modality.assign(bev_keys.size(), Modality::Lidar);
  for (std::size_t i = 0; i < bev_keys.size(); ++i) {
    lidar_bev.coords[i] = {static_cast<double>(bev_keys[i][0]),
                           static_cast<double>(bev_keys[i][1]), 0.0};
    for (std::size_t j = 0; j < channels; ++j) {
      lidar_bev.features[i * channels + j] = acc[i].feat[j] / acc[i].mass;
    }
  }

  // stage 3: lift camera tokens to BEV with uniform depth weights, then fuse
  DepthBins bins{1.0, 22.0, 8};
  Tensor depth_weights({camera_aligned.size(), bins.count});
  for (std::size_t i = 0; i < camera_aligned.size(); ++i) {
    for (std::size_t j = 0; j < bins.count; ++j) {
      depth_weights[i * bins.count + j] = 1.0 / static_cast<double>(bins.count);
    }
  }
  const TokenSequence camera_bev =
      lift_to_bev(camera_aligned, depth_weights, bins, cam, spec.grid);

  const auto dims = spec.grid.dims();
  HybridBlockConfig bev_cfg = config.block;
  bev_cfg.grid = GridSpec({0.0, 0.0, 0.0},
                          {static_cast<double>(dims[0]), static_cast<double>(dims[1]), 1.0},
                          {1.0, 1.0, 1.0});
  HybridStack bev_stack = HybridStack::make(bev_cfg, config.depth_bev, prng);
  BevFusionResult fused = fuse_bev_space(lidar_bev, camera_bev, bev_stack);

  FuseOutput out{MetricsReport("fuse", options.scene_seed, config.hash(), "double", 1),
                 std::move(fused.fused)};
  out.report.set_int("lidar_voxels", static_cast<std::int64_t>(st.tokens.size()));
  out.report.set_int("image_tokens", static_cast<std::int64_t>(image_tokens.size()));
  out.report.set_int("voxels_in_view",
                     static_cast<std::int64_t>(image_fused.surviving_voxels.size()));
  out.report.set_int("lidar_bev_cells", static_cast<std::int64_t>(lidar_bev.size()));
  out.report.set_int("camera_bev_cells", static_cast<std::int64_t>(camera_bev.size()));
  out.report.set_int("fused_cells", static_cast<std::int64_t>(out.bev.size()));
  double norm = 0.0;
  for (double v : out.bev.features.values()) norm += v * v;
  out.report.set("fused_feature_norm", std::sqrt(norm));
  out.report.set_bool("one_output_per_lidar_cell", out.bev.size() == lidar_bev.size());
  if (out.bev.size() != lidar_bev.size()) {
    throw InvariantError("fuse: output cell set differs from the LiDAR cell set");
  }
  out.report.check_finite();
  return out;
}

MetricsReport bench_scaling(const BenchOptions& options) {
  if (options.lengths.empty()) throw InputError("bench needs at least one length");
  for (std::size_t i = 1; i < options.lengths.size(); ++i) {
    if (options.lengths[i] <= options.lengths[i - 1]) {
      throw InputError("bench lengths must be ascending");
    }
  }
  std::ostringstream opt;
  opt << "bench seed " << options.seed << " reps " << options.reps << " warmups "
      << options.warmups << " c " << options.channels << " s " << options.state_dim
      << " lengths";
  for (std::size_t len : options.lengths) opt << " " << len;
  MetricsReport report("bench", options.seed, fnv1a_hash(opt.str()),
                       precision_name(options.precision), 1);
  Rng rng(options.seed);
  SsmParams params = hippo_init(options.channels, options.state_dim, rng);

  const std::size_t n_max = options.lengths.back();
  Tensor x_full({n_max, options.channels});
  Rng xrng(options.seed ^ 0x77ULL);
  for (double& v : x_full.values()) v = xrng.normal(0.0, 1.0);

  std::vector<double> scan_ms, attn_ms;
  nlohmann::ordered_json per_size = nlohmann::ordered_json::array();
  for (std::size_t len : options.lengths) {
    Tensor x({len, options.channels});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x_full[i];
    const double scan_t = timed_median_ms(
        [&] { selective_scan_parallel(params, x, options.precision); }, options.warmups,
        options.reps);
    scan_ms.push_back(scan_t);
    nlohmann::ordered_json row;
    row["n"] = len;
    row["scan_ms"] = scan_t;
    if (options.run_attention) {
      const double attn_t =
          timed_median_ms([&] { attention_baseline(x, options.precision); },
                          options.attention_warmups, options.attention_reps);
      attn_ms.push_back(attn_t);
      row["attention_ms"] = attn_t;
    }
    per_size.push_back(std::move(row));
  }
  report.set_json("timings", std::move(per_size));

  nlohmann::ordered_json scan_ratios = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i < scan_ms.size(); ++i) scan_ratios.push_back(scan_ms[i] / scan_ms[i - 1]);
  report.set_json("scan_doubling_ratios", std::move(scan_ratios));
  if (options.run_attention) {
    nlohmann::ordered_json attn_ratios = nlohmann::ordered_json::array();
    for (std::size_t i = 1; i < attn_ms.size(); ++i) {
      attn_ratios.push_back(attn_ms[i] / attn_ms[i - 1]);
    }
    report.set_json("attention_doubling_ratios", std::move(attn_ratios));
    report.set("attention_loglog_slope", loglog_slope(options.lengths, attn_ms));
    report.set_int("attention_reps", options.attention_reps);
    report.set_int("attention_warmups", options.attention_warmups);
  }
  if (options.lengths.size() > 1) {
    report.set("scan_loglog_slope", loglog_slope(options.lengths, scan_ms));
  }
  report.set_int("reps", options.reps);
  report.set_int("warmups", options.warmups);
  report.set_int("channels", static_cast<std::int64_t>(options.channels));
  report.set_int("state_dim", static_cast<std::int64_t>(options.state_dim));
  report.check_finite();
  return report;
}

}  // namespace sfkit
