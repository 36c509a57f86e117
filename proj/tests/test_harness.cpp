#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sfkit/evals.hpp"
#include "sfkit/selftest.hpp"

using namespace sfkit;

TEST_CASE("synth_scene: zero objects leaves a ground-plane-only cloud and empty masks") {
  SceneSpec spec = SceneSpec::default_spec(3);
  spec.num_objects = 0;
  const Scene scene = synth_scene(spec);
  CHECK(scene.boxes.empty());
  CHECK(scene.cloud.size() > 0);
  for (int label : scene.point_object) CHECK(label == -1);
  std::size_t lit = 0;
  for (auto v : scene.masks[0].mask) lit += v;
  CHECK(lit == 0);
}

TEST_CASE("synth_scene is bit-identical for equal seeds") {
  SceneSpec spec = SceneSpec::default_spec(11);
  const Scene a = synth_scene(spec);
  const Scene b = synth_scene(spec);
  REQUIRE(a.cloud.size() == b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    CHECK(a.cloud.points[i] == b.cloud.points[i]);
  }
  CHECK(a.masks[0].mask == b.masks[0].mask);
}

TEST_CASE("synth_scene: mask centroid matches the projected box center to a pixel") {
  SceneSpec spec = SceneSpec::default_spec(4);
  spec.num_objects = 1;
  spec.object_extent = {1.0, 1.0, 1.0};
  const Scene scene = synth_scene(spec);
  REQUIRE(scene.boxes.size() == 1);
  const auto& mask = scene.masks[0];
  double su = 0.0, sv = 0.0, count = 0.0;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (mask.at(u, v)) {
        su += u + 0.5;
        sv += v + 0.5;
        count += 1.0;
      }
    }
  }
  if (count > 0.0) {
    const auto hits = project_to_image({scene.boxes[0].center}, spec.cameras[0]);
    REQUIRE(hits.size() == 1);
    // a cube face seen at an angle skews the visible-pixel centroid; a
    // couple of pixels of slack covers perspective foreshortening
    CHECK(std::abs(su / count - hits[0].u) < 6.0);
    CHECK(std::abs(sv / count - hits[0].v) < 6.0);
  }
}

TEST_CASE("pipeline config: parse, canonical form and hash stability") {
  const std::string text =
      "window 4\nparadigm zorder\norder 5\nbidirectional 0\nxy_fusion 1\nchannels 8\n"
      "state_dim 4\npos_frequencies 3\ndepth_aligner 1\ndepth_image 2\ndepth_bev 1\nseed 99\n";
  const PipelineConfig cfg = PipelineConfig::parse_string(text);
  CHECK(cfg.block.window == 4);
  CHECK(cfg.block.paradigm == CurveParadigm::ZOrder);
  CHECK(cfg.block.curve_bits == 5);
  CHECK_FALSE(cfg.block.bidirectional);
  CHECK(cfg.block.channels == 8);
  CHECK(cfg.depth_image == 2);
  CHECK(cfg.seed == 99);
  const PipelineConfig round = PipelineConfig::parse_string(cfg.canonical());
  CHECK(round.hash() == cfg.hash());
  CHECK_THROWS_AS(PipelineConfig::parse_string("nonsense 1\n"), InputError);
}

TEST_CASE("alignment eval: stage 0 gives identical modes; merging favors continuous") {
  AlignmentOptions options;
  options.seed = 3;
  options.scenes = 4;
  options.stages = 0;
  const MetricsReport same = run_alignment_eval(options);
  CHECK(same.get("mean_pixel_error_continuous") ==
        doctest::Approx(same.get("mean_pixel_error_discrete")).epsilon(1e-12));

  options.stages = 2;
  const MetricsReport merged = run_alignment_eval(options);
  CHECK(merged.get("mean_pixel_error_continuous") < merged.get("mean_pixel_error_discrete"));
}

TEST_CASE("scene tokens: mode toggle changes centroids only, never the voxel count") {
  SceneSpec spec = SceneSpec::default_spec(21);
  const auto cont = make_scene_tokens(spec, 4, 2, {1, 1, 2}, CentroidMode::Continuous, 1);
  const auto disc = make_scene_tokens(spec, 4, 2, {1, 1, 2}, CentroidMode::Discrete, 1);
  CHECK(cont.voxels.size() == disc.voxels.size());
  CHECK(cont.voxels.discrete_coords == disc.voxels.discrete_coords);
  bool any_centroid_differs = false;
  for (std::size_t i = 0; i < cont.voxels.size(); ++i) {
    if (cont.voxels.continuous_centroids[i] != disc.voxels.continuous_centroids[i]) {
      any_centroid_differs = true;
    }
  }
  CHECK(any_centroid_differs);
}

TEST_CASE("bench report carries provenance and sane ratios on tiny sizes") {
  BenchOptions options;
  options.lengths = {256, 512};
  options.reps = 3;
  options.warmups = 1;
  options.attention_reps = 1;
  options.attention_warmups = 0;
  const MetricsReport report = bench_scaling(options);
  const auto& doc = report.json();
  CHECK(doc["provenance"]["precision"] == "single");
  CHECK(doc["metrics"]["timings"].size() == 2);
  CHECK(doc["metrics"]["scan_doubling_ratios"].size() == 1);
  CHECK(doc["metrics"].contains("attention_doubling_ratios"));
  CHECK_THROWS_AS(bench_scaling(BenchOptions{.lengths = {512, 256}}), InputError);
}

TEST_CASE("fuse pipeline: one output feature per LiDAR-occupied BEV cell") {
  PipelineConfig config;
  config.block.channels = 4;
  config.block.state_dim = 3;
  FuseOptions options;
  options.scene_seed = 9;
  const auto result = run_fuse_pipeline(config, options);
  CHECK(result.report.json()["metrics"]["one_output_per_lidar_cell"].get<bool>());
  CHECK(result.bev.size() ==
        static_cast<std::size_t>(
            result.report.json()["metrics"]["lidar_bev_cells"].get<std::int64_t>()));
}

TEST_CASE("erf eval: coverage ordering across pipeline variants") {
  PipelineConfig config;
  config.block.channels = 4;
  config.block.state_dim = 3;
  ErfOptions options;
  options.scene_seed = 5;
  options.queries = 2;
  options.token_budget = 96;
  const MetricsReport report = run_erf_eval(config, options);
  const double local_cov = report.get("coverage_local_only");
  const double global_cov = report.get("coverage_global_only");
  const double hybrid_cov = report.get("coverage_hybrid");
  CHECK(local_cov < global_cov);
  CHECK(hybrid_cov >= global_cov);
  CHECK(global_cov >= 0.99);
}

TEST_CASE("selftest passes and reports every check") {
  const MetricsReport report = run_selftest(7);
  const auto& checks = report.json()["metrics"]["checks"];
  for (const auto& [name, ok] : checks.items()) {
    INFO("selftest check: " << name);
    CHECK(ok.get<bool>());
  }
  CHECK(report.json()["metrics"]["all_pass"].get<bool>());
}

TEST_CASE("metrics report: finite enforcement and stable key order") {
  MetricsReport report("unit", 1, 2, "double", 1);
  report.set("alpha", 1.0);
  report.set_int("beta", 2);
  CHECK_THROWS_AS(report.set("bad", std::nan("")), InvariantError);
  const std::string a = report.to_string();
  const std::string b = report.to_string();
  CHECK(a == b);
  CHECK(a.find("\"schema\": 1") != std::string::npos);
}

TEST_CASE("pgm writer emits a parseable P5 header") {
  write_pgm("test_map.pgm", 4, 2, std::vector<double>{0, 0.5, 1, 0.25, 0, 0, 1, 1});
  std::ifstream is("test_map.pgm", std::ios::binary);
  std::string magic;
  int w, h, maxval;
  is >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 4);
  CHECK(h == 2);
  CHECK(maxval == 255);
  std::remove("test_map.pgm");
}
