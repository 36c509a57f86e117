#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sfkit/curves.hpp"
#include "sfkit/evals.hpp"
#include "sfkit/parallel.hpp"
#include "sfkit/selftest.hpp"
#include "sfkit/serialize.hpp"

namespace {

void emit(const sfkit::MetricsReport& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.to_string();
  } else {
    report.save(out_path);
  }
}

void emit_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw sfkit::InputError("cannot open '" + out_path + "' for writing");
    os << text;
  }
}

sfkit::PipelineConfig config_from(const std::string& path) {
  return path.empty() ? sfkit::PipelineConfig{} : sfkit::PipelineConfig::parse_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sfkit: selective-scan sensor fusion toolkit"};
  app.require_subcommand(1);
  int workers = sfkit::env_workers();
  app.add_option("--workers", workers, "worker count override (or SFKIT_WORKERS)");

  // voxelize
  auto* cmd_vox = app.add_subcommand("voxelize", "voxelize a point cloud or synthetic scene");
  std::string vox_in, vox_out, vox_dump;
  std::uint64_t vox_seed = 1;
  int vox_stages = 2;
  std::string vox_mode = "continuous";
  cmd_vox->add_option("--in", vox_in, "SFPC point cloud file (omit to synthesize a scene)");
  cmd_vox->add_option("--scene-seed", vox_seed, "seed for the synthetic scene");
  cmd_vox->add_option("--stages", vox_stages, "downsampling stages")->check(CLI::Range(0, 8));
  cmd_vox->add_option("--mode", vox_mode, "centroid mode: continuous|discrete");
  cmd_vox->add_option("--dump-centroids", vox_dump, "write final centroids as an SFKT tensor");
  cmd_vox->add_option("--out", vox_out, "write the JSON report here instead of stdout");

  // serialize
  auto* cmd_ser = app.add_subcommand("serialize", "dump a space-filling curve as CSV");
  std::string ser_paradigm = "hilbert", ser_out;
  int ser_order = 1;
  cmd_ser->add_option("--paradigm", ser_paradigm, "hilbert|zorder|coord");
  cmd_ser->add_option("--order", ser_order, "bits per axis (cube side 2^b)")
      ->check(CLI::Range(1, 7));
  cmd_ser->add_option("--out", ser_out, "CSV path (default stdout)");

  // scan
  auto* cmd_scan = app.add_subcommand("scan", "run a selective scan over a tensor file");
  std::string scan_in, scan_out, scan_report, scan_precision = "double";
  std::uint64_t scan_seed = 7;
  std::size_t scan_state = 16;
  bool scan_parallel = false, scan_bidir = false;
  cmd_scan->add_option("--in", scan_in, "input SFKT tensor [N x C]")->required();
  cmd_scan->add_option("--out", scan_out, "output tensor path");
  cmd_scan->add_option("--report", scan_report, "JSON report path (default stdout)");
  cmd_scan->add_option("--seed", scan_seed, "parameter seed");
  cmd_scan->add_option("--state", scan_state, "state dimension S");
  cmd_scan->add_flag("--parallel", scan_parallel, "use the blocked associative scan");
  cmd_scan->add_flag("--bidirectional", scan_bidir, "bidirectional scan, mean merge");
  cmd_scan->add_option("--precision", scan_precision, "single|double");

  // align-eval
  auto* cmd_align = app.add_subcommand("align-eval", "height-fidelity alignment-error eval");
  std::string align_mode = "both", align_out;
  std::uint64_t align_seed = 3;
  int align_scenes = 100, align_stages = 2;
  cmd_align->add_option("--mode", align_mode, "continuous|discrete|both");
  cmd_align->add_option("--scenes", align_scenes, "scene count")->check(CLI::PositiveNumber);
  cmd_align->add_option("--stages", align_stages, "z-merging stages")->check(CLI::Range(0, 8));
  cmd_align->add_option("--seed", align_seed, "base seed");
  cmd_align->add_option("--out", align_out, "JSON report path (default stdout)");

  // erf
  auto* cmd_erf = app.add_subcommand("erf", "effective receptive field probe");
  std::string erf_config, erf_prefix, erf_out;
  std::uint64_t erf_seed = 5;
  std::size_t erf_queries = 8, erf_tokens = 512;
  cmd_erf->add_option("--config", erf_config, "pipeline config file");
  cmd_erf->add_option("--scene-seed", erf_seed, "scene seed");
  cmd_erf->add_option("--queries", erf_queries, "query token count")->check(CLI::PositiveNumber);
  cmd_erf->add_option("--tokens", erf_tokens, "token budget")->check(CLI::PositiveNumber);
  cmd_erf->add_option("--out-prefix", erf_prefix, "emit CSV + PGM heatmaps with this prefix");
  cmd_erf->add_option("--out", erf_out, "JSON report path (default stdout)");

  // bench
  auto* cmd_bench = app.add_subcommand("bench", "scan vs quadratic attention scaling bench");
  std::vector<std::size_t> bench_lengths{4096, 8192, 16384, 32768};
  int bench_reps = 20, bench_warmups = 5, bench_attn_reps = 3;
  bool bench_no_attention = false;
  std::string bench_precision = "single", bench_out;
  cmd_bench->add_option("--lengths", bench_lengths, "ascending sequence lengths");
  cmd_bench->add_option("--reps", bench_reps, "timed repetitions")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--warmups", bench_warmups, "warmup runs");
  cmd_bench->add_option("--attention-reps", bench_attn_reps, "repetitions for the baseline");
  cmd_bench->add_flag("--no-attention", bench_no_attention, "skip the quadratic baseline");
  cmd_bench->add_option("--precision", bench_precision, "single|double");
  cmd_bench->add_option("--out", bench_out, "JSON report path (default stdout)");

  // fuse
  auto* cmd_fuse = app.add_subcommand("fuse", "full fusion pipeline on a synthetic scene");
  std::string fuse_config, fuse_out, fuse_features;
  std::uint64_t fuse_seed = 9;
  cmd_fuse->add_option("--config", fuse_config, "pipeline config file");
  cmd_fuse->add_option("--scene-seed", fuse_seed, "scene seed");
  cmd_fuse->add_option("--dump-features", fuse_features, "write fused BEV features (SFKT)");
  cmd_fuse->add_option("--out", fuse_out, "JSON report path (default stdout)");

  // selftest
  auto* cmd_self = app.add_subcommand("selftest", "run the built-in invariant suite");
  std::uint64_t self_seed = 7;
  std::string self_out;
  cmd_self->add_option("--seed", self_seed, "suite seed");
  cmd_self->add_option("--out", self_out, "JSON report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << std::endl;
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }

  try {
    if (*cmd_vox) {
      sfkit::PointCloud cloud;
      sfkit::GridSpec grid;
      std::uint64_t seed = vox_seed;
      if (!vox_in.empty()) {
        cloud = sfkit::load_point_cloud(vox_in);
        grid = sfkit::SceneSpec::default_spec(vox_seed).grid;
        seed = sfkit::hash_file(vox_in);
      } else {
        sfkit::SceneSpec spec = sfkit::SceneSpec::default_spec(vox_seed);
        spec.seed = vox_seed;
        cloud = sfkit::synth_scene(spec).cloud;
        grid = spec.grid;
      }
      const auto mode = vox_mode == "discrete" ? sfkit::CentroidMode::Discrete
                                               : sfkit::CentroidMode::Continuous;
      if (vox_mode != "discrete" && vox_mode != "continuous") {
        throw sfkit::InputError("--mode must be continuous or discrete");
      }
      const std::string vox_opts = "voxelize seed " + std::to_string(seed) + " stages " +
                                   std::to_string(vox_stages) + " mode " + vox_mode;
      sfkit::MetricsReport report("voxelize", seed, sfkit::fnv1a_hash(vox_opts), "double",
                                  workers);
      auto vs = sfkit::voxelize(cloud, grid);
      report.set_int("points", static_cast<std::int64_t>(cloud.size()));
      report.set_int("stage0_voxels", static_cast<std::int64_t>(vs.size()));
      const auto before = vs.global_centroid();
      for (int s = 0; s < vox_stages; ++s) {
        vs = sfkit::downsample_voxels(vs, {2, 2, 2}, mode);
        report.set_int("stage" + std::to_string(s + 1) + "_voxels",
                       static_cast<std::int64_t>(vs.size()));
      }
      const auto after = vs.global_centroid();
      double drift = 0.0;
      for (int a = 0; a < 3; ++a) drift = std::max(drift, std::abs(after[a] - before[a]));
      report.set("global_centroid_drift", drift);
      report.set_string("mode", vox_mode);
      if (!vox_dump.empty()) {
        sfkit::Tensor c({vs.size(), 3});
        for (std::size_t i = 0; i < vs.size(); ++i) {
          for (int a = 0; a < 3; ++a) c[i * 3 + a] = vs.continuous_centroids[i][a];
        }
        sfkit::save_tensor(vox_dump, c);
      }
      report.check_finite();
      emit(report, vox_out);
    } else if (*cmd_ser) {
      const sfkit::CurveOrder order(sfkit::paradigm_from_name(ser_paradigm), ser_order);
      std::ostringstream csv;
      csv << "x,y,z,index\n";
      const std::uint64_t count = std::uint64_t{1} << (3 * ser_order);
      for (std::uint64_t i = 0; i < count; ++i) {
        const auto cell = sfkit::curve_inverse(order, i);
        csv << cell[0] << "," << cell[1] << "," << cell[2] << "," << i << "\n";
      }
      emit_text(csv.str(), ser_out);
    } else if (*cmd_scan) {
      const sfkit::Tensor x = sfkit::load_tensor(scan_in);
      if (x.rank() != 2) throw sfkit::InputError("scan input tensor must be [N x C]");
      const auto precision = sfkit::precision_from_name(scan_precision);
      sfkit::Rng rng(scan_seed);
      const auto params = sfkit::hippo_init(x.extent(1), scan_state, rng);
      sfkit::Tensor y;
      if (scan_bidir) {
        sfkit::Rng rng_b(scan_seed ^ 0xb1d1ULL);
        const auto params_b = sfkit::hippo_init(x.extent(1), scan_state, rng_b);
        y = sfkit::bidirectional_scan(params, params_b, x);
      } else if (scan_parallel) {
        y = sfkit::selective_scan_parallel(params, x, precision, 256, workers);
      } else {
        y = sfkit::selective_scan_seq(params, x, nullptr, precision);
      }
      y.set_precision(precision);
      if (!scan_out.empty()) sfkit::save_tensor(scan_out, y);
      const std::string scan_opts = "scan seed " + std::to_string(scan_seed) + " state " +
                                    std::to_string(scan_state) + " parallel " +
                                    std::to_string(scan_parallel) + " bidir " +
                                    std::to_string(scan_bidir);
      sfkit::MetricsReport report("scan", scan_seed, sfkit::fnv1a_hash(scan_opts),
                                  scan_precision, workers);
      report.set_int("tokens", static_cast<std::int64_t>(x.extent(0)));
      report.set_int("channels", static_cast<std::int64_t>(x.extent(1)));
      report.set_int("state_dim", static_cast<std::int64_t>(scan_state));
      double norm = 0.0;
      for (double v : y.values()) norm += v * v;
      report.set("output_l2", std::sqrt(norm));
      report.check_finite();
      emit(report, scan_report);
    } else if (*cmd_align) {
      sfkit::AlignmentOptions options;
      options.seed = align_seed;
      options.scenes = align_scenes;
      options.stages = align_stages;
      if (align_mode == "continuous") options.run_discrete = false;
      else if (align_mode == "discrete") options.run_continuous = false;
      else if (align_mode != "both") {
        throw sfkit::InputError("--mode must be continuous, discrete or both");
      }
      emit(sfkit::run_alignment_eval(options), align_out);
    } else if (*cmd_erf) {
      sfkit::ErfOptions options;
      options.scene_seed = erf_seed;
      options.queries = erf_queries;
      options.token_budget = erf_tokens;
      options.out_prefix = erf_prefix;
      emit(sfkit::run_erf_eval(config_from(erf_config), options), erf_out);
    } else if (*cmd_bench) {
      sfkit::BenchOptions options;
      options.lengths = bench_lengths;
      options.reps = bench_reps;
      options.warmups = bench_warmups;
      options.attention_reps = bench_attn_reps;
      options.run_attention = !bench_no_attention;
      options.precision = sfkit::precision_from_name(bench_precision);
      emit(sfkit::bench_scaling(options), bench_out);
    } else if (*cmd_fuse) {
      sfkit::FuseOptions options;
      options.scene_seed = fuse_seed;
      auto result = sfkit::run_fuse_pipeline(config_from(fuse_config), options);
      if (!fuse_features.empty()) sfkit::save_tensor(fuse_features, result.bev.features);
      emit(result.report, fuse_out);
    } else if (*cmd_self) {
      const auto report = sfkit::run_selftest(self_seed);
      emit(report, self_out);
      if (!report.json()["metrics"]["all_pass"].get<bool>()) return 2;
    }
  } catch (const sfkit::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << std::endl;
    return 2;
  } catch (const sfkit::InputError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
