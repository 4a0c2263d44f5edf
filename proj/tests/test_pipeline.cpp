#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "voxkit/voxkit.hpp"

using namespace voxkit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "voxkit_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VOXKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

PipelineConfig synth_decoding_config(const fs::path& dir, std::uint64_t seed = 0) {
  PipelineConfig cfg;
  cfg.out_dir = dir.string();
  cfg.synth_kind = "decoding";
  cfg.synth_shape = {10, 10, 10};
  cfg.n_per_class = 40;
  cfg.snr = 5.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("synth decoding writes a consistent dataset", "[pipeline]") {
  const auto dir = fresh_dir("synth_dec");
  run_synth(synth_decoding_config(dir));
  const Volume4D data = read_nifti((dir / "data.nii").string());
  CHECK(data.shape() == std::array<int, 4>{10, 10, 10, 80});
  const auto labels = read_labels_csv((dir / "labels.csv").string());
  CHECK(labels.size() == 80);
  const Volume4D mask_vol = read_nifti((dir / "mask.nii").string());
  for (double v : mask_vol.data()) CHECK(v == 1.0);
  CHECK(fs::exists(dir / "truth_mask.nii"));

  // same seed, second directory: identical bytes
  const auto dir2 = fresh_dir("synth_dec2");
  run_synth(synth_decoding_config(dir2));
  CHECK(slurp(dir / "data.nii") == slurp(dir2 / "data.nii"));
}

TEST_CASE("decode pipeline hits high accuracy and writes bounded maps", "[pipeline]") {
  const auto synth_dir = fresh_dir("decode_in");
  run_synth(synth_decoding_config(synth_dir));

  PipelineConfig cfg;
  cfg.data_paths = {(synth_dir / "data.nii").string()};
  cfg.mask_path = (synth_dir / "mask.nii").string();
  cfg.labels_path = (synth_dir / "labels.csv").string();
  cfg.out_dir = fresh_dir("decode_out").string();
  cfg.select_k = 50;
  cfg.C = 1.0;
  const PipelineReport report = run_decode(cfg);
  CHECK(report.get("mean_accuracy") >= 0.9);

  const Volume4D weights = read_nifti((fs::path(cfg.out_dir) / "weights.nii").string());
  int nonzeros = 0;
  for (double v : weights.data()) nonzeros += v != 0.0;
  CHECK(nonzeros <= 50);
  CHECK(nonzeros > 0);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "weights.pgm"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "fscores.nii"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "fscores.pgm"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "cv_scores.csv"));

  // swapping the estimator changes nothing about the output schema
  cfg.classifier = "logreg_l2";
  cfg.out_dir = fresh_dir("decode_out_lr").string();
  const PipelineReport lr = run_decode(cfg);
  CHECK(lr.get("mean_accuracy") >= 0.9);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "weights.nii"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "cv_scores.csv"));
}

TEST_CASE("encode pipeline bounds r2 and writes receptive fields", "[pipeline]") {
  const auto synth_dir = fresh_dir("encode_in");
  PipelineConfig synth_cfg;
  synth_cfg.out_dir = synth_dir.string();
  synth_cfg.synth_kind = "encoding";
  synth_cfg.n_trials = 120;
  synth_cfg.n_voxels = 60;
  synth_cfg.noise_sigma = 0.5;
  synth_cfg.seed = 2;
  run_synth(synth_cfg);

  PipelineConfig cfg;
  cfg.data_paths = {(synth_dir / "bold.nii").string()};
  cfg.stimuli_path = (synth_dir / "stimuli.csv").string();
  cfg.out_dir = fresh_dir("encode_out").string();
  cfg.ridge_alpha = 1.0;
  cfg.encode_cv_folds = 5;
  cfg.top_voxels = 5;
  const PipelineReport report = run_encode(cfg);
  CHECK(report.get("max_r2") > 0.5);

  const auto rows = csv::read_rows((fs::path(cfg.out_dir) / "r2_scores.csv").string());
  REQUIRE(rows.size() == 61);  // header + one row per voxel
  for (std::size_t r = 1; r < rows.size(); ++r) CHECK(std::stod(rows[r][1]) <= 1.0);

  int rf_files = 0;
  std::string first_rf;
  for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("rf_voxel_", 0) == 0) {
      ++rf_files;
      if (first_rf.empty()) first_rf = entry.path().string();
    }
  }
  CHECK(rf_files == 5);
  const Matrix field = csv::read_matrix(first_rf);
  CHECK(field.rows() == 10);
  CHECK(field.cols() == 10);
}

TEST_CASE("decode-pixels emits the model x C table", "[pipeline]") {
  const auto synth_dir = fresh_dir("pixels_in");
  PipelineConfig synth_cfg;
  synth_cfg.out_dir = synth_dir.string();
  synth_cfg.synth_kind = "encoding";
  synth_cfg.n_trials = 60;
  synth_cfg.n_voxels = 30;
  synth_cfg.noise_sigma = 0.5;
  synth_cfg.seed = 3;
  run_synth(synth_cfg);

  PipelineConfig cfg;
  cfg.data_paths = {(synth_dir / "bold.nii").string()};
  cfg.stimuli_path = (synth_dir / "stimuli.csv").string();
  cfg.out_dir = fresh_dir("pixels_out").string();
  cfg.c_grid = {0.001, 0.1};
  cfg.cv_folds = 3;
  run_decode_pixels(cfg);

  const auto mean_rows = csv::read_rows((fs::path(cfg.out_dir) / "pixel_scores_mean.csv").string());
  REQUIRE(mean_rows.size() == 5);  // header + 4 models
  REQUIRE(mean_rows[0].size() == 3);  // model + 2 C columns
  const auto std_rows = csv::read_rows((fs::path(cfg.out_dir) / "pixel_scores_std.csv").string());
  REQUIRE(std_rows.size() == 5);
  for (std::size_t r = 1; r < mean_rows.size(); ++r)
    for (std::size_t c = 1; c < mean_rows[r].size(); ++c) {
      const double v = std::stod(mean_rows[r][c]);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("searchlight pipeline writes a bounded score map", "[pipeline]") {
  const auto synth_dir = fresh_dir("sl_in");
  PipelineConfig synth_cfg = synth_decoding_config(synth_dir, 4);
  synth_cfg.synth_shape = {8, 8, 8};
  synth_cfg.n_per_class = 15;
  run_synth(synth_cfg);

  PipelineConfig cfg;
  cfg.data_paths = {(synth_dir / "data.nii").string()};
  cfg.mask_path = (synth_dir / "mask.nii").string();
  cfg.labels_path = (synth_dir / "labels.csv").string();
  cfg.out_dir = fresh_dir("sl_out").string();
  cfg.radius_mm = 1.5;
  cfg.cv_folds = 5;
  const PipelineReport report = run_searchlight(cfg);
  CHECK(report.get("min_score") >= 0.0);
  CHECK(report.get("max_score") <= 1.0);
  CHECK(report.get("n_centers") == 512.0);
  const Volume4D map = read_nifti((fs::path(cfg.out_dir) / "searchlight.nii").string());
  for (double v : map.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(fs::exists(fs::path(cfg.out_dir) / "searchlight.pgm"));
}

TEST_CASE("ica pipeline writes one map per component", "[pipeline]") {
  const auto synth_dir = fresh_dir("ica_in");
  PipelineConfig synth_cfg;
  synth_cfg.out_dir = synth_dir.string();
  synth_cfg.synth_kind = "rest";
  synth_cfg.synth_shape = {10, 10, 10};
  synth_cfg.n_subjects = 2;
  synth_cfg.n_timepoints = 60;
  synth_cfg.n_networks = 4;
  synth_cfg.seed = 5;
  run_synth(synth_cfg);

  PipelineConfig cfg;
  cfg.data_paths = {(synth_dir / "subject_00.nii").string(),
                    (synth_dir / "subject_01.nii").string()};
  cfg.mask_path = (synth_dir / "mask.nii").string();
  cfg.out_dir = fresh_dir("ica_out").string();
  cfg.n_components = 10;
  run_ica(cfg);
  for (int c = 0; c < 10; ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "component_%02d.nii", c);
    CHECK(fs::exists(fs::path(cfg.out_dir) / name));
  }
  CHECK(fs::exists(fs::path(cfg.out_dir) / "component_00.pgm"));
}

TEST_CASE("cluster pipeline labels every masked voxel", "[pipeline]") {
  const auto synth_dir = fresh_dir("cluster_in");
  PipelineConfig synth_cfg;
  synth_cfg.out_dir = synth_dir.string();
  synth_cfg.synth_kind = "rest";
  synth_cfg.synth_shape = {8, 8, 8};
  synth_cfg.n_subjects = 1;
  synth_cfg.n_timepoints = 40;
  synth_cfg.n_networks = 2;
  synth_cfg.seed = 6;
  run_synth(synth_cfg);

  for (const std::string method : {"ward", "kmeans"}) {
    PipelineConfig cfg;
    cfg.data_paths = {(synth_dir / "subject_00.nii").string()};
    cfg.mask_path = (synth_dir / "mask.nii").string();
    cfg.out_dir = fresh_dir("cluster_out_" + method).string();
    cfg.cluster_method = method;
    cfg.n_clusters = 6;
    const PipelineReport report = run_cluster(cfg);
    CHECK(report.get("n_clusters") == 6.0);
    CHECK(report.get("n_regions") >= 6.0);

    const Volume4D labels = read_nifti((fs::path(cfg.out_dir) / "labels.nii").string());
    std::set<int> seen;
    for (double v : labels.data()) {
      CHECK(v >= 1.0);  // full mask: every voxel labeled, ids stored as id + 1
      seen.insert(static_cast<int>(v));
    }
    CHECK(seen.size() == 6);
    const auto sizes = csv::read_rows((fs::path(cfg.out_dir) / "cluster_sizes.csv").string());
    CHECK(sizes.size() == 7);  // header + 6 clusters
    CHECK(fs::exists(fs::path(cfg.out_dir) / "labels.pgm"));
    CHECK(fs::exists(fs::path(cfg.out_dir) / "regions.nii"));
    CHECK(fs::exists(fs::path(cfg.out_dir) / "summary.csv"));
  }
}

TEST_CASE("render produces deterministic bytes and honors zero maps", "[pipeline]") {
  const auto dir = fresh_dir("render");
  Volume4D bg({6, 5, 4, 1}, Affine4::identity());
  Rng rng(7);
  for (auto& v : bg.data()) v = rng.uniform01() * 5000.0 + 3000.0;

  // the bright-background-as-activation demo: threshold a copy, overlay it
  Volume4D act = bg;
  for (auto& v : act.data())
    if (v < 6000.0) v = 0.0;

  const auto zero_path = dir / "zero.pgm";
  render_slice(Volume4D({6, 5, 4, 1}, Affine4::identity()), bg, 2, 2, zero_path.string());
  // zero map: pure min-max scaled background
  const auto bytes = slurp(zero_path);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == std::string("P5\n6 5\n255\n"));

  const auto overlay_path = dir / "overlay.pgm";
  render_slice(act, bg, 2, 2, overlay_path.string());
  const auto overlay_bytes = slurp(overlay_path);
  CHECK(overlay_bytes != bytes);

  const auto again_path = dir / "overlay2.pgm";
  render_slice(act, bg, 2, 2, again_path.string());
  CHECK(slurp(again_path) == overlay_bytes);

  CHECK_THROWS_AS(render_slice(act, bg, 2, 99, (dir / "oob.pgm").string()), Error);
  CHECK_THROWS_AS(render_slice(act, bg, 5, 0, (dir / "axis.pgm").string()), Error);
}

TEST_CASE("cli end to end: synth then decode", "[pipeline]") {
  const auto dir = fresh_dir("cli_synth");
  REQUIRE(run_cli("synth --kind decoding --shape 8,8,8 --n-per-class 12 --snr 5 --seed 1 --out " +
                  dir.string()) == 0);
  const auto out = fresh_dir("cli_decode");
  REQUIRE(run_cli("decode --data " + (dir / "data.nii").string() + " --mask " +
                  (dir / "mask.nii").string() + " --labels " + (dir / "labels.csv").string() +
                  " --k 30 --cv 4 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "weights.nii"));
}

TEST_CASE("cli exit codes follow the declared mapping", "[pipeline]") {
  // config error: missing input file
  CHECK(run_cli("decode --data /nonexistent.nii --labels /nonexistent.csv --out /tmp/vk_x") == 2);
  // config error: required flag absent
  CHECK(run_cli("searchlight --data /nonexistent.nii --out /tmp/vk_x") == 2);
  // data error: file exists but is not a NIfTI
  const auto dir = fresh_dir("cli_bad");
  std::ofstream bad(dir / "bad.nii", std::ios::binary);
  bad << "this is not a nifti file";
  bad.close();
  const auto labels = dir / "labels.csv";
  std::ofstream lab(labels);
  lab << "index,label\r\n0,1\r\n";
  lab.close();
  CHECK(run_cli("decode --data " + (dir / "bad.nii").string() + " --labels " + labels.string() +
                " --out " + dir.string()) == 3);
}

TEST_CASE("cli config file fills unset flags and loses to the command line", "[pipeline]") {
  const auto dir = fresh_dir("cli_cfg");
  std::ofstream cfg(dir / "run.cfg");
  cfg << "# synth settings\n";
  cfg << "kind = decoding\n";
  cfg << "shape = 8,8,8\n";
  cfg << "n-per-class = 10\n";
  cfg << "snr = 2.0\n";
  cfg << "seed = 9\n";
  cfg.close();
  REQUIRE(run_cli("synth --config " + (dir / "run.cfg").string() + " --out " + dir.string()) == 0);
  const Volume4D data = read_nifti((dir / "data.nii").string());
  CHECK(data.shape() == std::array<int, 4>{8, 8, 8, 20});

  // command line overrides the file
  const auto dir2 = fresh_dir("cli_cfg2");
  REQUIRE(run_cli("synth --config " + (dir / "run.cfg").string() + " --n-per-class 15 --out " +
                  dir2.string()) == 0);
  const Volume4D data2 = read_nifti((dir2 / "data.nii").string());
  CHECK(data2.nt() == 30);
}
