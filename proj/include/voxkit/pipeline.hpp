#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "voxkit/clustering.hpp"
#include "voxkit/common.hpp"
#include "voxkit/decomposition.hpp"
#include "voxkit/feature_selection.hpp"
#include "voxkit/linear_model.hpp"
#include "voxkit/model_selection.hpp"
#include "voxkit/nifti.hpp"
#include "voxkit/render.hpp"
#include "voxkit/searchlight.hpp"
#include "voxkit/signal.hpp"
#include "voxkit/synth.hpp"
#include "voxkit/volume.hpp"

namespace voxkit {

// ---- CSV (RFC 4180: CRLF line endings; our fields never need quoting) ----

namespace csv {

inline void write(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoFailure, "cannot open " + path + " for writing");
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << "\r\n";
  };
  if (!header.empty()) emit(header);
  for (const auto& row : rows) emit(row);
  out.flush();
  require(out.good(), ErrorKind::IoFailure, "write failed for " + path);
}

inline std::string format(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoFailure, "cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

// numeric matrix, no header
inline Matrix read_matrix(const std::string& path) {
  const auto rows = read_rows(path);
  require(!rows.empty(), ErrorKind::IoFailure, path + " is empty");
  const std::size_t cols = rows.front().size();
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == cols, ErrorKind::LengthMismatch,
            path + ": ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      try {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::stod(rows[r][c]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::IoFailure, path + ": bad number '" + rows[r][c] + "'");
      }
    }
  }
  return out;
}

inline void write_matrix(const std::string& path, const Matrix& m) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(format(m(r, c)));
    rows.push_back(std::move(row));
  }
  write(path, {}, rows);
}

}  // namespace csv

// labels CSV: header `index,label`, one row per time frame
inline std::vector<int> read_labels_csv(const std::string& path) {
  const auto rows = csv::read_rows(path);
  require(rows.size() >= 2, ErrorKind::IoFailure, path + " has no label rows");
  require(rows.front().size() == 2 && rows.front()[0] == "index" && rows.front()[1] == "label",
          ErrorKind::IoFailure, path + ": expected header index,label");
  std::vector<std::pair<int, int>> entries;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    require(rows[r].size() == 2, ErrorKind::IoFailure, path + ": ragged label row");
    try {
      entries.emplace_back(std::stoi(rows[r][0]), std::stoi(rows[r][1]));
    } catch (const std::exception&) {
      throw Error(ErrorKind::IoFailure, path + ": bad label row " + std::to_string(r));
    }
  }
  std::sort(entries.begin(), entries.end());
  std::vector<int> labels;
  labels.reserve(entries.size());
  for (const auto& [idx, lab] : entries) labels.push_back(lab);
  return labels;
}

inline void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    rows.push_back({std::to_string(i), std::to_string(labels[i])});
  csv::write(path, {"index", "label"}, rows);
}

// ---- pipeline configuration ----

struct PipelineConfig {
  std::vector<std::string> data_paths;
  std::string mask_path;
  std::string labels_path;
  std::string stimuli_path;
  std::string background_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;

  CleanConfig clean;

  // decode / searchlight
  std::string classifier = "svc_l2";  // svc_l2 | svc_l1 | logreg_l1 | logreg_l2
  double C = 1.0;
  int select_k = 500;
  int cv_folds = 5;
  bool cv_shuffle = false;

  // encode
  double ridge_alpha = 100.0;
  int encode_cv_folds = 10;
  int top_voxels = 50;
  int lars_max_iter = 10;
  int lars_cv_folds = 5;

  // decode-pixels
  std::vector<double> c_grid = {0.0005, 0.001, 0.005, 0.01, 0.05, 0.1};
  int pixels_k = 500;

  // searchlight
  double radius_mm = 0.0;

  // ica
  int n_components = 10;
  int subject_dim = 0;  // 0 = min(2 * n_components, nt)

  // cluster
  std::string cluster_method = "ward";
  int n_clusters = 10;
  bool presmooth = false;

  // render
  int axis = 2;
  int slice_index = -1;  // -1 = middle

  // synth
  std::string synth_kind = "decoding";
  std::array<int, 3> synth_shape = {12, 12, 12};
  int n_per_class = 40;
  double snr = 5.0;
  int n_trials = 200;
  int n_voxels = 100;
  double noise_sigma = 0.5;
  int n_subjects = 2;
  int n_timepoints = 100;
  int n_networks = 3;
};

// headline numbers a run produced, for reports and tests
struct PipelineReport {
  std::vector<std::pair<std::string, double>> metrics;

  void add(const std::string& name, double value) { metrics.emplace_back(name, value); }
  double get(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    throw Error(ErrorKind::InvalidArgument, "no metric named " + name);
  }
};

namespace detail {

inline ModelKind classifier_kind(const std::string& name) {
  if (name == "svc_l2") return ModelKind::SvcHingeL2;
  if (name == "svc_l1") return ModelKind::SvcSqHingeL1;
  if (name == "logreg_l1") return ModelKind::LogRegL1;
  if (name == "logreg_l2") return ModelKind::LogRegL2;
  throw Error(ErrorKind::InvalidArgument, "unknown classifier " + name);
}

inline std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline Volume4D load_volume(const std::string& path) {
  require(!path.empty(), ErrorKind::InvalidArgument, "missing input path");
  require(std::filesystem::exists(path), ErrorKind::InvalidArgument, path + " does not exist");
  return read_nifti(path);
}

inline BrainMask load_mask(const std::string& path) {
  const Volume4D vol = load_volume(path);
  require(vol.nt() == 1, ErrorKind::BadShape, "mask volume must have a single frame");
  std::vector<std::uint8_t> flags(vol.voxel_count());
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = vol.data()[i] != 0.0 ? 1 : 0;
  return BrainMask({vol.nx(), vol.ny(), vol.nz()}, vol.affine(), std::move(flags));
}

inline BrainMask mask_for(const PipelineConfig& cfg, const Volume4D& data) {
  if (!cfg.mask_path.empty()) return load_mask(cfg.mask_path);
  return compute_mask(data.mean_over_time());
}

inline Volume4D mask_to_volume(const BrainMask& mask) {
  Volume4D out({mask.shape()[0], mask.shape()[1], mask.shape()[2], 1}, mask.affine());
  for (std::size_t i = 0; i < mask.flags().size(); ++i)
    out.data()[i] = mask.flags()[i] ? 1.0 : 0.0;
  return out;
}

inline int middle_or(const Volume4D& vol, int axis, int index) {
  return index >= 0 ? index : vol.shape()[static_cast<std::size_t>(axis)] / 2;
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector labels_to_vector(const std::vector<int>& labels) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  return y;
}

inline void write_fold_scores_csv(const std::string& path, const std::vector<double>& scores) {
  std::vector<std::vector<std::string>> rows;
  double mean = 0.0;
  for (std::size_t f = 0; f < scores.size(); ++f) {
    rows.push_back({std::to_string(f), csv::format(scores[f])});
    mean += scores[f];
  }
  mean /= static_cast<double>(scores.size());
  double sd = 0.0;
  if (scores.size() > 1) {
    for (double s : scores) sd += (s - mean) * (s - mean);
    sd = std::sqrt(sd / (static_cast<double>(scores.size()) - 1.0));
  }
  rows.push_back({"mean", csv::format(mean)});
  rows.push_back({"std", csv::format(sd)});
  csv::write(path, {"fold", "accuracy"}, rows);
}

}  // namespace detail

// ---- synth ----

inline PipelineReport run_synth(const PipelineConfig& cfg) {
  PipelineReport report;
  if (cfg.synth_kind == "decoding") {
    const DecodingSet set = make_decoding(cfg.synth_shape, cfg.n_per_class, cfg.snr, cfg.seed);
    write_nifti(set.volume, detail::out_path(cfg, "data.nii"));
    const BrainMask full = BrainMask::full(cfg.synth_shape, set.volume.affine());
    write_nifti(detail::mask_to_volume(full), detail::out_path(cfg, "mask.nii"));
    write_nifti(detail::mask_to_volume(set.truth_support), detail::out_path(cfg, "truth_mask.nii"));
    write_labels_csv(detail::out_path(cfg, "labels.csv"), set.labels);
    report.add("n_trials", set.volume.nt());
    report.add("truth_voxels", static_cast<double>(set.truth_support.n_voxels()));
  } else if (cfg.synth_kind == "encoding") {
    const EncodingSet set = make_encoding(cfg.n_trials, cfg.n_voxels, cfg.noise_sigma, cfg.seed);
    csv::write_matrix(detail::out_path(cfg, "stimuli.csv"), set.stimuli);
    csv::write_matrix(detail::out_path(cfg, "truth_fields.csv"), set.true_fields);
    // flat layout: voxels along x, trials along t
    Volume4D bold({cfg.n_voxels, 1, 1, cfg.n_trials}, Affine4::identity());
    for (int t = 0; t < cfg.n_trials; ++t)
      for (int v = 0; v < cfg.n_voxels; ++v) bold.at(v, 0, 0, t) = set.bold(t, v);
    write_nifti(bold, detail::out_path(cfg, "bold.nii"));
    report.add("n_trials", cfg.n_trials);
    report.add("n_voxels", cfg.n_voxels);
  } else if (cfg.synth_kind == "rest") {
    const RestSet set = make_rest(cfg.n_subjects, cfg.n_timepoints, cfg.synth_shape,
                                  cfg.n_networks, cfg.seed);
    const BrainMask full = BrainMask::full(cfg.synth_shape, set.affine);
    write_nifti(detail::mask_to_volume(full), detail::out_path(cfg, "mask.nii"));
    for (std::size_t s = 0; s < set.subjects.size(); ++s) {
      char name[32];
      std::snprintf(name, sizeof(name), "subject_%02zu.nii", s);
      write_nifti(unmask(set.subjects[s], full), detail::out_path(cfg, name));
    }
    write_nifti(unmask(set.true_maps, full), detail::out_path(cfg, "truth_maps.nii"));
    report.add("n_subjects", cfg.n_subjects);
    report.add("n_networks", cfg.n_networks);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown synth kind " + cfg.synth_kind);
  }
  return report;
}

// ---- decode: mask -> clean -> CV(k-best -> classifier) -> maps ----

inline PipelineReport run_decode(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "decode needs --data");
  const Volume4D data = detail::load_volume(cfg.data_paths.front());
  const BrainMask mask = detail::mask_for(cfg, data);
  const std::vector<int> labels = read_labels_csv(cfg.labels_path);
  require(static_cast<int>(labels.size()) == data.nt(), ErrorKind::LengthMismatch,
          "label count does not match frame count");

  const DataMatrix X = clean(apply_mask(data, mask), cfg.clean);
  const Vector y = detail::labels_to_vector(labels);

  EstimatorSpec spec;
  spec.kind = detail::classifier_kind(cfg.classifier);
  spec.reg = cfg.C;
  spec.select_k = cfg.select_k;
  const FoldPlan plan = kfold(static_cast<int>(X.rows()), cfg.cv_folds, cfg.cv_shuffle, cfg.seed);
  const std::vector<double> scores = cross_val_score(spec, X, y, plan, Metric::Accuracy);
  detail::write_fold_scores_csv(detail::out_path(cfg, "cv_scores.csv"), scores);

  // refit on everything for the weight map
  const Vector f_scores = f_classif(X, labels);
  const FeatureSelector sel = select_k_best(f_scores, cfg.select_k);
  EstimatorSpec refit_spec = spec;
  refit_spec.select_k = 0;
  const LinearModel model = detail::fit_spec(refit_spec, select_transform(sel, X), y);
  const DataMatrix weights_full = select_inverse_transform(sel, model.coef);
  const Volume4D weight_map = unmask(weights_full, mask);
  const Volume4D background = data.mean_over_time();
  write_nifti(weight_map, detail::out_path(cfg, "weights.nii"));
  render_slice(weight_map, background, 2, detail::middle_or(weight_map, 2, cfg.slice_index),
               detail::out_path(cfg, "weights.pgm"));

  // F map: the screening statistic itself; the +inf sentinel is clamped to
  // the largest finite score so the file stays finite
  Vector f_clamped = f_scores;
  double finite_max = 0.0;
  for (Eigen::Index j = 0; j < f_clamped.size(); ++j)
    if (std::isfinite(f_clamped(j))) finite_max = std::max(finite_max, f_clamped(j));
  for (Eigen::Index j = 0; j < f_clamped.size(); ++j)
    if (!std::isfinite(f_clamped(j))) f_clamped(j) = finite_max > 0.0 ? finite_max : 1.0;
  const Volume4D f_map = unmask(f_clamped, mask);
  write_nifti(f_map, detail::out_path(cfg, "fscores.nii"));
  render_slice(f_map, background, 2, detail::middle_or(f_map, 2, cfg.slice_index),
               detail::out_path(cfg, "fscores.pgm"));

  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  PipelineReport report;
  report.add("mean_accuracy", mean);
  report.add("selected_features", sel.k);
  report.add("weight_nonzeros", (weights_full.array() != 0.0).count());
  return report;
}

// ---- encode: CV ridge r^2 per voxel, then LARS receptive fields ----

inline PipelineReport run_encode(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "encode needs --data (bold)");
  require(!cfg.stimuli_path.empty(), ErrorKind::InvalidArgument, "encode needs --stimuli");
  const Volume4D bold_vol = detail::load_volume(cfg.data_paths.front());
  const BrainMask mask = cfg.mask_path.empty() && bold_vol.ny() == 1 && bold_vol.nz() == 1
                             ? BrainMask::full({bold_vol.nx(), 1, 1}, bold_vol.affine())
                             : detail::mask_for(cfg, bold_vol);
  const Matrix stimuli = csv::read_matrix(cfg.stimuli_path);
  require(static_cast<int>(stimuli.rows()) == bold_vol.nt(), ErrorKind::LengthMismatch,
          "stimuli rows do not match bold frames");

  const DataMatrix bold = clean(apply_mask(bold_vol, mask), cfg.clean);
  const int n = static_cast<int>(stimuli.rows());
  const FoldPlan plan = kfold(n, cfg.encode_cv_folds, cfg.cv_shuffle, cfg.seed);

  Vector mean_r2 = Vector::Zero(bold.cols());
  for (const auto& fold : plan.folds) {
    const Matrix Xtr = detail::take_rows(stimuli, fold.train);
    const Matrix Xte = detail::take_rows(stimuli, fold.test);
    const Matrix Ytr = detail::take_rows(bold, fold.train);
    const Matrix Yte = detail::take_rows(bold, fold.test);
    const LinearModel ridge = fit_ridge(Xtr, Ytr, cfg.ridge_alpha);
    mean_r2 += r2_score_per_target(Yte, predict(ridge, Xte));
  }
  mean_r2 /= static_cast<double>(plan.folds.size());

  {
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index v = 0; v < mean_r2.size(); ++v)
      rows.push_back({std::to_string(v), csv::format(mean_r2(v))});
    csv::write(detail::out_path(cfg, "r2_scores.csv"), {"voxel", "r2"}, rows);
  }
  write_nifti(unmask(mean_r2, mask), detail::out_path(cfg, "r2_map.nii"));

  // sparse receptive fields for the best-explained voxels
  std::vector<int> order(static_cast<std::size_t>(mean_r2.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (mean_r2(a) != mean_r2(b)) return mean_r2(a) > mean_r2(b);
    return a < b;
  });
  const int top = std::min<int>(cfg.top_voxels, static_cast<int>(order.size()));
  double truth_mass_checked = 0.0;
  for (int i = 0; i < top; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    const auto fit = fit_lasso_lars_cv(stimuli, bold.col(v), cfg.lars_cv_folds, cfg.lars_max_iter);
    Matrix field(10, 10);
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 10; ++c) field(r, c) = fit.model.coef(0, r * 10 + c);
    char name[32];
    std::snprintf(name, sizeof(name), "rf_voxel_%04d.csv", v);
    csv::write_matrix(detail::out_path(cfg, name), field);
    truth_mass_checked += 1.0;
  }

  PipelineReport report;
  report.add("max_r2", mean_r2.maxCoeff());
  report.add("mean_r2", mean_r2.mean());
  report.add("fields_written", truth_mass_checked);
  return report;
}

// ---- decode-pixels: per-pixel CV over the model x C grid ----

inline PipelineReport run_decode_pixels(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "decode-pixels needs --data");
  require(!cfg.stimuli_path.empty(), ErrorKind::InvalidArgument, "decode-pixels needs --stimuli");
  const Volume4D bold_vol = detail::load_volume(cfg.data_paths.front());
  const BrainMask mask = cfg.mask_path.empty() && bold_vol.ny() == 1 && bold_vol.nz() == 1
                             ? BrainMask::full({bold_vol.nx(), 1, 1}, bold_vol.affine())
                             : detail::mask_for(cfg, bold_vol);
  const Matrix stimuli = csv::read_matrix(cfg.stimuli_path);
  require(static_cast<int>(stimuli.rows()) == bold_vol.nt(), ErrorKind::LengthMismatch,
          "stimuli rows do not match bold frames");
  const DataMatrix bold = clean(apply_mask(bold_vol, mask), cfg.clean);
  const int n = static_cast<int>(stimuli.rows());
  const FoldPlan plan = kfold(n, cfg.cv_folds, cfg.cv_shuffle, cfg.seed);

  const std::vector<std::pair<std::string, ModelKind>> models = {
      {"logreg_l1", ModelKind::LogRegL1},
      {"logreg_l2", ModelKind::LogRegL2},
      {"svc_l1", ModelKind::SvcSqHingeL1},
      {"svc_l2", ModelKind::SvcHingeL2},
  };

  PipelineReport report;
  std::vector<std::vector<std::string>> mean_rows, std_rows;
  for (const auto& [name, kind] : models) {
    std::vector<std::string> mean_row{name}, std_row{name};
    for (double C : cfg.c_grid) {
      EstimatorSpec spec;
      spec.kind = kind;
      spec.reg = C;
      spec.select_k = cfg.pixels_k;
      std::vector<double> pixel_means(static_cast<std::size_t>(stimuli.cols()));
      parallel_for(static_cast<std::size_t>(stimuli.cols()), [&](std::size_t p) {
        const Vector y = stimuli.col(static_cast<Eigen::Index>(p));
        const std::vector<double> scores = cross_val_score(spec, bold, y, plan, Metric::Accuracy);
        double m = 0.0;
        for (double s : scores) m += s;
        pixel_means[p] = m / static_cast<double>(scores.size());
      });
      double mean = 0.0;
      for (double m : pixel_means) mean += m;
      mean /= static_cast<double>(pixel_means.size());
      double sd = 0.0;
      if (pixel_means.size() > 1) {
        for (double m : pixel_means) sd += (m - mean) * (m - mean);
        sd = std::sqrt(sd / (static_cast<double>(pixel_means.size()) - 1.0));
      }
      mean_row.push_back(csv::format(mean));
      std_row.push_back(csv::format(sd));
      report.add(name + "@" + csv::format(C), mean);
    }
    mean_rows.push_back(std::move(mean_row));
    std_rows.push_back(std::move(std_row));
  }

  std::vector<std::string> header{"model"};
  for (double C : cfg.c_grid) header.push_back(csv::format(C));
  csv::write(detail::out_path(cfg, "pixel_scores_mean.csv"), header, mean_rows);
  csv::write(detail::out_path(cfg, "pixel_scores_std.csv"), header, std_rows);
  return report;
}

// ---- searchlight ----

inline PipelineReport run_searchlight(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "searchlight needs --data");
  require(cfg.radius_mm > 0.0, ErrorKind::InvalidArgument, "searchlight needs --radius-mm");
  const Volume4D data = detail::load_volume(cfg.data_paths.front());
  const BrainMask mask = detail::mask_for(cfg, data);
  const std::vector<int> labels = read_labels_csv(cfg.labels_path);
  require(static_cast<int>(labels.size()) == data.nt(), ErrorKind::LengthMismatch,
          "label count does not match frame count");

  const DataMatrix X = clean(apply_mask(data, mask), cfg.clean);
  const Vector y = detail::labels_to_vector(labels);
  const SphereIndex index = build_spheres(mask, cfg.radius_mm);

  EstimatorSpec spec;
  spec.kind = detail::classifier_kind(cfg.classifier);
  spec.reg = cfg.C;
  const FoldPlan plan = kfold(static_cast<int>(X.rows()), cfg.cv_folds, cfg.cv_shuffle, cfg.seed);
  const Vector scores = searchlight_map(X, y, index, spec, plan);

  const Volume4D score_map = unmask(scores, mask);
  write_nifti(score_map, detail::out_path(cfg, "searchlight.nii"));
  render_slice(score_map, data.mean_over_time(), 2,
               detail::middle_or(score_map, 2, cfg.slice_index),
               detail::out_path(cfg, "searchlight.pgm"));

  PipelineReport report;
  report.add("max_score", scores.maxCoeff());
  report.add("min_score", scores.minCoeff());
  report.add("n_centers", static_cast<double>(scores.size()));
  return report;
}

// ---- ica ----

inline PipelineReport run_ica(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "ica needs --data (one per subject)");
  std::vector<Volume4D> volumes;
  for (const auto& p : cfg.data_paths) volumes.push_back(detail::load_volume(p));
  const BrainMask mask = detail::mask_for(cfg, volumes.front());

  std::vector<DataMatrix> subjects;
  int min_nt = volumes.front().nt();
  for (const auto& v : volumes) {
    subjects.push_back(apply_mask(v, mask));
    min_nt = std::min(min_nt, v.nt());
  }
  int dim = cfg.subject_dim > 0 ? cfg.subject_dim : std::min(2 * cfg.n_components, min_nt);
  dim = std::max(dim, cfg.n_components);
  require(dim <= min_nt, ErrorKind::InvalidArgument,
          "subject dim exceeds the shortest subject's frame count");

  const ConcatIcaResult ica = concat_ica(subjects, cfg.n_components, dim,
                                         IcaNonlinearity::LogCosh, cfg.seed);

  const Volume4D background = volumes.front().mean_over_time();
  for (int c = 0; c < cfg.n_components; ++c) {
    const Volume4D map = unmask(Vector(ica.maps.row(c)), mask);
    char name[32];
    std::snprintf(name, sizeof(name), "component_%02d.nii", c);
    write_nifti(map, detail::out_path(cfg, name));
    if (c < std::min(3, cfg.n_components)) {
      std::snprintf(name, sizeof(name), "component_%02d.pgm", c);
      render_slice(map, background, 2, detail::middle_or(map, 2, cfg.slice_index),
                   detail::out_path(cfg, name));
    }
  }

  PipelineReport report;
  report.add("n_components", cfg.n_components);
  report.add("converged", ica.converged ? 1.0 : 0.0);
  return report;
}

// ---- cluster ----

inline PipelineReport run_cluster(const PipelineConfig& cfg) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "cluster needs --data");
  Volume4D data = detail::load_volume(cfg.data_paths.front());
  const BrainMask mask = detail::mask_for(cfg, data);
  if (cfg.presmooth && cfg.cluster_method == "kmeans") data = box_blur3(data);
  const DataMatrix X = clean(apply_mask(data, mask), cfg.clean);
  const VoxelGraph graph = grid_to_graph(mask);

  Parcellation parcellation;
  if (cfg.cluster_method == "ward") {
    parcellation = ward_agglomerate(X, graph, cfg.n_clusters).parcellation;
  } else if (cfg.cluster_method == "kmeans") {
    parcellation = kmeans(X.transpose(), cfg.n_clusters, cfg.seed).parcellation;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown cluster method " + cfg.cluster_method);
  }

  // label volume stores id + 1 inside the mask so 0 stays background
  Vector label_row(static_cast<Eigen::Index>(parcellation.labels.size()));
  for (std::size_t v = 0; v < parcellation.labels.size(); ++v)
    label_row(static_cast<Eigen::Index>(v)) = parcellation.labels[v] + 1;
  const Volume4D label_vol = unmask(label_row, mask);
  write_nifti(label_vol, detail::out_path(cfg, "labels.nii"));

  const std::vector<int> regions = connected_component_relabel(parcellation, graph);
  const int n_regions = regions.empty() ? 0 : *std::max_element(regions.begin(), regions.end()) + 1;
  Vector region_row(static_cast<Eigen::Index>(regions.size()));
  for (std::size_t v = 0; v < regions.size(); ++v)
    region_row(static_cast<Eigen::Index>(v)) = regions[v] + 1;
  write_nifti(unmask(region_row, mask), detail::out_path(cfg, "regions.nii"));

  // seeded random gray per label, middle axial slice
  {
    Rng rng(cfg.seed);
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(parcellation.n_clusters));
    for (auto& g : gray) g = static_cast<std::uint8_t>(40 + rng.uniform_index(216));
    const int zi = detail::middle_or(label_vol, 2, cfg.slice_index);
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(label_vol.nx()) *
                                     static_cast<std::size_t>(label_vol.ny()));
    for (int y = 0; y < label_vol.ny(); ++y)
      for (int x = 0; x < label_vol.nx(); ++x) {
        const double v = label_vol.at(x, y, zi, 0);
        pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(label_vol.nx()) +
               static_cast<std::size_t>(x)] =
            v > 0.0 ? gray[static_cast<std::size_t>(v - 1.0)] : 0;
      }
    write_pgm(detail::out_path(cfg, "labels.pgm"), label_vol.nx(), label_vol.ny(), pixels);
  }

  {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(parcellation.n_clusters), 0);
    for (int lab : parcellation.labels) ++sizes[static_cast<std::size_t>(lab)];
    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < sizes.size(); ++c)
      rows.push_back({std::to_string(c), std::to_string(sizes[c])});
    csv::write(detail::out_path(cfg, "cluster_sizes.csv"), {"label", "size"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows{
        {"method", cfg.cluster_method},
        {"n_clusters_requested", std::to_string(cfg.n_clusters)},
        {"n_clusters", std::to_string(parcellation.n_clusters)},
        {"n_regions", std::to_string(n_regions)},
        {"infeasible", parcellation.infeasible ? "1" : "0"},
    };
    csv::write(detail::out_path(cfg, "summary.csv"), {"key", "value"}, rows);
  }

  PipelineReport report;
  report.add("n_clusters", parcellation.n_clusters);
  report.add("n_regions", n_regions);
  report.add("infeasible", parcellation.infeasible ? 1.0 : 0.0);
  return report;
}

// ---- render ----

inline PipelineReport run_render(const PipelineConfig& cfg, const std::string& out_name) {
  require(!cfg.data_paths.empty(), ErrorKind::InvalidArgument, "render needs --data");
  const Volume4D map = detail::load_volume(cfg.data_paths.front());
  std::optional<Volume4D> background;
  if (!cfg.background_path.empty()) background = detail::load_volume(cfg.background_path);
  render_slice(map, background, cfg.axis, detail::middle_or(map, cfg.axis, cfg.slice_index),
               detail::out_path(cfg, out_name));
  PipelineReport report;
  report.add("rendered", 1.0);
  return report;
}

// exit-code classes: 2 config, 3 data, 4 numeric
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::BadK:
    case ErrorKind::BadFraction:
    case ErrorKind::BadBand:
    case ErrorKind::BadShape:
    case ErrorKind::BadSlice:
    case ErrorKind::BadComponentCount:
    case ErrorKind::TooManyClusters:
      return 2;
    case ErrorKind::SingularAffine:
    case ErrorKind::SingularSystem:
    case ErrorKind::DegenerateCorrelation:
    case ErrorKind::NoConvergence:
      return 4;
    default:
      return 3;
  }
}

}  // namespace voxkit
