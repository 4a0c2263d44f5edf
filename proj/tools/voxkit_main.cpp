// Pipeline runner: synth | decode | encode | decode-pixels | searchlight |
// ica | cluster | render. Options may also come from a flat key=value
// config file (--config); command-line flags win.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "voxkit/voxkit.hpp"

namespace {

using voxkit::Error;
using voxkit::ErrorKind;
using voxkit::PipelineConfig;
using voxkit::PipelineReport;

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  if (path.empty()) return kv;
  std::ifstream in(path);
  if (!in.good()) throw Error(ErrorKind::InvalidArgument, "cannot open config " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on" || v.empty()) return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::InvalidArgument, "expected a boolean, got '" + v + "'");
}

void parse_band(const std::string& v, voxkit::CleanConfig& clean) {
  const auto colon = v.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorKind::InvalidArgument, "--band expects LOW:HIGH (either side may be empty)");
  const std::string lo = v.substr(0, colon), hi = v.substr(colon + 1);
  if (!lo.empty()) clean.low_cut_hz = std::stod(lo);
  if (!hi.empty()) clean.high_cut_hz = std::stod(hi);
}

std::vector<double> parse_double_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty list '" + v + "'");
  return out;
}

std::array<int, 3> parse_shape(const std::string& v) {
  const auto parts = parse_double_list(v);
  if (parts.size() != 3) throw Error(ErrorKind::InvalidArgument, "--shape expects NX,NY,NZ");
  return {static_cast<int>(parts[0]), static_cast<int>(parts[1]), static_cast<int>(parts[2])};
}

// ties a subcommand's options to PipelineConfig fields and lets unset ones
// be filled from the config file afterwards
struct Binder {
  CLI::App* sub;
  std::vector<std::pair<CLI::Option*, std::function<void(const std::string&)>>> entries;
  std::string config_path;

  explicit Binder(CLI::App* s) : sub(s) {
    sub->add_option("--config", config_path, "flat key=value config file");
  }

  CLI::Option* add(const std::string& flag, std::function<void(const std::string&)> set,
                   const std::string& desc, bool is_flag = false) {
    CLI::Option* opt;
    if (is_flag) {
      opt = sub->add_flag_function(
          flag, [set](std::int64_t) { set("1"); }, desc);
    } else {
      opt = sub->add_option_function<std::string>(
          flag, [set](const std::string& v) { set(v); }, desc);
    }
    const std::string key = flag.substr(flag.find_first_not_of('-'));
    entries.emplace_back(opt, std::move(set));
    return opt;
  }

  void apply_config() {
    const auto kv = load_config_file(config_path);
    for (const auto& [opt, set] : entries) {
      if (opt->count() > 0) continue;  // command line wins
      const std::string key = opt->get_name().substr(opt->get_name().find_first_not_of('-'));
      const auto it = kv.find(key);
      if (it != kv.end()) set(it->second);
    }
  }
};

void bind_common(Binder& b, PipelineConfig& cfg) {
  b.add("--data", [&cfg](const std::string& v) { cfg.data_paths.push_back(v); },
        "input NIfTI (repeat for multiple subjects)");
  b.add("--mask", [&cfg](const std::string& v) { cfg.mask_path = v; }, "mask NIfTI");
  b.add("--labels", [&cfg](const std::string& v) { cfg.labels_path = v; }, "labels CSV");
  b.add("--stimuli", [&cfg](const std::string& v) { cfg.stimuli_path = v; }, "stimuli CSV");
  b.add("--out", [&cfg](const std::string& v) { cfg.out_dir = v; }, "output directory");
  b.add("--seed", [&cfg](const std::string& v) { cfg.seed = std::stoull(v); }, "RNG seed");
}

void bind_cleaning(Binder& b, PipelineConfig& cfg) {
  b.add("--detrend", [&cfg](const std::string& v) { cfg.clean.detrend = parse_bool(v); },
        "remove per-voxel linear trends", true);
  b.add("--standardize", [&cfg](const std::string& v) { cfg.clean.standardize = parse_bool(v); },
        "unit-variance voxel time series", true);
  b.add("--band", [&cfg](const std::string& v) { parse_band(v, cfg.clean); },
        "frequency band LOW:HIGH in Hz (ideal filter)");
  b.add("--tr", [&cfg](const std::string& v) { cfg.clean.tr_seconds = std::stod(v); },
        "sampling interval in seconds");
}

void bind_cv(Binder& b, PipelineConfig& cfg) {
  b.add("--cv", [&cfg](const std::string& v) { cfg.cv_folds = std::stoi(v); }, "CV fold count");
  b.add("--shuffle", [&cfg](const std::string& v) { cfg.cv_shuffle = parse_bool(v); },
        "shuffle samples before splitting", true);
}

void print_report(const PipelineReport& report) {
  for (const auto& [name, value] : report.metrics) std::cout << name << " = " << value << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"machine-learning toolkit for volumetric brain imaging"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::vector<Binder> binders;
  binders.reserve(8);
  std::string render_out_name = "slice.pgm";

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with ground truth");
  {
    binders.emplace_back(synth);
    Binder& b = binders.back();
    bind_common(b, cfg);
    b.add("--kind", [&cfg](const std::string& v) { cfg.synth_kind = v; },
          "decoding | encoding | rest");
    b.add("--shape", [&cfg](const std::string& v) { cfg.synth_shape = parse_shape(v); },
          "grid shape NX,NY,NZ");
    b.add("--n-per-class", [&cfg](const std::string& v) { cfg.n_per_class = std::stoi(v); },
          "trials per class (decoding)");
    b.add("--snr", [&cfg](const std::string& v) { cfg.snr = std::stod(v); },
          "signal amplitude (decoding)");
    b.add("--n-trials", [&cfg](const std::string& v) { cfg.n_trials = std::stoi(v); },
          "trial count (encoding)");
    b.add("--n-voxels", [&cfg](const std::string& v) { cfg.n_voxels = std::stoi(v); },
          "voxel count (encoding)");
    b.add("--noise-sigma", [&cfg](const std::string& v) { cfg.noise_sigma = std::stod(v); },
          "noise level (encoding)");
    b.add("--n-subjects", [&cfg](const std::string& v) { cfg.n_subjects = std::stoi(v); },
          "subject count (rest)");
    b.add("--n-timepoints", [&cfg](const std::string& v) { cfg.n_timepoints = std::stoi(v); },
          "frames per subject (rest)");
    b.add("--n-networks", [&cfg](const std::string& v) { cfg.n_networks = std::stoi(v); },
          "network count (rest)");
  }

  auto* decode = app.add_subcommand("decode", "ANOVA screening + linear classifier CV and maps");
  {
    binders.emplace_back(decode);
    Binder& b = binders.back();
    bind_common(b, cfg);
    bind_cleaning(b, cfg);
    bind_cv(b, cfg);
    b.add("--classifier", [&cfg](const std::string& v) { cfg.classifier = v; },
          "svc_l2 | svc_l1 | logreg_l1 | logreg_l2");
    b.add("--C", [&cfg](const std::string& v) { cfg.C = std::stod(v); }, "inverse regularization");
    b.add("--k", [&cfg](const std::string& v) { cfg.select_k = std::stoi(v); },
          "features kept by the ANOVA screen");
  }

  auto* encode = app.add_subcommand("encode", "ridge encoding r^2 map + LARS receptive fields");
  {
    binders.emplace_back(encode);
    Binder& b = binders.back();
    bind_common(b, cfg);
    bind_cleaning(b, cfg);
    b.add("--alpha", [&cfg](const std::string& v) { cfg.ridge_alpha = std::stod(v); },
          "ridge regularization");
    b.add("--cv", [&cfg](const std::string& v) { cfg.encode_cv_folds = std::stoi(v); },
          "CV fold count");
    b.add("--top-voxels", [&cfg](const std::string& v) { cfg.top_voxels = std::stoi(v); },
          "voxels given receptive-field fits");
    b.add("--lars-max-iter", [&cfg](const std::string& v) { cfg.lars_max_iter = std::stoi(v); },
          "LARS path length cap");
    b.add("--lars-cv", [&cfg](const std::string& v) { cfg.lars_cv_folds = std::stoi(v); },
          "folds for the LARS alpha choice");
  }

  auto* pixels = app.add_subcommand("decode-pixels",
                                    "per-pixel decoding over the model x C grid");
  {
    binders.emplace_back(pixels);
    Binder& b = binders.back();
    bind_common(b, cfg);
    bind_cleaning(b, cfg);
    bind_cv(b, cfg);
    b.add("--c-grid", [&cfg](const std::string& v) { cfg.c_grid = parse_double_list(v); },
          "comma-separated C values");
    b.add("--k", [&cfg](const std::string& v) { cfg.pixels_k = std::stoi(v); },
          "features kept by the ANOVA screen");
  }

  auto* searchlight = app.add_subcommand("searchlight", "CV decoding in a sphere at every voxel");
  {
    binders.emplace_back(searchlight);
    Binder& b = binders.back();
    bind_common(b, cfg);
    bind_cleaning(b, cfg);
    bind_cv(b, cfg);
    b.add("--radius-mm", [&cfg](const std::string& v) { cfg.radius_mm = std::stod(v); },
          "sphere radius in mm")
        ->required();
    b.add("--classifier", [&cfg](const std::string& v) { cfg.classifier = v; },
          "svc_l2 | svc_l1 | logreg_l1 | logreg_l2");
    b.add("--C", [&cfg](const std::string& v) { cfg.C = std::stod(v); }, "inverse regularization");
  }

  auto* ica = app.add_subcommand("ica", "concat-ICA spatial network maps");
  {
    binders.emplace_back(ica);
    Binder& b = binders.back();
    bind_common(b, cfg);
    b.add("--n-components", [&cfg](const std::string& v) { cfg.n_components = std::stoi(v); },
          "components to extract");
    b.add("--subject-dim", [&cfg](const std::string& v) { cfg.subject_dim = std::stoi(v); },
          "per-subject PCA dimension (0 = auto)");
  }

  auto* cluster = app.add_subcommand("cluster", "ward / k-means voxel parcellation");
  {
    binders.emplace_back(cluster);
    Binder& b = binders.back();
    bind_common(b, cfg);
    bind_cleaning(b, cfg);
    b.add("--method", [&cfg](const std::string& v) { cfg.cluster_method = v; },
          "ward | kmeans");
    b.add("--n-clusters", [&cfg](const std::string& v) { cfg.n_clusters = std::stoi(v); },
          "cluster count");
    b.add("--presmooth", [&cfg](const std::string& v) { cfg.presmooth = parse_bool(v); },
          "box-blur volumes before k-means", true);
  }

  auto* render = app.add_subcommand("render", "PGM slice of a map over a background");
  {
    binders.emplace_back(render);
    Binder& b = binders.back();
    bind_common(b, cfg);
    b.add("--background", [&cfg](const std::string& v) { cfg.background_path = v; },
          "background NIfTI");
    b.add("--axis", [&cfg](const std::string& v) {
            if (v == "x") cfg.axis = 0;
            else if (v == "y") cfg.axis = 1;
            else if (v == "z") cfg.axis = 2;
            else cfg.axis = std::stoi(v);
          },
          "slice axis: x | y | z (default z)");
    b.add("--index", [&cfg](const std::string& v) { cfg.slice_index = std::stoi(v); },
          "slice index (default: middle)");
    b.add("--out-name", [&render_out_name](const std::string& v) { render_out_name = v; },
          "output file name");
  }

  try {
    app.parse(argc, argv);
    for (auto& b : binders)
      if (b.sub->parsed()) b.apply_config();

    PipelineReport report;
    if (synth->parsed()) report = voxkit::run_synth(cfg);
    else if (decode->parsed()) report = voxkit::run_decode(cfg);
    else if (encode->parsed()) report = voxkit::run_encode(cfg);
    else if (pixels->parsed()) report = voxkit::run_decode_pixels(cfg);
    else if (searchlight->parsed()) report = voxkit::run_searchlight(cfg);
    else if (ica->parsed()) report = voxkit::run_ica(cfg);
    else if (cluster->parsed()) report = voxkit::run_cluster(cfg);
    else if (render->parsed()) report = voxkit::run_render(cfg, render_out_name);
    print_report(report);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << voxkit::error_kind_name(e.kind()) << ": " << e.detail() << "\n";
    return voxkit::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 4;
  }
}
