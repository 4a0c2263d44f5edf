#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <set>

#include "oracles.hpp"
#include "voxkit/feature_selection.hpp"
#include "voxkit/linear_model.hpp"
#include "voxkit/model_selection.hpp"
#include "voxkit/signal.hpp"
#include "voxkit/synth.hpp"

using namespace voxkit;

TEST_CASE("decoding sets are seeded, balanced, with a real blob", "[synth]") {
  const DecodingSet a = make_decoding({10, 10, 10}, 20, 5.0, 3);
  const DecodingSet b = make_decoding({10, 10, 10}, 20, 5.0, 3);
  CHECK(std::memcmp(a.volume.data().data(), b.volume.data().data(),
                    a.volume.data().size() * 8) == 0);
  CHECK(a.labels == b.labels);
  CHECK(a.truth_support.flags() == b.truth_support.flags());

  CHECK(a.truth_support.n_voxels() >= 1);
  int pos = 0;
  for (int lab : a.labels) pos += lab > 0;
  CHECK(pos * 2 == static_cast<int>(a.labels.size()));

  const DecodingSet c = make_decoding({10, 10, 10}, 20, 5.0, 4);
  CHECK(std::memcmp(a.volume.data().data(), c.volume.data().data(),
                    a.volume.data().size() * 8) != 0);
}

TEST_CASE("anova screening overlaps the truth blob at high snr", "[synth]") {
  const DecodingSet set = make_decoding({10, 10, 10}, 40, 5.0, 7);
  const BrainMask full = BrainMask::full({10, 10, 10}, set.volume.affine());
  const DataMatrix X = apply_mask(set.volume, full);
  const Vector scores = f_classif(X, set.labels);
  const auto k = static_cast<int>(set.truth_support.n_voxels());
  const FeatureSelector sel = select_k_best(scores, k);

  std::set<std::size_t> truth_set;
  for (std::size_t v : set.truth_support.voxel_indices()) truth_set.insert(v);
  int inter = 0;
  for (int f : sel.selected_indices()) inter += truth_set.count(static_cast<std::size_t>(f)) > 0;
  const double jaccard = static_cast<double>(inter) /
                         static_cast<double>(2 * k - inter);
  CHECK(jaccard >= 0.5);
}

TEST_CASE("zero snr stays at chance downstream", "[synth]") {
  const DecodingSet set = make_decoding({8, 8, 8}, 20, 0.0, 8);
  const BrainMask full = BrainMask::full({8, 8, 8}, set.volume.affine());
  const DataMatrix X = apply_mask(set.volume, full);
  Vector y(static_cast<Eigen::Index>(set.labels.size()));
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = set.labels[i];
  EstimatorSpec spec;
  spec.kind = ModelKind::SvcHingeL2;
  spec.select_k = 40;
  const auto scores = cross_val_score(spec, X, y, kfold(40, 5), Metric::Accuracy);
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  CHECK(mean >= 0.25);
  CHECK(mean <= 0.75);
}

TEST_CASE("encoding fields are contiguous 2x2 patches", "[synth]") {
  const EncodingSet set = make_encoding(60, 100, 0.5, 5);
  for (int v = 0; v < 100; ++v) {
    std::vector<int> on;
    for (int p = 0; p < 100; ++p)
      if (set.true_fields(v, p) != 0.0) on.push_back(p);
    REQUIRE(on.size() == 4);
    const int r = on[0] / 10, c = on[0] % 10;
    CHECK(on[1] == r * 10 + c + 1);
    CHECK(on[2] == (r + 1) * 10 + c);
    CHECK(on[3] == (r + 1) * 10 + c + 1);
  }
  // balanced pixels: overall on-rate near one half
  CHECK(std::abs(set.stimuli.mean() - 0.5) <= 0.02);

  const EncodingSet again = make_encoding(60, 100, 0.5, 5);
  CHECK(std::memcmp(set.bold.data(), again.bold.data(),
                    sizeof(double) * static_cast<std::size_t>(set.bold.size())) == 0);
}

TEST_CASE("noiseless encoding is an exact linear system", "[synth]") {
  const EncodingSet set = make_encoding(200, 60, 0.0, 6);
  const LinearModel ridge = fit_ridge(set.stimuli, set.bold, 1e-10);
  CHECK((ridge.coef - set.true_fields).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("lasso receptive fields concentrate on the true patch", "[synth]") {
  const EncodingSet set = make_encoding(150, 100, 0.5, 7);
  // the 20 voxels with the strongest afferents, judged by the truth itself
  std::vector<int> order(100);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return set.true_fields.row(a).sum() > set.true_fields.row(b).sum();
  });
  int support_hits = 0, support_total = 0;
  for (int i = 0; i < 20; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    const auto fit = fit_lasso_lars_cv(set.stimuli, set.bold.col(v), 5, 10);
    for (int p = 0; p < 100; ++p) {
      if (fit.model.coef(0, p) == 0.0) continue;
      ++support_total;
      support_hits += set.true_fields(v, p) != 0.0;
    }
  }
  REQUIRE(support_total > 0);
  CHECK(static_cast<double>(support_hits) / support_total >= 0.8);
}

TEST_CASE("a strongly afferent pixel decodes from bold", "[synth]") {
  const EncodingSet set = make_encoding(160, 100, 0.5, 8);
  // choose the pixel covered by the most voxels
  std::vector<int> coverage(100, 0);
  for (int v = 0; v < 100; ++v)
    for (int p = 0; p < 100; ++p)
      if (set.true_fields(v, p) != 0.0) ++coverage[static_cast<std::size_t>(p)];
  const int pixel = static_cast<int>(std::max_element(coverage.begin(), coverage.end()) -
                                     coverage.begin());
  EstimatorSpec spec;
  spec.kind = ModelKind::LogRegL2;
  spec.reg = 0.05;
  const auto scores = cross_val_score(spec, set.bold, set.stimuli.col(pixel), kfold(160, 5),
                                      Metric::Accuracy);
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  CHECK(mean >= 0.8);
}

TEST_CASE("rest sets are seeded with well-separated maps", "[synth]") {
  const RestSet a = make_rest(2, 50, {10, 10, 10}, 3, 9);
  const RestSet b = make_rest(2, 50, {10, 10, 10}, 3, 9);
  for (std::size_t s = 0; s < a.subjects.size(); ++s)
    CHECK(std::memcmp(a.subjects[s].data(), b.subjects[s].data(),
                      sizeof(double) * static_cast<std::size_t>(a.subjects[s].size())) == 0);

  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double corr = std::abs(
          oracles::pearson(a.true_maps.row(i).transpose(), a.true_maps.row(j).transpose()));
      CHECK(corr <= 0.3);
    }

  // trends are baked in: detrending changes the data
  const DataMatrix cleaned = detrend(a.subjects[0]);
  CHECK((cleaned - a.subjects[0]).cwiseAbs().maxCoeff() >= 0.01);
}
