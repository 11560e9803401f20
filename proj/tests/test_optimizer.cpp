#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tubeness/optimizer.hpp"
#include "tubeness/phantom.hpp"

using namespace tubeness;

namespace {

OrderedLogitModel reference_patankar() {
  OrderedLogitModel m;
  m.beta = 1.906;
  m.mu = {2.269, 9.569, 18.995, 28.639};
  m.m = 5;
  m.scale_name = "patankar";
  return m;
}

// Small, fast T2-only case built from a phantom with known tubes.
Case phantom_case(const std::string& id, int n_tubes, std::uint64_t seed,
                  const RatingScale& scale, long* true_count = nullptr) {
  PhantomSpec spec;
  spec.dims = {56, 56, 56};
  spec.n_tubes = n_tubes;
  spec.length_min_mm = 5.0;
  spec.length_max_mm = 12.0;
  spec.radius_min_mm = 0.9;
  spec.radius_max_mm = 1.3;
  spec.min_separation_mm = 9.0;
  spec.seed = seed;
  Phantom ph = generate_phantom(spec);
  if (true_count) *true_count = ph.true_count;
  Case c;
  c.id = id;
  c.t2 = std::move(ph.volume);
  c.roi = std::move(ph.roi);
  c.rating = rate_phantom(ph.true_count, scale);
  return c;
}

PipelineConfig fast_config() {
  PipelineConfig config;
  config.s_step = 0.2;
  return config;
}

}  // namespace

TEST_CASE("segment_case recovers phantom tubes and rejects bad input") {
  long truth = 0;
  Case c = phantom_case("p1", 4, 21, RatingScale::patankar(), &truth);
  SegmentParams params{0.6, 1.4, 0.96, 0.2};
  SegmentCaseResult seg = segment_case(c, params, fast_config());
  CHECK(seg.counts.total_count == truth);
  CHECK(seg.counts.total_volume_mm3 > 0.0);

  Case no_modality;
  no_modality.id = "nm";
  no_modality.roi = Mask3D({8, 8, 8}, {1, 1, 1}, 1);
  CHECK_THROWS_WITH_AS(static_cast<void>(segment_case(no_modality, params, fast_config())),
                       doctest::Contains("no modality"), std::runtime_error);

  Case empty_roi = phantom_case("er", 2, 22, RatingScale::patankar());
  empty_roi.roi = Mask3D(empty_roi.t2->dims(), empty_roi.t2->spacing(), 0);
  CHECK_THROWS_WITH_AS(static_cast<void>(segment_case(empty_roi, params, fast_config())),
                       doctest::Contains("empty ROI"), std::runtime_error);
}

TEST_CASE("constant volumes yield zero counts") {
  Case c;
  c.id = "flat";
  c.t2 = Volume3D({32, 32, 32}, {1, 1, 1}, 400.0);
  c.roi = Mask3D({32, 32, 32}, {1, 1, 1}, 1);
  SegmentParams params{0.8, 1.2, 0.99, 0.99};
  SegmentCaseResult seg = segment_case(c, params, fast_config());
  CHECK(seg.counts.total_count == 0);
  CHECK(seg.counts.slice_count == 0);
  CHECK(seg.mask.count() == 0);
}

TEST_CASE("fusion by intersection requires both modalities to agree") {
  // T1 flat (no dark structure) but T2 has a tube: intersection -> empty,
  // union -> the T2 detection.
  long truth = 0;
  Case c = phantom_case("fuse", 3, 23, RatingScale::patankar(), &truth);
  c.t1 = Volume3D(c.t2->dims(), c.t2->spacing(), 800.0);
  SegmentParams params{0.6, 1.4, 0.96, 0.2};

  PipelineConfig inter = fast_config();
  inter.fusion = FusionMode::intersect;
  CHECK(segment_case(c, params, inter).counts.total_count == 0);

  PipelineConfig merged = fast_config();
  merged.fusion = FusionMode::merge;
  CHECK(segment_case(c, params, merged).counts.total_count == truth);
}

TEST_CASE("objective is additive over case partitions") {
  OrderedLogitModel model = reference_patankar();
  std::vector<Case> cohort;
  cohort.push_back(phantom_case("a", 2, 31, RatingScale::patankar()));
  cohort.push_back(phantom_case("b", 5, 32, RatingScale::patankar()));
  cohort.push_back(phantom_case("c", 8, 33, RatingScale::patankar()));

  SegmentParams params{0.6, 1.4, 0.96, 0.25};
  PipelineConfig config = fast_config();
  double whole = objective(cohort, model, params, config, CountKind::total);
  double part1 = objective({cohort[0]}, model, params, config, CountKind::total);
  double part2 = objective({cohort[1], cohort[2]}, model, params, config,
                           CountKind::total);
  CHECK(whole == doctest::Approx(part1 + part2).epsilon(1e-12));
}

TEST_CASE("axis specs enumerate inclusive lattices") {
  AxisSpec spec{0.90, 0.99, 0.01};
  CHECK(spec.values().size() == 10);
  AxisSpec single{1.4, 1.4, 0.2};
  CHECK(single.values().size() == 1);
  AxisSpec bad{2.0, 1.0, 0.5};
  CHECK_THROWS(bad.values());
}

TEST_CASE("grid search matches the cache-free objective and finds the argmax") {
  OrderedLogitModel model = reference_patankar();
  long t1 = 0, t2 = 0;
  std::vector<Case> cohort;
  cohort.push_back(phantom_case("a", 3, 41, RatingScale::patankar(), &t1));
  cohort.push_back(phantom_case("b", 7, 42, RatingScale::patankar(), &t2));

  ParamGrid grid;
  grid.s_min = {0.8, 1.0, 0.2};
  grid.s_max = {1.2, 1.2, 0.2};
  grid.t1 = {0.96, 0.96, 0.01};
  grid.t2 = {0.15, 0.35, 0.10};

  PipelineConfig config = fast_config();
  OptimizationResult result =
      grid_search(cohort, model, grid, config, CountKind::total);

  // grid shape: 2 x 1 x 1 x 3 points
  CHECK(result.logl.size() == 6);
  CHECK(result.axes[0].size() == 2);
  CHECK(result.axes[3].size() == 3);

  // cache-free recomputation agrees bit for bit at every grid point
  for (std::size_t i0 = 0; i0 < 2; ++i0)
    for (std::size_t i3 = 0; i3 < 3; ++i3) {
      SegmentParams p{result.axes[0][i0], result.axes[1][0], result.axes[2][0],
                      result.axes[3][i3]};
      double direct = objective(cohort, model, p, config, CountKind::total);
      double cached = result.logl[result.flat_index(
          static_cast<int>(i0), 0, 0, static_cast<int>(i3))];
      CHECK(cached == direct);
      CHECK(cached <= result.best_logl);
    }

  // the best point is the lexicographically first argmax
  bool matched = false;
  for (std::size_t i = 0; i < result.logl.size() && !matched; ++i)
    matched = result.logl[i] == result.best_logl;
  CHECK(matched);
  CHECK(result.per_case.size() == 2);
  CHECK(result.per_case[0].id == "a");
}

TEST_CASE("singleton grid echoes the single point") {
  OrderedLogitModel model = reference_patankar();
  std::vector<Case> cohort{phantom_case("solo", 4, 51, RatingScale::patankar())};
  ParamGrid grid;
  grid.s_min = {1.0, 1.0, 0.2};
  grid.s_max = {1.2, 1.2, 0.2};
  grid.t1 = {0.96, 0.96, 0.01};
  grid.t2 = {0.20, 0.20, 0.05};
  OptimizationResult result =
      grid_search(cohort, model, grid, fast_config(), CountKind::total);
  CHECK(result.logl.size() == 1);
  CHECK(result.best.s_min == 1.0);
  CHECK(result.best.t2_threshold == 0.20);
  CHECK(result.best_logl == result.logl[0]);
}

TEST_CASE("grid of only s_min > s_max pairs is an error") {
  OrderedLogitModel model = reference_patankar();
  std::vector<Case> cohort{phantom_case("x", 2, 61, RatingScale::patankar())};
  ParamGrid grid;
  grid.s_min = {3.0, 3.0, 0.2};
  grid.s_max = {2.0, 2.0, 0.2};
  grid.t1 = {0.96, 0.96, 0.01};
  grid.t2 = {0.20, 0.20, 0.05};
  CHECK_THROWS_WITH_AS(
      static_cast<void>(grid_search(cohort, model, grid, fast_config(),
                                    CountKind::total)),
      doctest::Contains("empty effective grid"), std::runtime_error);
}

TEST_CASE("count kind changes only the extracted count, not the mask") {
  Case c = phantom_case("ck", 5, 71, RatingScale::wardlaw());
  SegmentParams params{0.6, 1.4, 0.96, 0.2};
  SegmentCaseResult seg = segment_case(c, params, fast_config());
  // slice and total counts come from the same mask in one pass
  CHECK(seg.counts.slice_count <= seg.counts.total_count);
  CHECK(seg.counts.total_count > 0);
}

TEST_CASE("surface export: header, row count, and max location") {
  OrderedLogitModel model = reference_patankar();
  std::vector<Case> cohort{phantom_case("s", 3, 81, RatingScale::patankar())};
  ParamGrid grid;
  grid.s_min = {0.8, 1.0, 0.2};
  grid.s_max = {1.2, 1.2, 0.2};
  grid.t1 = {0.95, 0.96, 0.01};
  grid.t2 = {0.15, 0.35, 0.10};
  OptimizationResult result =
      grid_search(cohort, model, grid, fast_config(), CountKind::total);

  auto dir = std::filesystem::temp_directory_path() / "tubeness_opt_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "surface.csv").string();
  export_surface(result, "s_min", "t2", path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "s_min,t2,logl");
  int rows = 0;
  double max_logl = -1e300;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    double logl = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(logl <= result.best_logl + 1e-12);
    max_logl = std::max(max_logl, logl);
  }
  CHECK(rows == 2 * 3);  // |s_min| x |t2|
  CHECK(max_logl == result.best_logl);

  CHECK_THROWS_WITH_AS(export_surface(result, "s_min", "banana", path),
                       doctest::Contains("unknown surface axis"),
                       std::runtime_error);
}

TEST_CASE("manifest loading errors name the case id") {
  auto dir = std::filesystem::temp_directory_path() / "tubeness_opt_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "manifest.csv").string();
  {
    std::ofstream out(path);
    out << "id,t1_path,t2_path,roi_path,rating\n";
    out << "c7,,/does/not/exist.f32raw,/also/missing.f32raw,2\n";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(load_manifest(path)),
                       doctest::Contains("case c7"), std::runtime_error);

  auto bad = (dir / "bad_manifest.csv").string();
  {
    std::ofstream out(bad);
    out << "wrong,header\n";
  }
  CHECK_THROWS(static_cast<void>(load_manifest(bad)));
}
