#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tubeness/phantom.hpp"

using namespace tubeness;

TEST_CASE("empty phantom is pure background") {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.n_tubes = 0;
  spec.background = 10.0;
  Phantom ph = generate_phantom(spec);
  CHECK(ph.true_count == 0);
  for (double v : ph.volume.data()) CHECK(v == 10.0);
  CHECK(ph.truth_mask.count() == 0);
}

TEST_CASE("fixed seed reproduces the phantom bit for bit") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.n_tubes = 5;
  spec.noise_sigma = 25.0;
  spec.seed = 1234;
  Phantom a = generate_phantom(spec);
  Phantom b = generate_phantom(spec);
  CHECK(a.volume.data() == b.volume.data());
  CHECK(a.truth_mask.data() == b.truth_mask.data());
  CHECK(a.true_count == b.true_count);
}

TEST_CASE("separation constraint keeps truth components distinct") {
  PhantomSpec spec;
  spec.dims = {96, 96, 96};
  spec.n_tubes = 12;
  spec.seed = 9;
  Phantom ph = generate_phantom(spec);
  CHECK(ph.true_count == 12);
  CHECK(ph.truth.count() == 12);
  CHECK(ph.tubes.size() == 12);
  for (const Tube& t : ph.tubes) {
    CHECK(t.length_mm() >= spec.length_min_mm - 1e-9);
    CHECK(t.length_mm() <= spec.length_max_mm + 1e-9);
    CHECK(t.radius_mm >= spec.radius_min_mm);
    CHECK(t.radius_mm <= spec.radius_max_mm);
  }
}

TEST_CASE("unsatisfiable placement errors out") {
  PhantomSpec spec;
  spec.dims = {24, 24, 24};
  spec.n_tubes = 200;
  spec.min_separation_mm = 8.0;
  CHECK_THROWS_WITH_AS(static_cast<void>(generate_phantom(spec)),
                       doctest::Contains("placement"), std::runtime_error);
}

TEST_CASE("explicit tube: half-maximum truth voxelization and ROI erosion") {
  PhantomSpec spec;
  spec.dims = {40, 40, 40};
  spec.spacing = {1, 1, 1};
  spec.contrast = 100.0;
  spec.tubes = {{{12, 20, 20}, {28, 20, 20}, 2.0}};
  Phantom ph = generate_phantom(spec);

  double sigma = 2.0 / std::sqrt(2.0 * std::numbers::ln2);
  // on the centerline the profile is the full contrast
  CHECK(ph.volume(20, 20, 20) == doctest::Approx(100.0).epsilon(1e-9));
  // truth contains exactly the voxels strictly inside the half-max surface
  for (int y = 15; y <= 25; ++y) {
    double d = std::abs(y - 20.0);
    bool expect = d < 2.0;
    CHECK(static_cast<bool>(ph.truth_mask(20, y, 20)) == expect);
  }
  // profile value at the half-max surface is half the contrast
  double at_r = 100.0 * std::exp(-0.5 * 4.0 / (sigma * sigma));
  CHECK(at_r == doctest::Approx(50.0).epsilon(1e-12));

  // ROI excludes the two outermost voxel shells
  CHECK(ph.roi(0, 20, 20) == 0);
  CHECK(ph.roi(1, 20, 20) == 0);
  CHECK(ph.roi(2, 20, 20) == 1);
  CHECK(ph.roi(37, 20, 20) == 1);
  CHECK(ph.roi(38, 20, 20) == 0);
}

TEST_CASE("dark polarity inverts the tube contrast") {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.tubes = {{{8, 16, 16}, {24, 16, 16}, 1.5}};
  spec.background = 500.0;
  spec.contrast = 300.0;
  spec.polarity = Polarity::dark;
  Phantom ph = generate_phantom(spec);
  CHECK(ph.volume(16, 16, 16) == doctest::Approx(200.0));
  CHECK(ph.volume(16, 16, 2) == doctest::Approx(500.0));
}

TEST_CASE("rate_phantom maps counts through the scale intervals") {
  RatingScale w = RatingScale::wardlaw();
  CHECK(rate_phantom(0, w) == 0);
  CHECK(rate_phantom(15, w) == 2);
  CHECK(rate_phantom(15, RatingScale::patankar()) == 3);
  CHECK(rate_phantom(45, w) == 4);
}

TEST_CASE("truth csv has the declared header and one row per tube") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.n_tubes = 3;
  spec.seed = 4;
  Phantom ph = generate_phantom(spec);
  auto dir = std::filesystem::temp_directory_path() / "tubeness_phantom_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "truth.csv").string();
  save_truth_csv(ph.tubes, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "tube_id,cx,cy,cz,dx,dy,dz,radius_mm,length_mm");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}
