#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tubeness/components.hpp"
#include "tubeness/ologit.hpp"
#include "tubeness/vesselness.hpp"
#include "tubeness/volume.hpp"

namespace tubeness {

// Straight centerline segment with a Gaussian cross-section. The profile is
// exp(-d^2 / (2 sigma^2)) with sigma = radius / sqrt(2 ln 2), so the
// half-maximum surface sits exactly at distance `radius_mm`.
struct Tube {
  std::array<double, 3> p0;  // endpoint, mm
  std::array<double, 3> p1;
  double radius_mm;

  double length_mm() const;
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};

  // Explicit tube list; when empty, `n_tubes` are placed by rejection
  // sampling within the ranges below.
  std::vector<Tube> tubes;
  int n_tubes = 0;
  double radius_min_mm = 0.8;
  double radius_max_mm = 1.5;
  double length_min_mm = 5.0;
  double length_max_mm = 20.0;
  // Minimum distance between any two centerlines; 4 mm guarantees distinct
  // truth components, larger values keep segmented masks from bridging at
  // permissive thresholds.
  double min_separation_mm = 4.0;

  double background = 0.0;
  double contrast = 2000.0;
  Polarity polarity = Polarity::bright;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct Phantom {
  Volume3D volume;
  Mask3D roi;          // interior eroded by 2 voxels
  Mask3D truth_mask;   // profile strictly above half maximum
  ComponentSet truth;
  long true_count = 0;
  std::vector<Tube> tubes;
};

// Deterministic per spec+seed. Throws after 10^4 failed placement attempts.
Phantom generate_phantom(const PhantomSpec& spec);

// Class whose count interval contains true_count.
int rate_phantom(long true_count, const RatingScale& scale);

// Writes `tube_id,cx,cy,cz,dx,dy,dz,radius_mm,length_mm` rows.
void save_truth_csv(const std::vector<Tube>& tubes, const std::string& path);

}  // namespace tubeness
