#pragma once

#include <vector>

#include "tubeness/hessian.hpp"
#include "tubeness/volume.hpp"

namespace tubeness {

enum class Polarity { bright, dark };

// Multiscale tubular-enhancement configuration. beta_f is the blobness
// sensitivity (named to avoid clashing with the ordered-logit slope); c is
// the structureness sensitivity in the intensity units of the input volume.
struct VesselnessParams {
  double s_min = 1.4;    // mm
  double s_max = 3.2;    // mm
  double s_step = 0.2;   // mm
  double alpha = 0.5;
  double beta_f = 0.5;
  double c = 500.0;
  Polarity polarity = Polarity::bright;
  double threshold = 0.35;

  void validate() const;
};

// The scale lattice {s_min, s_min + s_step, ...} up to and including s_max
// when (s_max - s_min) is an integer multiple of s_step.
std::vector<double> scale_set(double s_min, double s_max, double s_step);

// Per-voxel vesselness in [0,1] at a single scale. Voxels failing the
// polarity sign test (bright: l2 < 0 and l3 < 0; dark: l2 > 0 and l3 > 0)
// score zero.
Volume3D vesselness_at_scale(const Volume3D& vol, double scale_mm,
                             const VesselnessParams& params);

// Voxelwise maximum of vesselness_at_scale over the scale lattice.
Volume3D vesselness_multiscale(const Volume3D& vol,
                               const VesselnessParams& params);

// mask(v) = 1 iff resp(v) > t (strictly) and roi(v) = 1.
Mask3D threshold_response(const Volume3D& resp, const Mask3D& roi, double t);

}  // namespace tubeness
