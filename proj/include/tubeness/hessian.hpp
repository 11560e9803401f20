#pragma once

#include <array>
#include <vector>

#include "tubeness/volume.hpp"

namespace tubeness {

// The six unique entries of the scale-space Hessian at every voxel,
// gamma-normalized by scale^2 so responses are comparable across scales.
struct HessianField {
  Dims dims;
  Spacing spacing;
  double scale_mm;
  std::vector<double> xx, yy, zz, xy, xz, yz;
};

// Eigenvalues of a symmetric 3x3 matrix ordered by |l1| <= |l2| <= |l3|.
struct EigenTriple {
  double l1, l2, l3;
};

// Sampled Gaussian (order 0), first (order 1) or second (order 2) derivative
// taps at the given standard deviation in voxel units, truncated at radius
// ceil(4*sigma). Order 0 is normalized to unit sum; order 2 is corrected to
// zero sum so constants map to exactly zero response.
std::vector<double> gaussian_taps(double sigma_vox, int order);

// Convolves one axis of a volume with the given taps, mirror boundary
// (whole-sample reflection). Lines are processed independently in parallel.
Volume3D convolve_axis(const Volume3D& vol, int axis,
                       const std::vector<double>& taps);

// Second-derivative-of-Gaussian filtering at the given scale (mm). Requires
// isotropic spacing; entries are in 1/mm^2 times scale^2 (gamma exponent 2).
HessianField gaussian_second_derivatives(const Volume3D& vol, double scale_mm);

// Eigenvalues of [[xx,xy,xz],[xy,yy,yz],[xz,yz,zz]] via the trigonometric
// closed form, with a cyclic-Jacobi fallback when the closed form degrades.
// Magnitude ties are broken by placing the more negative value later.
EigenTriple eigen_symmetric_3x3(double xx, double yy, double zz, double xy,
                                double xz, double yz);

}  // namespace tubeness
