#include "tubeness/vesselness.hpp"

#include <cmath>
#include <stdexcept>

#include "tubeness/kernels.hpp"
#include "tubeness/parallel.hpp"

namespace tubeness {

void VesselnessParams::validate() const {
  if (!(s_min > 0.0) || !(s_min <= s_max))
    throw std::runtime_error("vesselness: need 0 < s_min <= s_max");
  if (!(s_step > 0.0)) throw std::runtime_error("vesselness: s_step must be > 0");
  if (!(alpha > 0.0) || !(beta_f > 0.0) || !(c > 0.0))
    throw std::runtime_error("vesselness: alpha, beta_f, c must be > 0");
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw std::runtime_error("vesselness: threshold must be in (0,1)");
}

std::vector<double> scale_set(double s_min, double s_max, double s_step) {
  std::vector<double> scales;
  for (int k = 0;; ++k) {
    double s = s_min + k * s_step;
    if (s > s_max + 1e-6 * s_step) break;
    scales.push_back(s);
  }
  return scales;
}

Volume3D vesselness_at_scale(const Volume3D& vol, double scale_mm,
                             const VesselnessParams& params) {
  params.validate();
  HessianField h = gaussian_second_derivatives(vol, scale_mm);

  double inv_2a2 = 1.0 / (2.0 * params.alpha * params.alpha);
  double inv_2b2 = 1.0 / (2.0 * params.beta_f * params.beta_f);
  double inv_2c2 = 1.0 / (2.0 * params.c * params.c);
  bool bright = params.polarity == Polarity::bright;

  Volume3D out(vol.dims(), vol.spacing());
  parallel_for(vol.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      EigenTriple e = eigen_symmetric_3x3(h.xx[i], h.yy[i], h.zz[i], h.xy[i],
                                          h.xz[i], h.yz[i]);
      if (bright ? (e.l2 >= 0.0 || e.l3 >= 0.0)
                 : (e.l2 <= 0.0 || e.l3 <= 0.0)) {
        out.data()[i] = 0.0;
        continue;
      }
      double a2 = std::abs(e.l2), a3 = std::abs(e.l3);
      double ra = a2 / a3;
      double rb = std::abs(e.l1) / std::sqrt(a2 * a3);
      double s2 = e.l1 * e.l1 + e.l2 * e.l2 + e.l3 * e.l3;
      out.data()[i] = (1.0 - std::exp(-ra * ra * inv_2a2)) *
                      std::exp(-rb * rb * inv_2b2) *
                      (1.0 - std::exp(-s2 * inv_2c2));
    }
  });
  return out;
}

Volume3D vesselness_multiscale(const Volume3D& vol,
                               const VesselnessParams& params) {
  params.validate();
  std::vector<double> scales = scale_set(params.s_min, params.s_max,
                                         params.s_step);
  Volume3D resp = vesselness_at_scale(vol, scales[0], params);
  for (std::size_t k = 1; k < scales.size(); ++k) {
    Volume3D next = vesselness_at_scale(vol, scales[k], params);
    kern::max_inplace(resp.data().data(), next.data().data(), resp.size());
  }
  return resp;
}

Mask3D threshold_response(const Volume3D& resp, const Mask3D& roi, double t) {
  require_same_grid(resp.dims(), resp.spacing(), roi.dims(), roi.spacing(),
                    "threshold_response");
  Mask3D mask(resp.dims(), resp.spacing());
  for (std::size_t i = 0; i < resp.size(); ++i)
    mask.data()[i] = (roi.data()[i] != 0 && resp.data()[i] > t) ? 1 : 0;
  return mask;
}

}  // namespace tubeness
