#include "tubeness/hessian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tubeness/kernels.hpp"
#include "tubeness/parallel.hpp"

namespace tubeness {

std::vector<double> gaussian_taps(double sigma_vox, int order) {
  if (!(sigma_vox > 0.0)) throw std::runtime_error("gaussian: sigma must be > 0");
  int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_vox)));
  std::vector<double> taps(2 * radius + 1);
  double s2 = sigma_vox * sigma_vox;
  double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma_vox);
  // Taps are applied by correlation (kern::correlate), so the odd-order
  // kernel is reflected to keep the derivative sign positive.
  for (int k = -radius; k <= radius; ++k) {
    double g = norm * std::exp(-0.5 * k * k / s2);
    double v;
    switch (order) {
      case 0: v = g; break;
      case 1: v = k / s2 * g; break;
      case 2: v = (k * k / (s2 * s2) - 1.0 / s2) * g; break;
      default: throw std::runtime_error("gaussian: order must be 0, 1 or 2");
    }
    taps[k + radius] = v;
  }
  // Sampling plus truncation perturbs the kernel moments, which shows up as
  // a bias against both constants and quadratics. Restore the defining
  // moments: sum 1 for smoothing, first moment 1 for d/dx, zero sum and
  // second moment 2 for d2/dx2. With these, a constant maps to exactly zero
  // and x^2 to exactly 2 away from boundaries.
  if (order == 0) {
    double sum = 0.0;
    for (double t : taps) sum += t;
    for (double& t : taps) t /= sum;
  } else if (order == 1) {
    // antisymmetric, so the zeroth moment is already exactly 0
    double m1 = 0.0;
    for (int k = -radius; k <= radius; ++k) m1 += k * taps[k + radius];
    for (double& t : taps) t /= m1;
  } else {
    double sum = 0.0;
    for (double t : taps) sum += t;
    double corr = sum / static_cast<double>(taps.size());
    for (double& t : taps) t -= corr;
    double m2 = 0.0;
    for (int k = -radius; k <= radius; ++k)
      m2 += 0.5 * k * k * taps[k + radius];
    for (double& t : taps) t /= m2;
  }
  return taps;
}

namespace {

inline int mirror_index(int i, int n) {
  // whole-sample reflection: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = i % period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Volume3D convolve_axis(const Volume3D& vol, int axis,
                       const std::vector<double>& taps) {
  if (axis < 0 || axis > 2) throw std::runtime_error("convolve: bad axis");
  const Dims& d = vol.dims();
  int n = d[axis];
  int radius = static_cast<int>(taps.size() / 2);
  Volume3D out(d, vol.spacing());

  // Iterate over all lines along `axis`. A line is identified by the two
  // orthogonal coordinates; strides address the samples within the line.
  int n_a, n_b;
  std::size_t stride, stride_a, stride_b;
  std::size_t sx = 1, sy = static_cast<std::size_t>(d[0]),
              sz = static_cast<std::size_t>(d[0]) * d[1];
  switch (axis) {
    case 0: stride = sx; n_a = d[1]; stride_a = sy; n_b = d[2]; stride_b = sz; break;
    case 1: stride = sy; n_a = d[0]; stride_a = sx; n_b = d[2]; stride_b = sz; break;
    default: stride = sz; n_a = d[0]; stride_a = sx; n_b = d[1]; stride_b = sy; break;
  }

  std::size_t n_lines = static_cast<std::size_t>(n_a) * n_b;
  parallel_for(n_lines, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> padded(static_cast<std::size_t>(n) + 2 * radius);
    std::vector<double> result(static_cast<std::size_t>(n));
    for (std::size_t line = lo; line < hi; ++line) {
      std::size_t a = line % n_a;
      std::size_t b = line / n_a;
      std::size_t base = a * stride_a + b * stride_b;
      const double* src = vol.data().data() + base;
      for (int i = -radius; i < n + radius; ++i)
        padded[i + radius] = src[static_cast<std::size_t>(mirror_index(i, n)) * stride];
      kern::correlate(padded.data(), static_cast<std::size_t>(n), taps.data(),
                      taps.size(), result.data());
      double* dst = out.data().data() + base;
      for (int i = 0; i < n; ++i) dst[static_cast<std::size_t>(i) * stride] = result[i];
    }
  });
  return out;
}

HessianField gaussian_second_derivatives(const Volume3D& vol, double scale_mm) {
  if (!(scale_mm > 0.0)) throw std::runtime_error("hessian: scale must be > 0");
  const Spacing& sp = vol.spacing();
  double h = sp[0];
  if (std::abs(sp[1] - h) > 1e-9 * h || std::abs(sp[2] - h) > 1e-9 * h)
    throw std::runtime_error("hessian: volume spacing must be isotropic");

  double sigma_vox = scale_mm / h;
  std::vector<double> g0 = gaussian_taps(sigma_vox, 0);
  std::vector<double> g1 = gaussian_taps(sigma_vox, 1);
  std::vector<double> g2 = gaussian_taps(sigma_vox, 2);

  // Derivatives come out in voxel units; 1/h^2 converts to mm, scale^2 is
  // the gamma normalization.
  double norm = scale_mm * scale_mm / (h * h);

  HessianField field;
  field.dims = vol.dims();
  field.spacing = sp;
  field.scale_mm = scale_mm;

  // Shared z-pass intermediates, then y passes, then x passes.
  Volume3D az = convolve_axis(vol, 2, g0);   // for xx, yy, xy
  Volume3D bz = convolve_axis(vol, 2, g1);   // for xz, yz
  Volume3D cz = convolve_axis(vol, 2, g2);   // for zz

  Volume3D ayy = convolve_axis(az, 1, g2);
  Volume3D ay0 = convolve_axis(az, 1, g0);
  Volume3D ay1 = convolve_axis(az, 1, g1);
  Volume3D by0 = convolve_axis(bz, 1, g0);
  Volume3D by1 = convolve_axis(bz, 1, g1);
  Volume3D cy0 = convolve_axis(cz, 1, g0);

  auto finish = [&](const Volume3D& in, const std::vector<double>& gx) {
    Volume3D res = convolve_axis(in, 0, gx);
    kern::scale_inplace(res.data().data(), res.size(), norm);
    return std::move(res.data());
  };

  field.xx = finish(ay0, g2);
  field.yy = finish(ayy, g0);
  field.zz = finish(cy0, g0);
  field.xy = finish(ay1, g1);
  field.xz = finish(by0, g1);
  field.yz = finish(by1, g0);
  return field;
}

// --------------------------------------------------------------- eigenvalues

namespace {

// Cyclic Jacobi for a symmetric 3x3; deterministic sweep order.
std::array<double, 3> jacobi_eigenvalues(double xx, double yy, double zz,
                                         double xy, double xz, double yz) {
  double a[3][3] = {{xx, xy, xz}, {xy, yy, yz}, {xz, yz, zz}};
  for (int sweep = 0; sweep < 32; ++sweep) {
    double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double apq = a[p][q];
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = 0.0;
        a[q][p] = 0.0;
        int r = 3 - p - q;  // the remaining index
        double arp = a[r][p], arq = a[r][q];
        a[r][p] = c * arp - s * arq;
        a[p][r] = a[r][p];
        a[r][q] = s * arp + c * arq;
        a[q][r] = a[r][q];
      }
    }
  }
  return {a[0][0], a[1][1], a[2][2]};
}

inline double char_poly(double l, double xx, double yy, double zz, double xy,
                        double xz, double yz) {
  // det(H - l I)
  double a = xx - l, b = yy - l, c = zz - l;
  return a * (b * c - yz * yz) - xy * (xy * c - yz * xz) +
         xz * (xy * yz - b * xz);
}

}  // namespace

EigenTriple eigen_symmetric_3x3(double xx, double yy, double zz, double xy,
                                double xz, double yz) {
  std::array<double, 3> eig;
  double off2 = xy * xy + xz * xz + yz * yz;
  if (off2 == 0.0) {
    eig = {xx, yy, zz};
  } else {
    double q = (xx + yy + zz) / 3.0;
    double dxx = xx - q, dyy = yy - q, dzz = zz - q;
    double p2 = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * off2;
    double p = std::sqrt(p2 / 6.0);
    // det((H - q I) / p) / 2
    double bxx = dxx / p, byy = dyy / p, bzz = dzz / p;
    double bxy = xy / p, bxz = xz / p, byz = yz / p;
    double r = 0.5 * (bxx * (byy * bzz - byz * byz) -
                      bxy * (bxy * bzz - byz * bxz) +
                      bxz * (bxy * byz - byy * bxz));
    bool degenerate = !(r > -0.999999999 && r < 0.999999999);
    if (!degenerate) {
      double phi = std::acos(r) / 3.0;
      double e0 = q + 2.0 * p * std::cos(phi);
      double e2 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
      double e1 = 3.0 * q - e0 - e2;
      eig = {e0, e1, e2};
      // Closed form can lose digits when roots cluster; verify and fall back.
      double scale = std::sqrt((xx * xx + yy * yy + zz * zz + 2.0 * off2));
      double tol = 1e-11 * scale * scale * scale;
      if (scale > 0.0) {
        for (double l : eig) {
          if (std::abs(char_poly(l, xx, yy, zz, xy, xz, yz)) > tol) {
            degenerate = true;
            break;
          }
        }
      }
    }
    if (degenerate) eig = jacobi_eigenvalues(xx, yy, zz, xy, xz, yz);
  }

  std::sort(eig.begin(), eig.end(), [](double a, double b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    return a > b;  // tie: more negative later
  });
  return {eig[0], eig[1], eig[2]};
}

}  // namespace tubeness
