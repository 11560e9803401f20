#include "tubeness/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tubeness {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Distance from point p to segment [a, b].
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = sub(b, a);
  double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? std::clamp(dot(sub(p, a), ab) / len2, 0.0, 1.0) : 0.0;
  Vec3 q{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return norm(sub(p, q));
}

// Minimum distance between two segments, by dense sampling of one against
// exact point-segment distance on the other. Placement only needs a
// conservative estimate, and tubes are short.
double segment_segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0,
                                const Vec3& b1) {
  double len = norm(sub(a1, a0));
  int steps = std::max(2, static_cast<int>(std::ceil(len / 0.25)));
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    Vec3 p{a0[0] + t * (a1[0] - a0[0]), a0[1] + t * (a1[1] - a0[1]),
           a0[2] + t * (a1[2] - a0[2])};
    best = std::min(best, point_segment_distance(p, b0, b1));
  }
  return best;
}

class PhantomRng {
 public:
  explicit PhantomRng(std::uint64_t seed) : rng_(seed) {}

  double uniform01() {
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::vector<Tube> place_tubes(const PhantomSpec& spec, PhantomRng& rng) {
  std::vector<Tube> tubes;
  Vec3 extent{spec.dims[0] * spec.spacing[0], spec.dims[1] * spec.spacing[1],
              spec.dims[2] * spec.spacing[2]};
  int failures = 0;
  while (static_cast<int>(tubes.size()) < spec.n_tubes) {
    if (failures >= 10000)
      throw std::runtime_error("phantom: unsatisfiable tube placement");
    double radius = rng.uniform(spec.radius_min_mm, spec.radius_max_mm);
    double length = rng.uniform(spec.length_min_mm, spec.length_max_mm);
    // uniform direction on the sphere
    double cz = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    Vec3 dir{sz * std::cos(phi), sz * std::sin(phi), cz};

    // centerline endpoints at least 3*radius from every face keeps the tube
    // surface >= 2*radius inside the volume
    double margin = 3.0 * radius;
    Vec3 center{rng.uniform(margin, extent[0] - margin),
                rng.uniform(margin, extent[1] - margin),
                rng.uniform(margin, extent[2] - margin)};
    Vec3 p0{center[0] - 0.5 * length * dir[0], center[1] - 0.5 * length * dir[1],
            center[2] - 0.5 * length * dir[2]};
    Vec3 p1{center[0] + 0.5 * length * dir[0], center[1] + 0.5 * length * dir[1],
            center[2] + 0.5 * length * dir[2]};

    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a)
      ok = p0[a] >= margin && p0[a] <= extent[a] - margin && p1[a] >= margin &&
           p1[a] <= extent[a] - margin;
    for (const Tube& other : tubes) {
      if (!ok) break;
      double dist = segment_segment_distance(p0, p1, other.p0, other.p1);
      double dist2 = segment_segment_distance(other.p0, other.p1, p0, p1);
      ok = std::min(dist, dist2) >= spec.min_separation_mm;
    }
    if (ok)
      tubes.push_back({p0, p1, radius});
    else
      ++failures;
  }
  return tubes;
}

}  // namespace

double Tube::length_mm() const { return norm(sub(p1, p0)); }

Phantom generate_phantom(const PhantomSpec& spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec.dims[a] < 8) throw std::runtime_error("phantom: dims too small");
    if (!(spec.spacing[a] > 0.0))
      throw std::runtime_error("phantom: spacing must be > 0");
  }

  PhantomRng rng(spec.seed);
  std::vector<Tube> tubes = spec.tubes;
  if (tubes.empty() && spec.n_tubes > 0) tubes = place_tubes(spec, rng);

  const Dims& d = spec.dims;
  Volume3D profile(d, spec.spacing, 0.0);
  Mask3D truth_mask(d, spec.spacing, 0);

  // Rasterize each tube within its padded bounding box; profiles combine by
  // voxelwise max, which is exact for well-separated tubes.
  for (const Tube& tube : tubes) {
    double sigma = tube.radius_mm / std::sqrt(2.0 * std::numbers::ln2);
    double pad = 4.0 * sigma;
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      double mn = std::min(tube.p0[a], tube.p1[a]) - pad;
      double mx = std::max(tube.p0[a], tube.p1[a]) + pad;
      lo[a] = std::max(0, static_cast<int>(std::floor(mn / spec.spacing[a])));
      hi[a] = std::min(d[a] - 1,
                       static_cast<int>(std::ceil(mx / spec.spacing[a])));
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) {
          Vec3 p{x * spec.spacing[0], y * spec.spacing[1], z * spec.spacing[2]};
          double dist = point_segment_distance(p, tube.p0, tube.p1);
          double v = std::exp(-0.5 * dist * dist / (sigma * sigma));
          std::size_t idx = profile.index(x, y, z);
          if (v > profile.data()[idx]) profile.data()[idx] = v;
          if (dist < tube.radius_mm) truth_mask.data()[idx] = 1;
        }
  }

  double sign = spec.polarity == Polarity::bright ? 1.0 : -1.0;
  Volume3D volume(d, spec.spacing, 0.0);
  for (std::size_t i = 0; i < volume.size(); ++i)
    volume.data()[i] = spec.background + sign * spec.contrast * profile.data()[i];

  if (spec.noise_sigma > 0.0) {
    for (std::size_t i = 0; i < volume.size(); ++i)
      volume.data()[i] += spec.noise_sigma * rng.normal();
  }

  Mask3D roi(d, spec.spacing, 0);
  for (int z = 2; z < d[2] - 2; ++z)
    for (int y = 2; y < d[1] - 2; ++y)
      for (int x = 2; x < d[0] - 2; ++x) roi(x, y, z) = 1;

  Phantom phantom{std::move(volume), std::move(roi), std::move(truth_mask),
                  ComponentSet{}, 0, std::move(tubes)};
  phantom.truth = label_components_3d(phantom.truth_mask);
  phantom.true_count = phantom.truth.count();
  return phantom;
}

int rate_phantom(long true_count, const RatingScale& scale) {
  return scale.class_of(true_count);
}

void save_truth_csv(const std::vector<Tube>& tubes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write truth csv: " + path);
  out << "tube_id,cx,cy,cz,dx,dy,dz,radius_mm,length_mm\n";
  char buf[256];
  int id = 1;
  for (const Tube& t : tubes) {
    double len = t.length_mm();
    Vec3 c{0.5 * (t.p0[0] + t.p1[0]), 0.5 * (t.p0[1] + t.p1[1]),
           0.5 * (t.p0[2] + t.p1[2])};
    Vec3 dir = sub(t.p1, t.p0);
    if (len > 0)
      for (double& v : dir) v /= len;
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", id,
                  c[0], c[1], c[2], dir[0], dir[1], dir[2], t.radius_mm, len);
    out << buf;
    ++id;
  }
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

}  // namespace tubeness
