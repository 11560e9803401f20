#include "tubeness/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tubeness/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw/NIfTI I/O assumes a little-endian host");

namespace tubeness {

namespace {

void check_geometry(const Dims& dims, const Spacing& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0)
      throw std::runtime_error("volume: non-positive dimension");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw std::runtime_error("volume: non-positive spacing");
  }
}

std::size_t voxel_count(const Dims& dims) {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
         static_cast<std::size_t>(dims[2]);
}

}  // namespace

Volume3D::Volume3D(Dims dims, Spacing spacing, double fill)
    : dims_(dims), spacing_(spacing), data_(voxel_count(dims), fill) {
  check_geometry(dims_, spacing_);
}

Volume3D::Volume3D(Dims dims, Spacing spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_geometry(dims_, spacing_);
  if (data_.size() != voxel_count(dims_))
    throw std::runtime_error("volume: data length does not match dims");
}

Mask3D::Mask3D(Dims dims, Spacing spacing, std::uint8_t fill)
    : dims_(dims), spacing_(spacing), data_(voxel_count(dims), fill) {
  check_geometry(dims_, spacing_);
  if (fill > 1) throw std::runtime_error("mask: samples must be 0 or 1");
}

Mask3D::Mask3D(Dims dims, Spacing spacing, std::vector<std::uint8_t> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_geometry(dims_, spacing_);
  if (data_.size() != voxel_count(dims_))
    throw std::runtime_error("mask: data length does not match dims");
  for (std::uint8_t v : data_)
    if (v > 1) throw std::runtime_error("mask: samples must be 0 or 1");
}

std::size_t Mask3D::count() const {
  std::size_t c = 0;
  for (std::uint8_t v : data_) c += v;
  return c;
}

void require_same_grid(const Dims& da, const Spacing& sa, const Dims& db,
                       const Spacing& sb, const std::string& what) {
  if (da != db) throw std::runtime_error(what + ": grid dims mismatch");
  for (int a = 0; a < 3; ++a) {
    double tol = 1e-9 * std::max(sa[a], sb[a]);
    if (std::abs(sa[a] - sb[a]) > tol)
      throw std::runtime_error(what + ": grid spacing mismatch");
  }
}

// ------------------------------------------------------------------ raw I/O

namespace {

struct RawMeta {
  Dims dims;
  Spacing spacing;
  std::string kind = "volume";
};

RawMeta read_meta(const std::string& path) {
  std::ifstream in(path + ".meta");
  if (!in) throw std::runtime_error("cannot open sidecar: " + path + ".meta");
  RawMeta meta{};
  bool have_dims = false, have_spacing = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dims") {
      ls >> meta.dims[0] >> meta.dims[1] >> meta.dims[2];
      if (!ls) throw std::runtime_error("malformed dims in " + path + ".meta");
      have_dims = true;
    } else if (key == "spacing") {
      ls >> meta.spacing[0] >> meta.spacing[1] >> meta.spacing[2];
      if (!ls)
        throw std::runtime_error("malformed spacing in " + path + ".meta");
      have_spacing = true;
    } else if (key == "kind") {
      ls >> meta.kind;
    } else {
      throw std::runtime_error("unknown key '" + key + "' in " + path +
                               ".meta");
    }
  }
  if (!have_dims || !have_spacing)
    throw std::runtime_error("sidecar missing dims/spacing: " + path +
                             ".meta");
  return meta;
}

std::vector<float> read_raw_samples(const std::string& path,
                                    std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<float> samples(expected);
  in.read(reinterpret_cast<char*>(samples.data()),
          static_cast<std::streamsize>(expected * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(float))
    throw std::runtime_error("short data in " + path);
  return samples;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_meta(const std::string& path, const Dims& dims,
                const Spacing& spacing, const std::string& kind) {
  std::ofstream out(path + ".meta");
  if (!out) throw std::runtime_error("cannot write sidecar: " + path + ".meta");
  out << "dims " << dims[0] << ' ' << dims[1] << ' ' << dims[2] << '\n';
  out << "spacing " << format_double(spacing[0]) << ' '
      << format_double(spacing[1]) << ' ' << format_double(spacing[2]) << '\n';
  out << "kind " << kind << '\n';
  if (!out) throw std::runtime_error("I/O error writing " + path + ".meta");
}

void write_raw_samples(const std::string& path, const std::vector<float>& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out.write(reinterpret_cast<const char*>(s.data()),
            static_cast<std::streamsize>(s.size() * sizeof(float)));
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

}  // namespace

void save_volume(const Volume3D& vol, const std::string& path) {
  std::vector<float> samples(vol.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = static_cast<float>(vol.data()[i]);
  write_raw_samples(path, samples);
  write_meta(path, vol.dims(), vol.spacing(), "volume");
}

void save_mask(const Mask3D& mask, const std::string& path) {
  std::vector<float> samples(mask.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = mask.data()[i] ? 1.0f : 0.0f;
  write_raw_samples(path, samples);
  write_meta(path, mask.dims(), mask.spacing(), "mask");
}

// ------------------------------------------------------------------ NIfTI-1

namespace {

template <typename T>
T read_field(const char* hdr, std::size_t offset) {
  T v;
  std::memcpy(&v, hdr + offset, sizeof(T));
  return v;
}

Volume3D load_nifti1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char hdr[348];
  in.read(hdr, sizeof(hdr));
  if (in.gcount() != sizeof(hdr))
    throw std::runtime_error("malformed header (short) in " + path);

  std::int32_t sizeof_hdr = read_field<std::int32_t>(hdr, 0);
  if (sizeof_hdr != 348) {
    if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348)
      throw std::runtime_error("big-endian NIfTI not supported: " + path);
    throw std::runtime_error("malformed header in " + path);
  }
  if (std::strncmp(hdr + 344, "n+1", 3) != 0)
    throw std::runtime_error("not a single-file NIfTI-1 (magic) in " + path);

  std::int16_t ndim = read_field<std::int16_t>(hdr, 40);
  if (ndim != 3)
    throw std::runtime_error("only 3D NIfTI volumes accepted: " + path);

  Dims dims{read_field<std::int16_t>(hdr, 42), read_field<std::int16_t>(hdr, 44),
            read_field<std::int16_t>(hdr, 46)};
  Spacing spacing{read_field<float>(hdr, 80), read_field<float>(hdr, 84),
                  read_field<float>(hdr, 88)};
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw std::runtime_error("non-positive dim in " + path);
    if (!(spacing[a] > 0.0f))
      throw std::runtime_error("non-positive pixdim in " + path);
  }

  std::int16_t datatype = read_field<std::int16_t>(hdr, 70);
  float vox_offset = read_field<float>(hdr, 108);
  float scl_slope = read_field<float>(hdr, 112);
  float scl_inter = read_field<float>(hdr, 116);
  double slope = (scl_slope == 0.0f) ? 1.0 : static_cast<double>(scl_slope);
  double inter = static_cast<double>(scl_inter);

  std::size_t nvox = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::size_t elem_size;
  switch (datatype) {
    case 2: elem_size = 1; break;    // uint8
    case 4: elem_size = 2; break;    // int16
    case 8: elem_size = 4; break;    // int32
    case 16: elem_size = 4; break;   // float32
    case 64: elem_size = 8; break;   // float64
    default:
      throw std::runtime_error("unsupported NIfTI datatype " +
                               std::to_string(datatype) + " in " + path);
  }

  in.seekg(static_cast<std::streamoff>(vox_offset));
  std::vector<char> raw(nvox * elem_size);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::runtime_error("short data in " + path);

  std::vector<double> data(nvox);
  const char* p = raw.data();
  for (std::size_t i = 0; i < nvox; ++i) {
    double v;
    switch (datatype) {
      case 2: v = static_cast<double>(read_field<std::uint8_t>(p, i)); break;
      case 4: v = static_cast<double>(read_field<std::int16_t>(p, 2 * i)); break;
      case 8: v = static_cast<double>(read_field<std::int32_t>(p, 4 * i)); break;
      case 16: v = static_cast<double>(read_field<float>(p, 4 * i)); break;
      default: v = read_field<double>(p, 8 * i); break;
    }
    data[i] = v * slope + inter;
  }
  return Volume3D(dims, spacing, std::move(data));
}

}  // namespace

VolumeFormat guess_format(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".nii") == 0)
    return VolumeFormat::nifti1;
  return VolumeFormat::raw_f32;
}

Volume3D load_volume(const std::string& path, VolumeFormat format) {
  Volume3D vol = [&] {
    if (format == VolumeFormat::nifti1) return load_nifti1(path);
    RawMeta meta = read_meta(path);
    check_geometry(meta.dims, meta.spacing);
    std::vector<float> samples = read_raw_samples(path, voxel_count(meta.dims));
    std::vector<double> data(samples.begin(), samples.end());
    return Volume3D(meta.dims, meta.spacing, std::move(data));
  }();
  for (double v : vol.data())
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite sample in " + path);
  return vol;
}

Volume3D load_volume(const std::string& path) {
  return load_volume(path, guess_format(path));
}

Mask3D load_mask(const std::string& path) {
  Volume3D vol = load_volume(path, guess_format(path));
  std::vector<std::uint8_t> bits(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    double v = vol.data()[i];
    if (v != 0.0 && v != 1.0)
      throw std::runtime_error("mask sample not 0/1 in " + path);
    bits[i] = v != 0.0;
  }
  return Mask3D(vol.dims(), vol.spacing(), std::move(bits));
}

// ------------------------------------------------------------- resampling

namespace {

Dims resliced_dims(const Dims& dims, const Spacing& spacing, double t) {
  Dims out;
  for (int a = 0; a < 3; ++a) {
    double extent = static_cast<double>(dims[a]) * spacing[a] / t;
    out[a] = static_cast<int>(std::ceil(extent - 1e-9));
    if (out[a] < 1) out[a] = 1;
  }
  return out;
}

}  // namespace

Volume3D reslice_isotropic(const Volume3D& vol, double target_spacing) {
  if (!(target_spacing > 0.0))
    throw std::runtime_error("reslice: target spacing must be > 0");
  const Dims& d = vol.dims();
  const Spacing& s = vol.spacing();
  Dims od = resliced_dims(d, s, target_spacing);
  Volume3D out(od, {target_spacing, target_spacing, target_spacing});

  auto src_coord = [&](int j, int axis) {
    double u = static_cast<double>(j) * target_spacing / s[axis];
    return std::clamp(u, 0.0, static_cast<double>(d[axis] - 1));
  };

  parallel_for(static_cast<std::size_t>(od[2]), [&](std::size_t z0,
                                                    std::size_t z1) {
    for (std::size_t zi = z0; zi < z1; ++zi) {
      int z = static_cast<int>(zi);
      double w = src_coord(z, 2);
      int k0 = static_cast<int>(w);
      int k1 = std::min(k0 + 1, d[2] - 1);
      double fz = w - k0;
      for (int y = 0; y < od[1]; ++y) {
        double v = src_coord(y, 1);
        int j0 = static_cast<int>(v);
        int j1 = std::min(j0 + 1, d[1] - 1);
        double fy = v - j0;
        for (int x = 0; x < od[0]; ++x) {
          double u = src_coord(x, 0);
          int i0 = static_cast<int>(u);
          int i1 = std::min(i0 + 1, d[0] - 1);
          double fx = u - i0;
          double c00 = vol(i0, j0, k0) * (1 - fx) + vol(i1, j0, k0) * fx;
          double c10 = vol(i0, j1, k0) * (1 - fx) + vol(i1, j1, k0) * fx;
          double c01 = vol(i0, j0, k1) * (1 - fx) + vol(i1, j0, k1) * fx;
          double c11 = vol(i0, j1, k1) * (1 - fx) + vol(i1, j1, k1) * fx;
          double c0 = c00 * (1 - fy) + c10 * fy;
          double c1 = c01 * (1 - fy) + c11 * fy;
          out(x, y, z) = c0 * (1 - fz) + c1 * fz;
        }
      }
    }
  });
  return out;
}

Mask3D reslice_mask(const Mask3D& mask, double target_spacing) {
  if (!(target_spacing > 0.0))
    throw std::runtime_error("reslice: target spacing must be > 0");
  const Dims& d = mask.dims();
  const Spacing& s = mask.spacing();
  Dims od = resliced_dims(d, s, target_spacing);
  Mask3D out(od, {target_spacing, target_spacing, target_spacing});

  auto nearest = [&](int j, int axis) {
    double u = static_cast<double>(j) * target_spacing / s[axis];
    int i = static_cast<int>(std::lround(u));
    return std::clamp(i, 0, d[axis] - 1);
  };

  parallel_for(static_cast<std::size_t>(od[2]), [&](std::size_t z0,
                                                    std::size_t z1) {
    for (std::size_t zi = z0; zi < z1; ++zi) {
      int z = static_cast<int>(zi);
      int k = nearest(z, 2);
      for (int y = 0; y < od[1]; ++y) {
        int j = nearest(y, 1);
        for (int x = 0; x < od[0]; ++x) out(x, y, z) = mask(nearest(x, 0), j, k);
      }
    }
  });
  return out;
}

}  // namespace tubeness
