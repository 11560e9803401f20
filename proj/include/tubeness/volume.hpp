#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tubeness {

using Dims = std::array<int, 3>;
using Spacing = std::array<double, 3>;

// Dense 3D scalar field with physical voxel spacing in mm. Data is stored
// x-fastest: index = x + nx*(y + ny*z). Samples are double internally;
// float32 only at the storage boundary.
//
// Physical convention: the sample at index i lies at physical coordinate
// i * spacing along each axis, so index 0 sits on the volume origin and
// resampling between grids with commensurate spacings hits source samples
// exactly.
class Volume3D {
 public:
  Volume3D(Dims dims, Spacing spacing, double fill = 0.0);
  Volume3D(Dims dims, Spacing spacing, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  std::size_t size() const { return data_.size(); }

  double operator()(int x, int y, int z) const {
    return data_[index(x, y, z)];
  }
  double& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims_[1]) *
                    static_cast<std::size_t>(z));
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double voxel_volume_mm3() const {
    return spacing_[0] * spacing_[1] * spacing_[2];
  }

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<double> data_;
};

// Binary region on a Volume3D grid; one byte per voxel, values 0/1.
class Mask3D {
 public:
  Mask3D(Dims dims, Spacing spacing, std::uint8_t fill = 0);
  Mask3D(Dims dims, Spacing spacing, std::vector<std::uint8_t> data);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t operator()(int x, int y, int z) const {
    return data_[index(x, y, z)];
  }
  std::uint8_t& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims_[1]) *
                    static_cast<std::size_t>(z));
  }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  std::size_t count() const;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::uint8_t> data_;
};

// Throws if a and b are not on the same grid (dims exactly equal, spacing
// equal to 1e-9 relative).
void require_same_grid(const Dims& da, const Spacing& sa, const Dims& db,
                       const Spacing& sb, const std::string& what);

enum class VolumeFormat { raw_f32, nifti1 };

// Reads a volume. raw_f32 expects <path> plus sidecar <path>.meta; nifti1
// reads an uncompressed single-file .nii (dim[0]=3, scalar datatypes only,
// scl_slope/scl_inter applied). All samples are checked finite.
Volume3D load_volume(const std::string& path, VolumeFormat format);

// Format from file extension: .nii -> nifti1, anything else raw_f32.
VolumeFormat guess_format(const std::string& path);
Volume3D load_volume(const std::string& path);

Mask3D load_mask(const std::string& path);

// Writes little-endian float32 samples to <path> and a text sidecar
// <path>.meta with dims/spacing. Round-trips exactly for values
// representable in 32 bits.
void save_volume(const Volume3D& vol, const std::string& path);
void save_mask(const Mask3D& mask, const std::string& path);

// Trilinear resample onto an isotropic grid with the given spacing. Output
// dims are ceil(n*s/t) per axis; coordinates outside the source grid clamp
// to the nearest edge sample.
Volume3D reslice_isotropic(const Volume3D& vol, double target_spacing);

// Nearest-neighbour resample of a mask on the same grid mapping.
Mask3D reslice_mask(const Mask3D& mask, double target_spacing);

}  // namespace tubeness
