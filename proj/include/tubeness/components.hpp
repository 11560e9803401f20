#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tubeness/volume.hpp"

namespace tubeness {

struct Component {
  int id = 0;                       // 1-based, contiguous
  std::int64_t voxel_count = 0;
  std::array<int, 3> bbox_min{};    // inclusive index ranges
  std::array<int, 3> bbox_max{};
  double length_mm = 0.0;           // max bounding-box extent in mm
  std::vector<std::int64_t> slice_counts;  // voxels per z slice, size nz
};

// Labelled partition of a mask under 26-connectivity. label_map holds 0 for
// background and the 1-based component id otherwise; ids follow the first
// voxel of each component in x-fastest scan order.
struct ComponentSet {
  Dims dims{};
  Spacing spacing{};
  std::vector<std::int32_t> label_map;
  std::vector<Component> components;

  int count() const { return static_cast<int>(components.size()); }
};

ComponentSet label_components_3d(const Mask3D& mask);

// Keeps components with min_mm <= length_mm <= max_mm (inclusive) and
// relabels contiguously, preserving scan order.
ComponentSet filter_by_length(const ComponentSet& cs, double min_mm,
                              double max_mm);

// density[z] = labelled voxels in slice z / ROI voxels in slice z, along the
// given axis (default z). Slices with empty ROI get density 0.
std::vector<double> slice_density(const ComponentSet& cs, const Mask3D& roi,
                                  int axis = 2);

struct PvsCounts {
  std::int64_t slice_count = 0;   // 2D 8-connected count in the densest slice
  std::int64_t total_count = 0;   // 3D component count
  double total_volume_mm3 = 0.0;
  int selected_slice = 0;
};

// Picks the max-density slice (smallest index on ties), counts 2D
// 8-connected components there, and totals. Empty input yields all zeros.
PvsCounts count_pvs(const ComponentSet& cs, const Mask3D& roi, int axis = 2);

// Label map in the raw volume container, integer ids stored as floats.
void save_label_map(const ComponentSet& cs, const std::string& path);

}  // namespace tubeness
