#include "tubeness/components.hpp"

#include <algorithm>
#include <stdexcept>

namespace tubeness {

namespace {

struct UnionFind {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ComponentSet label_components_3d(const Mask3D& mask) {
  const Dims& d = mask.dims();
  const int nx = d[0], ny = d[1], nz = d[2];
  ComponentSet cs;
  cs.dims = d;
  cs.spacing = mask.spacing();
  cs.label_map.assign(mask.size(), 0);

  // 13 backward neighbours in scan order for 26-connectivity.
  static const int off[13][3] = {
      {-1, -1, -1}, {0, -1, -1}, {1, -1, -1}, {-1, 0, -1}, {0, 0, -1},
      {1, 0, -1},   {-1, 1, -1}, {0, 1, -1},  {1, 1, -1},  {-1, -1, 0},
      {0, -1, 0},   {1, -1, 0},  {-1, 0, 0}};

  UnionFind uf;
  std::vector<std::int32_t> provisional(mask.size(), -1);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        std::size_t idx = mask.index(x, y, z);
        if (!mask.data()[idx]) continue;
        std::int32_t label = -1;
        for (const auto& o : off) {
          int px = x + o[0], py = y + o[1], pz = z + o[2];
          if (px < 0 || px >= nx || py < 0 || py >= ny || pz < 0) continue;
          std::size_t pidx = mask.index(px, py, pz);
          std::int32_t pl = provisional[pidx];
          if (pl < 0) continue;
          if (label < 0)
            label = uf.find(pl);
          else
            uf.unite(label, pl);
        }
        if (label < 0) label = uf.make();
        provisional[idx] = label;
      }

  // Final ids follow the first voxel of each root in scan order.
  std::vector<std::int32_t> root_to_id(uf.parent.size(), 0);
  std::int32_t next_id = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] < 0) continue;
    std::int32_t root = uf.find(provisional[i]);
    if (root_to_id[root] == 0) root_to_id[root] = ++next_id;
    cs.label_map[i] = root_to_id[root];
  }

  cs.components.assign(next_id, Component{});
  for (int k = 0; k < next_id; ++k) {
    cs.components[k].id = k + 1;
    cs.components[k].bbox_min = {nx, ny, nz};
    cs.components[k].bbox_max = {-1, -1, -1};
    cs.components[k].slice_counts.assign(nz, 0);
  }
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        std::int32_t id = cs.label_map[mask.index(x, y, z)];
        if (!id) continue;
        Component& comp = cs.components[id - 1];
        ++comp.voxel_count;
        ++comp.slice_counts[z];
        int xyz[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          comp.bbox_min[a] = std::min(comp.bbox_min[a], xyz[a]);
          comp.bbox_max[a] = std::max(comp.bbox_max[a], xyz[a]);
        }
      }
  for (Component& comp : cs.components) {
    double len = 0.0;
    for (int a = 0; a < 3; ++a) {
      double extent =
          (comp.bbox_max[a] - comp.bbox_min[a] + 1) * cs.spacing[a];
      len = std::max(len, extent);
    }
    comp.length_mm = len;
  }
  return cs;
}

ComponentSet filter_by_length(const ComponentSet& cs, double min_mm,
                              double max_mm) {
  ComponentSet out;
  out.dims = cs.dims;
  out.spacing = cs.spacing;
  out.label_map.assign(cs.label_map.size(), 0);

  std::vector<std::int32_t> remap(cs.components.size() + 1, 0);
  std::int32_t next_id = 0;
  for (const Component& comp : cs.components) {
    if (comp.length_mm >= min_mm && comp.length_mm <= max_mm) {
      remap[comp.id] = ++next_id;
      Component kept = comp;
      kept.id = next_id;
      out.components.push_back(std::move(kept));
    }
  }
  for (std::size_t i = 0; i < cs.label_map.size(); ++i)
    out.label_map[i] = remap[cs.label_map[i]];
  return out;
}

namespace {

// Per-slice tallies of labelled / ROI voxels along `axis`.
void slice_tallies(const ComponentSet& cs, const Mask3D& roi, int axis,
                   std::vector<std::int64_t>& labelled,
                   std::vector<std::int64_t>& roi_area) {
  if (axis < 0 || axis > 2) throw std::runtime_error("slice axis out of range");
  const Dims& d = cs.dims;
  labelled.assign(d[axis], 0);
  roi_area.assign(d[axis], 0);
  std::size_t i = 0;
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x, ++i) {
        int xyz[3] = {x, y, z};
        int s = xyz[axis];
        if (cs.label_map[i]) ++labelled[s];
        if (roi.data()[i]) ++roi_area[s];
      }
}

// 2D 8-connected count of the label-map support within one slice.
std::int64_t count_2d_components(const ComponentSet& cs, int axis, int slice) {
  const Dims& d = cs.dims;
  int au = (axis + 1) % 3, av = (axis + 2) % 3;
  int nu = d[au], nv = d[av];
  auto index3 = [&](int u, int v) {
    int xyz[3];
    xyz[axis] = slice;
    xyz[au] = u;
    xyz[av] = v;
    return static_cast<std::size_t>(xyz[0]) +
           static_cast<std::size_t>(d[0]) *
               (static_cast<std::size_t>(xyz[1]) +
                static_cast<std::size_t>(d[1]) * xyz[2]);
  };

  UnionFind uf;
  std::vector<std::int32_t> labels(static_cast<std::size_t>(nu) * nv, -1);
  static const int off[4][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}};
  for (int v = 0; v < nv; ++v)
    for (int u = 0; u < nu; ++u) {
      if (!cs.label_map[index3(u, v)]) continue;
      std::int32_t label = -1;
      for (const auto& o : off) {
        int pu = u + o[0], pv = v + o[1];
        if (pu < 0 || pu >= nu || pv < 0) continue;
        std::int32_t pl = labels[static_cast<std::size_t>(pv) * nu + pu];
        if (pl < 0) continue;
        if (label < 0)
          label = uf.find(pl);
        else
          uf.unite(label, pl);
      }
      if (label < 0) label = uf.make();
      labels[static_cast<std::size_t>(v) * nu + u] = label;
    }

  std::vector<char> seen(uf.parent.size(), 0);
  std::int64_t count = 0;
  for (std::int32_t l : labels) {
    if (l < 0) continue;
    std::int32_t root = uf.find(l);
    if (!seen[root]) {
      seen[root] = 1;
      ++count;
    }
  }
  return count;
}

}  // namespace

std::vector<double> slice_density(const ComponentSet& cs, const Mask3D& roi,
                                  int axis) {
  require_same_grid(cs.dims, cs.spacing, roi.dims(), roi.spacing(),
                    "slice_density");
  std::vector<std::int64_t> labelled, roi_area;
  slice_tallies(cs, roi, axis, labelled, roi_area);
  std::vector<double> density(labelled.size(), 0.0);
  for (std::size_t s = 0; s < density.size(); ++s)
    if (roi_area[s] > 0)
      density[s] = static_cast<double>(labelled[s]) /
                   static_cast<double>(roi_area[s]);
  return density;
}

PvsCounts count_pvs(const ComponentSet& cs, const Mask3D& roi, int axis) {
  require_same_grid(cs.dims, cs.spacing, roi.dims(), roi.spacing(),
                    "count_pvs");
  PvsCounts counts;
  counts.total_count = cs.count();
  double voxel_vol = cs.spacing[0] * cs.spacing[1] * cs.spacing[2];
  std::int64_t labelled_total = 0;
  for (const Component& comp : cs.components) labelled_total += comp.voxel_count;
  counts.total_volume_mm3 = static_cast<double>(labelled_total) * voxel_vol;

  std::vector<double> density = slice_density(cs, roi, axis);
  int best = 0;
  for (std::size_t s = 1; s < density.size(); ++s)
    if (density[s] > density[best]) best = static_cast<int>(s);
  counts.selected_slice = best;
  counts.slice_count = count_2d_components(cs, axis, best);
  return counts;
}

void save_label_map(const ComponentSet& cs, const std::string& path) {
  Volume3D vol(cs.dims, cs.spacing);
  for (std::size_t i = 0; i < cs.label_map.size(); ++i)
    vol.data()[i] = static_cast<double>(cs.label_map[i]);
  save_volume(vol, path);
}

}  // namespace tubeness
