#include "tubeness/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "tubeness/parallel.hpp"
#include "tubeness/textio.hpp"

namespace tubeness {

namespace {

VesselnessParams modality_params(const SegmentParams& p,
                                 const PipelineConfig& config, bool is_t1) {
  VesselnessParams vp;
  vp.s_min = p.s_min;
  vp.s_max = p.s_max;
  vp.s_step = config.s_step;
  vp.alpha = config.alpha;
  vp.beta_f = config.beta_f;
  vp.c = config.c;
  vp.polarity = is_t1 ? Polarity::dark : Polarity::bright;
  vp.threshold = is_t1 ? p.t1_threshold : p.t2_threshold;
  return vp;
}

struct CaseResponses {
  std::optional<Volume3D> t1;
  std::optional<Volume3D> t2;
};

CaseResponses compute_responses(const Case& c, const SegmentParams& params,
                                const PipelineConfig& config) {
  if (!c.t1 && !c.t2)
    throw std::runtime_error("case " + c.id + ": no modality present");
  if (!c.roi) throw std::runtime_error("case " + c.id + ": missing ROI");
  if (c.roi->count() == 0)
    throw std::runtime_error("case " + c.id + ": empty ROI");
  CaseResponses r;
  if (c.t1)
    r.t1 = vesselness_multiscale(*c.t1, modality_params(params, config, true));
  if (c.t2)
    r.t2 = vesselness_multiscale(*c.t2, modality_params(params, config, false));
  return r;
}

SegmentCaseResult segment_from_responses(const Case& c,
                                         const CaseResponses& resp,
                                         const SegmentParams& params,
                                         const PipelineConfig& config) {
  std::optional<Mask3D> fused;
  if (resp.t1)
    fused = threshold_response(*resp.t1, *c.roi, params.t1_threshold);
  if (resp.t2) {
    Mask3D m2 = threshold_response(*resp.t2, *c.roi, params.t2_threshold);
    if (!fused) {
      fused = std::move(m2);
    } else {
      for (std::size_t i = 0; i < fused->size(); ++i) {
        if (config.fusion == FusionMode::intersect)
          fused->data()[i] = fused->data()[i] && m2.data()[i];
        else
          fused->data()[i] = fused->data()[i] || m2.data()[i];
      }
    }
  }

  ComponentSet cs = label_components_3d(*fused);
  ComponentSet gated =
      filter_by_length(cs, config.min_length_mm, config.max_length_mm);

  // Rebuild the mask from the gated label map.
  Mask3D mask(fused->dims(), fused->spacing());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = gated.label_map[i] != 0;

  PvsCounts counts = count_pvs(gated, *c.roi, config.axial_axis);
  return {std::move(mask), std::move(gated), counts};
}

}  // namespace

SegmentCaseResult segment_case(const Case& c, const SegmentParams& params,
                               const PipelineConfig& config) {
  CaseResponses resp = compute_responses(c, params, config);
  return segment_from_responses(c, resp, params, config);
}

double objective(const std::vector<Case>& cases, const OrderedLogitModel& model,
                 const SegmentParams& params, const PipelineConfig& config,
                 CountKind kind) {
  model.validate();
  std::vector<std::pair<double, int>> observations;
  observations.reserve(cases.size());
  for (const Case& c : cases) {
    SegmentCaseResult seg = segment_case(c, params, config);
    std::int64_t count =
        kind == CountKind::slice ? seg.counts.slice_count : seg.counts.total_count;
    observations.emplace_back(static_cast<double>(count), c.rating);
  }
  return log_likelihood(model, observations);
}

std::vector<double> AxisSpec::values() const {
  if (!(step > 0.0)) throw std::runtime_error("grid: step must be > 0");
  if (max < min) throw std::runtime_error("grid: max < min");
  std::vector<double> v;
  for (int k = 0;; ++k) {
    double value = min + k * step;
    if (value > max + 1e-6 * step) break;
    v.push_back(value);
  }
  return v;
}

std::size_t OptimizationResult::flat_index(int i0, int i1, int i2,
                                           int i3) const {
  std::size_t n1 = axes[1].size(), n2 = axes[2].size(), n3 = axes[3].size();
  return ((static_cast<std::size_t>(i0) * n1 + i1) * n2 + i2) * n3 + i3;
}

OptimizationResult grid_search(const std::vector<Case>& cases,
                               const OrderedLogitModel& model,
                               const ParamGrid& grid,
                               const PipelineConfig& config, CountKind kind) {
  model.validate();
  if (cases.empty()) throw std::runtime_error("grid_search: no cases");
  for (const Case& c : cases)
    if (c.rating < 0 || c.rating >= model.m)
      throw std::runtime_error("case " + c.id + ": rating outside model range");

  OptimizationResult result;
  result.axes = {grid.s_min.values(), grid.s_max.values(), grid.t1.values(),
                 grid.t2.values()};
  std::size_t total = result.axes[0].size() * result.axes[1].size() *
                      result.axes[2].size() * result.axes[3].size();
  result.logl.assign(total, std::numeric_limits<double>::quiet_NaN());

  bool any_valid = false;
  for (double a : result.axes[0])
    for (double b : result.axes[1]) any_valid = any_valid || a <= b;
  if (!any_valid)
    throw std::runtime_error("grid_search: empty effective grid (s_min > s_max everywhere)");

  std::size_t n_t1 = result.axes[2].size(), n_t2 = result.axes[3].size();
  std::size_t n_thresh = n_t1 * n_t2;

  for (std::size_t i0 = 0; i0 < result.axes[0].size(); ++i0) {
    for (std::size_t i1 = 0; i1 < result.axes[1].size(); ++i1) {
      double s_min = result.axes[0][i0], s_max = result.axes[1][i1];
      if (s_min > s_max) continue;

      // One response per case per modality, shared by the threshold sweep.
      SegmentParams scale_params{s_min, s_max, 0.5, 0.5};
      std::vector<CaseResponses> responses;
      responses.reserve(cases.size());
      for (const Case& c : cases)
        responses.push_back(compute_responses(c, scale_params, config));

      std::vector<double> sweep(n_thresh, 0.0);
      std::exception_ptr error;
      std::mutex error_mutex;
      parallel_for(n_thresh, [&](std::size_t lo, std::size_t hi) {
        try {
          for (std::size_t t = lo; t < hi; ++t) {
            SegmentParams p{s_min, s_max, result.axes[2][t / n_t2],
                            result.axes[3][t % n_t2]};
            std::vector<std::pair<double, int>> observations;
            observations.reserve(cases.size());
            for (std::size_t ci = 0; ci < cases.size(); ++ci) {
              SegmentCaseResult seg =
                  segment_from_responses(cases[ci], responses[ci], p, config);
              std::int64_t count = kind == CountKind::slice
                                       ? seg.counts.slice_count
                                       : seg.counts.total_count;
              observations.emplace_back(static_cast<double>(count),
                                        cases[ci].rating);
            }
            sweep[t] = log_likelihood(model, observations);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
      if (error) std::rethrow_exception(error);

      for (std::size_t t = 0; t < n_thresh; ++t)
        result.logl[result.flat_index(static_cast<int>(i0),
                                      static_cast<int>(i1),
                                      static_cast<int>(t / n_t2),
                                      static_cast<int>(t % n_t2))] = sweep[t];
    }
  }

  // Lexicographic argmax: first strict improvement wins.
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i0 = 0; i0 < result.axes[0].size(); ++i0)
    for (std::size_t i1 = 0; i1 < result.axes[1].size(); ++i1)
      for (std::size_t i2 = 0; i2 < result.axes[2].size(); ++i2)
        for (std::size_t i3 = 0; i3 < result.axes[3].size(); ++i3) {
          double v = result.logl[result.flat_index(
              static_cast<int>(i0), static_cast<int>(i1), static_cast<int>(i2),
              static_cast<int>(i3))];
          if (std::isnan(v)) continue;
          if (!found || v > best) {
            found = true;
            best = v;
            result.best_index = {static_cast<int>(i0), static_cast<int>(i1),
                                 static_cast<int>(i2), static_cast<int>(i3)};
          }
        }
  result.best_logl = best;
  result.best = {result.axes[0][result.best_index[0]],
                 result.axes[1][result.best_index[1]],
                 result.axes[2][result.best_index[2]],
                 result.axes[3][result.best_index[3]]};

  // Per-case counts at the optimum.
  for (const Case& c : cases) {
    SegmentCaseResult seg = segment_case(c, result.best, config);
    CaseAtOptimum row;
    row.id = c.id;
    row.slice_count = seg.counts.slice_count;
    row.total_count = seg.counts.total_count;
    row.count = kind == CountKind::slice ? seg.counts.slice_count
                                         : seg.counts.total_count;
    row.total_volume_mm3 = seg.counts.total_volume_mm3;
    row.rating = c.rating;
    row.probability =
        model.class_probabilities(static_cast<double>(row.count))[c.rating];
    result.per_case.push_back(std::move(row));
  }
  return result;
}

namespace {

int axis_id(const std::string& name) {
  if (name == "s_min") return 0;
  if (name == "s_max") return 1;
  if (name == "t1") return 2;
  if (name == "t2") return 3;
  throw std::runtime_error("unknown surface axis: " + name);
}

}  // namespace

void export_surface(const OptimizationResult& result, const std::string& axis_a,
                    const std::string& axis_b, const std::string& path) {
  int a = axis_id(axis_a), b = axis_id(axis_b);
  if (a == b) throw std::runtime_error("surface axes must differ");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write surface: " + path);
  out << axis_a << ',' << axis_b << ",logl\n";
  for (std::size_t ia = 0; ia < result.axes[a].size(); ++ia) {
    for (std::size_t ib = 0; ib < result.axes[b].size(); ++ib) {
      int idx[4] = {result.best_index[0], result.best_index[1],
                    result.best_index[2], result.best_index[3]};
      idx[a] = static_cast<int>(ia);
      idx[b] = static_cast<int>(ib);
      double v = result.logl[result.flat_index(idx[0], idx[1], idx[2], idx[3])];
      out << fmt_double(result.axes[a][ia]) << ','
          << fmt_double(result.axes[b][ib]) << ','
          << (std::isnan(v) ? std::string("nan") : fmt_double(v)) << '\n';
    }
  }
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

std::vector<Case> load_manifest(const std::string& path,
                                double target_spacing) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("empty manifest: " + path);
  if (header != "id,t1_path,t2_path,roi_path,rating")
    throw std::runtime_error("manifest header must be "
                             "'id,t1_path,t2_path,roi_path,rating': " + path);

  std::vector<Case> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 5) fields.emplace_back();
    if (fields.size() != 5)
      throw std::runtime_error("malformed manifest row: " + line);

    Case c;
    c.id = fields[0];
    try {
      if (!fields[1].empty())
        c.t1 = reslice_isotropic(load_volume(fields[1]), target_spacing);
      if (!fields[2].empty())
        c.t2 = reslice_isotropic(load_volume(fields[2]), target_spacing);
      if (fields[3].empty())
        throw std::runtime_error("missing roi_path");
      c.roi = reslice_mask(load_mask(fields[3]), target_spacing);
      c.rating = std::stoi(fields[4]);
    } catch (const std::exception& e) {
      throw std::runtime_error("case " + c.id + ": " + e.what());
    }
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw std::runtime_error("manifest has no cases: " + path);
  return cases;
}

}  // namespace tubeness
