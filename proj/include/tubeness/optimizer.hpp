#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tubeness/components.hpp"
#include "tubeness/ologit.hpp"
#include "tubeness/vesselness.hpp"
#include "tubeness/volume.hpp"

namespace tubeness {

// One rated subject: co-registered volumes on a common isotropic grid plus
// the ROI mask. At least one modality must be present.
struct Case {
  std::string id;
  std::optional<Volume3D> t1;
  std::optional<Volume3D> t2;
  std::optional<Mask3D> roi;
  int rating = 0;
};

// The four parameters under optimization. T1 reads dark structures, T2
// bright, each with its own response threshold.
struct SegmentParams {
  double s_min = 1.4;
  double s_max = 3.2;
  double t1_threshold = 0.96;
  double t2_threshold = 0.35;
};

enum class FusionMode { intersect, merge };  // merge = voxelwise union

enum class CountKind { slice, total };

// Shared pipeline knobs that stay fixed during optimization.
struct PipelineConfig {
  double s_step = 0.2;
  double alpha = 0.5;
  double beta_f = 0.5;
  double c = 500.0;
  FusionMode fusion = FusionMode::intersect;
  double min_length_mm = 3.0;
  double max_length_mm = 50.0;
  int axial_axis = 2;
};

struct SegmentCaseResult {
  Mask3D mask;
  ComponentSet components;  // length-gated, contiguously labelled
  PvsCounts counts;
};

// Filter both modalities, fuse the thresholded masks, gate component length,
// count. Throws on missing modalities or an empty ROI.
SegmentCaseResult segment_case(const Case& c, const SegmentParams& params,
                               const PipelineConfig& config);

// Cohort log-likelihood: sum of log P(y = rating_i | count_i) with the
// count picked by `kind`. A failing case aborts the evaluation.
double objective(const std::vector<Case>& cases, const OrderedLogitModel& model,
                 const SegmentParams& params, const PipelineConfig& config,
                 CountKind kind);

struct AxisSpec {
  double min = 0.0, max = 0.0, step = 1.0;
  std::vector<double> values() const;
};

// Table II ranges with the reporting-resolution steps.
struct ParamGrid {
  AxisSpec s_min{0.2, 2.0, 0.2};
  AxisSpec s_max{2.0, 4.0, 0.2};
  AxisSpec t1{0.90, 0.99, 0.01};
  AxisSpec t2{0.05, 0.50, 0.05};
};

struct CaseAtOptimum {
  std::string id;
  std::int64_t count = 0;    // the count used by the objective
  std::int64_t slice_count = 0;
  std::int64_t total_count = 0;
  double total_volume_mm3 = 0.0;
  int rating = 0;
  double probability = 0.0;
};

struct OptimizationResult {
  std::array<std::vector<double>, 4> axes;  // s_min, s_max, t1, t2 values
  std::vector<double> logl;  // flattened [s_min][s_max][t1][t2], NaN where
                             // s_min > s_max
  std::array<int, 4> best_index{};
  SegmentParams best;
  double best_logl = 0.0;
  std::vector<CaseAtOptimum> per_case;

  std::size_t flat_index(int i0, int i1, int i2, int i3) const;
};

// Exhaustive evaluation over the grid (s_min <= s_max pairs only), reusing
// each (s_min, s_max) vesselness response across the threshold sweep. Ties
// break lexicographically on (s_min, s_max, t1, t2).
OptimizationResult grid_search(const std::vector<Case>& cases,
                               const OrderedLogitModel& model,
                               const ParamGrid& grid,
                               const PipelineConfig& config, CountKind kind);

// CSV `<axis_a>,<axis_b>,logl` with the remaining parameters fixed at their
// optimum. Axis names: s_min, s_max, t1, t2.
void export_surface(const OptimizationResult& result, const std::string& axis_a,
                    const std::string& axis_b, const std::string& path);

// Reads `id,t1_path,t2_path,roi_path,rating` and reslices every input to the
// target isotropic spacing. Errors are reported with the offending case id.
std::vector<Case> load_manifest(const std::string& path,
                                double target_spacing = 1.0);

}  // namespace tubeness
