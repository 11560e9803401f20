// tubeness: multiscale tubular-structure segmentation in 3D volumes with
// ordered-logit calibration of the filter parameters against ordinal
// visual-rating labels.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "tubeness/optimizer.hpp"
#include "tubeness/parallel.hpp"
#include "tubeness/phantom.hpp"
#include "tubeness/stats.hpp"
#include "tubeness/textio.hpp"

using namespace tubeness;

namespace {

int axis_index(const std::string& name) {
  if (name == "x") return 0;
  if (name == "y") return 1;
  if (name == "z") return 2;
  throw CLI::ValidationError("--axial-axis must be x, y or z");
}

Polarity parse_polarity(const std::string& name) {
  if (name == "bright") return Polarity::bright;
  if (name == "dark") return Polarity::dark;
  throw CLI::ValidationError("--polarity must be bright or dark");
}

struct GridRange {
  double min = 0.0, max = 0.0, step = 1.0;
};

// "min:max:step"
GridRange parse_grid(const std::string& text) {
  GridRange g;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &g.min, &g.max, &g.step) != 3)
    throw CLI::ValidationError("grid ranges use the form min:max:step");
  return g;
}

struct PipelineFlags {
  double s_step = 0.2;
  double alpha = 0.5;
  double beta_f = 0.5;
  double c = 500.0;
  std::string fusion = "intersect";
  double min_length = 3.0;
  double max_length = 50.0;
  std::string axial_axis = "z";
  double iso_spacing = 1.0;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--s-step", s_step, "Scale lattice step in mm");
    cmd->add_option("--alpha", alpha, "Plate-vs-line sensitivity");
    cmd->add_option("--beta-f", beta_f, "Blobness sensitivity");
    cmd->add_option("--c-sens", c, "Structureness sensitivity (intensity units)");
    cmd->add_option("--fusion", fusion, "Modality fusion: intersect | union")
        ->check(CLI::IsMember({"intersect", "union"}));
    cmd->add_option("--min-length", min_length, "Minimum component length, mm");
    cmd->add_option("--max-length", max_length, "Maximum component length, mm");
    cmd->add_option("--axial-axis", axial_axis,
                    "Axis treated as axial for slice statistics")
        ->check(CLI::IsMember({"x", "y", "z"}));
    cmd->add_option("--iso-spacing", iso_spacing,
                    "Isotropic reslicing target, mm");
  }

  PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.s_step = s_step;
    cfg.alpha = alpha;
    cfg.beta_f = beta_f;
    cfg.c = c;
    cfg.fusion = fusion == "union" ? FusionMode::merge : FusionMode::intersect;
    cfg.min_length_mm = min_length;
    cfg.max_length_mm = max_length;
    cfg.axial_axis = axis_index(axial_axis);
    return cfg;
  }
};

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << body;
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

// ----------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string scale;
  int n = 1000;
  std::uint64_t seed = 1;
  double lognormal_mu = kDefaultLognormalMu;
  double lognormal_sigma = kDefaultLognormalSigma;
  bool bin_on_npc = false;
  std::string out;
  std::string dataset_out;
};

int run_calibrate(const CalibrateArgs& args) {
  RatingScale scale = RatingScale::by_name(args.scale);
  SyntheticRatingDataset ds =
      generate_synthetic(scale, args.n, args.seed, args.lognormal_mu,
                         args.lognormal_sigma, args.bin_on_npc);
  if (!args.dataset_out.empty()) save_dataset_csv(ds, args.dataset_out);

  FitReport report = fit_ordered_logit(ds);
  save_model(report.model, args.out);

  std::vector<std::pair<double, int>> obs;
  for (const SyntheticRating& r : ds.rows)
    obs.emplace_back(static_cast<double>(r.npc), r.rc);

  std::cout << "scale " << scale.name << "\n";
  std::cout << "n " << args.n << "\n";
  std::cout << "seed " << args.seed << "\n";
  std::cout << "converged " << (report.converged ? 1 : 0) << "\n";
  std::cout << "iterations " << report.iterations << "\n";
  std::cout << "loglik " << fmt_double(report.loglik) << "\n";
  std::cout << "beta " << fmt_double(report.model.beta) << "\n";
  for (std::size_t j = 0; j < report.model.mu.size(); ++j)
    std::cout << "mu" << j << " " << fmt_double(report.model.mu[j]) << "\n";
  for (std::size_t j = 0; j < report.model.mu.size(); ++j)
    std::cout << "boundary" << j << " "
              << fmt_double(report.model.mu[j] / report.model.beta) << "\n";
  std::cout << "probability_sum " << fmt_double(probability_sum(report.model, obs))
            << "\n";
  for (int cls : report.empty_classes)
    std::cout << "warning empty_class " << cls << "\n";
  if (report.separated) std::cout << "warning separated_data\n";
  std::cout << "model_file " << args.out << "\n";
  return 0;
}

// ------------------------------------------------------------------- segment

struct SegmentArgs {
  std::string t1_path, t2_path, roi_path, out_prefix;
  SegmentParams params;
  PipelineFlags pipeline;
};

Case load_case(const std::string& id, const std::string& t1_path,
               const std::string& t2_path, const std::string& roi_path,
               double iso_spacing) {
  Case c;
  c.id = id;
  if (!t1_path.empty())
    c.t1 = reslice_isotropic(load_volume(t1_path), iso_spacing);
  if (!t2_path.empty())
    c.t2 = reslice_isotropic(load_volume(t2_path), iso_spacing);
  c.roi = reslice_mask(load_mask(roi_path), iso_spacing);
  return c;
}

int run_segment(const SegmentArgs& args) {
  Case c = load_case("segment", args.t1_path, args.t2_path, args.roi_path,
                     args.pipeline.iso_spacing);
  SegmentCaseResult seg = segment_case(c, args.params, args.pipeline.config());

  save_mask(seg.mask, args.out_prefix + "_mask.f32raw");
  save_label_map(seg.components, args.out_prefix + "_labels.f32raw");

  std::string report;
  report += "s_min " + fmt_double(args.params.s_min) + "\n";
  report += "s_max " + fmt_double(args.params.s_max) + "\n";
  report += "t1_threshold " + fmt_double(args.params.t1_threshold) + "\n";
  report += "t2_threshold " + fmt_double(args.params.t2_threshold) + "\n";
  report += "fusion " + args.pipeline.fusion + "\n";
  report += "slice_count " + std::to_string(seg.counts.slice_count) + "\n";
  report += "total_count " + std::to_string(seg.counts.total_count) + "\n";
  report += "total_volume_mm3 " + fmt_double(seg.counts.total_volume_mm3) + "\n";
  report += "selected_slice " + std::to_string(seg.counts.selected_slice) + "\n";
  write_text_file(args.out_prefix + "_report.txt", report);
  std::cout << report;
  return 0;
}

// ------------------------------------------------------------------ optimize

struct OptimizeArgs {
  std::string manifest, model_path, out_dir;
  std::string s_min_grid = "0.2:2.0:0.2";
  std::string s_max_grid = "2.0:4.0:0.2";
  std::string t1_grid = "0.90:0.99:0.01";
  std::string t2_grid = "0.05:0.50:0.05";
  std::string count_kind = "auto";
  PipelineFlags pipeline;
};

int run_optimize(const OptimizeArgs& args) {
  OrderedLogitModel model = load_model(args.model_path);
  CountKind kind;
  if (args.count_kind == "slice") {
    kind = CountKind::slice;
  } else if (args.count_kind == "total") {
    kind = CountKind::total;
  } else {
    // rating protocol decides: worst-slice scales count in-slice, region
    // scales count the whole ROI
    kind = model.scale_name == "wardlaw" ? CountKind::slice : CountKind::total;
  }

  std::vector<Case> cases = load_manifest(args.manifest, args.pipeline.iso_spacing);

  ParamGrid grid;
  GridRange r;
  r = parse_grid(args.s_min_grid);
  grid.s_min = {r.min, r.max, r.step};
  r = parse_grid(args.s_max_grid);
  grid.s_max = {r.min, r.max, r.step};
  r = parse_grid(args.t1_grid);
  grid.t1 = {r.min, r.max, r.step};
  r = parse_grid(args.t2_grid);
  grid.t2 = {r.min, r.max, r.step};

  OptimizationResult result =
      grid_search(cases, model, grid, args.pipeline.config(), kind);

  std::filesystem::create_directories(args.out_dir);
  auto in_dir = [&](const std::string& name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };

  // Accepted verbatim by `tubeness segment --config <file>`.
  std::string best;
  best += "[segment]\n";
  best += "s-min=" + fmt_double(result.best.s_min) + "\n";
  best += "s-max=" + fmt_double(result.best.s_max) + "\n";
  best += "t1-threshold=" + fmt_double(result.best.t1_threshold) + "\n";
  best += "t2-threshold=" + fmt_double(result.best.t2_threshold) + "\n";
  write_text_file(in_dir("best_params.txt"), best);

  std::string summary;
  summary += "best_logl " + fmt_double(result.best_logl) + "\n";
  summary += "s_min " + fmt_double(result.best.s_min) + "\n";
  summary += "s_max " + fmt_double(result.best.s_max) + "\n";
  summary += "t1 " + fmt_double(result.best.t1_threshold) + "\n";
  summary += "t2 " + fmt_double(result.best.t2_threshold) + "\n";
  summary += "count_kind " +
             std::string(kind == CountKind::slice ? "slice" : "total") + "\n";
  summary += "cases " + std::to_string(cases.size()) + "\n";
  write_text_file(in_dir("summary.txt"), summary);
  std::cout << summary;

  std::string counts = "id,count,volume,rating\n";
  for (const CaseAtOptimum& row : result.per_case)
    counts += row.id + "," + std::to_string(row.count) + "," +
              fmt_double(row.total_volume_mm3) + "," +
              std::to_string(row.rating) + "\n";
  write_text_file(in_dir("counts.csv"), counts);

  export_surface(result, "s_min", "s_max", in_dir("surface_smin_smax.csv"));
  export_surface(result, "s_min", "t1", in_dir("surface_smin_t1.csv"));
  export_surface(result, "s_max", "t1", in_dir("surface_smax_t1.csv"));
  export_surface(result, "t1", "t2", in_dir("surface_t1_t2.csv"));
  return 0;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
  std::string csv;
};

int run_evaluate(const EvaluateArgs& args) {
  std::ifstream in(args.csv);
  if (!in) throw std::runtime_error("cannot open: " + args.csv);
  std::string header;
  if (!std::getline(in, header) || header != "id,count,volume,rating")
    throw std::runtime_error("evaluate expects header id,count,volume,rating in " +
                             args.csv);
  std::vector<double> count, volume, rating;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string id, c, v, r;
    if (!std::getline(ls, id, ',') || !std::getline(ls, c, ',') ||
        !std::getline(ls, v, ',') || !std::getline(ls, r, ','))
      throw std::runtime_error("malformed row in " + args.csv + ": " + line);
    count.push_back(std::stod(c));
    volume.push_back(std::stod(v));
    rating.push_back(std::stod(r));
  }

  CorrelationResult cr = spearman(count, rating);
  CorrelationResult vr = spearman(volume, rating);
  std::cout << "count_vs_rating rho " << fmt_double(cr.rho) << " p "
            << fmt_double(cr.p_value) << " n " << cr.n << "\n";
  std::cout << "volume_vs_rating rho " << fmt_double(vr.rho) << " p "
            << fmt_double(vr.p_value) << " n " << vr.n << "\n";
  return 0;
}

// ------------------------------------------------------------------- phantom

struct PhantomArgs {
  std::vector<int> dims{64, 64, 64};
  double spacing = 1.0;
  int n_tubes = 8;
  double radius_min = 0.8, radius_max = 1.5;
  double length_min = 5.0, length_max = 20.0;
  double separation = 4.0;
  double background = 0.0, contrast = 2000.0;
  std::string polarity = "bright";
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::string scale = "wardlaw";
  std::string out_prefix;
};

int run_phantom(const PhantomArgs& args) {
  if (args.dims.size() != 3)
    throw CLI::ValidationError("--dims takes nx,ny,nz");
  PhantomSpec spec;
  spec.dims = {args.dims[0], args.dims[1], args.dims[2]};
  spec.spacing = {args.spacing, args.spacing, args.spacing};
  spec.n_tubes = args.n_tubes;
  spec.radius_min_mm = args.radius_min;
  spec.radius_max_mm = args.radius_max;
  spec.length_min_mm = args.length_min;
  spec.length_max_mm = args.length_max;
  spec.min_separation_mm = args.separation;
  spec.background = args.background;
  spec.contrast = args.contrast;
  spec.polarity = parse_polarity(args.polarity);
  spec.noise_sigma = args.noise_sigma;
  spec.seed = args.seed;

  Phantom ph = generate_phantom(spec);
  save_volume(ph.volume, args.out_prefix + "_volume.f32raw");
  save_mask(ph.roi, args.out_prefix + "_roi.f32raw");
  save_mask(ph.truth_mask, args.out_prefix + "_truth_mask.f32raw");
  save_truth_csv(ph.tubes, args.out_prefix + "_truth.csv");

  RatingScale scale = RatingScale::by_name(args.scale);
  std::cout << "true_count " << ph.true_count << "\n";
  std::cout << "rating " << rate_phantom(ph.true_count, scale) << "\n";
  std::cout << "scale " << scale.name << "\n";
  return 0;
}

// -------------------------------------------------------------------- filter

struct FilterArgs {
  std::string in_path, out_path;
  std::string polarity = "bright";
  double s_min = 1.4, s_max = 3.2;
  PipelineFlags pipeline;
};

int run_filter(const FilterArgs& args) {
  Volume3D vol = reslice_isotropic(load_volume(args.in_path),
                                   args.pipeline.iso_spacing);
  VesselnessParams params;
  params.s_min = args.s_min;
  params.s_max = args.s_max;
  params.s_step = args.pipeline.s_step;
  params.alpha = args.pipeline.alpha;
  params.beta_f = args.pipeline.beta_f;
  params.c = args.pipeline.c;
  params.polarity = parse_polarity(args.polarity);
  Volume3D resp = vesselness_multiscale(vol, params);
  save_volume(resp, args.out_path);
  std::cout << "response " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tubular-structure segmentation with rating-calibrated filtering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file ([subcommand] sections)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (0 = hardware concurrency)")
      ->envname("TUBENESS_THREADS");

  CalibrateArgs cal;
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "Fit an ordered-logit model on synthetic ratings");
  calibrate->add_option("--scale", cal.scale, "Rating scale: wardlaw | patankar")
      ->required()
      ->check(CLI::IsMember({"wardlaw", "patankar"}));
  calibrate->add_option("--n", cal.n, "Synthetic sample size");
  calibrate->add_option("--seed", cal.seed, "PRNG seed");
  calibrate->add_option("--lognormal-mu", cal.lognormal_mu,
                        "Log-normal location of the count distribution");
  calibrate->add_option("--lognormal-sigma", cal.lognormal_sigma,
                        "Log-normal scale of the count distribution");
  calibrate->add_flag("--bin-on-npc", cal.bin_on_npc,
                      "Assign classes from the noisy count instead of the true count");
  calibrate->add_option("--out", cal.out, "Model file to write")->required();
  calibrate->add_option("--dataset-out", cal.dataset_out,
                        "Optional CSV export of the synthetic dataset");

  SegmentArgs seg;
  CLI::App* segment = app.add_subcommand("segment", "Segment tubular structures in a case");
  segment->add_option("--t1", seg.t1_path, "T1-weighted volume (dark structures)");
  segment->add_option("--t2", seg.t2_path, "T2-weighted volume (bright structures)");
  segment->add_option("--roi", seg.roi_path, "ROI mask")->required();
  segment->add_option("--s-min", seg.params.s_min, "Minimum filter scale, mm");
  segment->add_option("--s-max", seg.params.s_max, "Maximum filter scale, mm");
  segment->add_option("--t1-threshold", seg.params.t1_threshold, "T1 response threshold");
  segment->add_option("--t2-threshold", seg.params.t2_threshold, "T2 response threshold");
  seg.pipeline.add_options(segment);
  segment->add_option("--out", seg.out_prefix, "Output prefix")->required();

  OptimizeArgs opt;
  CLI::App* optimize =
      app.add_subcommand("optimize", "Grid-search filter parameters against ratings");
  optimize->add_option("--manifest", opt.manifest,
                       "Cohort CSV: id,t1_path,t2_path,roi_path,rating")
      ->required();
  optimize->add_option("--model", opt.model_path, "Ordered-logit model file")
      ->required();
  optimize->add_option("--out", opt.out_dir, "Output directory")->required();
  optimize->add_option("--s-min-grid", opt.s_min_grid, "s_min grid min:max:step");
  optimize->add_option("--s-max-grid", opt.s_max_grid, "s_max grid min:max:step");
  optimize->add_option("--t1-grid", opt.t1_grid, "t1 grid min:max:step");
  optimize->add_option("--t2-grid", opt.t2_grid, "t2 grid min:max:step");
  optimize->add_option("--count-kind", opt.count_kind,
                       "Count used by the objective: slice | total | auto")
      ->check(CLI::IsMember({"slice", "total", "auto"}));
  opt.pipeline.add_options(optimize);

  EvaluateArgs eval;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Rank-correlate counts/volumes with ratings");
  evaluate->add_option("--csv", eval.csv, "CSV: id,count,volume,rating")->required();

  PhantomArgs pha;
  CLI::App* phantom = app.add_subcommand("phantom", "Generate a synthetic tube phantom");
  phantom->add_option("--dims", pha.dims, "Volume dims nx,ny,nz")->delimiter(',');
  phantom->add_option("--spacing", pha.spacing, "Isotropic voxel spacing, mm");
  phantom->add_option("--n-tubes", pha.n_tubes, "Number of tubes");
  phantom->add_option("--radius-min", pha.radius_min, "Minimum tube radius, mm");
  phantom->add_option("--radius-max", pha.radius_max, "Maximum tube radius, mm");
  phantom->add_option("--length-min", pha.length_min, "Minimum tube length, mm");
  phantom->add_option("--length-max", pha.length_max, "Maximum tube length, mm");
  phantom->add_option("--separation", pha.separation,
                      "Minimum centerline separation, mm");
  phantom->add_option("--background", pha.background, "Background intensity");
  phantom->add_option("--contrast", pha.contrast, "Tube contrast");
  phantom->add_option("--polarity", pha.polarity, "bright | dark")
      ->check(CLI::IsMember({"bright", "dark"}));
  phantom->add_option("--noise-sigma", pha.noise_sigma, "Additive Gaussian noise");
  phantom->add_option("--seed", pha.seed, "PRNG seed");
  phantom->add_option("--scale", pha.scale, "Rating scale for the printed rating")
      ->check(CLI::IsMember({"wardlaw", "patankar"}));
  phantom->add_option("--out", pha.out_prefix, "Output prefix")->required();

  FilterArgs fil;
  CLI::App* filter =
      app.add_subcommand("filter", "Write the raw vesselness response map");
  filter->add_option("--in", fil.in_path, "Input volume")->required();
  filter->add_option("--out", fil.out_path, "Response volume to write")->required();
  filter->add_option("--polarity", fil.polarity, "bright | dark")
      ->check(CLI::IsMember({"bright", "dark"}));
  filter->add_option("--s-min", fil.s_min, "Minimum filter scale, mm");
  filter->add_option("--s-max", fil.s_max, "Maximum filter scale, mm");
  fil.pipeline.add_options(filter);

  CLI11_PARSE(app, argc, argv);

  set_thread_count(threads);

  try {
    if (*calibrate) return run_calibrate(cal);
    if (*segment) {
      if (seg.t1_path.empty() && seg.t2_path.empty())
        throw std::runtime_error("segment needs --t1 and/or --t2");
      return run_segment(seg);
    }
    if (*optimize) return run_optimize(opt);
    if (*evaluate) return run_evaluate(eval);
    if (*phantom) return run_phantom(pha);
    if (*filter) return run_filter(fil);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
