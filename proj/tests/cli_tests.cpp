#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tubeness/ologit.hpp"
#include "tubeness/phantom.hpp"
#include "tubeness/stats.hpp"
#include "tubeness/volume.hpp"

using namespace tubeness;
namespace fs = std::filesystem;

namespace {

const char* kBin = TUBENESS_BIN_PATH;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "tubeness_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  fs::path out = work_dir() / "stdout.txt";
  fs::path err = work_dir() / "stderr.txt";
  std::string cmd = std::string(kBin) + " " + args + " >" + out.string() +
                    " 2>" + err.string();
  int status = std::system(cmd.c_str());
  int code = status < 0 ? status : WEXITSTATUS(status);
  return {code, slurp(out), slurp(err)};
}

// key<space>value lines -> value for key
std::string report_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

}  // namespace

TEST_CASE("calibrate writes a five-class model and is seed-deterministic") {
  fs::path dir = work_dir();
  std::string m1 = (dir / "cal1.txt").string();
  std::string m2 = (dir / "cal2.txt").string();

  RunResult r1 = run("calibrate --scale wardlaw --n 1000 --seed 7 --out " + m1);
  REQUIRE(r1.exit_code == 0);
  OrderedLogitModel model = load_model(m1);
  CHECK(model.m == 5);
  CHECK(model.scale_name == "wardlaw");

  RunResult r2 = run("calibrate --scale wardlaw --n 1000 --seed 7 --out " + m2);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(m1) == slurp(m2));
  // stdout identical apart from the echoed output path
  CHECK(r1.out.substr(0, r1.out.find("model_file")) ==
        r2.out.substr(0, r2.out.find("model_file")));
}

TEST_CASE("calibrate patankar reports boundary ratios near the reference") {
  fs::path dir = work_dir();
  std::string mp = (dir / "calp.txt").string();
  RunResult r = run("calibrate --scale patankar --n 1000 --seed 1 --out " + mp);
  REQUIRE(r.exit_code == 0);
  double anchors[4] = {1.2, 5.0, 10.0, 15.0};
  for (int j = 0; j < 4; ++j) {
    std::string v = report_value(r.out, "boundary" + std::to_string(j));
    REQUIRE(!v.empty());
    CHECK(std::abs(std::stod(v) - anchors[j]) <= 2.0);
  }
}

TEST_CASE("phantom + segment: counts match the generated truth") {
  fs::path dir = work_dir();
  std::string ph = (dir / "ph").string();
  RunResult gen = run("phantom --dims 48,48,48 --n-tubes 5 --separation 9 "
                      "--seed 11 --out " + ph);
  REQUIRE(gen.exit_code == 0);
  long truth = std::stol(report_value(gen.out, "true_count"));
  CHECK(truth == 5);

  std::string seg = (dir / "seg").string();
  RunResult sr = run("segment --t2 " + ph + "_volume.f32raw --roi " + ph +
                     "_roi.f32raw --s-min 0.6 --s-max 1.4 --t2-threshold 0.2 "
                     "--out " + seg);
  REQUIRE(sr.exit_code == 0);

  std::string report = slurp(dir / "seg_report.txt");
  CHECK(std::stol(report_value(report, "total_count")) == truth);
  CHECK(std::stod(report_value(report, "total_volume_mm3")) > 0.0);
  CHECK(!report_value(report, "slice_count").empty());
  CHECK(!report_value(report, "selected_slice").empty());

  Mask3D mask = load_mask(seg + "_mask.f32raw");
  CHECK(mask.count() > 0);
}

TEST_CASE("segment without any modality is a usage error") {
  fs::path dir = work_dir();
  RunResult r = run("segment --roi missing.f32raw --out " +
                    (dir / "x").string());
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("--t1") != std::string::npos);
}

TEST_CASE("segment names the unreadable file in its error") {
  fs::path dir = work_dir();
  RunResult r = run("segment --t2 /no/such/vol.f32raw --roi /no/such/roi.f32raw "
                    "--out " + (dir / "y").string());
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("/no/such/") != std::string::npos);
}

TEST_CASE("filter writes a response map bounded by [0,1]") {
  fs::path dir = work_dir();
  std::string ph = (dir / "phf").string();
  REQUIRE(run("phantom --dims 40,40,40 --n-tubes 3 --separation 9 --seed 3 "
              "--out " + ph).exit_code == 0);
  std::string resp = (dir / "resp.f32raw").string();
  RunResult r = run("filter --in " + ph + "_volume.f32raw --out " + resp +
                    " --s-min 0.8 --s-max 1.2");
  REQUIRE(r.exit_code == 0);
  Volume3D v = load_volume(resp);
  for (double s : v.data()) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("evaluate: monotone table gives rho 1, constant ratings error") {
  fs::path dir = work_dir();
  fs::path csv = dir / "eval.csv";
  {
    std::ofstream out(csv);
    out << "id,count,volume,rating\n";
    for (int i = 0; i < 5; ++i)
      out << "c" << i << ',' << i + 1 << ',' << 10 * (i + 1) << ',' << i << "\n";
  }
  RunResult r = run("evaluate --csv " + csv.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("count_vs_rating rho 1 ") != std::string::npos);
  CHECK(r.out.find("volume_vs_rating rho 1 ") != std::string::npos);

  fs::path flat = dir / "flat.csv";
  {
    std::ofstream out(flat);
    out << "id,count,volume,rating\n";
    for (int i = 0; i < 5; ++i)
      out << "c" << i << ',' << i << ',' << 2 * i << ",3\n";
  }
  RunResult bad = run("evaluate --csv " + flat.string());
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("zero rank variance") != std::string::npos);
}

TEST_CASE("evaluate agrees with the in-process spearman on a random table") {
  fs::path dir = work_dir();
  fs::path csv = dir / "rand48.csv";
  std::vector<double> count, volume, rating;
  std::mt19937_64 rng(2024);
  {
    std::ofstream out(csv);
    out << "id,count,volume,rating\n";
    for (int i = 0; i < 48; ++i) {
      long c = static_cast<long>(rng() % 40);
      double v = static_cast<double>(rng() % 4000) / 4.0;
      int r = static_cast<int>(rng() % 5);
      out << "c" << i << ',' << c << ',' << v << ',' << r << "\n";
      count.push_back(static_cast<double>(c));
      volume.push_back(v);
      rating.push_back(r);
    }
  }
  RunResult r = run("evaluate --csv " + csv.string());
  REQUIRE(r.exit_code == 0);

  CorrelationResult want = spearman(count, rating);
  std::istringstream out(r.out);
  std::string tag, rho_kw, rho_v, p_kw, p_v, n_kw, n_v;
  out >> tag >> rho_kw >> rho_v >> p_kw >> p_v >> n_kw >> n_v;
  CHECK(tag == "count_vs_rating");
  CHECK(std::stod(rho_v) == doctest::Approx(want.rho).epsilon(1e-12));
  CHECK(std::stod(p_v) == doctest::Approx(want.p_value).epsilon(1e-9));
  CHECK(std::stoi(n_v) == 48);
}

TEST_CASE("optimize reports the singleton grid point and errors name case ids") {
  fs::path dir = work_dir();
  std::string ph = (dir / "opt_ph").string();
  RunResult gen = run("phantom --dims 40,40,40 --n-tubes 4 --separation 8 "
                      "--seed 21 --out " + ph);
  REQUIRE(gen.exit_code == 0);
  std::string rating = report_value(gen.out, "rating");

  std::string model_path = (dir / "opt_model.txt").string();
  REQUIRE(run("calibrate --scale wardlaw --seed 2 --out " + model_path)
              .exit_code == 0);

  fs::path manifest = dir / "opt_manifest.csv";
  {
    std::ofstream out(manifest);
    out << "id,t1_path,t2_path,roi_path,rating\n";
    out << "solo,," << ph << "_volume.f32raw," << ph << "_roi.f32raw,"
        << rating << "\n";
  }
  std::string out_dir = (dir / "opt_out").string();
  RunResult r = run("optimize --manifest " + manifest.string() + " --model " +
                    model_path + " --out " + out_dir +
                    " --s-min-grid 0.8:0.8:0.2 --s-max-grid 1.2:1.2:0.2"
                    " --t1-grid 0.96:0.96:0.01 --t2-grid 0.2:0.2:0.05");
  REQUIRE(r.exit_code == 0);
  CHECK(report_value(r.out, "s_min") == "0.8");
  CHECK(report_value(r.out, "t2") == "0.2");
  CHECK(fs::exists(fs::path(out_dir) / "surface_t1_t2.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "counts.csv"));

  fs::path broken = dir / "broken_manifest.csv";
  {
    std::ofstream out(broken);
    out << "id,t1_path,t2_path,roi_path,rating\n";
    out << "ghost,,/missing.f32raw,/missing_roi.f32raw,1\n";
  }
  RunResult bad = run("optimize --manifest " + broken.string() + " --model " +
                      model_path + " --out " + out_dir);
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("ghost") != std::string::npos);
}

TEST_CASE("reruns are byte-identical across thread counts") {
  fs::path dir = work_dir();
  std::string ph = (dir / "det_ph").string();
  REQUIRE(run("--threads 1 phantom --dims 40,40,40 --n-tubes 4 --separation 8 "
              "--noise-sigma 50 --seed 13 --out " + ph + "1").exit_code == 0);
  REQUIRE(run("--threads 4 phantom --dims 40,40,40 --n-tubes 4 --separation 8 "
              "--noise-sigma 50 --seed 13 --out " + ph + "4").exit_code == 0);
  CHECK(slurp(ph + "1_volume.f32raw") == slurp(ph + "4_volume.f32raw"));

  std::string seg = (dir / "det_seg").string();
  REQUIRE(run("--threads 1 segment --t2 " + ph + "1_volume.f32raw --roi " + ph +
              "1_roi.f32raw --s-min 0.6 --s-max 1.2 --t2-threshold 0.2 --out " +
              seg + "1").exit_code == 0);
  REQUIRE(run("--threads 4 segment --t2 " + ph + "1_volume.f32raw --roi " + ph +
              "1_roi.f32raw --s-min 0.6 --s-max 1.2 --t2-threshold 0.2 --out " +
              seg + "4").exit_code == 0);
  CHECK(slurp(seg + "1_mask.f32raw") == slurp(seg + "4_mask.f32raw"));
  CHECK(slurp(seg + "1_report.txt") == slurp(seg + "4_report.txt"));
}

TEST_CASE("TUBENESS_THREADS environment variable is honored") {
  fs::path dir = work_dir();
  std::string ph = (dir / "env_ph").string();
  std::string cmd = std::string("TUBENESS_THREADS=2 ") + kBin +
                    " phantom --dims 24,24,24 --n-tubes 1 --seed 2 --out " + ph +
                    " >/dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
}
