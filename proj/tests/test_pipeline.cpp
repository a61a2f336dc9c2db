#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rydsurf/pipeline.hpp"

namespace rydsurf {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("rydsurf_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json small_config() {
  return json::parse(R"({
    "states": [{"n": 26, "l": 0, "j": 0.5, "mj": 0.5}, {"n": 29, "l": 2, "j": 2.5, "mj": 0.5}],
    "z_grid_um": [50, 80, 120, 160],
    "scan": {"start_mhz": -25, "stop_mhz": 25, "points": 151},
    "seed": 5,
    "noise_rms_od": 0.02,
    "truth": {"patch": {"d0_debye_per_um2": 7e5, "w_um": 100, "sigma_y_um": 130},
              "eit": {"omega_c_mhz": 6.0, "gamma_c_mhz": 0.6}}
  })");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = small_config();
  j["z_grid"] = {1, 2};
  EXPECT_THROW(parse_config(j), ParseError);
  j = small_config();
  j["truth"]["patch"]["d0"] = 1.0;
  EXPECT_THROW(parse_config(j), ParseError);
  j = small_config();
  j["states"][0]["l"] = 7;
  EXPECT_THROW(parse_config(j), ParseError);
  j = small_config();
  j["scan"]["points"] = 1;
  EXPECT_THROW(parse_config(j), ParseError);
  j = small_config();
  j["analysis"] = {{"cloud_average", "median"}};
  EXPECT_THROW(parse_config(j), ParseError);
}

TEST(Config, JsonRoundTrip) {
  const auto c = parse_config(small_config());
  const auto again = parse_config(config_json(c));
  EXPECT_EQ(config_json(again), config_json(c));
  EXPECT_EQ(again.states.size(), 2u);
  ASSERT_TRUE(again.truth);
  EXPECT_DOUBLE_EQ(again.truth->patch.d0, 7e5);
}

TEST(Csv, SpectrumRoundTripIsExact) {
  EITParams p;
  p.omega_c = 3.0;
  p.delta_c = 1.0 / 3.0;
  const auto s = spectrum(p, detuning_grid(-10, 10, 41), Noise{0.02, 1}, 70.0);
  const auto dir = scratch("csv");
  io::write_spectrum(dir / "s.csv", s);
  const auto back = io::read_spectrum(dir / "s.csv");
  EXPECT_EQ(back.detunings, s.detunings);
  EXPECT_EQ(back.od, s.od);
  EXPECT_EQ(back.sigma, s.sigma);
  EXPECT_EQ(back.z_um, 70.0);
  EXPECT_FALSE(fs::exists(dir / "s.csv.tmp"));
}

TEST(Csv, CorruptInputsAreParseErrors) {
  const auto dir = scratch("corrupt");
  std::ofstream(dir / "header.csv") << "detuning,od,sigma,z_um\n1,2,3,4\n";
  EXPECT_THROW(io::read_spectra(dir / "header.csv"), ParseError);
  std::ofstream(dir / "cell.csv") << io::kSpectrumHeader << "\n1,abc,0,4\n";
  EXPECT_THROW(io::read_spectra(dir / "cell.csv"), ParseError);
  std::ofstream(dir / "cols.csv") << io::kSpectrumHeader << "\n1,2,0\n";
  EXPECT_THROW(io::read_spectra(dir / "cols.csv"), ParseError);
  std::ofstream(dir / "order.csv") << io::kSpectrumHeader << "\n2,1,0,4\n1,1,0,4\n";
  EXPECT_THROW(io::read_spectra(dir / "order.csv"), ParseError);
  EXPECT_THROW(io::read_spectra(dir / "missing.csv"), ParseError);
}

TEST(Csv, FieldSamplesRoundTrip) {
  const std::vector<FieldSample> f{{40.0, 5.5, 0.25, RydbergState(29, 2, 2.5, -0.5)}, {80.0, 3.0, 0.1, RydbergState(26, 0, 0.5, 0.5)}};
  const auto dir = scratch("field");
  io::write_field_samples(dir / "f.csv", f);
  const auto back = io::read_field_samples(dir / "f.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].state, f[0].state);
  EXPECT_EQ(back[1].field_v_per_cm, 3.0);
}

TEST(Synth, ZeroDipoleDensityGivesZeroShift) {
  auto j = small_config();
  j["truth"]["patch"]["d0_debye_per_um2"] = 0.0;
  const auto dir = scratch("zero");
  const auto r = synth_experiment(parse_config(j), dir);
  EXPECT_EQ(r.min_shift_mhz, 0.0);
  EXPECT_EQ(r.max_shift_mhz, 0.0);
  for (const auto& g : r.manifest["ground_truth"]) {
    for (const auto& d : g["distances"]) EXPECT_EQ(d["mean_delta_c_mhz"].get<double>(), 0.0);
  }
}

TEST(Synth, DeterministicForFixedSeed) {
  const auto c = parse_config(small_config());
  const auto a = scratch("det_a"), b = scratch("det_b");
  synth_experiment(c, a);
  synth_experiment(c, b);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  auto other = c;
  other.seed = 6;
  const auto d = scratch("det_c");
  synth_experiment(other, d);
  EXPECT_NE(slurp(a / "spectra" / "n26_l0_j1-2_mj1-2_eit.csv"), slurp(d / "spectra" / "n26_l0_j1-2_mj1-2_eit.csv"));
}

TEST(Synth, DemoTruthStaysInObservedEnvelope) {
  const auto c = load_run_config(RYDSURF_SOURCE_DIR "/demo/patch_run.json");
  const auto r = synth_experiment(c, scratch("envelope"));
  EXPECT_GE(r.min_shift_mhz, -15.0);
  EXPECT_LE(r.max_shift_mhz, 20.0);
  EXPECT_LT(r.min_shift_mhz, 0.0);  // d5/2 states shift the other way
}

TEST(Analysis, SubsetsAgreeOnThePatch) {
  const auto c = load_run_config(RYDSURF_SOURCE_DIR "/demo/patch_run.json");
  const auto dir = scratch("subsets");
  const auto synth = synth_experiment(c, dir);
  const auto manifest = load_run_config(synth.manifest_path);
  auto subset = [&](int l, int two_j) {
    auto s = manifest;
    s.inputs.clear();
    s.states.clear();
    for (const auto& in : manifest.inputs) {
      if (in.state.l() == l && in.state.two_j() == two_j) {
        s.inputs.push_back(in);
        s.states.push_back({in.state, {}});
      }
    }
    return run_analysis(s, dir / ("fit_" + std::to_string(l) + std::to_string(two_j))).patch;
  };
  const auto ps = subset(0, 1);
  const auto pd = subset(2, 5);
  const double d0_sigma = std::hypot(ps.d0_error, pd.d0_error);
  const double w_sigma = std::hypot(ps.w_error, pd.w_error);
  EXPECT_LT(std::abs(ps.model.d0 - pd.model.d0), 3.0 * d0_sigma) << ps.model.d0 << " vs " << pd.model.d0;
  EXPECT_LT(std::abs(ps.model.w_um - pd.model.w_um), 3.0 * w_sigma) << ps.model.w_um << " vs " << pd.model.w_um;
}

TEST(Analysis, WritesReportAndLabelsFailures) {
  const auto dir = scratch("report");
  const auto synth = synth_experiment(parse_config(small_config()), dir);
  const auto res = run_analysis(load_run_config(synth.manifest_path), dir / "out");
  for (const char* f : {"shift_curves.csv", "field_samples.csv", "patch_model.json", "report.json", "summary.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  EXPECT_EQ(res.report["status"], "ok");
  EXPECT_EQ(io::read_shift_curves(dir / "out" / "shift_curves.csv").size(), 2u);

  // A reference file with the wrong header aborts at the shift-curve stage.
  auto broken = load_run_config(synth.manifest_path);
  std::ofstream(dir / "bad.csv") << "nonsense\n";
  broken.inputs[1].reference_csv = dir / "bad.csv";
  EXPECT_THROW(run_analysis(broken, dir / "broken"), ParseError);
  const auto report = json::parse(slurp(dir / "broken" / "report.json"));
  EXPECT_EQ(report["status"], "failed");
  EXPECT_EQ(report["failed_stage"], "shift_curves");
  EXPECT_TRUE(report["outputs"].empty());
}

TEST(Constants, AllChecksPass) {
  for (const auto& c : validate_constants()) EXPECT_TRUE(c.ok()) << c.name << " rel " << c.relative_error();
}

int cli(const std::string& args) {
  const int status = std::system((std::string(RYDSURF_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  std::ofstream(dir / "cfg.json") << small_config().dump();
  EXPECT_EQ(cli("validate"), 0);
  EXPECT_EQ(cli("synth --config " + (dir / "cfg.json").string() + " --out " + (dir / "run").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "manifest.json"));

  std::ofstream(dir / "garbage.json") << "{ not json";
  EXPECT_EQ(cli("synth --config " + (dir / "garbage.json").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(cli("synth --frobnicate"), 2);

  auto no_truth = small_config();
  no_truth.erase("truth");
  std::ofstream(dir / "no_truth.json") << no_truth.dump();
  EXPECT_EQ(cli("synth --config " + (dir / "no_truth.json").string() + " --out " + (dir / "y").string()), 3);

  // Spectra with no line at all: the reference fit finds nothing.
  std::ofstream(dir / "flat.csv") << io::kSpectrumHeader << "\n";
  {
    std::ofstream flat(dir / "flat.csv", std::ios::app);
    for (double z : {50.0, 80.0, 120.0}) {
      for (int i = 0; i < 41; ++i) flat << (-20.0 + i) << ",0,0.01," << z << "\n";
    }
  }
  json fit_fail = small_config();
  fit_fail["inputs"] = {{{"state", {{"n", 26}, {"l", 0}, {"j", 0.5}, {"mj", 0.5}}},
                         {"eit_csv", (dir / "flat.csv").string()},
                         {"reference_csv", (dir / "flat.csv").string()}}};
  std::ofstream(dir / "fit_fail.json") << fit_fail.dump();
  EXPECT_EQ(cli("analyze --config " + (dir / "fit_fail.json").string() + " --out " + (dir / "z").string()), 4);
}

TEST(Cli, SeedOverrideChangesOutput) {
  const auto dir = scratch("seed");
  std::ofstream(dir / "cfg.json") << small_config().dump();
  const auto cfg = (dir / "cfg.json").string();
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 11 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 11 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 12 --out " + (dir / "c").string()), 0);
  const auto f = fs::path("spectra") / "n26_l0_j1-2_mj1-2_eit.csv";
  EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f));
  EXPECT_NE(slurp(dir / "a" / f), slurp(dir / "c" / f));
}

}  // namespace
}  // namespace rydsurf
