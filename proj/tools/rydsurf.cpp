#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rydsurf/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kParse = 2, kModel = 3, kFit = 4 };

rydsurf::RunConfig config_from(const std::string& path, const std::optional<std::uint64_t>& seed) {
  if (path.empty()) throw rydsurf::ParseError("--config is required");
  auto c = rydsurf::load_run_config(path);
  if (seed) c.seed = *seed;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface-field analysis with Rydberg EIT spectra"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
  };
  auto* stark = app.add_subcommand("stark", "polarizabilities of the configured states");
  auto* synth = app.add_subcommand("synth", "synthetic spectra from a patch-field truth");
  auto* analyze = app.add_subcommand("analyze", "spectra -> shifts -> fields -> patch model");
  auto* patch_fit = app.add_subcommand("patch-fit", "patch model fit of a field-sample CSV");
  auto* validate = app.add_subcommand("validate", "check shipped constants and unit conversions");
  for (auto* s : {stark, synth, analyze, patch_fit}) add_common(s, true);
  add_common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    const std::filesystem::path out(out_dir);
    if (*stark) {
      const auto doc = rydsurf::run_stark(config_from(config_path, seed), out);
      for (const auto& p : doc["polarizabilities"]) {
        std::cout << p["label"].get<std::string>() << "  alpha = " << p["alpha_mhz_per_vcm2"].get<double>()
                  << " MHz/(V/cm)^2\n";
      }
    } else if (*synth) {
      const auto r = rydsurf::synth_experiment(config_from(config_path, seed), out);
      std::cout << "wrote " << r.manifest_path.string() << "\nshift range " << r.min_shift_mhz << " .. "
                << r.max_shift_mhz << " MHz\n";
    } else if (*analyze) {
      const auto r = rydsurf::run_analysis(config_from(config_path, seed), out);
      std::ifstream summary(out / "summary.txt");
      std::cout << summary.rdbuf();
      if (r.patch.poor_fit) std::cerr << "warning: patch model is a poor description of the field samples\n";
    } else if (*patch_fit) {
      const auto f = rydsurf::run_patch_fit(config_from(config_path, seed), out);
      std::cout << "d0 = " << f.model.d0 << " +- " << f.d0_error << " Debye/um^2, w = " << f.model.w_um << " +- "
                << f.w_error << " um, p = " << f.p_value << "\n";
    } else if (*validate) {
      std::filesystem::path defects;
      if (!config_path.empty()) defects = config_from(config_path, seed).quantum_defects_file;
      bool all = true;
      for (const auto& c : rydsurf::validate_constants(defects)) {
        std::cout << (c.ok() ? "ok   " : "FAIL ") << c.name << "  rel.err " << c.relative_error() << "\n";
        all = all && c.ok();
      }
      return all ? kOk : kModel;
    }
  } catch (const rydsurf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const rydsurf::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kModel;
  } catch (const rydsurf::FitError& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return kFit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModel;
  }
  return kOk;
}
