// Walks one Rydberg state through the chain: polarizability, patch field at a
// few heights, the EIT spectrum it produces, and the field recovered from a fit.
#include <cstdio>

#include "rydsurf/analysis.hpp"
#include "rydsurf/atomic/quantum_defects.hpp"
#include "rydsurf/patch.hpp"
#include "rydsurf/stark.hpp"

int main() {
  using namespace rydsurf;
  const auto table = QuantumDefectTable::load(RYDSURF_DATA_DIR "/rb87_quantum_defects.txt");
  const RydbergState state(29, 0, 0.5, 0.5);
  const auto alpha = polarizability(state, table);
  std::printf("%s  alpha = %.4f MHz/(V/cm)^2\n", state.label().c_str(), alpha.value);

  const PatchModel patch{7e5, 100.0, 130.0};
  const auto grid = detuning_grid(-30.0, 30.0, 241);
  std::printf("%8s %10s %10s %12s %12s\n", "z [um]", "E [V/cm]", "dc [MHz]", "fit dc", "E fit");
  for (double z : {40.0, 80.0, 150.0}) {
    const double field = cloud_averaged_field(z, patch);
    EITParams truth;
    truth.omega_c = 6.0;
    truth.delta_c = stark_shift(alpha, field);
    auto reference_truth = truth;
    reference_truth.omega_c = 0.0;

    const auto ref = fit_reference(spectrum(reference_truth, grid, Noise{0.02, 7}, z));
    const auto fit = fit_eit(spectrum(truth, grid, Noise{0.02, 8}, z), ref);
    if (!fit.dip_found) {
      std::printf("%8.0f %10.4f %10.4f   no dip\n", z, field, truth.delta_c);
      continue;
    }
    const auto e = infer_field(fit.delta_c, alpha.value, fit.delta_c_error);
    std::printf("%8.0f %10.4f %10.4f %6.3f+-%.3f %6.3f+-%.3f\n", z, field, truth.delta_c, fit.delta_c,
                fit.delta_c_error, e.field, e.error);
  }
}
