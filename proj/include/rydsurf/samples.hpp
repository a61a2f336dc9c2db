#pragma once

#include <vector>

#include "rydsurf/atomic/state.hpp"

namespace rydsurf {

/// Coupling-detuning shift of one state at one distance, offset removed.
struct ShiftPoint {
  double z_um = 0.0;
  double delta_c_mhz = 0.0;
  double error_mhz = 0.0;
  RydbergState state{5, 0, 0.5, 0.5};
};

struct ShiftCurve {
  RydbergState state{5, 0, 0.5, 0.5};
  /// Subtracted large-distance offset and its uncertainty.
  double offset_mhz = 0.0;
  double offset_error_mhz = 0.0;
  std::vector<ShiftPoint> points;
  /// Distances whose spectra showed no significant transparency dip.
  std::vector<double> null_z_um;
};

struct FieldSample {
  double z_um = 0.0;
  double field_v_per_cm = 0.0;
  double error_v_per_cm = 0.0;
  RydbergState state{5, 0, 0.5, 0.5};
};

}  // namespace rydsurf
