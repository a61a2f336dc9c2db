#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "patch_oracle.hpp"
#include "rydsurf/patch.hpp"

namespace rydsurf {
namespace {

const PatchModel kPaper{7e5, 100.0, 130.0};

TEST(PatchBracket, LimitsAndAsymptotics) {
  EXPECT_NEAR(patch_bracket(0.0), std::sqrt(std::numbers::pi / 2.0), 1e-15);
  EXPECT_NEAR(patch_bracket(20.0) * 8000.0, 2.0, 0.03 * 2.0);
  EXPECT_NEAR(patch_bracket(30.0) * 27000.0, 2.0, 0.01 * 2.0);
  EXPECT_NEAR(patch_bracket(50.0) * 125000.0, 2.0, 0.003 * 2.0);
  // closed form and large-Z series agree across the switch point
  EXPECT_NEAR(patch_bracket(8.0 - 1e-12), patch_bracket(8.0), 1e-10 * patch_bracket(8.0));
  EXPECT_THROW(patch_bracket(-1.0), ModelError);
  for (double Z = 0.0; Z < 60.0; Z += 0.25) EXPECT_GT(patch_bracket(Z), patch_bracket(Z + 0.25));
}

TEST(OnAxisField, PrefactorAndZeroDistance) {
  EXPECT_NEAR(patch_prefactor(kPaper), 13.1855, 1e-3);
  EXPECT_NEAR(onaxis_field(0.0, kPaper), patch_prefactor(kPaper) * std::sqrt(std::numbers::pi / 2.0), 1e-12);
}

TEST(OnAxisField, MatchesDirectQuadrature) {
  for (double Z : {0.01, 0.05, 0.2, 1.0, 3.0, 10.0, 50.0}) {
    EXPECT_NEAR(patch_bracket(Z), oracle::direct_onaxis(Z), 1e-6 * patch_bracket(Z)) << Z;
  }
  EXPECT_NEAR(onaxis_field(100.0, kPaper), patch_prefactor(kPaper) * oracle::direct_onaxis(1.0), 1e-6 * onaxis_field(100.0, kPaper));
}

TEST(OnAxisField, ScalingProperties) {
  PatchModel doubled = kPaper;
  doubled.d0 *= 2.0;
  EXPECT_NEAR(onaxis_field(70.0, doubled), 2.0 * onaxis_field(70.0, kPaper), 1e-12);
  PatchModel wide = kPaper;
  wide.w_um *= 3.0;
  EXPECT_NEAR(onaxis_field(210.0, wide), onaxis_field(70.0, kPaper) / 3.0, 1e-12);
}

TEST(OffAxisField, OnAxisConsistency) {
  for (double z : {1.0, 20.0, 100.0, 400.0, 5000.0}) {
    const auto f = offaxis_field(0.0, 0.0, z, kPaper);
    EXPECT_NEAR(f.z, onaxis_field(z, kPaper), 1e-6 * onaxis_field(z, kPaper)) << z;
    EXPECT_NEAR(std::hypot(f.x, f.y), 0.0, 1e-9 * f.z);
  }
}

TEST(OffAxisField, AgreesWithHankelRepresentation) {
  for (auto [x, y, z] : {std::tuple{30.0, 120.0, 50.0}, {0.0, 250.0, 20.0}, {-80.0, 10.0, 150.0}}) {
    const auto f = offaxis_field(x, y, z, kPaper);
    const auto h = layer_field(std::hypot(x, y), z, kPaper);
    EXPECT_NEAR(f.z, h[1], 1e-6 * f.norm());
    EXPECT_NEAR(std::hypot(f.x, f.y), h[0], 1e-6 * f.norm());
    // lateral field points away from the patch centre
    EXPECT_GT(f.x * x + f.y * y, 0.0);
  }
}

TEST(OffAxisField, PointSymmetry) {
  const auto a = offaxis_field(40.0, -70.0, 60.0, kPaper);
  const auto b = offaxis_field(-40.0, 70.0, 60.0, kPaper);
  EXPECT_NEAR(a.norm(), b.norm(), 1e-8 * a.norm());
  EXPECT_NEAR(a.x, -b.x, 1e-8 * a.norm());
  EXPECT_NEAR(a.z, b.z, 1e-8 * a.norm());
}

TEST(OffAxisField, FarFieldIsPointDipole) {
  const double z = 50.0 * kPaper.w_um;
  const double moment = 2.0 * std::numbers::pi * kPaper.w_um * kPaper.w_um * kPaper.d0;  // Debye
  const double p_si = units::debye_to_si(moment);
  const double expected = 2.0 * p_si / (4.0 * std::numbers::pi * units::vacuum_permittivity * std::pow(z * units::um, 3)) / 100.0;
  EXPECT_NEAR(offaxis_field(0.0, 0.0, z, kPaper).norm(), expected, 0.01 * expected);
  EXPECT_NEAR(offaxis_field(30.0, 40.0, z, kPaper).norm(), expected, 0.01 * expected);
}

TEST(OffAxisField, Errors) {
  EXPECT_THROW(offaxis_field(0.0, 0.0, 0.0, kPaper), ModelError);
  EXPECT_THROW(offaxis_field(0.0, 0.0, 10.0, PatchModel{1.0, -1.0, 0.0}), ModelError);
  try {
    offaxis_field(0.0, 0.0, 100.0, kPaper, 1e-20);
    FAIL() << "expected QuadratureError";
  } catch (const QuadratureError& e) {
    EXPECT_GT(e.achieved(), 0.0);
  }
}

double reference_cloud_average(double z, const PatchModel& m) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double y) {
    return offaxis_field(0.0, y, z, m, 1e-9).norm() * std::exp(-0.5 * y * y / (m.sigma_y_um * m.sigma_y_um));
  };
  const double num = gauss_kronrod<double, 31>::integrate(f, 0.0, 6.0 * m.sigma_y_um, 8, 1e-10);
  return num / (m.sigma_y_um * std::sqrt(std::numbers::pi / 2.0));
}

TEST(CloudAverage, MatchesAdaptiveReference) {
  for (double z : {20.0, 100.0}) {
    const double ref = reference_cloud_average(z, kPaper);
    EXPECT_NEAR(cloud_averaged_field(z, kPaper), ref, 1e-6 * ref) << z;
  }
}

TEST(CloudAverage, ReducesToOnAxisWithoutCloudWidth) {
  PatchModel point = kPaper;
  point.sigma_y_um = 0.0;
  for (double z : {5.0, 50.0, 500.0}) EXPECT_EQ(cloud_averaged_field(z, point), onaxis_field(z, point));
}

TEST(CloudAverage, BelowPeakAndDecreasing) {
  double last = std::numeric_limits<double>::infinity();
  for (double z = 10.0; z <= 400.0; z += 10.0) {
    const double avg = cloud_averaged_field(z, kPaper);
    const double rms = cloud_averaged_field(z, kPaper, CloudAverage::rms);
    EXPECT_LT(avg, onaxis_field(z, kPaper));
    EXPECT_GE(rms, avg);
    EXPECT_LT(avg, last);
    last = avg;
  }
}

TEST(PowerLaw, ExactPowerLaw) {
  std::vector<double> z, e;
  for (double v = 10.0; v <= 1000.0; v *= 1.5) {
    z.push_back(v);
    e.push_back(3.0 * std::pow(v, -2.0));
  }
  EXPECT_NEAR(power_law_exponent(z, e), -2.0, 1e-12);
  EXPECT_THROW(power_law_exponent(std::vector<double>{1.0}, std::vector<double>{1.0}), ModelError);
}

TEST(PowerLaw, PatchModelNearAndFar) {
  const double near = power_law_exponent(kPaper, 20.0, 200.0);
  EXPECT_NEAR(near, -0.7, 0.15);
  const double far = power_law_exponent(kPaper, 500.0, 2000.0);
  EXPECT_LT(far, -2.6);
  EXPECT_GT(far, -3.0);
}

std::vector<FieldSample> synthetic_samples(const PatchModel& m, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FieldSample> out;
  for (double z : {20.0, 40.0, 60.0, 80.0, 100.0, 130.0, 160.0, 200.0}) {
    const double e = cloud_averaged_field(z, m);
    const double err = noise > 0 ? noise * e : 1e-3 * e;
    out.push_back({z, e * (1.0 + noise * g(rng)), err, RydbergState(30, 0, 0.5, 0.5)});
  }
  return out;
}

TEST(FitPatch, NoiselessRecovery) {
  const auto samples = synthetic_samples(kPaper, 0.0, 1);
  const auto fit = fit_patch(samples, PatchModel{3e5, 60.0, 130.0});
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.model.d0, kPaper.d0, 1e-5 * kPaper.d0);
  EXPECT_NEAR(fit.model.w_um, kPaper.w_um, 1e-5 * kPaper.w_um);
  EXPECT_FALSE(fit.poor_fit);
  EXPECT_FALSE(fit.ill_conditioned);
}

TEST(FitPatch, NoisyRecoveryWithinTwoSigma) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto fit = fit_patch(synthetic_samples(kPaper, 0.05, seed), PatchModel{5e5, 150.0, 130.0});
    ok += std::abs(fit.model.d0 - kPaper.d0) < 2.0 * fit.d0_error && std::abs(fit.model.w_um - kPaper.w_um) < 2.0 * fit.w_error;
  }
  EXPECT_GE(ok, 8);
}

TEST(FitPatch, InverseSquareProfileIsFlaggedAsMisfit) {
  std::vector<FieldSample> samples;
  for (double z : {20.0, 40.0, 60.0, 80.0, 100.0, 130.0, 160.0, 200.0}) {
    const double e = 12.0 * std::pow(z / 20.0, -2.0);
    samples.push_back({z, e, 0.02 * e, RydbergState(30, 0, 0.5, 0.5)});
  }
  const auto fit = fit_patch(samples, kPaper);
  EXPECT_TRUE(fit.poor_fit);
}

TEST(FitPatch, DegenerateSpanIsFlagged) {
  auto samples = synthetic_samples(kPaper, 0.0, 1);
  std::vector<FieldSample> narrow(samples.begin() + 3, samples.begin() + 7);  // 80..130 um
  EXPECT_TRUE(fit_patch(narrow, kPaper).ill_conditioned);
  std::vector<FieldSample> few(samples.begin(), samples.begin() + 3);
  EXPECT_TRUE(fit_patch(few, kPaper).ill_conditioned);
}

TEST(AdsorbateBudget, PaperNumbers) {
  const auto b = adsorbate_budget(kPaper, 10.0);
  EXPECT_NEAR(b.total, 2.0 * std::numbers::pi * 1e4 * 7e5 / 10.0, 1.0);
  EXPECT_GT(b.total, 5e8);
  EXPECT_LT(b.total, 1e10);
  EXPECT_NEAR(b.per_shot, b.total * 6e-5, 1e-6 * b.per_shot);
  EXPECT_NEAR(adsorbate_budget(kPaper, 20.0).total, 0.5 * b.total, 1e-6);
  EXPECT_THROW(adsorbate_budget(kPaper, 0.0), ModelError);
}

TEST(CloudFieldSamples, ReproduceCloudAverage) {
  for (double z : {20.0, 80.0, 200.0}) {
    const auto nodes = cloud_field_samples(z, kPaper);
    double wsum = 0.0, mean = 0.0, ms = 0.0;
    for (const auto& c : nodes) {
      wsum += c.weight;
      mean += c.weight * c.field;
      ms += c.weight * c.field * c.field;
    }
    EXPECT_NEAR(wsum, 1.0, 1e-12);
    EXPECT_NEAR(mean, cloud_averaged_field(z, kPaper), 1e-8 * mean);
    EXPECT_NEAR(std::sqrt(ms), cloud_averaged_field(z, kPaper, CloudAverage::rms), 1e-8 * mean);
  }
  const auto point = cloud_field_samples(50.0, PatchModel{7e5, 100.0, 0.0});
  ASSERT_EQ(point.size(), 1u);
  EXPECT_DOUBLE_EQ(point[0].field, onaxis_field(50.0, PatchModel{7e5, 100.0, 0.0}));
}

}  // namespace
}  // namespace rydsurf
