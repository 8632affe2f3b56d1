#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bia/powalloc.hpp"

namespace bia {
namespace {

TEST(WeightFunction, ValidatesGrid) {
  EXPECT_THROW(WeightFunction(5, {1.0, 0.5, 0.2}), ParameterError);
  EXPECT_THROW(WeightFunction(4, {1.0, 0.5}), ParameterError);
  EXPECT_THROW(WeightFunction(4, {0.9, 0.5, 0.2}), ParameterError);
  EXPECT_THROW(WeightFunction(4, {1.0, 0.5, 0.6}), ParameterError);
  EXPECT_NO_THROW(WeightFunction(4, {1.0, 0.5, 0.5}));
}

TEST(WeightFunction, ReflectedStepLookup) {
  const WeightFunction wf(4, {1.0, 0.6, 0.25});
  EXPECT_EQ(wf.reflected(0.0), 1.0);
  EXPECT_EQ(wf.reflected(0.2), 1.0);
  EXPECT_EQ(wf.reflected(0.25), 0.6);
  EXPECT_EQ(wf.reflected(3.0 / 4.0 - 0.5), 0.6);  // 0.25 after rounding
  EXPECT_EQ(wf.reflected(0.5), 0.25);
  EXPECT_EQ(wf.at_origin(), 0.25);
}

TEST(CumulativePower, Boundaries) {
  for (double p : {0.0, 0.3, 0.9}) {
    for (double pt : {1.0, 100.0, 1e4}) {
      const auto wf = WeightFunction::for_channel(20, p);
      EXPECT_EQ(cumulative_power(0.5, wf, 1.0, pt), 0.0);
      EXPECT_EQ(cumulative_power(0.0, wf, 1.0, pt), pt);
      EXPECT_EQ(cumulative_power(1e-9, wf, 1.0, pt), pt);
    }
  }
}

TEST(CumulativePower, DomainChecked) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  EXPECT_THROW(cumulative_power(-0.01, wf, 1.0, 100.0), ParameterError);
  EXPECT_THROW(cumulative_power(0.51, wf, 1.0, 100.0), ParameterError);
  EXPECT_THROW(cumulative_power(0.2, wf, 0.0, 100.0), ParameterError);
  EXPECT_THROW(cumulative_power(0.2, wf, 1.0, -1.0), ParameterError);
}

TEST(CumulativePower, NonIncreasingCurve) {
  for (double p : {0.0, 0.5, 0.8, 0.9, 0.97}) {
    const auto wf = WeightFunction::for_channel(20, p);
    double prev = cumulative_power(0.0, wf, 1.0, 100.0);
    for (int k = 1; k <= 2000; ++k) {
      const double cur = cumulative_power(0.5 * k / 2000.0, wf, 1.0, 100.0);
      ASSERT_LE(cur, prev) << "p=" << p << " k=" << k;
      prev = cur;
    }
  }
}

TEST(CumulativePower, MatchesClosedFormOnGrid) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  // Unsaturated, positive grid point: N F_Z(0) / (2 z F_Z(1/2 - z)) - N.
  const double z = 3.0 / 20.0;
  const double expected = 1.0 * wf.at(10) / (2.0 * z * wf.at(3)) - 1.0;
  EXPECT_NEAR(cumulative_power(z, wf, 1.0, 100.0), expected, 1e-12);
}

// Reference values from an independent script: exhaustive enumeration of
// all 2^19 boundary patterns, then the closed form on the layer grid.
TEST(LayerPowers, ReferenceOperatingPoint) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  const std::vector<double> expected = {97.09775491420753, 1.8809693594672106,
                                        0.6147582001105096, 0.29497858348527073,
                                        0.11153894272948017, 0, 0, 0, 0, 0};
  ASSERT_EQ(profile.layer_powers.size(), expected.size());
  for (std::size_t j = 0; j < expected.size(); ++j) {
    EXPECT_NEAR(profile.layer_powers[j], expected[j], 1e-9) << j;
  }
  for (std::size_t j = 1; j < expected.size(); ++j) {
    EXPECT_LE(profile.layer_powers[j], profile.layer_powers[j - 1]);
  }
  EXPECT_EQ(profile.saturation_index, 0u);
}

TEST(LayerPowers, NeverDecodableLayersGetNothing) {
  const auto wf = WeightFunction::for_channel(20, 1.0);
  const auto profile = layer_powers(wf, 1.0, 100.0, 20);
  EXPECT_EQ(profile.layer_powers[0], 100.0);
  for (std::size_t j = 1; j < profile.layer_powers.size(); ++j) {
    EXPECT_EQ(profile.layer_powers[j], 0.0);
  }
}

TEST(LayerPowers, TelescopesToTotalPower) {
  for (std::size_t n : {2u, 4u, 8u, 20u, 32u, 64u}) {
    for (int k = 0; k <= 10; ++k) {
      const auto wf = WeightFunction::for_channel(n, k / 10.0);
      for (double noise : {0.1, 1.0, 10.0}) {
        for (double pt : {0.5, 1.0, 10.0, 100.0, 1e4}) {
          const auto profile = layer_powers(wf, noise, pt, n);
          EXPECT_NEAR(profile.sum(), pt, 1e-9 * pt);
          for (double pj : profile.layer_powers) EXPECT_GE(pj, 0.0);
        }
      }
    }
  }
}

// The layer that takes the remainder of the cap can be smaller than the one
// after it; from there on the allocation decreases.
TEST(LayerPowers, DecreasingAfterCapRemainderLayer) {
  for (std::size_t n : {8u, 20u, 32u}) {
    for (int k = 0; k <= 10; ++k) {
      const auto wf = WeightFunction::for_channel(n, k / 10.0);
      for (double pt : {1.0, 10.0, 100.0, 1e4}) {
        const auto profile = layer_powers(wf, 1.0, pt, n);
        const auto& pw = profile.layer_powers;
        for (std::size_t j = 0; j < profile.saturation_index; ++j) {
          EXPECT_EQ(pw[j], 0.0);
        }
        for (std::size_t j = profile.saturation_index + 2; j < pw.size(); ++j) {
          EXPECT_LE(pw[j], pw[j - 1] + 1e-12) << n << ' ' << k << ' ' << pt << ' ' << j;
        }
      }
    }
  }
}

TEST(LayerPowers, LowPowerPushesPowerToDeeperLayers) {
  const auto wf = WeightFunction::for_channel(20, 0.2);
  const auto profile = layer_powers(wf, 1.0, 10.0, 20);
  // P_Z(1/20) = N * M * G(10) / G(1) - N = 9 * (1 - tiny) below the cap of 10,
  // so layer 1 only gets 10 - P_Z(1/20) ~ 1 while layer 2 gets ~5.
  EXPECT_NEAR(profile.layer_powers[0], 1.0, 1e-4);
  EXPECT_NEAR(profile.layer_powers[1], 5.0, 1e-4);
  EXPECT_GT(profile.layer_powers[1], profile.layer_powers[0]);
}

TEST(LayerPowers, SaturationIndexReportsCappedPrefix) {
  const auto wf = WeightFunction::for_channel(20, 0.0);
  const auto profile = layer_powers(wf, 1.0, 1.0, 20);
  // P_Z(j/20) = 10/j - 1 >= 1 for j <= 5.
  EXPECT_EQ(profile.saturation_index, 5u);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(profile.layer_powers[j], 0.0);
  EXPECT_GT(profile.layer_powers[5], 0.0);
}

TEST(LayerPowers, ChangingChannelSpreadsPower) {
  auto spread = [](double p) {
    const auto profile = layer_powers(WeightFunction::for_channel(20, p), 1.0, 100.0, 20);
    std::size_t count = 0;
    for (double pj : profile.layer_powers) count += pj > 0.1 ? 1 : 0;
    return count;
  };
  EXPECT_GT(spread(0.0), spread(0.9));
}

TEST(LayerPowers, MismatchedLengthRejected) {
  const auto wf = WeightFunction::for_channel(20, 0.5);
  EXPECT_THROW(layer_powers(wf, 1.0, 100.0, 18), ParameterError);
}

TEST(PowerProfileJson, Schema) {
  const auto profile = layer_powers(WeightFunction::for_channel(8, 0.5), 1.0, 10.0, 8);
  const auto j = to_json(profile);
  EXPECT_EQ(j.at("n"), 8);
  EXPECT_EQ(j.at("N"), 1.0);
  EXPECT_EQ(j.at("Pt"), 10.0);
  EXPECT_EQ(j.at("layers").size(), 4u);
  const auto back = power_profile_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.layer_powers, profile.layer_powers);
}

TEST(MonotoneWeight, InterpolatesNodesMonotonically) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const MonotoneWeight w(wf);
  for (std::size_t k = 0; k <= 10; ++k) {
    EXPECT_NEAR(w.value(0.5 - k / 20.0), wf.at(k), 1e-14) << k;
  }
  double prev = w.value(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double u = 0.5 * i / 1000.0;
    const auto [v, d] = w.eval(u);
    EXPECT_GE(v, prev - 1e-15);
    EXPECT_GE(d, -1e-12);
    prev = v;
  }
}

TEST(MonotoneWeight, DerivativeMatchesFiniteDifference) {
  const MonotoneWeight w(WeightFunction::for_channel(20, 0.8));
  for (double u : {0.03, 0.11, 0.26, 0.41}) {
    const double h = 1e-6;
    EXPECT_NEAR(w.derivative(u), (w.value(u + h) - w.value(u - h)) / (2 * h), 1e-6) << u;
  }
}

TEST(EulerResidual, ClosedFormConvergesAtFirstOrder) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  double prev = 0.0;
  for (std::size_t grid : {250u, 500u, 1000u, 2000u, 4000u}) {
    const auto r = euler_lagrange_residual(wf, 1.0, 100.0, 20, grid);
    ASSERT_TRUE(r.applicable);
    EXPECT_GT(r.points, grid / 10);
    // max residual times grid size stays bounded: O(1/grid_size).
    EXPECT_LT(r.max_residual * static_cast<double>(grid), 1.0) << grid;
    if (prev > 0.0) EXPECT_LT(r.max_residual, 0.6 * prev) << grid;
    prev = r.max_residual;
  }
}

TEST(EulerResidual, PerturbedProfileIsNotStationary) {
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const MonotoneWeight w(wf);
  const auto closed = closed_form_increasing(w, 1.0);
  // Smooth bump inside the unsaturated region (0.28 < u < 0.49).
  auto bumped = [&](double u) {
    const double c = 0.38, s = 0.02;
    return closed(u) + 0.2 * std::exp(-(u - c) * (u - c) / (2 * s * s));
  };
  const auto base = euler_residual_of(closed, w, 1.0, 100.0, 2000);
  const auto pert = euler_residual_of(bumped, w, 1.0, 100.0, 2000);
  ASSERT_TRUE(pert.applicable);
  EXPECT_GT(pert.max_residual, 0.05);
  EXPECT_GT(pert.max_residual, 100.0 * base.max_residual);
  // Refining the grid does not make the perturbation go away.
  EXPECT_GT(euler_residual_of(bumped, w, 1.0, 100.0, 4000).max_residual, 0.05);
}

TEST(EulerResidual, NotApplicableWithoutUnsaturatedRegion) {
  // A vanishing budget saturates immediately.
  const auto wf = WeightFunction::for_channel(20, 0.9);
  const auto tiny = euler_lagrange_residual(wf, 1.0, 1e-12, 20, 1000);
  EXPECT_FALSE(tiny.applicable);
  EXPECT_EQ(tiny.max_residual, 0.0);
  // Never fully decodable: the closed form is identically zero.
  const auto never = euler_lagrange_residual(WeightFunction::for_channel(20, 1.0), 1.0, 100.0, 20, 1000);
  EXPECT_FALSE(never.applicable);
}

}  // namespace
}  // namespace bia
