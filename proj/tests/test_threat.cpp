#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "platoon/threat.hpp"

using namespace platoon;

namespace {

AttackSpec window(AttackSignal s) {
  AttackSpec a;
  a.targets = {3};
  a.signal = std::move(s);
  a.t_start = 10.0;
  a.t_end = 40.0;
  return a;
}

}  // namespace

TEST(Threat, SignalIsZeroOutsideHalfOpenWindow) {
  const auto a = window(ConstantSignal{2.0});
  EXPECT_DOUBLE_EQ(attack_signal(a, 9.999), 0.0);
  EXPECT_DOUBLE_EQ(attack_signal(a, 10.0), 2.0);
  EXPECT_DOUBLE_EQ(attack_signal(a, 39.99), 2.0);
  EXPECT_DOUBLE_EQ(attack_signal(a, 40.0), 0.0);
}

TEST(Threat, SignalIsClamped) {
  auto a = window(RampSignal{1.0, 0.5});
  a.xi_max = 2.0;
  EXPECT_DOUBLE_EQ(attack_signal(a, 11.0), 1.5);
  EXPECT_DOUBLE_EQ(attack_signal(a, 20.0), 2.0);
  a.signal = ConstantSignal{-7.0};
  EXPECT_DOUBLE_EQ(attack_signal(a, 20.0), -2.0);
}

TEST(Threat, SinusoidAndTable) {
  auto a = window(SinusoidSignal{1.0, std::numbers::pi, 0.0});
  EXPECT_NEAR(attack_signal(a, 10.5), 1.0, 1e-15);
  a.signal = SampleTableSignal{{0.0, 2.0, 4.0}, {0.0, 1.0, -1.0}};
  EXPECT_DOUBLE_EQ(attack_signal(a, 11.0), 0.5);
  EXPECT_DOUBLE_EQ(attack_signal(a, 13.0), 0.0);
  EXPECT_DOUBLE_EQ(attack_signal(a, 30.0), -1.0);
}

TEST(Threat, Validation) {
  auto a = window(ConstantSignal{});
  EXPECT_NO_THROW(a.validate(4));
  a.targets = {1};
  EXPECT_THROW(a.validate(4), std::invalid_argument);
  a.targets = {5};
  EXPECT_THROW(a.validate(4), std::invalid_argument);
  a = window(SampleTableSignal{{1.0, 0.0}, {0.0, 0.0}});
  EXPECT_THROW(a.validate(4), std::invalid_argument);
  a = window(ConstantSignal{});
  a.xi_max = 0.0;
  EXPECT_THROW(a.validate(4), std::invalid_argument);
}

TEST(Threat, FieldOffsetsScaleXi) {
  auto a = window(ConstantSignal{2.0});
  a.mode = AttackMode::MessageLevel;
  a.falsification = {MessageFalsification::Kind::FieldOffsets, 3.0, 0.5, 1.0};
  const NeighborMessage m{100.0, 20.0, 0.0, 2};
  const auto f = falsify_message(m, a, 15.0);
  EXPECT_DOUBLE_EQ(f.position, 106.0);
  EXPECT_DOUBLE_EQ(f.velocity, 21.0);
  EXPECT_DOUBLE_EQ(f.acceleration, 2.0);
  EXPECT_EQ(f.sender_id, 2);
  const auto untouched = falsify_message(m, a, 5.0);
  EXPECT_DOUBLE_EQ(untouched.position, 100.0);
}

TEST(Threat, KinematicOffsetsIntegrateXi) {
  auto a = window(ConstantSignal{2.0});
  a.falsification.kind = MessageFalsification::Kind::Kinematic;
  const auto o = falsification_offsets(a, 13.5);
  EXPECT_NEAR(o.acceleration, 2.0, 1e-15);
  EXPECT_NEAR(o.velocity, 2.0 * 3.5, 1e-12);
  EXPECT_NEAR(o.position, 0.5 * 2.0 * 3.5 * 3.5, 1e-12);

  a.signal = SinusoidSignal{1.0, 1.0, 0.0};
  const double tau = 7.3;
  const auto s = falsification_offsets(a, 10.0 + tau);
  EXPECT_NEAR(s.velocity, 1.0 - std::cos(tau), 1e-10);
  EXPECT_NEAR(s.position, tau - std::sin(tau), 1e-10);
}

TEST(Threat, DetectorFrequencies) {
  const DetectorModel d;
  Rng rng(3, 9);
  int hits_attack = 0, hits_benign = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    hits_attack += detector_sample(true, d, rng).value == Report::Reported;
    hits_benign += detector_sample(false, d, rng).value == Report::Reported;
  }
  // 4.5 sigma bands
  EXPECT_NEAR(hits_attack / double(n), 0.7, 4.5 * std::sqrt(0.21 / n));
  EXPECT_NEAR(hits_benign / double(n), 0.1, 4.5 * std::sqrt(0.09 / n));
}

TEST(Threat, PerfectDetectorIsDeterministic) {
  const DetectorModel d{1.0, 0.0, 0.1};
  Rng rng(1, 1);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_EQ(detector_sample(true, d, rng).value, Report::Reported);
    EXPECT_EQ(detector_sample(false, d, rng).value, Report::NotReported);
  }
  EXPECT_THROW((DetectorModel{1.2, 0.0, 0.1}.validate()), std::invalid_argument);
}

TEST(Threat, RngStreamsAreReproducibleAndDistinct) {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool differ = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differ = differ || x != c.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differ);
}
