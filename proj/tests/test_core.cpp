#include <gtest/gtest.h>

#include <vector>

#include "platoon/core.hpp"

using namespace platoon;

TEST(Core, SpacingErrorIsZeroAtEquilibrium) {
  const auto s = PlatoonState::at_equilibrium(4, 10.0, 20.0);
  for (int i = 2; i <= 4; ++i) EXPECT_DOUBLE_EQ(spacing_error(s, i, 10.0), 0.0);
}

TEST(Core, SpacingErrorSignAndValue) {
  PlatoonState s{{{100.0, 20.0}, {88.0, 21.0}}};
  EXPECT_DOUBLE_EQ(spacing_error(s, 2, 10.0), -2.0);  // too far behind
  s.vehicle(2).position = 92.0;
  EXPECT_DOUBLE_EQ(spacing_error(s, 2, 10.0), 2.0);
}

TEST(Core, SpacingErrorIndexRange) {
  const auto s = PlatoonState::at_equilibrium(3, 10.0, 20.0);
  EXPECT_THROW(spacing_error(s, 1, 10.0), std::out_of_range);
  EXPECT_THROW(spacing_error(s, 4, 10.0), std::out_of_range);
  EXPECT_THROW(s.vehicle(0), std::out_of_range);
}

TEST(Core, DesiredDistanceCountsHops) {
  EXPECT_DOUBLE_EQ(desired_distance(4, 1, 10.0), 30.0);
  EXPECT_DOUBLE_EQ(desired_distance(2, 3, 10.0), 10.0);
  EXPECT_THROW(desired_distance(2, 2, 10.0), std::invalid_argument);
}

TEST(Core, DerivativeUsesLeaderAccelerationForLeader) {
  const auto s = PlatoonState::at_equilibrium(3, 10.0, 15.0);
  const std::vector<double> u{99.0, -1.0, 0.5};
  const auto d = platoon_derivative(s, u, -2.0);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0], (StateDerivative{15.0, -2.0}));
  EXPECT_EQ(d[1], (StateDerivative{15.0, -1.0}));
  EXPECT_EQ(d[2], (StateDerivative{15.0, 0.5}));
  EXPECT_THROW(platoon_derivative(s, std::vector<double>{1.0}, 0.0), std::invalid_argument);
}

TEST(Core, PlatoonConfigValidation) {
  PlatoonConfig c;
  EXPECT_NO_THROW(c.validate());
  c.vehicle_count = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.epsilon_max = 5.5;  // equals L - length: contact before the surface
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.leader.segments = {{0.0, 2.0, -1.0}, {1.0, 3.0, 1.0}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Core, LeaderProfileIsHalfOpen) {
  LeaderProfile p{20.0, {{5.0, 8.0, -2.0}}};
  EXPECT_DOUBLE_EQ(p.acceleration(4.999), 0.0);
  EXPECT_DOUBLE_EQ(p.acceleration(5.0), -2.0);
  EXPECT_DOUBLE_EQ(p.acceleration(8.0), 0.0);
}
