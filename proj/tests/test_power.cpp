#include "srcwatch/power.hpp"
#include "srcwatch/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace srcwatch;

namespace {

PowerProfile flat_sleep(double total_uA) {
  PowerProfile p;
  p.set(Component::Mcu, {total_uA, 1.0});
  return p;
}

void expect_rel(double a, double b, double rel) { EXPECT_LE(std::abs(a - b), rel * std::abs(b)) << a << " vs " << b; }

}  // namespace

TEST(Profile, DefaultsAndValidation) {
  const auto p = PowerProfile::defaults();
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.draw(Component::GammaSensor).sleep_uA, 0.0);
  EXPECT_EQ(p.draw(Component::Switches).sleep_uA, 0.0);
  EXPECT_EQ(p.current_mA(Component::Mcu, PowerMode::Sleep), 0.002);
  EXPECT_EQ(p.current_mA(Component::Radio, PowerMode::Active), 220.0);

  auto bad = p;
  bad.set(Component::GammaSensor, {1.0, 1.0});
  EXPECT_THROW(bad.validate(), PowerError);
  bad = p;
  bad.set(Component::Gps, {50'000.0, 30.0});  // 50 mA asleep, 30 awake
  EXPECT_THROW(bad.validate(), PowerError);
  bad = p;
  bad.set(Component::Radio, {-1.0, 1.0});
  EXPECT_THROW(bad.validate(), PowerError);
}

TEST(Accrue, McuSleepForADay) {
  const auto l = accrue({}, Component::Mcu, PowerMode::Sleep, 86'400, PowerProfile::defaults());
  EXPECT_NEAR(l.total_mAh(), 0.048, 1e-12);
  EXPECT_EQ(l.entries().size(), 1u);
  EXPECT_EQ(l.cursor_s(Component::Mcu), 86'400.0);
}

TEST(Accrue, ZeroAndStandbyAreFree) {
  const auto p = PowerProfile::defaults();
  auto l = accrue({}, Component::Radio, PowerMode::Active, 0, p);
  EXPECT_EQ(l.total_mAh(), 0.0);
  l = accrue(l, Component::GammaSensor, PowerMode::Sleep, 1e9, p);
  l = accrue(l, Component::Switches, PowerMode::Sleep, 1e9, p);
  EXPECT_EQ(l.total_mAh(), 0.0);
}

TEST(Accrue, NegativeDurationThrows) {
  try {
    accrue({}, Component::Mcu, PowerMode::Sleep, -1, PowerProfile::defaults());
    FAIL();
  } catch (const PowerError& e) {
    EXPECT_EQ(e.kind(), PowerError::Kind::NegativeDuration);
  }
}

TEST(Accrue, SplitsAreAssociativeAndTotalsAddUp) {
  DeterministicRng rng(3);
  const auto p = PowerProfile::defaults();
  for (int i = 0; i < 1000; ++i) {
    const auto c = kAllComponents[rng.next() % kAllComponents.size()];
    const auto m = rng.bernoulli(0.5) ? PowerMode::Active : PowerMode::Sleep;
    const double t1 = rng.uniform() * 1e5, t2 = rng.uniform() * 1e5;
    const auto whole = accrue({}, c, m, t1 + t2, p);
    const auto split = accrue(accrue({}, c, m, t1, p), c, m, t2, p);
    ASSERT_LE(std::abs(whole.total_mAh() - split.total_mAh()),
              1e-9 * std::max(whole.total_mAh(), 1e-300));
  }

  EnergyLedger l;
  for (int i = 0; i < 2000; ++i) {
    const auto c = kAllComponents[rng.next() % kAllComponents.size()];
    l = accrue(l, c, rng.bernoulli(0.3) ? PowerMode::Active : PowerMode::Sleep,
               rng.uniform() * 100, p);
  }
  double sum = 0;
  std::map<Component, double> last_end;
  for (const auto& e : l.entries()) {
    sum += e.charge_mAh;
    ASSERT_GE(e.t_start_s, last_end[e.component]);  // no overlap per component
    ASSERT_GE(e.t_end_s, e.t_start_s);
    last_end[e.component] = e.t_end_s;
  }
  EXPECT_LE(std::abs(sum - l.total_mAh()), 1e-9 * l.total_mAh());
  double by_component = 0;
  for (auto c : kAllComponents) by_component += l.component_total_mAh(c);
  EXPECT_LE(std::abs(by_component - l.total_mAh()), 1e-9 * l.total_mAh());
}

TEST(Lifetime, FlatFiveMicroamps) {
  Battery b{10'000.0, 0.0};
  const auto r = project_lifetime(flat_sleep(5.0), b, {});
  EXPECT_NEAR(r.years, 10'000.0 / 0.005 / 8760.0, 1e-9);
  EXPECT_NEAR(r.years, 228.3, 0.05);
  EXPECT_TRUE(r.exceeds_horizon());
}

TEST(Lifetime, NothingDrawsIsInfinite) {
  const auto r = project_lifetime(PowerProfile{}, Battery{10'000.0, 0.0}, {});
  EXPECT_TRUE(std::isinf(r.years));
  EXPECT_TRUE(r.exceeds_horizon());
}

TEST(Lifetime, InvalidInputs) {
  EXPECT_THROW(project_lifetime(PowerProfile::defaults(), Battery{0.0, 0.0}, {}), PowerError);
  EXPECT_THROW(project_lifetime(PowerProfile::defaults(), Battery{}, {{Component::Gps, 1.5}}),
               PowerError);
  EXPECT_THROW(project_lifetime(PowerProfile::defaults(), Battery{}, {{Component::Gps, -0.1}}),
               PowerError);
}

TEST(Lifetime, NominalDutyMeetsTenYears) {
  const auto p = PowerProfile::defaults();
  const Battery b;
  const auto duty = nominal_duty({});
  const auto r = project_lifetime(p, b, duty);
  EXPECT_GE(r.years, 10.0);
  const double oracle = oracle::day_stepped_years(average_current_mA(p, duty), b.capacity_mAh,
                                                  b.self_discharge_fraction_per_year);
  expect_rel(r.years, oracle, 0.01);
}

TEST(Lifetime, DaySteppedAgreesAcrossDraws) {
  // Heavier draws so the simulated horizon stays short.
  for (double uA : {50.0, 100.0, 200.0, 500.0, 2000.0}) {
    for (double s : {0.0, 0.01, 0.03}) {
      const Battery b{19'000.0, s};
      const auto r = project_lifetime(flat_sleep(uA), b, {});
      expect_rel(r.years, oracle::day_stepped_years(uA / 1000.0, b.capacity_mAh, s), 0.01);
    }
  }
}

TEST(Lifetime, MonotoneInDutyAndCurrent) {
  DeterministicRng rng(17);
  const Battery b;
  for (int i = 0; i < 2000; ++i) {
    PowerProfile p;
    DutyCycle duty;
    for (auto c : kAllComponents) {
      const double active = rng.uniform() * 300;
      const double sleep = (c == Component::GammaSensor || c == Component::Switches)
                               ? 0.0
                               : rng.uniform() * 10;
      p.set(c, {sleep, std::max(active, sleep / 1000)});
      duty[c] = rng.uniform() * 0.01;
    }
    const double base = project_lifetime(p, b, duty).years;
    const auto c = kAllComponents[rng.next() % kAllComponents.size()];

    auto more_duty = duty;
    more_duty[c] = std::min(1.0, duty[c] + rng.uniform() * 0.01);
    ASSERT_LE(project_lifetime(p, b, more_duty).years, base);

    auto hungrier = p;
    auto d = p.draw(c);
    d.active_mA += rng.uniform() * 50;
    if (c != Component::GammaSensor && c != Component::Switches) d.sleep_uA += rng.uniform();
    hungrier.set(c, d);
    ASSERT_LE(project_lifetime(hungrier, b, duty).years, base);
  }
}

TEST(Remaining, Arithmetic) {
  const Battery b{10'000.0, 0.01};
  EXPECT_DOUBLE_EQ(remaining({}, b, 0.0), 10'000.0);
  EXPECT_NEAR(remaining({}, b, 1.0), 9'900.0, 1e-9);
  auto l = accrue({}, Component::SirenLight, PowerMode::Active, 3600.0 * 100,
                  PowerProfile::defaults());  // 15 Ah
  EXPECT_EQ(remaining(l, b, 0.0), 0.0);
}

TEST(Reports, BreakdownAndSensitivity) {
  const auto p = PowerProfile::defaults();
  const auto csv = breakdown_csv(p, nominal_duty({}));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "component,sleep_uA,active_mA,duty,avg_uA,annual_mAh");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);

  const auto sens = sensitivity_csv(p, Battery{});
  EXPECT_NE(sens.find("episodes_per_week,heartbeat_period_s,avg_uA,years,meets_target"),
            std::string::npos);
  // The table documents where the target breaks: some rows meet it and some
  // do not.
  EXPECT_NE(sens.find(",yes"), std::string::npos);
  EXPECT_NE(sens.find(",no"), std::string::npos);
}
