#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "core/transmission.hpp"

using namespace gf;

namespace {

HandState at_rest(double theta_c = 0.0) {
  HandState s;
  s.theta_I1 = s.theta_I2 = 0.0;
  s.theta_c = theta_c;
  return s;
}

double slider_tension_at(double x_t, const DesignParams& p, const TransmissionConfig& c) {
  HandState s = at_rest(x_t);  // x_ofs = 0 so theta_c maps 1:1 to x_t
  return slider_state(s, p, c).T_s;
}

}  // namespace

TEST_CASE("tendon torques at full extension") {
  DesignParams p;
  HandState s;  // all joints at zero
  JointTorques t = actuation_torques(s, p, 100.0, 0.0);
  CHECK(t.tau_M1 == doctest::Approx(3.9).epsilon(1e-9));
  CHECK(t.tau_I1 == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(t.tau_M2 == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(t.tau_I2 == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(t.tau_c == doctest::Approx(100.0));
}

TEST_CASE("wrap arm grows with joint flexion") {
  DesignParams p;
  HandState s;
  s.theta_I1 = kPi / 2.0;
  JointTorques t = actuation_torques(s, p, 100.0, 0.0);
  CHECK(t.tau_I1 == doctest::Approx(0.8 * std::sqrt(2.0) - 0.7).epsilon(1e-9));
}

TEST_CASE("tendon torques are linear in both tensions") {
  DesignParams p;
  Rng rng(42);
  for (int k = 0; k < 50; ++k) {
    HandState s;
    s.theta_M1 = rng.uniform(0.0, kPi);
    s.theta_I1 = rng.uniform(0.0, kPi);
    s.theta_M2 = rng.uniform(0.0, kPi);
    s.theta_I2 = rng.uniform(0.0, kPi);
    const double Tm = rng.uniform(0.0, 100.0);
    const double Ts = rng.uniform(0.0, 100.0);
    JointTorques unit_m = actuation_torques(s, p, 1.0, 0.0);
    JointTorques unit_s = actuation_torques(s, p, 0.0, 1.0);
    JointTorques t = actuation_torques(s, p, Tm, Ts);
    CHECK(t.tau_M1 == doctest::Approx(Tm * unit_m.tau_M1 + Ts * unit_s.tau_M1).epsilon(1e-12));
    CHECK(t.tau_I1 == doctest::Approx(Tm * unit_m.tau_I1 + Ts * unit_s.tau_I1).epsilon(1e-12));
    CHECK(t.tau_M2 == doctest::Approx(Tm * unit_m.tau_M2 + Ts * unit_s.tau_M2).epsilon(1e-12));
    CHECK(t.tau_I2 == doctest::Approx(Tm * unit_m.tau_I2 + Ts * unit_s.tau_I2).epsilon(1e-12));
    // The plain finger never feels the sliding-part tension.
    CHECK(unit_s.tau_M1 == 0.0);
    CHECK(unit_s.tau_I1 == 0.0);
    // The crawler finger feels it through the return pulleys.
    CHECK(unit_s.tau_M2 == doctest::Approx(p.r_M()).epsilon(1e-12));
    CHECK(unit_s.tau_I2 == doctest::Approx(-p.r_I).epsilon(1e-12));
  }
}

TEST_CASE("slider in the pull-in band") {
  DesignParams p;
  TransmissionConfig c;
  SliderState sl = slider_state(at_rest(0.01), p, c);
  CHECK(sl.x_t == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(sl.x_s == doctest::Approx(9976.0 / 1003100.0).epsilon(1e-9));
  CHECK(sl.T_s == doctest::Approx(55e6 / 1003100.0).epsilon(1e-9));
  CHECK(sl.mode == Mode::PullIn);
}

TEST_CASE("slider against the travel stop") {
  DesignParams p;
  TransmissionConfig c;
  c.x_max = 0.05;
  SliderState sl = slider_state(at_rest(0.051), p, c);
  CHECK(sl.x_s == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(sl.T_s == doctest::Approx(1000.0).epsilon(1e-9));
  CHECK(sl.mode == Mode::PowerGrasp);
}

TEST_CASE("slider below pretension stays parked") {
  DesignParams p;
  TransmissionConfig c;
  SliderState sl = slider_state(at_rest(1e-5), p, c);
  CHECK(sl.x_s == 0.0);
  CHECK(sl.T_s == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(sl.mode == Mode::Parallel);

  SliderState slack = slider_state(at_rest(-0.01), p, c);
  CHECK(slack.T_s == 0.0);
  CHECK(slack.mode == Mode::Parallel);

  // Breakaway happens exactly at the pretension.
  SliderState edge = slider_state(at_rest(p.T_pt / c.K), p, c);
  CHECK(edge.T_s == doctest::Approx(p.T_pt).epsilon(1e-9));
  CHECK(edge.mode == Mode::PullIn);
}

TEST_CASE("slider take-up follows both crawler-side joints") {
  DesignParams p;
  TransmissionConfig c;
  HandState s;
  s.theta_c = 0.004;
  s.theta_I2 = 0.3;
  s.theta_M2 = 0.2;
  s.theta_I1 = 9.9;  // plain finger must not matter
  s.theta_M1 = 9.9;
  SliderState sl = slider_state(s, p, c);
  CHECK(sl.x_t == doctest::Approx(0.004 + p.r_I * 0.3 - p.r_M() * 0.2).epsilon(1e-12));
}

TEST_CASE("slider tension is continuous and monotone in take-up") {
  DesignParams p;
  TransmissionConfig c;
  double prev = slider_tension_at(-0.002, p, c);
  for (int i = 1; i <= 400; ++i) {
    const double x = -0.002 + i * 1e-4;  // crosses all three regime boundaries
    const double T = slider_tension_at(x, p, c);
    CHECK(T >= prev - 1e-9);
    CHECK(std::abs(T - prev) <= c.K * 1e-4 + 1e-6);  // steepest slope is K
    prev = T;
  }
}

TEST_CASE("slider tension slopes per regime") {
  DesignParams p;
  TransmissionConfig c;
  const double x_g = (c.x_max * (c.K + p.k_s) + p.T_pt) / c.K;
  const struct {
    double x;
    double slope;
  } probes[] = {
      {0.5 * p.T_pt / c.K, c.K},
      {0.5 * (p.T_pt / c.K + x_g), c.K * p.k_s / (c.K + p.k_s)},
      {x_g + 0.01, c.K},
  };
  for (const auto& probe : probes) {
    const double h = 1e-9;
    const double fd =
        (slider_tension_at(probe.x + h, p, c) - slider_tension_at(probe.x - h, p, c)) / (2.0 * h);
    CHECK(fd == doctest::Approx(probe.slope).epsilon(0.01));
  }
}

TEST_CASE("slider spring energy matches the tension law") {
  DesignParams p;
  TransmissionConfig c;
  CHECK(slider_potential(0.0, p, c) == 0.0);
  CHECK(slider_potential(-0.3, p, c) == 0.0);
  const double x_g = (c.x_max * (c.K + p.k_s) + p.T_pt) / c.K;
  for (double x : {1e-5, 1e-3, 0.01, x_g - 1e-4, x_g + 0.005}) {
    const double h = 1e-7;
    const double fd = (slider_potential(x + h, p, c) - slider_potential(x - h, p, c)) / (2.0 * h);
    CHECK(fd == doctest::Approx(slider_tension_at(x, p, c)).epsilon(1e-3));
  }
  // Energy is the running integral, so it must be increasing past zero.
  CHECK(slider_potential(0.02, p, c) > slider_potential(0.01, p, c));
}

TEST_CASE("linkage coupling torque") {
  TransmissionConfig c;
  // Extension spring side: linkage bent past parallel.
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0 + 0.1, 0.0, c) ==
        doctest::Approx(-0.1 * (0.1 + kPi / 6.0)).epsilon(1e-9));
  // Stopper side pushes back toward the parallel pose.
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0 - 0.01, 0.0, c) == doctest::Approx(1.0));
  // The boundary pose belongs to the spring branch.
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0, 0.0, c) ==
        doctest::Approx(-c.k_e * c.theta_e_ofs).epsilon(1e-12));
  // With no spring preload the two branches meet continuously.
  TransmissionConfig c0 = c;
  c0.theta_e_ofs = 0.0;
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0 - 1e-12, 0.0, c0) == doctest::Approx(0.0));
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0, 0.0, c0) == doctest::Approx(0.0));
  // The reference pose tracks the base joint.
  CHECK(parallel_coupling_torque(2.0 * kPi / 3.0 - 0.2, 0.2, c) ==
        doctest::Approx(-c.k_e * c.theta_e_ofs).epsilon(1e-12));
}

TEST_CASE("net joint torques at the trial start pose") {
  DesignParams p;
  TransmissionConfig c;
  c.x_ofs = -p.r_I * c.theta_ofs;  // take-up is zero in the start pose
  HandState s;
  s.theta_I1 = s.theta_I2 = c.theta_ofs;
  SliderState sl = slider_state(s, p, c);
  CHECK(sl.x_t == doctest::Approx(0.0));
  CHECK(sl.T_s == 0.0);
  JointTorques t = net_joint_torques(s, p, c, 0.0);
  CHECK(t.tau_I1 == doctest::Approx(-0.05235988).epsilon(1e-6));
  CHECK(t.tau_M1 == doctest::Approx(-0.26179939).epsilon(1e-6));
  CHECK(t.tau_I2 == doctest::Approx(t.tau_I1).epsilon(1e-12));
  CHECK(t.tau_M2 == doctest::Approx(t.tau_M1).epsilon(1e-12));
}

TEST_CASE("net torques include viscous joint damping") {
  DesignParams p;
  TransmissionConfig c;
  HandState s;
  s.theta_I1 = s.theta_I2 = c.theta_ofs;
  JointTorques still = net_joint_torques(s, p, c, 0.0);
  s.dtheta_M1 = 2.0;
  s.dtheta_I2 = -3.0;
  JointTorques moving = net_joint_torques(s, p, c, 0.0);
  CHECK(moving.tau_M1 - still.tau_M1 == doctest::Approx(-c.K_damp * 2.0).epsilon(1e-12));
  CHECK(moving.tau_I2 - still.tau_I2 == doctest::Approx(c.K_damp * 3.0).epsilon(1e-12));
}

TEST_CASE("crawler generalized force balances the two tensions") {
  DesignParams p;
  TransmissionConfig c;
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    HandState s = at_rest(rng.uniform(-0.01, 0.03));
    const double Tm = rng.uniform(0.0, 100.0);
    const double Ts = slider_state(s, p, c).T_s;
    CHECK(actuation_torques(s, p, Tm, Ts).tau_c == doctest::Approx(Tm - Ts).epsilon(1e-12));
  }
}

TEST_CASE("implicit crawler step holds a tension equilibrium") {
  DesignParams p;
  TransmissionConfig c;
  HandState s = at_rest(0.01);
  const double Tm = slider_state(s, p, c).T_s;  // motor exactly balances the spring
  const double w = crawler_implicit_rate(s, p, c, Tm, 1e-3);
  CHECK(w == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("implicit crawler step relaxes tension toward the motor") {
  DesignParams p;
  TransmissionConfig c;
  const double dt = 1e-3;
  HandState s = at_rest(0.0);
  for (int i = 0; i < 2000; ++i) {
    const double w = crawler_implicit_rate(s, p, c, 50.0, dt);
    s.dtheta_c = w;
    s.theta_c += dt * w;
  }
  const SliderState sl = slider_state(s, p, c);
  CHECK(sl.T_s == doctest::Approx(50.0).epsilon(2e-3));
  CHECK(sl.mode == Mode::PullIn);
}

TEST_CASE("rising motor tension walks through the three modes in order") {
  DesignParams p;
  TransmissionConfig c;
  c.x_max = 0.010;  // keeps the travel stop reachable at 100 N
  const double dt = 1e-3;
  HandState s = at_rest(0.0);
  int last = -1;
  bool ordered = true;
  for (int i = 0; i < 4000; ++i) {
    const double Tm = std::min(i * dt / 2.0, 1.0) * 100.0;
    const double w = crawler_implicit_rate(s, p, c, Tm, dt);
    s.dtheta_c = w;
    s.theta_c += dt * w;
    const int mode = static_cast<int>(slider_state(s, p, c).mode);
    if (mode < last) ordered = false;
    last = mode;
  }
  CHECK(ordered);
  CHECK(last == static_cast<int>(Mode::PowerGrasp));
}

TEST_CASE("implicit crawler step bleeds off a travel-stop launch") {
  DesignParams p;
  TransmissionConfig c;
  const double dt = 1e-3;
  // Deep in the stiff regime (x_t > x_g) the local stiffness is K = 1e6 N/m,
  // storing ~450 J; an explicit step would launch the crawler at ~3000 m/s.
  HandState s = at_rest(0.05);
  double peak = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double w = crawler_implicit_rate(s, p, c, 0.0, dt);
    s.dtheta_c = w;
    s.theta_c += dt * w;
    peak = std::max(peak, std::abs(w));
  }
  CHECK(peak < 31.0);
  CHECK(slider_state(s, p, c).T_s == 0.0);  // tendon left slack, not oscillating
}

TEST_CASE("implicit crawler step settles onto the pretension knee") {
  DesignParams p;
  TransmissionConfig c;
  const double dt = 1e-3;
  HandState s = at_rest(0.01);
  for (int i = 0; i < 3000; ++i) {
    const double w = crawler_implicit_rate(s, p, c, p.T_pt, dt);
    s.dtheta_c = w;
    s.theta_c += dt * w;
  }
  CHECK(std::abs(s.dtheta_c) < 1e-6);
  const SliderState sl = slider_state(s, p, c);
  CHECK(sl.x_t == doctest::Approx(p.T_pt / c.K).epsilon(1e-6));
  CHECK(sl.T_s == doctest::Approx(p.T_pt).epsilon(1e-6));
}

TEST_CASE("design bounds and validation") {
  DesignParams p = DesignParams::reference_optimum();
  CHECK_NOTHROW(p.validate());
  CHECK(design_bounds().size() == 8);
  CHECK(std::string(design_bounds()[0].name) == "l_D");

  DesignParams bad = p;
  bad.l_D = 0.2;
  CHECK_THROWS_AS(bad.validate(), GfError);
  try {
    bad.validate();
  } catch (const GfError& e) {
    CHECK(e.kind() == ErrorKind::Geometry);
  }

  DesignParams tight = p;  // pulley no longer clears the wrap arm
  tight.r_I = 0.0075;
  tight.R_I = 0.008;
  CHECK_THROWS_AS(tight.validate(), GfError);
}

TEST_CASE("transmission config validation") {
  TransmissionConfig c;
  CHECK_NOTHROW(c.validate(3100.0));
  CHECK_NOTHROW(c.validate(5000.0));
  TransmissionConfig soft = c;
  soft.K = 1000.0;
  CHECK_THROWS_AS(soft.validate(3100.0), GfError);
  TransmissionConfig bad = c;
  bad.x_max = 0.0;
  CHECK_THROWS_AS(bad.validate(3100.0), GfError);
}
