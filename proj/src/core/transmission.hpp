#pragma once
#include <array>
#include <string>

#include "core/error.hpp"

namespace gf {

inline constexpr double kPi = 3.14159265358979323846;

// Tendon clearance between the wrap arm and the return pulley: r_M = R_M - margin.
inline constexpr double kPulleyMargin = 0.001;

// The eight optimized design variables, SI units throughout.
struct DesignParams {
  double l_D = 0.074;   // distal link length [m]
  double l_P = 0.092;   // proximal link length [m]
  double l_M = 0.080;   // base joint spacing [m]
  double r_I = 0.007;   // IP return pulley radius [m]
  double R_I = 0.008;   // IP wrap arm at extension [m]
  double R_M = 0.020;   // MP wrap arm at extension [m]
  double k_s = 3100.0;  // slider spring stiffness [N/m]
  double T_pt = 24.0;   // slider spring pretension [N]

  double r_M() const { return R_M - kPulleyMargin; }

  // The reference optimum used as default everywhere.
  static DesignParams reference_optimum() { return {}; }

  void validate() const;  // bounds below plus r_I <= R_I - margin
};

struct ParamBound {
  const char* name;
  double lo;
  double hi;  // for r_I this is the static cap; the live cap is R_I - margin
};

// Canonical search bounds, same order as the sampler dimensions.
const std::array<ParamBound, 8>& design_bounds();

struct TransmissionConfig {
  double K = 1e6;                        // series compliance between tendon and slider [N/m]
  double K_prime = 100.0;                // parallel-stopper gain [N*m/rad]
  double K_damp = 0.05;                  // joint viscous damping [N*m*s/rad]
  double k_e = 0.1;                      // extension spring stiffness [N*m/rad]
  double theta_e_ofs = kPi / 6.0;        // extension spring preload [rad]
  double theta_ofs = 2.0 * kPi / 3.0;    // finger attach angle [rad]
  double x_max = 0.020;                  // slider travel limit [m]
  double x_ofs = 0.0;                    // offset making x_t zero at trial start [m]
  double m_c = 0.010;                    // effective crawler inertia [kg]

  void validate(double k_s) const;  // K must dominate k_s for the series model
};

// Joint displacements from full extension plus the crawler coordinate.
// Finger 1 is the plain finger, finger 2 carries the crawler.
struct HandState {
  double theta_M1 = 0.0;
  double theta_I1 = 0.0;
  double theta_M2 = 0.0;
  double theta_I2 = 0.0;
  double theta_c = 0.0;
  double dtheta_M1 = 0.0;
  double dtheta_I1 = 0.0;
  double dtheta_M2 = 0.0;
  double dtheta_I2 = 0.0;
  double dtheta_c = 0.0;
};

enum class Mode { Parallel, PullIn, PowerGrasp };

const char* mode_name(Mode m);

struct SliderState {
  double x_t = 0.0;  // slider position implied by the hand state [m]
  double x_s = 0.0;  // clamped slider position [m]
  double T_s = 0.0;  // sliding-part tension [N]
  Mode mode = Mode::Parallel;
};

struct JointTorques {
  double tau_M1 = 0.0;
  double tau_I1 = 0.0;
  double tau_M2 = 0.0;
  double tau_I2 = 0.0;
  double tau_c = 0.0;  // generalized force on the crawler coordinate [N]
};

// Raw tendon torques for given motor tension T_m and sliding-part tension T_s.
JointTorques actuation_torques(const HandState& s, const DesignParams& p, double T_m, double T_s);

// Slider position, tension and grasp mode implied by the current hand state.
SliderState slider_state(const HandState& s, const DesignParams& p, const TransmissionConfig& c);

// Coupling torque between a finger's parallel-link stopper and its extension
// spring. Applied identically to the finger's IP and MP joints.
double parallel_coupling_torque(double theta_I, double theta_M, const TransmissionConfig& c);

// Full per-joint torques: tendon + coupling + base extension spring + damping.
// The first form derives the sliding-part tension from the state; the second
// takes it explicitly (the stepper supplies the implicitly solved value).
JointTorques net_joint_torques(const HandState& s, const DesignParams& p,
                               const TransmissionConfig& c, double T_m);
JointTorques net_joint_torques(const HandState& s, const DesignParams& p,
                               const TransmissionConfig& c, double T_m, double T_s);

// New crawler rate after one implicit step against the piecewise-linear
// tension law. The stiff series compliance K makes an explicit update
// unstable at any practical timestep; this solve is exact per linear piece.
double crawler_implicit_rate(const HandState& s, const DesignParams& p,
                             const TransmissionConfig& c, double T_m, double dt);

// Potential energy stored by the slider spring and series compliance at x_t.
double slider_potential(double x_t, const DesignParams& p, const TransmissionConfig& c);

// Sliding-part tension as a direct function of take-up, and its local slope.
double slider_tension(double x_t, const DesignParams& p, const TransmissionConfig& c);
double slider_stiffness(double x_t, const DesignParams& p, const TransmissionConfig& c);

// One implicit velocity step of the crawler together with the crawler-side
// joints. The take-up x_t = theta_c + r_I*theta_I2 - r_M*theta_M2 + x_ofs
// couples all three rates through the stiff tension law, so stepping the
// joints explicitly against the tension diverges just like the bare crawler
// would; this solves the 3x3 backward-Euler system exactly per linear piece.
// tau_M_rest / tau_I_rest are the complete generalized forces on the
// crawler-side joints excluding the take-up tension terms, M00/M01/M11 is the
// finger's joint-space mass matrix, and stiff_M / stiff_I are extra diagonal
// stiffnesses (active one-sided joint stops) folded into the same solve.
struct CoupledRates {
  double w_c = 0.0;        // crawler rate
  double w_M = 0.0;        // crawler-side MP joint rate
  double w_I = 0.0;        // crawler-side IP joint rate
  double x_t = 0.0;        // take-up implied by the new rates
  double T_s = 0.0;        // tension at that take-up
  double stiffness = 0.0;  // local tension slope dT/dx there
};
CoupledRates coupled_crawler_rates(const HandState& s, const DesignParams& p,
                                   const TransmissionConfig& c, double T_m,
                                   double tau_M_rest, double tau_I_rest,
                                   double M00, double M01, double M11,
                                   double stiff_M, double stiff_I, double dt);

}  // namespace gf
