#include "core/transmission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gf {
namespace {

double wrap_arm(double R, double theta) { return R * std::sqrt(1.0 + std::sin(theta)); }

// Slider tension as a function of the tendon take-up x_t, one linear piece
// per grasp regime (slack, direct, series spring, travel limit).
struct TensionPiece {
  double lo, hi;  // x_t interval
  double a, b;    // T = a*x + b on the interval
};

struct TensionLaw {
  TensionPiece piece[4];
  int n = 4;
};

TensionLaw tension_law(const DesignParams& p, const TransmissionConfig& c) {
  const double K = c.K;
  const double x1 = p.T_pt / K;
  const double xg = (c.x_max * (K + p.k_s) + p.T_pt) / K;
  const double inf = std::numeric_limits<double>::infinity();
  TensionLaw law;
  law.piece[0] = {-inf, 0.0, 0.0, 0.0};
  law.piece[1] = {0.0, x1, K, 0.0};
  law.piece[2] = {x1, xg, K * p.k_s / (K + p.k_s), K * p.T_pt / (K + p.k_s)};
  law.piece[3] = {xg, inf, K, -K * c.x_max};
  return law;
}

}  // namespace

void DesignParams::validate() const {
  const double vals[8] = {l_D, l_P, l_M, r_I, R_I, R_M, k_s, T_pt};
  const auto& bounds = design_bounds();
  for (int i = 0; i < 8; ++i) {
    if (!(vals[i] >= bounds[i].lo && vals[i] <= bounds[i].hi)) {
      raise(ErrorKind::Geometry, std::string(bounds[i].name) + " out of range");
    }
  }
  if (r_I > R_I - kPulleyMargin) {
    raise(ErrorKind::Geometry, "r_I must leave clearance under R_I");
  }
}

const std::array<ParamBound, 8>& design_bounds() {
  static const std::array<ParamBound, 8> kBounds = {{
      {"l_D", 0.040, 0.080},
      {"l_P", 0.060, 0.120},
      {"l_M", 0.040, 0.080},
      {"r_I", 0.004, 0.012 - kPulleyMargin},
      {"R_I", 0.008, 0.012},
      {"R_M", 0.010, 0.020},
      {"k_s", 20.0, 5000.0},
      {"T_pt", 0.1, 50.0},
  }};
  return kBounds;
}

void TransmissionConfig::validate(double k_s) const {
  if (K <= 0.0 || x_max <= 0.0 || m_c <= 0.0) {
    raise(ErrorKind::Config, "K, x_max and m_c must be positive");
  }
  if (K < 100.0 * k_s) {
    raise(ErrorKind::Config, "series stiffness K must dominate the slider spring");
  }
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Parallel: return "Parallel";
    case Mode::PullIn: return "PullIn";
    case Mode::PowerGrasp: return "PowerGrasp";
  }
  return "?";
}

JointTorques actuation_torques(const HandState& s, const DesignParams& p, double T_m, double T_s) {
  JointTorques t;
  const double r_M = p.r_M();
  t.tau_M1 = (wrap_arm(p.R_M, s.theta_M1) + r_M) * T_m;
  t.tau_I1 = (wrap_arm(p.R_I, s.theta_I1) - p.r_I) * T_m;
  t.tau_M2 = wrap_arm(p.R_M, s.theta_M2) * T_m + r_M * T_s;
  t.tau_I2 = wrap_arm(p.R_I, s.theta_I2) * T_m - p.r_I * T_s;
  t.tau_c = T_m - T_s;
  return t;
}

SliderState slider_state(const HandState& s, const DesignParams& p, const TransmissionConfig& c) {
  SliderState out;
  out.x_t = s.theta_c + p.r_I * s.theta_I2 - p.r_M() * s.theta_M2 + c.x_ofs;
  const double x_free = (c.K * out.x_t - p.T_pt) / (c.K + p.k_s);
  out.x_s = std::clamp(x_free, 0.0, c.x_max);
  out.T_s = std::max(c.K * (out.x_t - out.x_s), 0.0);
  if (x_free < 0.0) {
    out.mode = Mode::Parallel;
  } else if (x_free > c.x_max) {
    out.mode = Mode::PowerGrasp;
  } else {
    out.mode = Mode::PullIn;
  }
  return out;
}

double parallel_coupling_torque(double theta_I, double theta_M, const TransmissionConfig& c) {
  const double d = theta_I - (c.theta_ofs - theta_M);
  if (d >= 0.0) {
    return -c.k_e * (d + c.theta_e_ofs);  // extension spring engaged
  }
  return -c.K_prime * d;  // stopper pushes the linkage back toward parallel
}

JointTorques net_joint_torques(const HandState& s, const DesignParams& p,
                               const TransmissionConfig& c, double T_m) {
  return net_joint_torques(s, p, c, T_m, slider_state(s, p, c).T_s);
}

JointTorques net_joint_torques(const HandState& s, const DesignParams& p,
                               const TransmissionConfig& c, double T_m, double T_s) {
  JointTorques t = actuation_torques(s, p, T_m, T_s);
  const double tp1 = parallel_coupling_torque(s.theta_I1, s.theta_M1, c);
  const double tp2 = parallel_coupling_torque(s.theta_I2, s.theta_M2, c);
  t.tau_I1 += tp1 - c.K_damp * s.dtheta_I1;
  t.tau_M1 += tp1 - c.k_e * (s.theta_M1 + c.theta_ofs) - c.K_damp * s.dtheta_M1;
  t.tau_I2 += tp2 - c.K_damp * s.dtheta_I2;
  t.tau_M2 += tp2 - c.k_e * (s.theta_M2 + c.theta_ofs) - c.K_damp * s.dtheta_M2;
  return t;
}

double crawler_implicit_rate(const HandState& s, const DesignParams& p,
                             const TransmissionConfig& c, double T_m, double dt) {
  // Solve m_c*(w - w0) = dt*(T_m - T(x(w))) with x(w) the take-up after the
  // step, using the joint rates the crawler will see this step.
  const double x0 = (s.theta_c) + p.r_I * (s.theta_I2 + dt * s.dtheta_I2) -
                    p.r_M() * (s.theta_M2 + dt * s.dtheta_M2) + c.x_ofs;
  const double w0 = s.dtheta_c;
  const TensionLaw law = tension_law(p, c);
  double best = w0;
  for (int i = 0; i < law.n; ++i) {
    const TensionPiece& q = law.piece[i];
    const double w = (c.m_c * w0 + dt * (T_m - q.a * x0 - q.b)) / (c.m_c + dt * dt * q.a);
    const double x = x0 + dt * w;
    const double tol = 1e-12 + 1e-9 * std::abs(x);
    if (x >= q.lo - tol && x <= q.hi + tol) return w;
    best = w;
  }
  return best;  // unreachable for a continuous monotone law; keep last piece
}

double slider_tension(double x_t, const DesignParams& p, const TransmissionConfig& c) {
  const TensionLaw law = tension_law(p, c);
  for (int i = 0; i < law.n; ++i) {
    if (x_t <= law.piece[i].hi) return law.piece[i].a * x_t + law.piece[i].b;
  }
  return 0.0;
}

double slider_stiffness(double x_t, const DesignParams& p, const TransmissionConfig& c) {
  const TensionLaw law = tension_law(p, c);
  for (int i = 0; i < law.n; ++i) {
    if (x_t <= law.piece[i].hi) return law.piece[i].a;
  }
  return 0.0;
}

CoupledRates coupled_crawler_rates(const HandState& s, const DesignParams& p,
                                   const TransmissionConfig& c, double T_m,
                                   double tau_M_rest, double tau_I_rest,
                                   double M00, double M01, double M11,
                                   double stiff_M, double stiff_I, double dt) {
  // D*(w - w0) = dt*(tau - T(x0 + dt*g.w)*g) with g = dx_t/dq over
  // q = (theta_c, theta_M2, theta_I2) and D = diag(m_c, finger mass matrix)
  // plus dt^2 times any active joint-stop stiffness on the diagonal.
  // Per linear piece T = a*x + b this is (D + a*dt^2*g*g^T) w = rhs; accept
  // the piece whose solution lands inside it.
  const double rM = p.r_M();
  const double g0 = 1.0, g1 = -rM, g2 = p.r_I;
  const double x0 = s.theta_c + p.r_I * s.theta_I2 - rM * s.theta_M2 + c.x_ofs;
  const TensionLaw law = tension_law(p, c);
  CoupledRates out;
  for (int i = 0; i < law.n; ++i) {
    const TensionPiece& q = law.piece[i];
    const double k = q.a * dt * dt;
    const double f = q.a * x0 + q.b;
    const double A00 = c.m_c + k * g0 * g0, A01 = k * g0 * g1, A02 = k * g0 * g2;
    const double A11 = M00 + dt * dt * stiff_M + k * g1 * g1, A12 = M01 + k * g1 * g2;
    const double A22 = M11 + dt * dt * stiff_I + k * g2 * g2;
    const double r0 = c.m_c * s.dtheta_c + dt * (T_m - f * g0);
    const double r1 = M00 * s.dtheta_M2 + M01 * s.dtheta_I2 + dt * (tau_M_rest - f * g1);
    const double r2 = M01 * s.dtheta_M2 + M11 * s.dtheta_I2 + dt * (tau_I_rest - f * g2);
    const double c00 = A11 * A22 - A12 * A12;
    const double c01 = A02 * A12 - A01 * A22;
    const double c02 = A01 * A12 - A02 * A11;
    const double c11 = A00 * A22 - A02 * A02;
    const double c12 = A01 * A02 - A00 * A12;
    const double c22 = A00 * A11 - A01 * A01;
    const double det = A00 * c00 + A01 * c01 + A02 * c02;
    out.w_c = (c00 * r0 + c01 * r1 + c02 * r2) / det;
    out.w_M = (c01 * r0 + c11 * r1 + c12 * r2) / det;
    out.w_I = (c02 * r0 + c12 * r1 + c22 * r2) / det;
    out.x_t = x0 + dt * (g0 * out.w_c + g1 * out.w_M + g2 * out.w_I);
    out.T_s = std::max(q.a * out.x_t + q.b, 0.0);
    out.stiffness = q.a;
    const double tol = 1e-12 + 1e-9 * std::abs(out.x_t);
    if (out.x_t >= q.lo - tol && out.x_t <= q.hi + tol) return out;
  }
  return out;  // unreachable for a continuous monotone law; keep last piece
}

double slider_potential(double x_t, const DesignParams& p, const TransmissionConfig& c) {
  if (x_t <= 0.0) return 0.0;
  const TensionLaw law = tension_law(p, c);
  double e = 0.0;
  for (int i = 1; i < law.n; ++i) {
    const TensionPiece& q = law.piece[i];
    const double hi = std::min(x_t, q.hi);
    if (hi <= q.lo) break;
    e += 0.5 * q.a * (hi * hi - q.lo * q.lo) + q.b * (hi - q.lo);
    if (x_t <= q.hi) break;
  }
  return e;
}

}  // namespace gf
