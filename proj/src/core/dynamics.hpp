#pragma once
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "core/collide.hpp"
#include "core/object_spec.hpp"
#include "core/transmission.hpp"
#include "core/vec2.hpp"

namespace gf {

enum class Material : uint8_t { Link, Belt, Palm, Object, Ground };

struct WorldConfig {
  double dt = 1e-3;            // [s]
  double gravity = 9.81;       // [m/s^2]
  int solver_iters = 16;
  double baumgarte = 0.2;      // position-error feedback fraction
  double slop = 1e-4;          // tolerated overlap [m]
  double bias_cap = 0.5;       // max push-out speed [m/s]
  double mu_belt_object = 1.0;
  double mu_link_object = 0.5;   // also palm against object
  double mu_object_ground = 0.4;
  double mu_link_ground = 0.5;
  double mu_belt_ground = 1.0;
  double mu_default = 0.5;
  double joint_limit_k = 200.0;  // [N*m/rad]
  double joint_lo = 0.0;
  double joint_hi = kPi;
  double diverge_speed = 100.0;  // [m/s]
  double m_pp = 0.08;   // proximal link mass [kg]
  double m_dp = 0.06;   // distal link mass [kg]
  double w_pp = 0.006;  // proximal link half thickness [m]
  double h_t = 0.008;   // distal link half thickness [m]
  double R_t = 0.004;   // fingertip pulley radius [m]
  double palm_h = 0.020;        // palm block height [m]
  double palm_margin = 0.010;   // palm overhang past the base joints [m]

  void validate() const;
};

struct Fixture {
  bool is_circle = false;
  Poly poly;          // local frame; finger links use (axial, lateral)
  Vec2 c;             // circle center, local
  double r = 0.0;
  Material mat = Material::Object;
  bool belt = false;  // carries the crawler surface
};

struct Body {
  Vec2 pos;
  double angle = 0.0;
  Vec2 vel;
  double omega = 0.0;
  double inv_m = 0.0;  // zero = static or kinematic
  double inv_I = 0.0;
  double belt_speed = 0.0;  // constant conveyor surface speed (test rigs)
  bool palm = false;        // suppresses hand-internal contact pairs
  std::vector<Fixture> fixtures;
};

Body make_object_body(const ObjectSpec& spec, Vec2 pos);

// One side of a contact: either a free body or a finger link.
struct ContactSide {
  int body = -1;
  int finger = -1;  // 0 = plain finger, 1 = crawler finger
  int link = -1;    // 0 = proximal, 1 = distal
  bool is_link() const { return finger >= 0; }
};

struct ContactPoint {
  Vec2 p;
  Vec2 n;   // from side b toward side a
  double jn = 0.0;   // normal impulse applied this step [N*s]
  double jt = 0.0;   // friction impulse applied this step [N*s]
  double pen = 0.0;
  double mu = 0.0;
  ContactSide a, b;
  Material mat_a = Material::Object;
  Material mat_b = Material::Object;
  bool belt = false;  // friction row coupled to the crawler
};

struct StepDiag {
  double belt_row_impulse = 0.0;  // sum of jc*jt over crawler-coupled rows
  double T_s = 0.0;               // tension the velocity update worked against
  double x_t = 0.0;               // take-up implied by the implicit step
  int contact_count = 0;
};

class World {
 public:
  explicit World(const WorldConfig& wc = {}, const DesignParams& p = {},
                 const TransmissionConfig& tc = {});

  int add_body(const Body& b);
  int add_ground();  // static block whose top face is y = 0
  void attach_hand(double palm_y);
  void set_joint_state(int finger, double th_M, double th_I, double w_M, double w_I);
  void set_object(int body);
  void set_object_wrench(Vec2 force, double torque);

  // One fixed-step update: `T_m` is the motor tension, `palm_v` the commanded
  // vertical palm speed. Throws GfError(Simulation) on divergence.
  void step(double T_m, double palm_v);

  double time() const { return time_; }
  bool has_hand() const { return has_hand_; }
  const HandState& hand() const { return hand_state_; }
  SliderState slider() const;
  int palm_body() const { return palm_body_; }
  int object_body() const { return object_body_; }
  double palm_y() const;
  double lowest_tip_y() const;
  const std::vector<ContactPoint>& contacts() const { return contacts_; }
  const Body& body(int i) const { return bodies_[i]; }
  Body& body_mut(int i) { return bodies_[i]; }
  int body_count() const { return static_cast<int>(bodies_.size()); }
  const StepDiag& diag() const { return diag_; }
  double energy() const;  // kinetic + gravitational + spring energy
  const WorldConfig& config() const { return cfg_; }
  const DesignParams& params() const { return params_; }
  const TransmissionConfig& transmission() const { return tcfg_; }

  struct WorldShape {  // world-space snapshot, for rendering and probes
    bool is_circle = false;
    Poly poly;
    Vec2 c;
    double r = 0.0;
    Material mat = Material::Object;
    bool belt = false;
    ContactSide owner;
  };
  std::vector<WorldShape> shapes() const;

  struct LinkFrame {  // world-space joint frames of one finger
    Vec2 mp, ip;        // base and interphalangeal joint positions
    Vec2 uP, lP;        // proximal axis and inward lateral units
    Vec2 uD, lD;        // distal axis and inward lateral units
    bool crawler = false;
  };
  LinkFrame finger_frame(int finger) const;

 private:
  struct Finger {
    double s = 1.0;    // +1 when inward is +x (left finger)
    double mp_x = 0.0;  // palm-local base joint offset
    bool crawler = false;
    double th_M = 0.0, th_I = 0.0, w_M = 0.0, w_I = 0.0;
    // world frames, refreshed after every position change
    Vec2 mp, ip;
    double aP = 0.0, aD = 0.0;
    Vec2 uP, lP, uD, lD;  // link axis and inward lateral unit vectors
    // mass properties
    double m1 = 0.0, m2 = 0.0, I1 = 0.0, I2 = 0.0, d1 = 0.0, d2 = 0.0;
    // joint-space mass matrix and inverse, refreshed each step
    double M00 = 0.0, M01 = 0.0, M11 = 0.0;
    double iM00 = 0.0, iM01 = 0.0, iM11 = 0.0;
    // contact-phase inverse: (M + dt^2 * active joint-stop stiffness)^-1, so
    // impulses on a finger resting against a stop see the stop's resistance
    double iC00 = 0.0, iC01 = 0.0, iC11 = 0.0;
    std::vector<Fixture> fix[2];  // [0] proximal, [1] distal
  };

  struct Row {
    ContactSide a, b;
    Vec2 p, n, t;
    double pen = 0.0, mu = 0.0;
    double kn = 0.0, kt = 0.0;
    double bias = 0.0;
    double jc = 0.0;    // coefficient of the crawler rate in tangent velocity
    double surf = 0.0;  // constant conveyor term in tangent velocity
    double an = 0.0, at = 0.0;
    uint64_t key = 0;
    bool belt = false;
    Material mat_a = Material::Object, mat_b = Material::Object;
  };

  void refresh_finger_frames();
  void refresh_mass_matrix(Finger& f);
  void refresh_contact_inverse(Finger& f, double stiff_M, double stiff_I);
  void refresh_trio_response(double stiffness, double stiff_M, double stiff_I);
  void apply_crawler_impulse(double lc);
  Vec2 point_vel(const ContactSide& s, Vec2 p) const;
  void apply_impulse(const ContactSide& s, Vec2 p, Vec2 imp);
  double inv_mass_along(const ContactSide& s, Vec2 p, Vec2 d) const;
  void link_world_shape(const Finger& f, int link, const Fixture& fx, WorldShape& out) const;
  void build_rows();
  void solve_rows();
  double mu_between(Material a, Material b) const;
  void sync_hand_state();
  void check_finite() const;

  WorldConfig cfg_;
  DesignParams params_;
  TransmissionConfig tcfg_;
  std::vector<Body> bodies_;
  bool has_hand_ = false;
  int palm_body_ = -1;
  int object_body_ = -1;
  Finger fingers_[2];
  double th_c_ = 0.0, w_c_ = 0.0;
  // Contact-phase response of (w_c, w_M2, w_I2) to generalized impulses:
  // inverse of D + a*dt^2*g*g^T with a the local tension slope, matching the
  // implicit velocity step. Without it, contact impulses on the crawler
  // finger work against bare inertias and re-excite the stiff take-up mode.
  double H_[3][3] = {};
  Vec2 obj_force_;
  double obj_torque_ = 0.0;
  double time_ = 0.0;
  HandState hand_state_;
  SliderState slider_cache_;
  std::vector<Row> rows_;
  std::vector<ContactPoint> contacts_;
  std::unordered_map<uint64_t, std::pair<double, double>> warm_;
  StepDiag diag_;
};

// Standard trial rig: ground, hand at the start pose, object resting between
// the fingertips. Throws GfError(Geometry) when the object cannot fit in the
// opening. The take-up offset is set so x_t = 0 in the start pose.
World build_world(const DesignParams& p, TransmissionConfig tc, const WorldConfig& wc,
                  const ObjectSpec* obj);

// Take-up offset that zeroes x_t at the start pose.
inline double start_offset(const DesignParams& p, const TransmissionConfig& tc) {
  return -p.r_I * tc.theta_ofs;
}

// Palm height that puts the lowest fingertip point `clearance` above y = 0.
double start_palm_height(const DesignParams& p, const TransmissionConfig& tc, double clearance);

// Fingertip opening (inner face to inner face) at the start pose.
double start_opening(const DesignParams& p, const TransmissionConfig& tc, const WorldConfig& wc);

}  // namespace gf
