#pragma once

#include <cstdint>
#include <vector>

#include "core/dynamics.hpp"
#include "core/object_spec.hpp"
#include "core/transmission.hpp"

namespace gf {

// Grasp-and-lift trial protocol. A trial closes the hand on an object resting
// on the ground, waits for the joints to settle, then lifts while shaking the
// object with a wrench that grows with the lift. The credited height h is the
// palm lift at the last moment the hand still held the object (capped at
// max_height when the grasp never gives out).
struct ProtocolConfig {
  double T_m_max = 100.0;        // motor tension plateau [N]
  double ramp_s = 2.0;           // tension ramp duration [s]
  // The proportional palm servo must track the fingertip descent demand
  // (~0.1 m/s) with a steady-state error below the 1 mm ground clearance,
  // or the tips plow the desk and friction stalls the close.
  double servo_gain = 300.0;     // palm servo on the lowest fingertip [1/s]
  double servo_vmax = 0.3;       // palm speed clamp while closing [m/s]
  double settle_rate = 0.01;     // joint speed counted as quiet [rad/s]
  double settle_hold_s = 0.1;    // quiet time that counts as settled [s]
  double close_max_wait_s = 6.0; // give up waiting for settle after this [s]
  double lift_speed = 0.1;       // palm ascent rate [m/s]
  double disturb_period = 0.1;   // wrench resample interval [s]
  double disturb_force = 50.0;   // force per meter of achieved lift [N/m]
  double disturb_torque = 1.0;   // torque per meter of achieved lift [N*m/m]
  double contact_grace = 0.2;    // hand-contact gap that counts as a drop [s]
  double sink_tol = 1e-3;        // sag below the start height that counts [m]
  double sink_min_lift = 0.02;   // palm travel before the sag check arms [m]
  double spin_limit = 50.0;      // object spin that counts as lost [rad/s]
  double max_height = 2.0;       // lift at which the trial stops scoring [m]
  double timeout_s = 30.0;       // hard cap on simulated time [s]
};

enum class Termination {
  MaxHeight,    // carried the object to the scoring cap
  Timeout,      // simulated-time budget ran out
  LostContact,  // hand lost the object for contact_grace seconds
  Sank,         // object fell below its start height while the palm was up
  Spun,         // object spin exceeded spin_limit
  Unstable,     // the simulation diverged
  Unfit,        // the object does not fit the hand at these parameters
};

const char* termination_name(Termination t);

struct TrialResult {
  double h = 0.0;  // credited palm lift [m], in [0, max_height]
  Termination term = Termination::Unfit;
  bool modes_in_order = false;  // Parallel -> PullIn -> PowerGrasp, in order
  // First time each mode appeared, in the order they appeared. The raw label
  // can flicker at the tension-law knees, so only advances are recorded.
  std::vector<std::pair<double, Mode>> mode_trace;
  int final_contacts = 0;  // contact points in the world at termination
  double sim_time = 0.0;   // simulated seconds the trial consumed
};

// Hook for tracing and rendering. on_step fires after every world step with
// the commands that produced it; on_phase fires when the protocol advances.
struct TrialObserver {
  virtual ~TrialObserver() = default;
  virtual void on_step(const World& w, double T_m, double palm_v) {
    (void)w;
    (void)T_m;
    (void)palm_v;
  }
  virtual void on_phase(const World& w, const char* name) {
    (void)w;
    (void)name;
  }
};

TrialResult run_grasp_trial(const DesignParams& p, const TransmissionConfig& tc,
                            const WorldConfig& wc, const ProtocolConfig& pc,
                            const ObjectSpec& obj, uint64_t seed,
                            TrialObserver* obs = nullptr);

// Multiplicative score over per-object mean heights: prod_i (1 + mean_h[i]).
// An empty list scores 1; a design that lifts nothing scores 1.
double lift_product_score(const std::vector<double>& mean_h);

struct EvalResult {
  double score = 1.0;
  std::vector<double> mean_h;  // per object, averaged over repeats
};

// Runs `repeats` trials per object and folds the means into the product
// score. Trial seeds derive from `seed` by object index, then repeat index.
EvalResult evaluate_design(const DesignParams& p, const TransmissionConfig& tc,
                           const WorldConfig& wc, const ProtocolConfig& pc,
                           const std::vector<ObjectSpec>& objects, int repeats,
                           uint64_t seed);

// Squeezes a rigid fixed spacer of the given width between the fingertips
// (no ground; the palm runs the same tip-height servo as a trial close, and
// the spacer faces span only the fingertip band). Ramps the motor to T_m_max
// and returns the mean total normal force on the spacer face pressed by the
// plain finger over the final 0.2 s of a 3 s run.
double measure_grasp_force(const DesignParams& p, const TransmissionConfig& tc,
                           const WorldConfig& wc, const ProtocolConfig& pc,
                           double width);

}  // namespace gf
