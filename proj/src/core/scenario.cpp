#include "core/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace gf {
namespace {

// True when any contact pairs the scored object with a finger link or the
// palm plate.
bool touching_hand(const World& w) {
  const int ob = w.object_body();
  for (const ContactPoint& c : w.contacts()) {
    const bool a_obj = !c.a.is_link() && c.a.body == ob;
    const bool b_obj = !c.b.is_link() && c.b.body == ob;
    if (a_obj == b_obj) continue;
    const ContactSide& other = a_obj ? c.b : c.a;
    if (other.is_link() || other.body == w.palm_body()) return true;
  }
  return false;
}

// First-occurrence mode order. The label can flicker at the knees of the
// tension law, so the tracker only ever advances.
struct ModeTracker {
  int stage = 0;
  std::vector<std::pair<double, Mode>> trace;

  void feed(double t, Mode m) {
    if ((stage == 0 && m == Mode::Parallel) ||
        (stage == 1 && m == Mode::PullIn) ||
        (stage == 2 && m == Mode::PowerGrasp)) {
      ++stage;
      trace.emplace_back(t, m);
    }
  }

  bool complete() const { return stage == 3; }
};

bool joints_quiet(const HandState& s, double rate) {
  return std::abs(s.dtheta_M1) < rate && std::abs(s.dtheta_I1) < rate &&
         std::abs(s.dtheta_M2) < rate && std::abs(s.dtheta_I2) < rate;
}

double servo_speed(const ProtocolConfig& pc, double tip_target, double tip) {
  return std::clamp(pc.servo_gain * (tip_target - tip), -pc.servo_vmax,
                    pc.servo_vmax);
}

TrialResult run_trial_inner(const DesignParams& p, const TransmissionConfig& tc,
                            const WorldConfig& wc, const ProtocolConfig& pc,
                            const ObjectSpec& obj, uint64_t seed,
                            TrialObserver* obs) {
  World w = build_world(p, tc, wc, &obj);
  const int ob = w.object_body();
  const double y0 = w.body(ob).pos.y;
  const double tip0 = w.lowest_tip_y();

  ModeTracker modes;
  modes.feed(w.time(), w.slider().mode);

  const auto finish = [&](double h, Termination term) {
    TrialResult r;
    r.h = std::clamp(h, 0.0, pc.max_height);
    r.term = term;
    r.modes_in_order = modes.complete();
    r.mode_trace = modes.trace;
    r.final_contacts = static_cast<int>(w.contacts().size());
    r.sim_time = w.time();
    return r;
  };

  // Close: ramp the motor while the palm servo keeps the fingertips at their
  // starting height, then wait for the joints to go quiet.
  if (obs != nullptr) obs->on_phase(w, "close");
  double quiet_since = -1.0;
  while (true) {
    if (w.time() >= pc.timeout_s) return finish(0.0, Termination::Timeout);
    const double T_m = pc.T_m_max * std::min(w.time() / pc.ramp_s, 1.0);
    const double palm_v = servo_speed(pc, tip0, w.lowest_tip_y());
    w.step(T_m, palm_v);
    modes.feed(w.time(), w.slider().mode);
    if (obs != nullptr) obs->on_step(w, T_m, palm_v);
    if (w.time() < pc.ramp_s) continue;
    if (joints_quiet(w.hand(), pc.settle_rate)) {
      if (quiet_since < 0.0) quiet_since = w.time();
      if (w.time() - quiet_since >= pc.settle_hold_s) break;
    } else {
      quiet_since = -1.0;
    }
    if (w.time() >= pc.ramp_s + pc.close_max_wait_s) break;
  }

  // Lift: raise the palm at a constant rate while a random wrench, scaled by
  // the lift already achieved, shakes the object. The credited height is the
  // palm lift at the last moment the hand still touched the object.
  if (obs != nullptr) obs->on_phase(w, "lift");
  Rng rng(seed);
  const double palm0 = w.palm_y();
  double last_contact = w.time();
  double h_held = 0.0;
  double next_resample = w.time();
  while (true) {
    const double lift = w.palm_y() - palm0;
    if (w.time() >= next_resample) {
      const double h_now = std::max(lift, 0.0);
      const double ang = 2.0 * kPi * rng.uniform01();
      const Vec2 force{pc.disturb_force * h_now * std::cos(ang),
                       pc.disturb_force * h_now * std::sin(ang)};
      const double torque =
          pc.disturb_torque * h_now * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
      w.set_object_wrench(force, torque);
      next_resample += pc.disturb_period;
    }
    w.step(pc.T_m_max, pc.lift_speed);
    modes.feed(w.time(), w.slider().mode);
    if (obs != nullptr) obs->on_step(w, pc.T_m_max, pc.lift_speed);

    const Body& o = w.body(ob);
    if (touching_hand(w)) {
      last_contact = w.time();
      h_held = w.palm_y() - palm0;
    }
    if (h_held >= pc.max_height) return finish(h_held, Termination::MaxHeight);
    if (std::abs(o.omega) > pc.spin_limit) {
      return finish(h_held, Termination::Spun);
    }
    if (w.time() - last_contact > pc.contact_grace) {
      return finish(h_held, Termination::LostContact);
    }
    if (w.palm_y() - palm0 > pc.sink_min_lift && o.pos.y - y0 < -pc.sink_tol) {
      return finish(w.palm_y() - palm0, Termination::Sank);
    }
    if (w.time() >= pc.timeout_s) return finish(h_held, Termination::Timeout);
  }
}

}  // namespace

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::MaxHeight: return "max_height";
    case Termination::Timeout: return "timeout";
    case Termination::LostContact: return "lost_contact";
    case Termination::Sank: return "sank";
    case Termination::Spun: return "spun";
    case Termination::Unstable: return "unstable";
    case Termination::Unfit: return "unfit";
  }
  return "unknown";
}

TrialResult run_grasp_trial(const DesignParams& p, const TransmissionConfig& tc,
                            const WorldConfig& wc, const ProtocolConfig& pc,
                            const ObjectSpec& obj, uint64_t seed,
                            TrialObserver* obs) {
  try {
    return run_trial_inner(p, tc, wc, pc, obj, seed, obs);
  } catch (const GfError& e) {
    if (e.kind() != ErrorKind::Geometry && e.kind() != ErrorKind::Simulation) {
      throw;
    }
    TrialResult r;
    r.term = e.kind() == ErrorKind::Geometry ? Termination::Unfit
                                             : Termination::Unstable;
    return r;
  }
}

double lift_product_score(const std::vector<double>& mean_h) {
  double score = 1.0;
  for (double h : mean_h) score *= 1.0 + h;
  return score;
}

EvalResult evaluate_design(const DesignParams& p, const TransmissionConfig& tc,
                           const WorldConfig& wc, const ProtocolConfig& pc,
                           const std::vector<ObjectSpec>& objects, int repeats,
                           uint64_t seed) {
  if (repeats < 1) raise(ErrorKind::Config, "repeats must be at least 1");
  EvalResult r;
  r.mean_h.reserve(objects.size());
  for (size_t oi = 0; oi < objects.size(); ++oi) {
    const uint64_t oseed = mix_seed(seed, oi);
    double sum = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      // A trial that cannot even be set up contributes nothing; the score
      // must never propagate an error out of the objective.
      try {
        sum += run_grasp_trial(p, tc, wc, pc, objects[oi],
                               mix_seed(oseed, static_cast<uint64_t>(rep)))
                   .h;
      } catch (const GfError&) {
      }
    }
    r.mean_h.push_back(sum / repeats);
  }
  r.score = lift_product_score(r.mean_h);
  return r;
}

double measure_grasp_force(const DesignParams& p, const TransmissionConfig& tc,
                           const WorldConfig& wc, const ProtocolConfig& pc,
                           double width) {
  if (width <= 0.0) raise(ErrorKind::Config, "spacer width must be positive");
  const double opening = start_opening(p, tc, wc);
  if (width > opening - 0.002) {
    raise(ErrorKind::Geometry,
          "spacer does not fit between the open fingertips");
  }

  TransmissionConfig tcfg = tc;
  tcfg.x_ofs = start_offset(p, tcfg);
  World w(wc, p, tcfg);
  w.attach_hand(start_palm_height(p, tcfg, 1e-3));
  const double tip0 = w.lowest_tip_y();

  // A rigid fixed spacer whose faces span the fingertip band plus a small
  // margin. The palm servo pins the tips at their starting height, so widths
  // the tips can straddle are read as a tip press at the same lever arm below
  // the knuckle. Widths near the vertical-hang tip gap (l_M - 2 R_t) cannot
  // be tip-pressed by this linkage at all; there the fingers pinch the top
  // corners, which is also how the squeeze lands on real hardware.
  const double top = tip0 + 2.0 * wc.R_t + 0.004;
  const double bottom = -0.05;
  Body spacer = make_object_body(ObjectSpec::box("spacer", width, top - bottom),
                                 {0.0, 0.5 * (top + bottom)});
  spacer.inv_m = 0.0;
  spacer.inv_I = 0.0;
  const int spacer_idx = w.add_body(spacer);

  const double dt = wc.dt;
  const int total_steps = static_cast<int>(std::lround(3.0 / dt));
  const int window = static_cast<int>(std::lround(0.2 / dt));
  double force_sum = 0.0;
  for (int i = 0; i < total_steps; ++i) {
    const double T_m = pc.T_m_max * std::min(w.time() / pc.ramp_s, 1.0);
    w.step(T_m, servo_speed(pc, tip0, w.lowest_tip_y()));
    if (i < total_steps - window) continue;
    for (const ContactPoint& c : w.contacts()) {
      const bool a_plain = c.a.is_link() && c.a.finger == 0;
      const bool b_plain = c.b.is_link() && c.b.finger == 0;
      const ContactSide& other = a_plain ? c.b : c.a;
      if ((a_plain || b_plain) && !other.is_link() &&
          other.body == spacer_idx) {
        force_sum += c.jn / dt;
      }
    }
  }
  return force_sum / window;
}

}  // namespace gf
