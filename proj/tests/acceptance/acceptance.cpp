// Acceptance gate for the gripper design toolkit. Each criterion runs a
// self-contained scenario against frozen closed-form oracles or statistical
// baselines and prints exactly one [PASS]/[FAIL] line with its runtime; the
// process exits nonzero if any criterion fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "core/dynamics.hpp"
#include "core/object_spec.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"
#include "core/scenario.hpp"
#include "core/transmission.hpp"
#include "harness/study_io.hpp"

using namespace gf;
namespace fs = std::filesystem;

namespace {

bool approx_rel(double got, double want, double tol) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-30});
  return std::abs(got - want) <= tol * scale;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Running tally of the friction-cone invariant |jt| <= mu*jn (impulses per
// step) over every contact the acceptance scenes produce.
struct ConeTally : TrialObserver {
  long contacts = 0;
  long violations = 0;
  double worst = 0.0;  // largest |jt| - mu*jn seen [N*s]

  void scan(const World& w) {
    for (const ContactPoint& c : w.contacts()) {
      ++contacts;
      const double slack = std::abs(c.jt) - c.mu * c.jn;
      if (slack > 1e-9 || c.jn < -1e-12) {
        ++violations;
        worst = std::max(worst, slack);
      }
    }
  }
  void on_step(const World& w, double, double) override { scan(w); }
};

// ---------------------------------------------------------------------------
// C1: joint torques from tendon tension, slider take-up, and the three-regime
// slider tension law against hand-computed values; regime slopes by finite
// difference.
bool c1_transmission(std::string& note) {
  DesignParams p;
  TransmissionConfig c;
  double worst = 0.0;
  auto rel = [&worst](double got, double want) {
    const double scale = std::max({std::abs(got), std::abs(want), 1e-30});
    worst = std::max(worst, std::abs(got - want) / scale);
    return std::abs(got - want) <= 1e-9 * scale;
  };

  bool ok = true;

  // Torque map at two joint states. The plain finger sees the full motor
  // tension on both returns; the crawler finger's return pulleys carry the
  // slider tension instead.
  {
    const HandState s{0.3, 0.5, 0.7, 0.2};
    const double T_m = 40.0, T_s = 15.0;
    const JointTorques jt = actuation_torques(s, p, T_m, T_s);
    ok &= rel(jt.tau_M1, (p.R_M * std::sqrt(1.0 + std::sin(s.theta_M1)) + p.r_M()) * T_m);
    ok &= rel(jt.tau_I1, (p.R_I * std::sqrt(1.0 + std::sin(s.theta_I1)) - p.r_I) * T_m);
    ok &= rel(jt.tau_M2, p.R_M * std::sqrt(1.0 + std::sin(s.theta_M2)) * T_m + p.r_M() * T_s);
    ok &= rel(jt.tau_I2, p.R_I * std::sqrt(1.0 + std::sin(s.theta_I2)) * T_m - p.r_I * T_s);
  }
  {
    const HandState s{-0.2, 0.0, 1.0, 0.9};
    const double T_m = 100.0, T_s = 0.0;
    const JointTorques jt = actuation_torques(s, p, T_m, T_s);
    ok &= rel(jt.tau_M1, (p.R_M * std::sqrt(1.0 + std::sin(s.theta_M1)) + p.r_M()) * T_m);
    ok &= rel(jt.tau_I1, (p.R_I * std::sqrt(1.0 + std::sin(s.theta_I1)) - p.r_I) * T_m);
    ok &= rel(jt.tau_M2, p.R_M * std::sqrt(1.0 + std::sin(s.theta_M2)) * T_m);
    ok &= rel(jt.tau_I2, p.R_I * std::sqrt(1.0 + std::sin(s.theta_I2)) * T_m);
  }

  // Belt take-up from the crawler travel and the two crawler-side joints.
  {
    HandState s;
    s.theta_c = 0.004;
    s.theta_I2 = 0.3;
    s.theta_M2 = 0.2;
    ok &= rel(slider_state(s, p, c).x_t, 0.004 + p.r_I * 0.3 - p.r_M() * 0.2);
  }

  // Tension values at one point per regime. Breakaway sits at x = T_pt/K;
  // the series slope of belt (K) and spring (k_s) runs until the spring
  // stretch hits x_max at x_g; past that the hard stop restores slope K.
  const double x_brk = p.T_pt / c.K;
  const double x_g = (c.x_max * (c.K + p.k_s) + p.T_pt) / c.K;
  const double k_ser = c.K * p.k_s / (c.K + p.k_s);
  const double xs[3] = {0.5 * x_brk, 0.5 * (x_brk + x_g), x_g + 0.01};
  const double want_T[3] = {c.K * xs[0], p.T_pt + k_ser * (xs[1] - x_brk),
                            p.T_pt + k_ser * (x_g - x_brk) + c.K * (xs[2] - x_g)};
  const double want_slope[3] = {c.K, p.k_s, c.K};
  const char* want_mode[3] = {"Parallel", "PullIn", "PowerGrasp"};
  double slopes[3] = {0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    ok &= rel(slider_tension(xs[i], p, c), want_T[i]);
    const double h = 1e-9;
    slopes[i] = (slider_tension(xs[i] + h, p, c) - slider_tension(xs[i] - h, p, c)) / (2.0 * h);
    ok &= approx_rel(slopes[i], want_slope[i], 0.01);
    HandState s;
    s.theta_c = xs[i];
    if (std::string(mode_name(slider_state(s, p, c).mode)) != want_mode[i]) ok = false;
  }

  note = fmt("max rel err %.1e; slopes %.0f/%.1f/%.0f vs K=%.0f, k_s=%.0f", worst,
             slopes[0], slopes[1], slopes[2], c.K, p.k_s);
  return ok;
}

// ---------------------------------------------------------------------------
// C2: contact dynamics against closed forms -- ballistic flight, a resting box
// carrying its weight, and a conveyor dragging a box at the friction-limited
// rate -- with the friction cone checked on every contact.
bool c2_dynamics(std::string& note) {
  bool ok = true;
  ConeTally cone;

  // Ballistic flight: symplectic-Euler velocity and position are exact; the
  // analytic parabola holds to first order in dt (0.1%).
  {
    WorldConfig wc;
    World w(wc);
    const int oi = w.add_body(make_object_body(ObjectSpec::box("b", 0.050, 0.010), {0.0, 10.0}));
    w.set_object(oi);
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      w.step(0.0, 0.0);
      cone.scan(w);
    }
    const Body& b = w.body(oi);
    ok &= approx_rel(b.vel.y, -wc.gravity * n * wc.dt, 1e-12);
    ok &= approx_rel(b.pos.y, 10.0 - wc.gravity * wc.dt * wc.dt * 0.5 * n * (n + 1.0), 1e-12);
    // Drop distance vs the parabola; the start height would dilute a
    // position-relative comparison.
    ok &= approx_rel(10.0 - b.pos.y, 0.5 * wc.gravity * 4.0, 1e-3);
    ok &= b.pos.x == 0.0;
  }

  // Static rest: the ground reaction averaged over the settled tail carries
  // exactly the object's weight (1%).
  double rest_force = 0.0, rest_weight = 0.0;
  {
    WorldConfig wc;
    World w(wc);
    w.add_ground();
    const ObjectSpec obj = ObjectSpec::box("b", 0.050, 0.030);
    const int oi = w.add_body(make_object_body(obj, {0.0, 0.015}));
    w.set_object(oi);
    int tail = 0;
    for (int i = 0; i < 1000; ++i) {
      w.step(0.0, 0.0);
      cone.scan(w);
      if (i >= 800) {
        double s = 0.0;
        for (const ContactPoint& c : w.contacts()) s += c.jn;
        rest_force += s / wc.dt;
        ++tail;
      }
    }
    rest_force /= tail;
    rest_weight = obj.mass() * wc.gravity;
    ok &= approx_rel(rest_force, rest_weight, 1e-2);
    ok &= std::abs(w.body(oi).vel.y) < 1e-6;
  }

  // Conveyor: while slipping the box gains exactly mu*g per second, then
  // rides the belt; the ramp matches the closed form to 2% at every step.
  {
    WorldConfig wc;
    World w(wc);
    const int g = w.add_ground();
    w.body_mut(g).belt_speed = 0.1;
    const int oi = w.add_body(make_object_body(ObjectSpec::box("b", 0.050, 0.010), {0.0, 0.005}));
    w.set_object(oi);
    for (int i = 1; i <= 120; ++i) {
      w.step(0.0, 0.0);
      cone.scan(w);
      const double want = -std::min(wc.mu_object_ground * wc.gravity * i * wc.dt, 0.1);
      ok &= approx_rel(w.body(oi).vel.x, want, 0.02);
    }
    for (int i = 0; i < 200; ++i) {
      w.step(0.0, 0.0);
      cone.scan(w);
    }
    ok &= approx_rel(w.body(oi).vel.x, -0.1, 1e-6);
  }

  ok &= cone.violations == 0;
  note = fmt("rest force %.4f vs weight %.4f N; cone: %ld contacts, %ld violations", rest_force,
             rest_weight, cone.contacts, cone.violations);
  return ok;
}

// ---------------------------------------------------------------------------
// C3: with the reference design, grasping the narrow 50x10 mm box walks
// through Parallel -> PullIn -> PowerGrasp and lifts (h > 0) in at least 3 of
// 4 seeds. Friction cones stay closed throughout.
bool c3_transition(std::string& note) {
  const DesignParams p;
  const TransmissionConfig tc;
  const WorldConfig wc;
  const ProtocolConfig pc;
  const ObjectSpec& obj = catalog_by_name("box_50x10");

  ConeTally cone;
  int good = 0;
  std::string detail;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    const TrialResult r = run_grasp_trial(p, tc, wc, pc, obj, seed, &cone);
    const bool hit = r.modes_in_order && r.h > 0.0;
    good += hit;
    detail += fmt("%s s%llu h=%.3f%s", seed ? ", " : "", (unsigned long long)seed, r.h,
                  r.modes_in_order ? "" : " (modes out of order)");
  }
  const bool ok = good >= 3 && cone.violations == 0;
  note = fmt("%d/4 seeds good: %s; cone violations %ld", good, detail.c_str(), cone.violations);
  return ok;
}

// ---------------------------------------------------------------------------
// C4: the squeeze force at full motor tension stays flat across object widths
// 10..70 mm -- relative spread (max-min)/mean below 50% -- and above 10 N.
bool c4_force_flatness(std::string& note) {
  const DesignParams p;
  const TransmissionConfig tc;
  const WorldConfig wc;
  const ProtocolConfig pc;

  const double widths[4] = {0.010, 0.030, 0.050, 0.070};
  double f[4], lo = 1e30, hi = -1e30, mean = 0.0;
  for (int i = 0; i < 4; ++i) {
    f[i] = measure_grasp_force(p, tc, wc, pc, widths[i]);
    lo = std::min(lo, f[i]);
    hi = std::max(hi, f[i]);
    mean += f[i] / 4.0;
  }
  const double spread = (hi - lo) / mean;
  const bool ok = spread < 0.5 && lo > 10.0;
  note = fmt("forces {%.2f, %.2f, %.2f, %.2f} N; spread %.3f; min %.2f N", f[0], f[1], f[2], f[3],
             spread, lo);
  return ok;
}

// ---------------------------------------------------------------------------
// C5: the multiplicative lift score prod_i (1 + mean_h[i]), with the all-fail
// floor of exactly 1.
bool c5_score(std::string& note) {
  bool ok = true;
  ok &= lift_product_score({}) == 1.0;
  ok &= lift_product_score({0.0, 0.0, 0.0}) == 1.0;
  ok &= approx_rel(lift_product_score({1.0, 0.5}), 3.0, 1e-12);
  ok &= approx_rel(lift_product_score({2.0}), 3.0, 1e-12);
  ok &= approx_rel(lift_product_score({0.3, 0.4}), 1.3 * 1.4, 1e-12);
  note = fmt("{1.0, 0.5} -> %.12f; all-zero floor %.1f", lift_product_score({1.0, 0.5}),
             lift_product_score({0.0, 0.0, 0.0}));
  return ok;
}

// ---------------------------------------------------------------------------
// C6: on a separable 8-D bowl over the reference bounds, the model sampler's
// median best over 10 seeds beats plain random search at 200 trials, and every
// suggestion keeps the return pulley inside its dependent bound
// r_I <= R_I - 1 mm.
bool c6_optimizer(std::string& note) {
  const SearchSpace space = SearchSpace::reference();
  long asked = 0, infeasible = 0;
  const auto objective = [&](const DesignParams& p, uint64_t) {
    ++asked;
    if (p.r_I > p.R_I - kPulleyMargin + 1e-12) ++infeasible;
    for (int d = 0; d < 8; ++d) {
      const double v = to_point(p)[d];
      if (v < space.dims[d].lo - 1e-12 || v > space.dims[d].hi + 1e-12) ++infeasible;
    }
    EvalResult r;
    double acc = 0.0;
    const std::array<double, 8> x = to_point(p);
    for (int d = 0; d < 8; ++d) {
      const double mid = 0.5 * (space.dims[d].lo + space.dims[d].hi);
      const double dev = (x[d] - mid) / (space.dims[d].hi - space.dims[d].lo);
      acc -= dev * dev;
    }
    r.score = acc;
    return r;
  };

  const int iters = 200;
  std::vector<double> model_best, random_best;
  for (uint64_t s = 0; s < 10; ++s) {
    TpeConfig model;
    model_best.push_back(optimize(objective, space, iters, s, 1, model).best()->score);
    TpeConfig rnd;
    rnd.startup = iters;  // never leaves the uniform phase
    random_best.push_back(optimize(objective, space, iters, s, 1, rnd).best()->score);
  }
  std::sort(model_best.begin(), model_best.end());
  std::sort(random_best.begin(), random_best.end());
  const double mm = 0.5 * (model_best[4] + model_best[5]);
  const double rm = 0.5 * (random_best[4] + random_best[5]);

  const bool ok = mm > rm && infeasible == 0;
  note = fmt("median best: model %.4f vs random %.4f over %ld suggestions, %ld out of bounds", mm,
             rm, asked, infeasible);
  return ok;
}

// ---------------------------------------------------------------------------
// C7: a desk-scale study -- 50 iterations over the full seven-object catalog
// with two repeats each -- finishes inside the budget, its best-so-far curve
// never decreases, and the best design lifts something (score > 1).
bool c7_study(std::string& note) {
  StudyConfig c;
  c.repeats = 2;
  c.n_iter = 50;
  c.seed = 42;
  const unsigned hw = std::thread::hardware_concurrency();
  c.parallelism = (int)std::clamp(hw, 1u, 8u);
  c.out_dir = "tmp_accept/desk";
  fs::remove_all(c.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const RunOutcome out = run_study(c, false);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool ok = !out.interrupted && (int)out.record.trials.size() == c.n_iter && wall < 1800.0;

  // The best-so-far column in report.csv must be the running max of the score
  // column and never decrease.
  std::ifstream csv(c.out_dir + "/report.csv");
  std::string line;
  std::getline(csv, line);  // header
  double run_best = -1e300, prev_best = -1e300;
  int rows = 0;
  while (std::getline(csv, line)) {
    int it = 0;
    double score = 0.0, best = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &it, &score, &best) != 3) ok = false;
    run_best = std::max(run_best, score);
    if (!approx_rel(best, run_best, 1e-8)) ok = false;
    if (best < prev_best) ok = false;
    prev_best = best;
    ++rows;
  }
  ok &= rows == c.n_iter;

  const double best = out.record.best() ? out.record.best()->score : 0.0;
  ok &= best > 1.0;
  note = fmt("%d trials x %d objects x %d repeats in %.1fs on %d threads; best score %.3f",
             c.n_iter, (int)c.resolved_objects().size(), c.repeats, wall, c.parallelism, best);
  return ok;
}

// ---------------------------------------------------------------------------
// C8: at parallelism 1 the persisted log is byte-identical between runs with
// the same seed (wall-clock milliseconds excluded), and splitting a run into
// run + resume reproduces the one-shot log exactly.
bool c8_reproducibility(std::string& note) {
  StudyConfig base;
  base.objects = {catalog_by_name("box_150x30")};
  base.repeats = 1;
  base.n_iter = 8;
  base.seed = 7;
  base.parallelism = 1;
  base.tpe.startup = 3;

  // The log with the one non-deterministic field (wall-clock ms) zeroed.
  const auto canonical = [](const std::string& dir) {
    std::ifstream in(dir + "/study.jsonl");
    std::string line, out;
    while (std::getline(in, line)) {
      Trial t = parse_trial_line(line);
      t.wall_ms = 0.0;
      out += trial_json_line(t);
      out += '\n';
    }
    return out;
  };

  StudyConfig a = base, b = base, c = base;
  a.out_dir = "tmp_accept/rep_a";
  b.out_dir = "tmp_accept/rep_b";
  c.out_dir = "tmp_accept/rep_c";
  for (const auto& d : {a.out_dir, b.out_dir, c.out_dir}) fs::remove_all(d);

  run_study(a, false);
  run_study(b, false);
  StudyConfig c_half = c;
  c_half.n_iter = 4;
  run_study(c_half, false);
  run_study(c, true);  // resume 4 -> 8

  const std::string la = canonical(a.out_dir);
  const bool rerun_same = la == canonical(b.out_dir);
  const bool resume_same = la == canonical(c.out_dir);
  const bool ok = !la.empty() && rerun_same && resume_same;
  note = fmt("rerun %s, split-resume %s (8 trials, %zu canonical bytes)",
             rerun_same ? "identical" : "DIFFERS", resume_same ? "identical" : "DIFFERS",
             la.size());
  return ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*fn)(std::string&);
    double budget_s;  // hard runtime cap; 0 means none
  };
  const Criterion criteria[] = {
      {"transmission closed forms and slider slopes", c1_transmission, 1.0},
      {"dynamics oracles and friction cones", c2_dynamics, 30.0},
      {"narrow-box grasp transition", c3_transition, 120.0},
      {"grasp-force flatness across widths", c4_force_flatness, 60.0},
      {"lift product score", c5_score, 0.0},
      {"model search beats random within bounds", c6_optimizer, 60.0},
      {"desk-scale study", c7_study, 1800.0},
      {"bitwise reproducibility and resume", c8_reproducibility, 0.0},
  };

  int failed = 0;
  int idx = 0;
  for (const Criterion& cr : criteria) {
    ++idx;
    std::string note;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = cr.fn(note);
    } catch (const std::exception& e) {
      ok = false;
      note = fmt("exception: %s", e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0.0 && secs >= cr.budget_s) {
      ok = false;
      note += fmt("; over the %.0fs budget", cr.budget_s);
    }
    failed += !ok;
    std::printf("[%s] C%d %-44s %7.2fs  %s\n", ok ? "PASS" : "FAIL", idx, cr.name, secs,
                note.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
