#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/scenario.hpp"
#include "core/transmission.hpp"

namespace gf {

// The eight search dimensions in canonical order (matching design_bounds()).
// For r_I the stored upper bound is the static cap; the live bound for a
// concrete candidate is R_I - kPulleyMargin and is enforced by sampling r_I
// as a fraction of that feasible wedge.
struct SearchSpace {
  std::array<ParamBound, 8> dims;

  static SearchSpace reference();
  void validate() const;  // lo < hi per dim; the r_I wedge never collapses
};

std::array<double, 8> to_point(const DesignParams& p);
DesignParams from_point(const std::array<double, 8>& x);

struct Trial {
  int index = -1;
  DesignParams params;
  double score = 1.0;
  std::vector<double> per_object_h;  // per-object mean lift, scenario order
  uint64_t seed = 0;                 // seed the evaluation derived its streams from
  double wall_ms = 0.0;
};

struct StudyRecord {
  std::vector<Trial> trials;
  int best_index = -1;

  const Trial* best() const {
    return best_index < 0 ? nullptr : &trials[best_index];
  }
};

// Appends a trial and updates the best-so-far pointer. The trial's index must
// equal the current trial count; equal scores keep the earlier trial.
void tell(StudyRecord& study, Trial t);

struct TpeConfig {
  int startup = 10;            // uniform suggestions before the model kicks in
  int candidates = 24;         // draws from the good-set density per ask
  double good_fraction = 0.1;  // |good| = ceil(good_fraction * n), >= 1

  void validate() const;  // startup >= 2, candidates >= 1, fraction in (0,1)
};

// Suggests the next design. Uniform within bounds while history is shorter
// than cfg.startup; afterwards splits history into good/bad by score, fits
// per-dimension truncated-Gaussian Parzen densities, draws candidates from
// the good density and returns the one maximizing the good/bad log-density
// ratio. Every suggestion satisfies all bounds including r_I <= R_I - margin.
DesignParams ask(const std::vector<Trial>& history, const SearchSpace& space,
                 const TpeConfig& cfg, Rng& rng);

// Evaluates one design; receives the trial seed to derive its own streams.
using Objective = std::function<EvalResult(const DesignParams&, uint64_t seed)>;

// Ask/evaluate/tell loop until the record holds n_iter trials, so passing a
// previously persisted record resumes it. Evaluations run in batches of
// `parallelism`; asks within a batch see pending entries imputed at the
// median told score. Objective exceptions score 1 (the all-fail floor).
// Deterministic for a fixed (seed, space, cfg, parallelism).
//
// on_trial, when set, runs on the caller's thread right after each tell, in
// index order (persistence hook). should_stop is polled between batches; when
// it returns true the partial record comes back early, resumable as-is.
StudyRecord optimize(const Objective& objective, const SearchSpace& space,
                     int n_iter, uint64_t seed, int parallelism,
                     const TpeConfig& cfg = {}, StudyRecord resume = {},
                     const std::function<void(const Trial&)>& on_trial = {},
                     const std::function<bool()>& should_stop = {});

}  // namespace gf
