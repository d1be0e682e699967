#include "core/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <string>

#include "core/error.hpp"

namespace gf {
namespace {

constexpr int kRI = 3;   // r_I's slot in the canonical dimension order
constexpr int kRIw = 4;  // R_I's slot (the wedge cap for r_I)

double erf_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One-dimensional Parzen mixture of [0,1]-truncated Gaussians with uniform
// component weights. The first component is a wide prior centered mid-range
// so the density never starves far from the observations.
struct Parzen {
  std::vector<double> mu;
  std::vector<double> sigma;

  double logpdf(double x) const {
    double acc = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) {
      const double z = (x - mu[i]) / sigma[i];
      const double mass =
          erf_cdf((1.0 - mu[i]) / sigma[i]) - erf_cdf((0.0 - mu[i]) / sigma[i]);
      const double pdf = std::exp(-0.5 * z * z) /
                         (sigma[i] * std::sqrt(2.0 * kPi) * std::max(mass, 1e-12));
      acc += pdf;
    }
    return std::log(std::max(acc / mu.size(), 1e-300));
  }

  double sample(Rng& rng) const {
    const size_t i = static_cast<size_t>(rng.next_u64() % mu.size());
    for (int tries = 0; tries < 64; ++tries) {
      const double x = mu[i] + sigma[i] * rng.normal01();
      if (x >= 0.0 && x <= 1.0) return x;
    }
    return std::clamp(mu[i], 0.0, 1.0);
  }
};

// Bandwidths follow the distance-to-neighbor rule with virtual neighbors at
// the interval edges, floored by the magic clip 1/min(100, 1+n).
Parzen fit_parzen(std::vector<double> xs, size_t total_n) {
  Parzen p;
  p.mu.push_back(0.5);  // prior
  p.sigma.push_back(1.0);
  std::sort(xs.begin(), xs.end());
  const double clip_lo = 1.0 / std::min<double>(100.0, 1.0 + total_n);
  for (size_t i = 0; i < xs.size(); ++i) {
    const double left = i == 0 ? xs[i] - 0.0 : xs[i] - xs[i - 1];
    const double right = i + 1 == xs.size() ? 1.0 - xs[i] : xs[i + 1] - xs[i];
    p.mu.push_back(xs[i]);
    p.sigma.push_back(std::clamp(std::max(left, right), clip_lo, 1.0));
  }
  return p;
}

// Unit-cube coordinates: plain dimensions normalize against their static
// bounds; r_I normalizes against the live wedge [lo, R_I - margin] so the
// dependent bound holds for any u in [0,1].
double wedge_hi(const SearchSpace& s, double R_I) {
  return std::min(s.dims[kRI].hi, R_I - kPulleyMargin);
}

std::array<double, 8> to_unit(const SearchSpace& s,
                              const std::array<double, 8>& x) {
  std::array<double, 8> u{};
  for (int d = 0; d < 8; ++d) {
    double lo = s.dims[d].lo, hi = s.dims[d].hi;
    if (d == kRI) hi = wedge_hi(s, x[kRIw]);
    u[d] = hi > lo ? std::clamp((x[d] - lo) / (hi - lo), 0.0, 1.0) : 0.5;
  }
  return u;
}

std::array<double, 8> from_unit(const SearchSpace& s,
                                const std::array<double, 8>& u) {
  std::array<double, 8> x{};
  for (int d = 0; d < 8; ++d) {  // R_I (slot 4) lands before r_I is read below
    x[d] = s.dims[d].lo + u[d] * (s.dims[d].hi - s.dims[d].lo);
  }
  x[kRI] = s.dims[kRI].lo + u[kRI] * (wedge_hi(s, x[kRIw]) - s.dims[kRI].lo);
  return x;
}

double median_score(const StudyRecord& study) {
  if (study.trials.empty()) return 1.0;
  std::vector<double> s;
  s.reserve(study.trials.size());
  for (const Trial& t : study.trials) s.push_back(t.score);
  const size_t mid = s.size() / 2;
  std::nth_element(s.begin(), s.begin() + mid, s.end());
  return s[mid];
}

}  // namespace

SearchSpace SearchSpace::reference() { return {design_bounds()}; }

void SearchSpace::validate() const {
  for (const ParamBound& d : dims) {
    if (!(d.lo < d.hi)) {
      raise(ErrorKind::Config,
            std::string("search bound is empty for ") + d.name);
    }
  }
  if (!(dims[kRI].lo < dims[kRIw].lo - kPulleyMargin)) {
    raise(ErrorKind::Config, "r_I wedge collapses at the smallest R_I");
  }
}

std::array<double, 8> to_point(const DesignParams& p) {
  return {p.l_D, p.l_P, p.l_M, p.r_I, p.R_I, p.R_M, p.k_s, p.T_pt};
}

DesignParams from_point(const std::array<double, 8>& x) {
  DesignParams p;
  p.l_D = x[0];
  p.l_P = x[1];
  p.l_M = x[2];
  p.r_I = x[3];
  p.R_I = x[4];
  p.R_M = x[5];
  p.k_s = x[6];
  p.T_pt = x[7];
  return p;
}

void tell(StudyRecord& study, Trial t) {
  if (t.index != static_cast<int>(study.trials.size())) {
    raise(ErrorKind::Index,
          "trial told out of order: got index " + std::to_string(t.index) +
              ", expected " + std::to_string(study.trials.size()));
  }
  study.trials.push_back(std::move(t));
  const Trial& added = study.trials.back();
  if (study.best_index < 0 || added.score > study.trials[study.best_index].score) {
    study.best_index = added.index;
  }
}

void TpeConfig::validate() const {
  if (startup < 2) raise(ErrorKind::Config, "TPE startup must be at least 2");
  if (candidates < 1) raise(ErrorKind::Config, "TPE needs at least 1 candidate");
  if (!(good_fraction > 0.0 && good_fraction < 1.0)) {
    raise(ErrorKind::Config, "TPE good fraction must lie in (0,1)");
  }
}

DesignParams ask(const std::vector<Trial>& history, const SearchSpace& space,
                 const TpeConfig& cfg, Rng& rng) {
  space.validate();
  cfg.validate();

  const size_t n = history.size();
  if (n < static_cast<size_t>(cfg.startup)) {
    std::array<double, 8> u{};
    for (int d = 0; d < 8; ++d) u[d] = rng.uniform01();
    return from_point(from_unit(space, u));
  }

  // Highest scores first; ties resolved by arrival order for determinism.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return history[a].score > history[b].score;
  });
  const size_t n_good = std::clamp<size_t>(
      static_cast<size_t>(std::ceil(cfg.good_fraction * double(n))), 1, n - 1);

  std::array<Parzen, 8> good, bad;
  for (int d = 0; d < 8; ++d) {
    std::vector<double> xg, xb;
    xg.reserve(n_good);
    xb.reserve(n - n_good);
    for (size_t i = 0; i < n; ++i) {
      const std::array<double, 8> u =
          to_unit(space, to_point(history[order[i]].params));
      (i < n_good ? xg : xb).push_back(u[d]);
    }
    good[d] = fit_parzen(std::move(xg), n_good);
    bad[d] = fit_parzen(std::move(xb), n - n_good);
  }

  std::array<double, 8> best_u{};
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.candidates; ++c) {
    std::array<double, 8> u{};
    double ratio = 0.0;
    for (int d = 0; d < 8; ++d) {
      u[d] = good[d].sample(rng);
      ratio += good[d].logpdf(u[d]) - bad[d].logpdf(u[d]);
    }
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_u = u;
    }
  }
  return from_point(from_unit(space, best_u));
}

StudyRecord optimize(const Objective& objective, const SearchSpace& space,
                     int n_iter, uint64_t seed, int parallelism,
                     const TpeConfig& cfg, StudyRecord resume,
                     const std::function<void(const Trial&)>& on_trial,
                     const std::function<bool()>& should_stop) {
  if (n_iter < 1) raise(ErrorKind::Config, "need at least one iteration");
  if (parallelism < 1) raise(ErrorKind::Config, "parallelism must be >= 1");
  space.validate();
  cfg.validate();

  StudyRecord study = std::move(resume);
  study.best_index = -1;  // recompute: persisted records may omit it
  for (const Trial& t : study.trials) {
    if (study.best_index < 0 || t.score > study.trials[study.best_index].score) {
      study.best_index = t.index;
    }
  }

  struct Outcome {
    EvalResult eval;
    double wall_ms = 0.0;
  };
  const auto evaluate = [&objective](DesignParams p, uint64_t trial_seed) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out.eval = objective(p, trial_seed);
    } catch (const std::exception&) {
      out.eval = EvalResult{};  // score floor 1, no per-object data
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return out;
  };

  while (static_cast<int>(study.trials.size()) < n_iter) {
    if (should_stop && should_stop()) break;
    const int base = static_cast<int>(study.trials.size());
    const int batch = std::min(parallelism, n_iter - base);

    // Ask the whole batch up front; later asks in the batch see the earlier
    // ones as pending trials carrying the median told score.
    std::vector<Trial> pending = study.trials;
    std::vector<DesignParams> params(batch);
    const double liar = median_score(study);
    for (int j = 0; j < batch; ++j) {
      const int index = base + j;
      Rng rng(mix_seed(seed, static_cast<uint64_t>(index)));
      params[j] = ask(pending, space, cfg, rng);
      Trial lie;
      lie.index = index;
      lie.params = params[j];
      lie.score = liar;
      pending.push_back(std::move(lie));
    }

    std::vector<Outcome> outcomes(batch);
    if (batch == 1) {
      outcomes[0] = evaluate(params[0], mix_seed(seed, uint64_t(base)));
    } else {
      std::vector<std::future<Outcome>> futs;
      futs.reserve(batch);
      for (int j = 0; j < batch; ++j) {
        futs.push_back(std::async(std::launch::async, evaluate, params[j],
                                  mix_seed(seed, uint64_t(base + j))));
      }
      for (int j = 0; j < batch; ++j) outcomes[j] = futs[j].get();
    }

    for (int j = 0; j < batch; ++j) {
      Trial t;
      t.index = base + j;
      t.params = params[j];
      t.score = outcomes[j].eval.score;
      t.per_object_h = std::move(outcomes[j].eval.mean_h);
      t.seed = mix_seed(seed, uint64_t(base + j));
      t.wall_ms = outcomes[j].wall_ms;
      tell(study, std::move(t));
      if (on_trial) on_trial(study.trials.back());
    }
  }
  return study;
}

}  // namespace gf
