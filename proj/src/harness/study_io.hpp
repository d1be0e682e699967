#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/object_spec.hpp"
#include "core/optimizer.hpp"
#include "core/scenario.hpp"

namespace gf {

// Everything a study run needs, with defaults matching the benchmark setup:
// the full seven-object catalog, four trial seeds per object, 2000 iterations.
struct StudyConfig {
  SearchSpace space = SearchSpace::reference();
  std::vector<ObjectSpec> objects;  // empty resolves to the full catalog
  int repeats = 4;                  // trial seeds averaged per object
  int n_iter = 2000;
  uint64_t seed = 0;
  int parallelism = 1;
  std::string out_dir = "study";
  ProtocolConfig protocol;
  TransmissionConfig transmission;
  WorldConfig world;
  TpeConfig tpe;

  const std::vector<ObjectSpec>& resolved_objects() const;
  void validate() const;
};

// Parses the study config JSON. Keys carry explicit unit suffixes in the
// bench's native units (mm, N/mm, N); unknown keys anywhere are an error
// naming the offending path. Missing keys keep their defaults.
StudyConfig parse_study_config(const std::string& json_text);
StudyConfig load_study_config(const std::string& path);

// Serializes back to the same schema; parse(config_json(c)) reproduces c up
// to floating-point round-trip through the bench units.
std::string study_config_json(const StudyConfig& c);

// Parses a design-parameter JSON object. Accepts bare SI keys ("l_D": 0.074),
// unit-suffixed bench keys ("l_D_mm": 74), or a study best.json wrapper whose
// "params" member holds either form. Mixing the two key styles, unknown keys,
// and out-of-range values are errors. Missing keys keep the reference design.
DesignParams parse_params_json(const std::string& json_text);

// One study.jsonl line (no newline): index, params in SI units, per-object
// mean lift, score, trial seed, wall-clock milliseconds.
std::string trial_json_line(const Trial& t);
Trial parse_trial_line(const std::string& line);

// Loads a whole study log, rebuilding the running best. Malformed lines and
// out-of-order indices report the 1-based line number.
StudyRecord load_study_jsonl(const std::string& path);

// Derived outputs.
std::string best_json(const StudyConfig& c, const StudyRecord& r);
void write_best_json(const std::string& dir, const StudyConfig& c, const StudyRecord& r);
void write_report_csv(const std::string& dir, const StudyRecord& r);
void write_grasp_force_csv(const std::string& dir, const DesignParams& p,
                           const TransmissionConfig& tc, const WorldConfig& wc,
                           const ProtocolConfig& pc);

struct RunOutcome {
  StudyRecord record;
  bool interrupted = false;  // stopped early; the log on disk resumes as-is
};

// Runs (or resumes) a study in c.out_dir: appends one study.jsonl line per
// trial with a flush after each, then writes best.json and report.csv.
// A non-empty existing log without `resume` is refused rather than clobbered.
// `should_stop` is polled between batches; stopping early is not an error.
RunOutcome run_study(const StudyConfig& c, bool resume,
                     const std::function<bool()>& should_stop = {});

}  // namespace gf
