#include "graspforge/graspforge.h"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "core/error.hpp"
#include "harness/render.hpp"
#include "harness/study_io.hpp"

namespace {

using nlohmann::json;

thread_local std::string g_last_error;
std::atomic<int> g_stop{0};

gf_status status_of(gf::ErrorKind k) {
  switch (k) {
    case gf::ErrorKind::Config: return GF_ERR_CONFIG;
    case gf::ErrorKind::Io: return GF_ERR_IO;
    case gf::ErrorKind::Geometry: return GF_ERR_GEOMETRY;
    case gf::ErrorKind::Simulation: return GF_ERR_SIMULATION;
    case gf::ErrorKind::Index: return GF_ERR_INDEX;
    case gf::ErrorKind::Interrupted: return GF_ERR_INTERRUPTED;
  }
  return GF_ERR_UNKNOWN;
}

template <class Fn>
gf_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const gf::GfError& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GF_ERR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return GF_ERR_UNKNOWN;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gf::DesignParams params_from(const char* params_json) {
  if (!params_json) return gf::DesignParams{};
  return gf::parse_params_json(params_json);
}

json trial_result_json(const gf::TrialResult& r, const char* object_name,
                       unsigned long long seed, const gf::DesignParams& p) {
  json j;
  j["object"] = object_name;
  j["seed"] = static_cast<uint64_t>(seed);
  json params;
  params["l_D"] = p.l_D;
  params["l_P"] = p.l_P;
  params["l_M"] = p.l_M;
  params["r_I"] = p.r_I;
  params["R_I"] = p.R_I;
  params["R_M"] = p.R_M;
  params["k_s"] = p.k_s;
  params["T_pt"] = p.T_pt;
  j["params"] = params;
  j["h"] = r.h;
  j["termination"] = gf::termination_name(r.term);
  j["modes_in_order"] = r.modes_in_order;
  json trace = json::array();
  for (const auto& [t, m] : r.mode_trace) {
    trace.push_back({{"t", t}, {"mode", gf::mode_name(m)}});
  }
  j["mode_trace"] = trace;
  j["final_contacts"] = r.final_contacts;
  j["sim_time"] = r.sim_time;
  return j;
}

}  // namespace

struct gf_study {
  gf::StudyConfig cfg;
  bool resume = false;
  gf::StudyRecord record;
};

extern "C" {

const char* gf_version(void) { return "0.1.0"; }

const char* gf_last_error(void) { return g_last_error.c_str(); }

void gf_string_free(char* s) { std::free(s); }

void gf_request_stop(void) { g_stop.store(1); }

void gf_clear_stop(void) { g_stop.store(0); }

gf_status gf_study_open(const char* config_json, const char* out_dir,
                        long long n_iter, long long seed, int parallelism,
                        int resume, gf_study** out) {
  return guarded([&]() -> gf_status {
    if (!out) {
      g_last_error = "out must not be NULL";
      return GF_ERR_CONFIG;
    }
    *out = nullptr;
    gf::StudyConfig cfg = gf::parse_study_config(config_json ? config_json : "{}");
    if (out_dir && *out_dir) cfg.out_dir = out_dir;
    if (n_iter >= 0) cfg.n_iter = static_cast<int>(n_iter);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (parallelism >= 0) cfg.parallelism = parallelism;
    cfg.validate();

    auto s = std::make_unique<gf_study>();
    s->cfg = std::move(cfg);
    s->resume = resume != 0;
    const std::string jsonl = s->cfg.out_dir + "/study.jsonl";
    if (s->resume && std::filesystem::exists(jsonl)) {
      s->record = gf::load_study_jsonl(jsonl);
    }
    *out = s.release();
    return GF_OK;
  });
}

gf_status gf_study_run(gf_study* s) {
  return guarded([&]() -> gf_status {
    if (!s) {
      g_last_error = "study handle is NULL";
      return GF_ERR_CONFIG;
    }
    const gf::RunOutcome out =
        gf::run_study(s->cfg, s->resume, [] { return g_stop.load() != 0; });
    s->record = out.record;
    s->resume = true;  // the log on disk now holds these trials
    if (out.interrupted) {
      g_last_error = "stopped after " + std::to_string(s->record.trials.size()) +
                     " trials; run again with resume to continue";
      return GF_ERR_INTERRUPTED;
    }
    return GF_OK;
  });
}

int gf_study_size(const gf_study* s) {
  return s ? static_cast<int>(s->record.trials.size()) : 0;
}

const char* gf_study_out_dir(const gf_study* s) {
  return s ? s->cfg.out_dir.c_str() : "";
}

gf_status gf_study_best_json(const gf_study* s, char** json_out) {
  return guarded([&]() -> gf_status {
    if (!s || !json_out) {
      g_last_error = "study handle and json_out must not be NULL";
      return GF_ERR_CONFIG;
    }
    *json_out = copy_string(gf::best_json(s->cfg, s->record));
    return GF_OK;
  });
}

void gf_study_close(gf_study* s) { delete s; }

gf_status gf_simulate(const char* params_json, const char* object_name,
                      unsigned long long seed, const char* render_dir,
                      char** result_json_out) {
  return guarded([&]() -> gf_status {
    if (!object_name || !result_json_out) {
      g_last_error = "object_name and result_json_out must not be NULL";
      return GF_ERR_CONFIG;
    }
    *result_json_out = nullptr;
    const gf::DesignParams p = params_from(params_json);
    const gf::ObjectSpec& obj = gf::catalog_by_name(object_name);

    gf::TrialResult res;
    if (render_dir && *render_dir) {
      gf::TrialRecorder rec(render_dir);
      res = gf::run_grasp_trial(p, gf::TransmissionConfig{}, gf::WorldConfig{},
                                gf::ProtocolConfig{}, obj, seed, &rec);
    } else {
      res = gf::run_grasp_trial(p, gf::TransmissionConfig{}, gf::WorldConfig{},
                                gf::ProtocolConfig{}, obj, seed, nullptr);
    }
    *result_json_out = copy_string(trial_result_json(res, object_name, seed, p).dump(2));
    if (res.term == gf::Termination::Unstable) {
      g_last_error = "simulation diverged; the result reports the unstable trial";
      return GF_ERR_SIMULATION;
    }
    return GF_OK;
  });
}

gf_status gf_grasp_force(const char* params_json, double width_m, double* force_out) {
  return guarded([&]() -> gf_status {
    if (!force_out) {
      g_last_error = "force_out must not be NULL";
      return GF_ERR_CONFIG;
    }
    const gf::DesignParams p = params_from(params_json);
    *force_out = gf::measure_grasp_force(p, gf::TransmissionConfig{}, gf::WorldConfig{},
                                         gf::ProtocolConfig{}, width_m);
    return GF_OK;
  });
}

gf_status gf_report(const char* study_dir, int with_grasp_force) {
  return guarded([&]() -> gf_status {
    if (!study_dir) {
      g_last_error = "study_dir must not be NULL";
      return GF_ERR_CONFIG;
    }
    const std::string dir = study_dir;
    const std::string jsonl = dir + "/study.jsonl";
    if (!std::filesystem::exists(jsonl)) {
      gf::raise(gf::ErrorKind::Config, "no study.jsonl in '" + dir + "'");
    }
    const gf::StudyRecord record = gf::load_study_jsonl(jsonl);
    if (record.trials.empty()) {
      gf::raise(gf::ErrorKind::Config, "study in '" + dir + "' is empty");
    }
    gf::write_report_csv(dir, record);
    if (with_grasp_force) {
      gf::write_grasp_force_csv(dir, record.best()->params, gf::TransmissionConfig{},
                                gf::WorldConfig{}, gf::ProtocolConfig{});
    }
    return GF_OK;
  });
}

}  // extern "C"
