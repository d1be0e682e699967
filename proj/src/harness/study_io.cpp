#include "harness/study_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "core/error.hpp"

namespace gf {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Config keys carry bench units; `scale` maps a config value to SI.
template <class T>
struct FieldD {
  const char* key;
  double T::*mem;
  double scale;
};
template <class T>
struct FieldI {
  const char* key;
  int T::*mem;
};

constexpr FieldD<ProtocolConfig> kProtocolD[] = {
    {"T_m_max_N", &ProtocolConfig::T_m_max, 1.0},
    {"ramp_s", &ProtocolConfig::ramp_s, 1.0},
    {"servo_gain_per_s", &ProtocolConfig::servo_gain, 1.0},
    {"servo_vmax_m_per_s", &ProtocolConfig::servo_vmax, 1.0},
    {"settle_rate_rad_per_s", &ProtocolConfig::settle_rate, 1.0},
    {"settle_hold_s", &ProtocolConfig::settle_hold_s, 1.0},
    {"close_max_wait_s", &ProtocolConfig::close_max_wait_s, 1.0},
    {"lift_speed_m_per_s", &ProtocolConfig::lift_speed, 1.0},
    {"disturb_period_s", &ProtocolConfig::disturb_period, 1.0},
    {"disturb_force_N_per_m", &ProtocolConfig::disturb_force, 1.0},
    {"disturb_torque_Nm_per_m", &ProtocolConfig::disturb_torque, 1.0},
    {"contact_grace_s", &ProtocolConfig::contact_grace, 1.0},
    {"sink_tol_mm", &ProtocolConfig::sink_tol, 1e-3},
    {"sink_min_lift_mm", &ProtocolConfig::sink_min_lift, 1e-3},
    {"spin_limit_rad_per_s", &ProtocolConfig::spin_limit, 1.0},
    {"max_height_m", &ProtocolConfig::max_height, 1.0},
    {"timeout_s", &ProtocolConfig::timeout_s, 1.0},
};

constexpr FieldD<TransmissionConfig> kTransmissionD[] = {
    {"K_N_per_mm", &TransmissionConfig::K, 1e3},
    {"K_prime_Nm_per_rad", &TransmissionConfig::K_prime, 1.0},
    {"K_damp_Nms_per_rad", &TransmissionConfig::K_damp, 1.0},
    {"k_e_Nm_per_rad", &TransmissionConfig::k_e, 1.0},
    {"theta_e_ofs_rad", &TransmissionConfig::theta_e_ofs, 1.0},
    {"theta_ofs_rad", &TransmissionConfig::theta_ofs, 1.0},
    {"x_max_mm", &TransmissionConfig::x_max, 1e-3},
    {"m_c_kg", &TransmissionConfig::m_c, 1.0},
};

constexpr FieldD<WorldConfig> kWorldD[] = {
    {"dt_s", &WorldConfig::dt, 1.0},
    {"gravity_m_per_s2", &WorldConfig::gravity, 1.0},
    {"baumgarte", &WorldConfig::baumgarte, 1.0},
    {"slop_mm", &WorldConfig::slop, 1e-3},
    {"bias_cap_m_per_s", &WorldConfig::bias_cap, 1.0},
    {"mu_belt_object", &WorldConfig::mu_belt_object, 1.0},
    {"mu_link_object", &WorldConfig::mu_link_object, 1.0},
    {"mu_object_ground", &WorldConfig::mu_object_ground, 1.0},
    {"mu_link_ground", &WorldConfig::mu_link_ground, 1.0},
    {"mu_belt_ground", &WorldConfig::mu_belt_ground, 1.0},
    {"mu_default", &WorldConfig::mu_default, 1.0},
    {"joint_limit_k_Nm_per_rad", &WorldConfig::joint_limit_k, 1.0},
    {"joint_lo_rad", &WorldConfig::joint_lo, 1.0},
    {"joint_hi_rad", &WorldConfig::joint_hi, 1.0},
    {"diverge_speed_m_per_s", &WorldConfig::diverge_speed, 1.0},
    {"m_pp_kg", &WorldConfig::m_pp, 1.0},
    {"m_dp_kg", &WorldConfig::m_dp, 1.0},
    {"w_pp_mm", &WorldConfig::w_pp, 1e-3},
    {"h_t_mm", &WorldConfig::h_t, 1e-3},
    {"R_t_mm", &WorldConfig::R_t, 1e-3},
    {"palm_h_mm", &WorldConfig::palm_h, 1e-3},
    {"palm_margin_mm", &WorldConfig::palm_margin, 1e-3},
};
constexpr FieldI<WorldConfig> kWorldI[] = {
    {"solver_iters", &WorldConfig::solver_iters},
};

// Search-space (and scalar-parameter) keys, in design_bounds() order.
struct SpaceKey {
  const char* suffixed;
  const char* bare;
  double scale;
};
constexpr SpaceKey kSpaceKeys[8] = {
    {"l_D_mm", "l_D", 1e-3},  {"l_P_mm", "l_P", 1e-3},
    {"l_M_mm", "l_M", 1e-3},  {"r_I_mm", "r_I", 1e-3},
    {"R_I_mm", "R_I", 1e-3},  {"R_M_mm", "R_M", 1e-3},
    {"k_s_N_per_mm", "k_s", 1e3}, {"T_pt_N", "T_pt", 1.0},
};

[[noreturn]] void bad_key(const std::string& path, const std::string& key) {
  raise(ErrorKind::Config, "unknown key '" + (path.empty() ? key : path + "." + key) + "'");
}

double need_number(const json& v, const std::string& path) {
  if (!v.is_number()) raise(ErrorKind::Config, "'" + path + "' must be a number");
  return v.get<double>();
}

int need_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    raise(ErrorKind::Config, "'" + path + "' must be an integer");
  }
  return v.get<int>();
}

uint64_t need_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_number_integer() && v.get<int64_t>() >= 0) return static_cast<uint64_t>(v.get<int64_t>());
  raise(ErrorKind::Config, "'" + path + "' must be a non-negative integer");
}

template <class T, size_t ND, size_t NI>
void parse_fields(const json& obj, T& out, const FieldD<T> (&fd)[ND],
                  const FieldI<T> (*fi)[NI], const std::string& path) {
  if (!obj.is_object()) raise(ErrorKind::Config, "'" + path + "' must be an object");
  for (const auto& [key, val] : obj.items()) {
    bool hit = false;
    for (const auto& f : fd) {
      if (key == f.key) {
        out.*(f.mem) = need_number(val, path + "." + key) * f.scale;
        hit = true;
        break;
      }
    }
    if (!hit && fi) {
      for (const auto& f : *fi) {
        if (key == f.key) {
          out.*(f.mem) = need_int(val, path + "." + key);
          hit = true;
          break;
        }
      }
    }
    if (!hit) bad_key(path, key);
  }
}

template <class T, size_t ND, size_t NI>
json dump_fields(const T& in, const FieldD<T> (&fd)[ND], const FieldI<T> (*fi)[NI]) {
  json obj = json::object();
  for (const auto& f : fd) obj[f.key] = in.*(f.mem) / f.scale;
  if (fi) {
    for (const auto& f : *fi) obj[f.key] = in.*(f.mem);
  }
  return obj;
}

void parse_space(const json& obj, SearchSpace& space) {
  if (!obj.is_object()) raise(ErrorKind::Config, "'space' must be an object");
  for (const auto& [key, val] : obj.items()) {
    int dim = -1;
    for (int i = 0; i < 8; ++i) {
      if (key == kSpaceKeys[i].suffixed) {
        dim = i;
        break;
      }
    }
    if (dim < 0) bad_key("space", key);
    if (!val.is_array() || val.size() != 2) {
      raise(ErrorKind::Config, "'space." + key + "' must be [lo, hi]");
    }
    space.dims[dim].lo = need_number(val[0], "space." + key) * kSpaceKeys[dim].scale;
    space.dims[dim].hi = need_number(val[1], "space." + key) * kSpaceKeys[dim].scale;
  }
}

void parse_tpe(const json& obj, TpeConfig& tpe) {
  if (!obj.is_object()) raise(ErrorKind::Config, "'tpe' must be an object");
  for (const auto& [key, val] : obj.items()) {
    if (key == "startup") {
      tpe.startup = need_int(val, "tpe.startup");
    } else if (key == "candidates") {
      tpe.candidates = need_int(val, "tpe.candidates");
    } else if (key == "good_fraction") {
      tpe.good_fraction = need_number(val, "tpe.good_fraction");
    } else {
      bad_key("tpe", key);
    }
  }
}

json strict_parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string(what) + ": " + e.what());
  }
}

double* param_slot(DesignParams& p, int dim) {
  double* slots[8] = {&p.l_D, &p.l_P, &p.l_M, &p.r_I, &p.R_I, &p.R_M, &p.k_s, &p.T_pt};
  return slots[dim];
}

DesignParams parse_params_object(const json& obj) {
  if (!obj.is_object()) raise(ErrorKind::Config, "params must be a JSON object");
  DesignParams p;
  int bare = 0, suffixed = 0;
  for (const auto& [key, val] : obj.items()) {
    int dim = -1;
    bool suf = false;
    for (int i = 0; i < 8; ++i) {
      if (key == kSpaceKeys[i].bare) {
        dim = i;
        break;
      }
      if (key == kSpaceKeys[i].suffixed) {
        dim = i;
        suf = true;
        break;
      }
    }
    if (dim < 0) bad_key("params", key);
    const double raw = need_number(val, "params." + key);
    *param_slot(p, dim) = suf ? raw * kSpaceKeys[dim].scale : raw;
    (suf ? suffixed : bare)++;
  }
  if (bare > 0 && suffixed > 0) {
    raise(ErrorKind::Config, "params mix bare SI keys with unit-suffixed keys");
  }
  p.validate();
  return p;
}

json params_si_json(const DesignParams& p) {
  const double vals[8] = {p.l_D, p.l_P, p.l_M, p.r_I, p.R_I, p.R_M, p.k_s, p.T_pt};
  json obj = json::object();
  for (int i = 0; i < 8; ++i) obj[kSpaceKeys[i].bare] = vals[i];
  return obj;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace

const std::vector<ObjectSpec>& StudyConfig::resolved_objects() const {
  static const std::vector<ObjectSpec> kAll(default_catalog().begin(), default_catalog().end());
  return objects.empty() ? kAll : objects;
}

void StudyConfig::validate() const {
  if (n_iter < 1) raise(ErrorKind::Config, "n_iter must be >= 1");
  if (repeats < 1) raise(ErrorKind::Config, "repeats must be >= 1");
  if (parallelism < 1) raise(ErrorKind::Config, "parallelism must be >= 1");
  if (out_dir.empty()) raise(ErrorKind::Config, "out_dir must not be empty");
  if (protocol.T_m_max <= 0 || protocol.ramp_s <= 0 || protocol.lift_speed <= 0 ||
      protocol.timeout_s <= 0 || protocol.max_height <= 0 || protocol.disturb_period <= 0) {
    raise(ErrorKind::Config, "protocol durations, speeds, and tensions must be positive");
  }
  space.validate();
  tpe.validate();
  world.validate();
  transmission.validate(space.dims[6].hi);
}

StudyConfig parse_study_config(const std::string& json_text) {
  const json j = strict_parse(json_text, "config");
  if (!j.is_object()) raise(ErrorKind::Config, "config root must be an object");
  StudyConfig c;
  for (const auto& [key, val] : j.items()) {
    if (key == "seed") {
      c.seed = need_u64(val, "seed");
    } else if (key == "n_iter") {
      c.n_iter = need_int(val, "n_iter");
    } else if (key == "repeats") {
      c.repeats = need_int(val, "repeats");
    } else if (key == "parallelism") {
      c.parallelism = need_int(val, "parallelism");
    } else if (key == "out_dir") {
      if (!val.is_string()) raise(ErrorKind::Config, "'out_dir' must be a string");
      c.out_dir = val.get<std::string>();
    } else if (key == "objects") {
      if (!val.is_array()) raise(ErrorKind::Config, "'objects' must be an array of names");
      c.objects.clear();
      for (const auto& name : val) {
        if (!name.is_string()) raise(ErrorKind::Config, "'objects' entries must be strings");
        c.objects.push_back(catalog_by_name(name.get<std::string>()));
      }
      if (c.objects.empty()) raise(ErrorKind::Config, "'objects' must not be empty");
    } else if (key == "space") {
      parse_space(val, c.space);
    } else if (key == "tpe") {
      parse_tpe(val, c.tpe);
    } else if (key == "protocol") {
      parse_fields<ProtocolConfig, std::size(kProtocolD), 1>(val, c.protocol, kProtocolD,
                                                             nullptr, "protocol");
    } else if (key == "transmission") {
      parse_fields<TransmissionConfig, std::size(kTransmissionD), 1>(
          val, c.transmission, kTransmissionD, nullptr, "transmission");
    } else if (key == "world") {
      parse_fields(val, c.world, kWorldD, &kWorldI, "world");
    } else {
      bad_key("", key);
    }
  }
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string study_config_json(const StudyConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["n_iter"] = c.n_iter;
  j["repeats"] = c.repeats;
  j["parallelism"] = c.parallelism;
  j["out_dir"] = c.out_dir;
  json names = json::array();
  for (const auto& o : c.resolved_objects()) names.push_back(o.name);
  j["objects"] = names;
  json space = json::object();
  for (int i = 0; i < 8; ++i) {
    space[kSpaceKeys[i].suffixed] = {c.space.dims[i].lo / kSpaceKeys[i].scale,
                                     c.space.dims[i].hi / kSpaceKeys[i].scale};
  }
  j["space"] = space;
  j["tpe"] = {{"startup", c.tpe.startup},
              {"candidates", c.tpe.candidates},
              {"good_fraction", c.tpe.good_fraction}};
  j["protocol"] = dump_fields<ProtocolConfig, std::size(kProtocolD), 1>(c.protocol, kProtocolD,
                                                                        nullptr);
  j["transmission"] = dump_fields<TransmissionConfig, std::size(kTransmissionD), 1>(
      c.transmission, kTransmissionD, nullptr);
  j["world"] = dump_fields(c.world, kWorldD, &kWorldI);
  return j.dump(2);
}

DesignParams parse_params_json(const std::string& json_text) {
  json j = strict_parse(json_text, "params");
  if (j.is_object() && j.contains("params")) {
    for (const auto& [key, val] : j.items()) {
      (void)val;
      if (key != "params" && key != "index" && key != "score" && key != "seed" &&
          key != "objects" && key != "per_object_h") {
        bad_key("", key);
      }
    }
    return parse_params_object(j["params"]);
  }
  return parse_params_object(j);
}

std::string trial_json_line(const Trial& t) {
  json j;
  j["index"] = t.index;
  j["params"] = params_si_json(t.params);
  j["per_object_h"] = t.per_object_h;
  j["score"] = t.score;
  j["seed"] = t.seed;
  j["wall_ms"] = t.wall_ms;
  return j.dump();
}

Trial parse_trial_line(const std::string& line) {
  const json j = strict_parse(line, "trial record");
  if (!j.is_object()) raise(ErrorKind::Config, "trial record must be an object");
  Trial t;
  bool saw_index = false, saw_params = false, saw_score = false, saw_seed = false;
  for (const auto& [key, val] : j.items()) {
    if (key == "index") {
      t.index = need_int(val, "index");
      saw_index = true;
    } else if (key == "params") {
      if (!val.is_object()) raise(ErrorKind::Config, "'params' must be an object");
      DesignParams p;
      int seen = 0;
      for (const auto& [pk, pv] : val.items()) {
        int dim = -1;
        for (int i = 0; i < 8; ++i) {
          if (pk == kSpaceKeys[i].bare) {
            dim = i;
            break;
          }
        }
        if (dim < 0) bad_key("params", pk);
        *param_slot(p, dim) = need_number(pv, "params." + pk);
        ++seen;
      }
      if (seen != 8) raise(ErrorKind::Config, "'params' must hold all eight design values");
      t.params = p;
      saw_params = true;
    } else if (key == "per_object_h") {
      if (!val.is_array()) raise(ErrorKind::Config, "'per_object_h' must be an array");
      t.per_object_h.clear();
      for (const auto& v : val) t.per_object_h.push_back(need_number(v, "per_object_h"));
    } else if (key == "score") {
      t.score = need_number(val, "score");
      saw_score = true;
    } else if (key == "seed") {
      t.seed = need_u64(val, "seed");
      saw_seed = true;
    } else if (key == "wall_ms") {
      t.wall_ms = need_number(val, "wall_ms");
    } else {
      bad_key("", key);
    }
  }
  if (!saw_index || !saw_params || !saw_score || !saw_seed) {
    raise(ErrorKind::Config, "trial record missing index, params, score, or seed");
  }
  if (t.index < 0) raise(ErrorKind::Config, "trial index must be >= 0");
  return t;
}

StudyRecord load_study_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot read '" + path + "'");
  StudyRecord record;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      tell(record, parse_trial_line(line));
    } catch (const GfError& e) {
      raise(ErrorKind::Config,
            path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return record;
}

std::string best_json(const StudyConfig& c, const StudyRecord& r) {
  const Trial* b = r.best();
  if (!b) raise(ErrorKind::Config, "study has no trials yet");
  json j;
  j["index"] = b->index;
  j["score"] = b->score;
  j["seed"] = b->seed;
  json names = json::array();
  for (const auto& o : c.resolved_objects()) names.push_back(o.name);
  j["objects"] = names;
  j["per_object_h"] = b->per_object_h;
  j["params"] = params_si_json(b->params);
  return j.dump(2);
}

void write_best_json(const std::string& dir, const StudyConfig& c, const StudyRecord& r) {
  write_text_file(dir + "/best.json", best_json(c, r) + "\n");
}

void write_report_csv(const std::string& dir, const StudyRecord& r) {
  std::string text = "iteration,score,best_so_far\n";
  double best = 0.0;
  for (const Trial& t : r.trials) {
    best = t.index == 0 ? t.score : std::max(best, t.score);
    text += std::to_string(t.index);
    text += ',';
    text += fmt("%.9g", t.score);
    text += ',';
    text += fmt("%.9g", best);
    text += '\n';
  }
  write_text_file(dir + "/report.csv", text);
}

void write_grasp_force_csv(const std::string& dir, const DesignParams& p,
                           const TransmissionConfig& tc, const WorldConfig& wc,
                           const ProtocolConfig& pc) {
  static const int kWidthsMm[] = {10, 20, 30, 50, 70};
  std::string text = "width_mm,force_N\n";
  for (int w : kWidthsMm) {
    const double f = measure_grasp_force(p, tc, wc, pc, w * 1e-3);
    text += std::to_string(w);
    text += ',';
    text += fmt("%.6f", f);
    text += '\n';
  }
  write_text_file(dir + "/grasp_force.csv", text);
}

RunOutcome run_study(const StudyConfig& c, bool resume,
                     const std::function<bool()>& should_stop) {
  c.validate();
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) raise(ErrorKind::Io, "cannot create '" + c.out_dir + "': " + ec.message());
  const std::string jsonl = c.out_dir + "/study.jsonl";

  StudyRecord prior;
  if (fs::exists(jsonl) && fs::file_size(jsonl) > 0) {
    if (!resume) {
      raise(ErrorKind::Config, "'" + jsonl + "' already holds trials; pass resume to continue");
    }
    prior = load_study_jsonl(jsonl);
  }

  std::ofstream log(jsonl, std::ios::app);
  if (!log) raise(ErrorKind::Io, "cannot open '" + jsonl + "' for append");

  const auto objects = c.resolved_objects();
  const auto objective = [&c, &objects](const DesignParams& p, uint64_t seed) {
    return evaluate_design(p, c.transmission, c.world, c.protocol, objects, c.repeats, seed);
  };
  const auto on_trial = [&log, &jsonl](const Trial& t) {
    log << trial_json_line(t) << '\n';
    log.flush();
    if (!log) raise(ErrorKind::Io, "write to '" + jsonl + "' failed");
  };

  RunOutcome out;
  out.record = optimize(objective, c.space, c.n_iter, c.seed, c.parallelism, c.tpe,
                        std::move(prior), on_trial, should_stop);
  out.interrupted = static_cast<int>(out.record.trials.size()) < c.n_iter;

  if (!out.record.trials.empty()) {
    write_best_json(c.out_dir, c, out.record);
    write_report_csv(c.out_dir, out.record);
  }
  return out;
}

}  // namespace gf
