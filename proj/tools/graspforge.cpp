// Command-line front end for the graspforge shared library. Talks to the
// engine exclusively through the C API in graspforge/graspforge.h.
#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "graspforge/graspforge.h"

namespace {

void fail(const std::string& msg) { std::cerr << "graspforge: " << msg << "\n"; }

extern "C" void on_sigint(int) { gf_request_stop(); }

bool read_file(const std::string& path, std::string& out, std::string& err) {
  std::ifstream in(path);
  if (!in) {
    err = "cannot read '" + path + "'";
    return false;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

// GRASPFORGE_THREADS, when set, overrides any --parallel flag.
// Returns false (with a message) on a malformed value.
bool apply_thread_env(long long& parallel, std::string& err) {
  const char* env = std::getenv("GRASPFORGE_THREADS");
  if (!env || !*env) return true;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    err = "GRASPFORGE_THREADS must be a positive integer, got '" + std::string(env) + "'";
    return false;
  }
  parallel = v;
  return true;
}

int run_optimize(const std::string& config_path, long long iters, long long seed,
                 long long parallel, const std::string& out_dir, bool resume) {
  std::string config_text, err;
  if (!read_file(config_path, config_text, err)) {
    fail(err);
    return 2;
  }
  if (!apply_thread_env(parallel, err)) {
    fail(err);
    return 1;
  }

  gf_study* study = nullptr;
  gf_status st = gf_study_open(config_text.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                               iters, seed, static_cast<int>(parallel), resume ? 1 : 0, &study);
  if (st != GF_OK) {
    fail(gf_last_error());
    return st == GF_ERR_IO ? 2 : 1;
  }

  std::signal(SIGINT, on_sigint);
  st = gf_study_run(study);
  std::signal(SIGINT, SIG_DFL);

  if (st == GF_ERR_INTERRUPTED) {
    fail(gf_last_error());
    std::cerr << "graspforge: partial study kept in " << gf_study_out_dir(study)
              << "; rerun with --resume\n";
    gf_study_close(study);
    return 3;
  }
  if (st != GF_OK) {
    fail(gf_last_error());
    gf_study_close(study);
    return st == GF_ERR_IO ? 2 : 1;
  }

  char* best = nullptr;
  if (gf_study_best_json(study, &best) == GF_OK) {
    std::cout << best << "\n";
    gf_string_free(best);
  }
  std::cerr << "graspforge: " << gf_study_size(study) << " trials in "
            << gf_study_out_dir(study) << "\n";
  gf_study_close(study);
  return 0;
}

int run_simulate(const std::string& params_path, const std::string& object,
                 unsigned long long seed, const std::string& render_dir) {
  std::string params_text, err;
  const char* params = nullptr;
  if (!params_path.empty()) {
    if (!read_file(params_path, params_text, err)) {
      fail(err);
      return 1;
    }
    params = params_text.c_str();
  }

  char* result = nullptr;
  const gf_status st = gf_simulate(params, object.c_str(), seed,
                                   render_dir.empty() ? nullptr : render_dir.c_str(), &result);
  if (result) {
    std::cout << result << "\n";
    gf_string_free(result);
  }
  if (st == GF_OK) return 0;
  fail(gf_last_error());
  if (st == GF_ERR_SIMULATION) return 4;
  return st == GF_ERR_IO ? 2 : 1;
}

int run_report(const std::string& study_dir, bool grasp_force) {
  const gf_status st = gf_report(study_dir.c_str(), grasp_force ? 1 : 0);
  if (st == GF_OK) return 0;
  fail(gf_last_error());
  return st == GF_ERR_IO ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gripper design studies: optimize, simulate, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gf_version()));

  std::string config_path, out_dir, params_path, object, render_dir, study_dir;
  long long iters = -1, seed = -1, parallel = -1;
  unsigned long long sim_seed = 0;
  bool resume = false, grasp_force = false;

  CLI::App* opt = app.add_subcommand("optimize", "run or resume a design study");
  opt->add_option("--config", config_path, "study config JSON")->required();
  opt->add_option("--iters", iters, "override iteration count");
  opt->add_option("--seed", seed, "override study seed");
  opt->add_option("--parallel", parallel, "evaluations in flight");
  opt->add_option("--out", out_dir, "override output directory");
  opt->add_flag("--resume", resume, "continue an existing study log");

  CLI::App* sim = app.add_subcommand("simulate", "run one grasp-and-lift trial");
  sim->add_option("--params", params_path, "design parameters JSON (default: reference)");
  sim->add_option("--object", object, "benchmark object name")->required();
  sim->add_option("--seed", sim_seed, "trial seed");
  sim->add_option("--render", render_dir, "write SVG frames and trace.csv here");

  CLI::App* rep = app.add_subcommand("report", "rebuild CSV reports from a study log");
  rep->add_option("--study", study_dir, "study output directory")->required();
  rep->add_flag("--grasp-force", grasp_force, "also measure grasp force at the best design");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "graspforge: " << e.what() << "\n";
    return 1;
  }

  if (opt->parsed()) return run_optimize(config_path, iters, seed, parallel, out_dir, resume);
  if (sim->parsed()) return run_simulate(params_path, object, sim_seed, render_dir);
  return run_report(study_dir, grasp_force);
}
