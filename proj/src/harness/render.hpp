#pragma once

#include <fstream>
#include <string>

#include "core/scenario.hpp"

namespace gf {

// Records a trial to disk as it runs: a trace.csv row every trace_dt of
// simulated time and an SVG frame in <dir>/frames every frame_dt. Frames are
// numbered 00000.svg upward; belt tick marks shift with the crawler travel so
// conveyance is visible frame to frame. Output is deterministic for a given
// trial. Pass as the observer to run_grasp_trial.
class TrialRecorder : public TrialObserver {
 public:
  explicit TrialRecorder(const std::string& dir, double trace_dt = 0.010,
                         double frame_dt = 0.040);

  void on_step(const World& w, double T_m, double palm_v) override;
  void on_phase(const World& w, const char* name) override;

  int frames_written() const { return frame_no_; }

 private:
  void write_trace_row(const World& w, double T_m);
  void write_frame(const World& w, double T_m);

  std::string dir_;
  std::ofstream trace_;
  double trace_dt_, frame_dt_;
  double next_trace_ = 0.0, next_frame_ = 0.0;
  int frame_no_ = 0;
  std::string phase_ = "setup";
  bool have_view_ = false;
  double view_x0_ = 0.0, view_y0_ = 0.0, view_w_ = 0.0, view_h_ = 0.0;
};

}  // namespace gf
