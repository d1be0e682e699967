#include "harness/render.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "core/error.hpp"

namespace gf {
namespace {

constexpr double kScale = 1000.0;  // px per meter
constexpr double kTickPitch = 0.008;   // belt tick spacing [m]
constexpr double kTickDepth = 0.005;   // tick length into the link [m]

const char* material_fill(Material m) {
  switch (m) {
    case Material::Link: return "#7d8aa0";
    case Material::Belt: return "#c77d3f";
    case Material::Palm: return "#5b6472";
    case Material::Object: return "#caa84e";
    case Material::Ground: return "#cfc8ba";
  }
  return "#999999";
}

std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double wrap(double s, double period) {
  const double r = std::fmod(s, period);
  return r < 0.0 ? r + period : r;
}

}  // namespace

TrialRecorder::TrialRecorder(const std::string& dir, double trace_dt, double frame_dt)
    : dir_(dir), trace_dt_(trace_dt), frame_dt_(frame_dt) {
  if (trace_dt_ <= 0.0 || frame_dt_ <= 0.0) {
    raise(ErrorKind::Config, "recorder intervals must be positive");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_ + "/frames", ec);
  if (ec) raise(ErrorKind::Io, "cannot create '" + dir_ + "/frames': " + ec.message());
  trace_.open(dir_ + "/trace.csv", std::ios::trunc);
  if (!trace_) raise(ErrorKind::Io, "cannot open '" + dir_ + "/trace.csv'");
  trace_ << "t_s,phase,mode,T_m_N,T_s_N,x_t_mm,theta_c_mm,palm_y_m,"
            "obj_x_m,obj_y_m,obj_angle_rad,contacts\n";
}

void TrialRecorder::on_phase(const World& w, const char* name) {
  (void)w;
  phase_ = name;
}

void TrialRecorder::on_step(const World& w, double T_m, double palm_v) {
  (void)palm_v;
  const double t = w.time();
  if (t + 1e-12 >= next_trace_) {
    while (next_trace_ <= t + 1e-12) next_trace_ += trace_dt_;
    write_trace_row(w, T_m);
  }
  if (t + 1e-12 >= next_frame_) {
    while (next_frame_ <= t + 1e-12) next_frame_ += frame_dt_;
    write_frame(w, T_m);
  }
}

void TrialRecorder::write_trace_row(const World& w, double T_m) {
  const SliderState s = w.has_hand() ? w.slider() : SliderState{};
  double ox = 0.0, oy = 0.0, oa = 0.0;
  if (w.object_body() >= 0) {
    const Body& b = w.body(w.object_body());
    ox = b.pos.x;
    oy = b.pos.y;
    oa = b.angle;
  }
  trace_ << num("%.4f", w.time()) << ',' << phase_ << ','
         << (w.has_hand() ? mode_name(s.mode) : "-") << ',' << num("%.4f", T_m) << ','
         << num("%.4f", s.T_s) << ',' << num("%.4f", s.x_t * 1e3) << ','
         << num("%.4f", (w.has_hand() ? w.hand().theta_c : 0.0) * 1e3) << ','
         << num("%.6f", w.has_hand() ? w.palm_y() : 0.0) << ',' << num("%.6f", ox) << ','
         << num("%.6f", oy) << ',' << num("%.6f", oa) << ','
         << static_cast<int>(w.contacts().size()) << '\n';
  trace_.flush();
  if (!trace_) raise(ErrorKind::Io, "write to '" + dir_ + "/trace.csv' failed");
}

void TrialRecorder::write_frame(const World& w, double T_m) {
  if (!have_view_) {
    // Fix the viewport at the first frame: the whole start pose plus lift
    // headroom, so later frames stay comparable.
    const double top = (w.has_hand() ? w.palm_y() + w.config().palm_h : 0.3) + 0.45;
    view_x0_ = -0.30;
    view_w_ = 0.60;
    view_y0_ = -0.06;
    view_h_ = top - view_y0_;
    have_view_ = true;
  }
  const auto X = [this](double x) { return (x - view_x0_) * kScale; };
  const auto Y = [this](double y) { return (view_y0_ + view_h_ - y) * kScale; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num("%.0f", view_w_ * kScale) +
         "\" height=\"" + num("%.0f", view_h_ * kScale) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#f6f4ef\"/>\n";

  for (const auto& sh : w.shapes()) {
    const char* fill = material_fill(sh.mat);
    if (sh.is_circle) {
      svg += "<circle cx=\"" + num("%.1f", X(sh.c.x)) + "\" cy=\"" + num("%.1f", Y(sh.c.y)) +
             "\" r=\"" + num("%.1f", sh.r * kScale) + "\" fill=\"" + fill +
             "\" stroke=\"#3a3a3a\" stroke-width=\"1\"/>\n";
    } else {
      svg += "<polygon points=\"";
      for (int i = 0; i < sh.poly.n; ++i) {
        svg += num("%.1f", X(sh.poly.v[i].x)) + "," + num("%.1f", Y(sh.poly.v[i].y)) + " ";
      }
      svg += "\" fill=\"" + std::string(fill) + "\" stroke=\"#3a3a3a\" stroke-width=\"1\"/>\n";
    }
  }

  if (w.has_hand()) {
    // Tick marks riding the conveying face of the crawler distal link; they
    // march toward the palm as travel accumulates.
    const World::LinkFrame f = w.finger_frame(1);
    const double face_len = w.params().l_D - w.config().R_t;
    const double h_t = w.config().h_t;
    const double theta_c = w.hand().theta_c;
    const int n_ticks = static_cast<int>(face_len / kTickPitch) + 1;
    for (int k = 0; k < n_ticks; ++k) {
      const double s = wrap(k * kTickPitch - theta_c, face_len);
      const Vec2 a = f.ip + s * f.uD + h_t * f.lD;
      const Vec2 b = a - kTickDepth * f.lD;
      svg += "<line x1=\"" + num("%.1f", X(a.x)) + "\" y1=\"" + num("%.1f", Y(a.y)) +
             "\" x2=\"" + num("%.1f", X(b.x)) + "\" y2=\"" + num("%.1f", Y(b.y)) +
             "\" stroke=\"#4a2f14\" stroke-width=\"1.6\"/>\n";
    }
  }

  for (const auto& c : w.contacts()) {
    svg += "<circle cx=\"" + num("%.1f", X(c.p.x)) + "\" cy=\"" + num("%.1f", Y(c.p.y)) +
           "\" r=\"2\" fill=\"#c23b22\"/>\n";
  }

  const SliderState s = w.has_hand() ? w.slider() : SliderState{};
  std::string hud1 = "t=" + num("%.3f", w.time()) + " s  phase=" + phase_ +
                     "  mode=" + (w.has_hand() ? mode_name(s.mode) : "-");
  std::string hud2 = "T_m=" + num("%.1f", T_m) + " N  T_s=" + num("%.1f", s.T_s) +
                     " N  x_t=" + num("%.1f", s.x_t * 1e3) + " mm";
  std::string hud3 = "palm_y=" + num("%.3f", w.has_hand() ? w.palm_y() : 0.0) +
                     " m  theta_c=" + num("%.1f", (w.has_hand() ? w.hand().theta_c : 0.0) * 1e3) +
                     " mm  contacts=" + std::to_string(w.contacts().size());
  svg += "<g font-family=\"monospace\" font-size=\"14\" fill=\"#222222\">\n";
  svg += "<text x=\"10\" y=\"20\">" + hud1 + "</text>\n";
  svg += "<text x=\"10\" y=\"38\">" + hud2 + "</text>\n";
  svg += "<text x=\"10\" y=\"56\">" + hud3 + "</text>\n";
  svg += "</g>\n</svg>\n";

  char name[32];
  std::snprintf(name, sizeof name, "%05d.svg", frame_no_);
  const std::string path = dir_ + "/frames/" + name;
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "'");
  out << svg;
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
  ++frame_no_;
}

}  // namespace gf
