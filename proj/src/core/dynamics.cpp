#include "core/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace gf {

namespace {

struct Aabb {
  Vec2 lo, hi;
};

Aabb shape_aabb(const World::WorldShape& s) {
  Aabb box;
  if (s.is_circle) {
    box.lo = {s.c.x - s.r, s.c.y - s.r};
    box.hi = {s.c.x + s.r, s.c.y + s.r};
    return box;
  }
  box.lo = box.hi = s.poly.v[0];
  for (int i = 1; i < s.poly.n; ++i) {
    box.lo.x = std::min(box.lo.x, s.poly.v[i].x);
    box.lo.y = std::min(box.lo.y, s.poly.v[i].y);
    box.hi.x = std::max(box.hi.x, s.poly.v[i].x);
    box.hi.y = std::max(box.hi.y, s.poly.v[i].y);
  }
  return box;
}

bool aabb_overlap(const Aabb& a, const Aabb& b, double margin) {
  return a.lo.x - margin <= b.hi.x && b.lo.x - margin <= a.hi.x &&
         a.lo.y - margin <= b.hi.y && b.lo.y - margin <= a.hi.y;
}

uint32_t side_code(const ContactSide& s) {
  if (s.is_link()) {
    return 0x8000u | (static_cast<uint32_t>(s.finger) << 4) | static_cast<uint32_t>(s.link);
  }
  return static_cast<uint32_t>(s.body);
}

double joint_limit_torque(double th, const WorldConfig& cfg) {
  if (th < cfg.joint_lo) return cfg.joint_limit_k * (cfg.joint_lo - th);
  if (th > cfg.joint_hi) return cfg.joint_limit_k * (cfg.joint_hi - th);
  return 0.0;
}

double joint_limit_stiffness(double th, const WorldConfig& cfg) {
  return (th < cfg.joint_lo || th > cfg.joint_hi) ? cfg.joint_limit_k : 0.0;
}

double joint_limit_energy(double th, const WorldConfig& cfg) {
  double ex = 0.0;
  if (th < cfg.joint_lo) ex = cfg.joint_lo - th;
  if (th > cfg.joint_hi) ex = th - cfg.joint_hi;
  return 0.5 * cfg.joint_limit_k * ex * ex;
}

}  // namespace

void WorldConfig::validate() const {
  if (dt <= 0.0 || solver_iters < 1) raise(ErrorKind::Config, "dt and solver_iters must be positive");
  if (baumgarte < 0.0 || baumgarte > 1.0) raise(ErrorKind::Config, "baumgarte must be in [0,1]");
  if (slop < 0.0 || bias_cap < 0.0) raise(ErrorKind::Config, "slop and bias_cap must be non-negative");
  if (m_pp <= 0.0 || m_dp <= 0.0) raise(ErrorKind::Config, "link masses must be positive");
  if (R_t <= 0.0 || R_t > h_t) raise(ErrorKind::Config, "tip radius must fit in the distal thickness");
  if (gravity < 0.0) raise(ErrorKind::Config, "gravity must be non-negative");
}

Body make_object_body(const ObjectSpec& spec, Vec2 pos) {
  Body b;
  b.pos = pos;
  b.inv_m = 1.0 / spec.mass();
  b.inv_I = 1.0 / spec.inertia();
  Fixture fx;
  fx.mat = Material::Object;
  if (spec.shape == ObjectSpec::Shape::Box) {
    fx.poly = make_box({-0.5 * spec.width, -0.5 * spec.height}, {0.5 * spec.width, 0.5 * spec.height});
  } else {
    fx.is_circle = true;
    fx.c = {0.0, 0.0};
    fx.r = spec.radius;
  }
  b.fixtures.push_back(fx);
  return b;
}

World::World(const WorldConfig& wc, const DesignParams& p, const TransmissionConfig& tc)
    : cfg_(wc), params_(p), tcfg_(tc) {
  cfg_.validate();
  params_.validate();
  tcfg_.validate(params_.k_s);
}

int World::add_body(const Body& b) {
  bodies_.push_back(b);
  return static_cast<int>(bodies_.size()) - 1;
}

int World::add_ground() {
  Body g;
  Fixture fx;
  fx.poly = make_box({-2.0, -1.0}, {2.0, 0.0});
  fx.mat = Material::Ground;
  g.fixtures.push_back(fx);
  return add_body(g);
}

void World::attach_hand(double palm_y) {
  if (has_hand_) raise(ErrorKind::Config, "hand already attached");
  has_hand_ = true;

  Body palm;
  palm.pos = {0.0, palm_y};
  palm.palm = true;
  Fixture pf;
  const double hw = 0.5 * params_.l_M + cfg_.palm_margin;
  pf.poly = make_box({-hw, 0.0}, {hw, cfg_.palm_h});
  pf.mat = Material::Palm;
  palm.fixtures.push_back(pf);
  palm_body_ = add_body(palm);

  for (int i = 0; i < 2; ++i) {
    Finger& f = fingers_[i];
    f.crawler = (i == 1);
    f.s = f.crawler ? 1.0 : -1.0;             // crawler finger on the left
    f.mp_x = -f.s * 0.5 * params_.l_M;
    f.th_M = 0.0;
    f.th_I = tcfg_.theta_ofs;
    f.w_M = f.w_I = 0.0;
    f.m1 = cfg_.m_pp;
    f.m2 = cfg_.m_dp;
    f.d1 = 0.5 * params_.l_P;
    f.d2 = 0.5 * params_.l_D;
    f.I1 = f.m1 * params_.l_P * params_.l_P / 12.0;
    f.I2 = f.m2 * params_.l_D * params_.l_D / 12.0;

    Fixture pp;
    pp.poly = make_box({0.0, -cfg_.w_pp}, {params_.l_P, cfg_.w_pp});
    pp.mat = Material::Link;
    f.fix[0].clear();
    f.fix[0].push_back(pp);

    Fixture dp;
    dp.poly = make_box({0.0, -cfg_.h_t}, {params_.l_D - cfg_.R_t, cfg_.h_t});
    dp.mat = f.crawler ? Material::Belt : Material::Link;
    dp.belt = f.crawler;
    Fixture tip;
    tip.is_circle = true;
    tip.c = {params_.l_D - cfg_.R_t, cfg_.h_t - cfg_.R_t};
    tip.r = cfg_.R_t;
    tip.mat = dp.mat;
    tip.belt = f.crawler;
    f.fix[1].clear();
    f.fix[1].push_back(dp);
    f.fix[1].push_back(tip);
  }
  th_c_ = 0.0;
  w_c_ = 0.0;
  refresh_finger_frames();
  refresh_contact_inverse(fingers_[0], 0.0, 0.0);
  refresh_contact_inverse(fingers_[1], 0.0, 0.0);
  refresh_trio_response(0.0, 0.0, 0.0);
  sync_hand_state();
}

void World::set_joint_state(int finger, double th_M, double th_I, double w_M, double w_I) {
  Finger& f = fingers_[finger];
  f.th_M = th_M;
  f.th_I = th_I;
  f.w_M = w_M;
  f.w_I = w_I;
  refresh_finger_frames();
  sync_hand_state();
}

void World::set_object(int body) { object_body_ = body; }

void World::set_object_wrench(Vec2 force, double torque) {
  obj_force_ = force;
  obj_torque_ = torque;
}

void World::refresh_finger_frames() {
  const Vec2 palm_pos = bodies_[palm_body_].pos;
  for (Finger& f : fingers_) {
    f.aP = f.th_M - tcfg_.theta_ofs;
    f.aD = f.th_M + f.th_I - tcfg_.theta_ofs;
    f.uP = {f.s * std::sin(f.aP), -std::cos(f.aP)};
    f.uD = {f.s * std::sin(f.aD), -std::cos(f.aD)};
    f.lP = f.s * perp(f.uP);
    f.lD = f.s * perp(f.uD);
    f.mp = palm_pos + Vec2{f.mp_x, 0.0};
    f.ip = f.mp + params_.l_P * f.uP;
    refresh_mass_matrix(f);
  }
}

void World::refresh_mass_matrix(Finger& f) {
  const double lp = params_.l_P;
  const double c2 = std::cos(f.th_I);
  f.M00 = f.I1 + f.m1 * f.d1 * f.d1 + f.I2 +
          f.m2 * (lp * lp + f.d2 * f.d2 + 2.0 * lp * f.d2 * c2);
  f.M01 = f.I2 + f.m2 * (f.d2 * f.d2 + lp * f.d2 * c2);
  f.M11 = f.I2 + f.m2 * f.d2 * f.d2;
  const double det = f.M00 * f.M11 - f.M01 * f.M01;
  f.iM00 = f.M11 / det;
  f.iM01 = -f.M01 / det;
  f.iM11 = f.M00 / det;
}

void World::refresh_contact_inverse(Finger& f, double stiff_M, double stiff_I) {
  const double d2 = cfg_.dt * cfg_.dt;
  const double C00 = f.M00 + d2 * stiff_M;
  const double C11 = f.M11 + d2 * stiff_I;
  const double det = C00 * C11 - f.M01 * f.M01;
  f.iC00 = C11 / det;
  f.iC01 = -f.M01 / det;
  f.iC11 = C00 / det;
}

void World::refresh_trio_response(double stiffness, double stiff_M, double stiff_I) {
  // Inverse of D + a*dt^2*g*g^T over (w_c, w_M2, w_I2): the tension gradient
  // g = (1, -r_M, +r_I) ties the crawler to the crawler-side joints, and the
  // contact solver must see the same stiffened coupling as the velocity step.
  const Finger& f = fingers_[1];
  const double d2 = cfg_.dt * cfg_.dt;
  const double k = stiffness * d2;
  const double g0 = 1.0, g1 = -params_.r_M(), g2 = params_.r_I;
  const double A00 = tcfg_.m_c + k * g0 * g0, A01 = k * g0 * g1, A02 = k * g0 * g2;
  const double A11 = f.M00 + d2 * stiff_M + k * g1 * g1, A12 = f.M01 + k * g1 * g2;
  const double A22 = f.M11 + d2 * stiff_I + k * g2 * g2;
  const double c00 = A11 * A22 - A12 * A12;
  const double c01 = A02 * A12 - A01 * A22;
  const double c02 = A01 * A12 - A02 * A11;
  const double c11 = A00 * A22 - A02 * A02;
  const double c12 = A01 * A02 - A00 * A12;
  const double c22 = A00 * A11 - A01 * A01;
  const double det = A00 * c00 + A01 * c01 + A02 * c02;
  H_[0][0] = c00 / det;
  H_[0][1] = H_[1][0] = c01 / det;
  H_[0][2] = H_[2][0] = c02 / det;
  H_[1][1] = c11 / det;
  H_[1][2] = H_[2][1] = c12 / det;
  H_[2][2] = c22 / det;
}

void World::apply_crawler_impulse(double lc) {
  w_c_ += H_[0][0] * lc;
  fingers_[1].w_M += H_[1][0] * lc;
  fingers_[1].w_I += H_[2][0] * lc;
}

Vec2 World::point_vel(const ContactSide& s, Vec2 p) const {
  if (!s.is_link()) {
    const Body& b = bodies_[s.body];
    return b.vel + b.omega * perp(p - b.pos);
  }
  const Finger& f = fingers_[s.finger];
  Vec2 v = bodies_[palm_body_].vel + f.w_M * (f.s * perp(p - f.mp));
  if (s.link == 1) v += f.w_I * (f.s * perp(p - f.ip));
  return v;
}

void World::apply_impulse(const ContactSide& s, Vec2 p, Vec2 imp) {
  if (!s.is_link()) {
    Body& b = bodies_[s.body];
    b.vel += b.inv_m * imp;
    b.omega += b.inv_I * cross(p - b.pos, imp);
    return;
  }
  Finger& f = fingers_[s.finger];
  const double gM = dot(f.s * perp(p - f.mp), imp);
  const double gI = s.link == 1 ? dot(f.s * perp(p - f.ip), imp) : 0.0;
  if (f.crawler) {
    w_c_ += H_[0][1] * gM + H_[0][2] * gI;
    f.w_M += H_[1][1] * gM + H_[1][2] * gI;
    f.w_I += H_[2][1] * gM + H_[2][2] * gI;
  } else {
    f.w_M += f.iC00 * gM + f.iC01 * gI;
    f.w_I += f.iC01 * gM + f.iC11 * gI;
  }
}

double World::inv_mass_along(const ContactSide& s, Vec2 p, Vec2 d) const {
  if (!s.is_link()) {
    const Body& b = bodies_[s.body];
    const double rc = cross(p - b.pos, d);
    return b.inv_m + b.inv_I * rc * rc;
  }
  const Finger& f = fingers_[s.finger];
  const double gM = dot(f.s * perp(p - f.mp), d);
  const double gI = s.link == 1 ? dot(f.s * perp(p - f.ip), d) : 0.0;
  if (f.crawler) {
    return gM * gM * H_[1][1] + 2.0 * gM * gI * H_[1][2] + gI * gI * H_[2][2];
  }
  return gM * gM * f.iC00 + 2.0 * gM * gI * f.iC01 + gI * gI * f.iC11;
}

void World::link_world_shape(const Finger& f, int link, const Fixture& fx, WorldShape& out) const {
  const Vec2 origin = link == 0 ? f.mp : f.ip;
  const Vec2 u = link == 0 ? f.uP : f.uD;
  const Vec2 l = link == 0 ? f.lP : f.lD;
  out.is_circle = fx.is_circle;
  out.mat = fx.mat;
  out.belt = fx.belt;
  if (fx.is_circle) {
    out.c = origin + fx.c.x * u + fx.c.y * l;
    out.r = fx.r;
    return;
  }
  out.poly.n = fx.poly.n;
  for (int i = 0; i < fx.poly.n; ++i) {
    out.poly.v[i] = origin + fx.poly.v[i].x * u + fx.poly.v[i].y * l;
  }
  ensure_ccw(out.poly);  // the lateral axis flips handedness on one finger
}

World::LinkFrame World::finger_frame(int finger) const {
  if (!has_hand_) raise(ErrorKind::Config, "no hand attached");
  if (finger < 0 || finger > 1) raise(ErrorKind::Index, "finger index out of range");
  const Finger& f = fingers_[finger];
  return LinkFrame{f.mp, f.ip, f.uP, f.lP, f.uD, f.lD, f.crawler};
}

std::vector<World::WorldShape> World::shapes() const {
  std::vector<WorldShape> out;
  for (int bi = 0; bi < static_cast<int>(bodies_.size()); ++bi) {
    const Body& b = bodies_[bi];
    for (const Fixture& fx : b.fixtures) {
      WorldShape s;
      s.owner = ContactSide{bi, -1, -1};
      s.is_circle = fx.is_circle;
      s.mat = fx.mat;
      s.belt = fx.belt;
      if (fx.is_circle) {
        s.c = b.pos + rotate(fx.c, b.angle);
        s.r = fx.r;
      } else {
        s.poly = transform(fx.poly, b.pos, b.angle);
      }
      out.push_back(s);
    }
  }
  if (has_hand_) {
    for (int fi = 0; fi < 2; ++fi) {
      const Finger& f = fingers_[fi];
      for (int li = 0; li < 2; ++li) {
        for (const Fixture& fx : f.fix[li]) {
          WorldShape s;
          s.owner = ContactSide{-1, fi, li};
          link_world_shape(f, li, fx, s);
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

double World::mu_between(Material a, Material b) const {
  auto pair_is = [&](Material x, Material y) {
    return (a == x && b == y) || (a == y && b == x);
  };
  if (pair_is(Material::Belt, Material::Object)) return cfg_.mu_belt_object;
  if (pair_is(Material::Link, Material::Object)) return cfg_.mu_link_object;
  if (pair_is(Material::Palm, Material::Object)) return cfg_.mu_link_object;
  if (pair_is(Material::Object, Material::Ground)) return cfg_.mu_object_ground;
  if (pair_is(Material::Link, Material::Ground)) return cfg_.mu_link_ground;
  if (pair_is(Material::Palm, Material::Ground)) return cfg_.mu_link_ground;
  if (pair_is(Material::Belt, Material::Ground)) return cfg_.mu_belt_ground;
  return cfg_.mu_default;
}

void World::build_rows() {
  rows_.clear();
  const std::vector<WorldShape> shapes_now = shapes();
  std::vector<Aabb> boxes(shapes_now.size());
  std::vector<int> fix_idx(shapes_now.size(), 0);
  {
    int prev_body = -2, prev_finger = -2, prev_link = -2, k = 0;
    for (size_t i = 0; i < shapes_now.size(); ++i) {
      const ContactSide& o = shapes_now[i].owner;
      if (o.body != prev_body || o.finger != prev_finger || o.link != prev_link) k = 0;
      fix_idx[i] = k++;
      prev_body = o.body;
      prev_finger = o.finger;
      prev_link = o.link;
      boxes[i] = shape_aabb(shapes_now[i]);
    }
  }

  auto responds = [&](const ContactSide& s) {
    return s.is_link() || bodies_[s.body].inv_m > 0.0;
  };

  for (size_t i = 0; i < shapes_now.size(); ++i) {
    for (size_t j = i + 1; j < shapes_now.size(); ++j) {
      const ContactSide& A = shapes_now[i].owner;
      const ContactSide& B = shapes_now[j].owner;
      if (A.body >= 0 && A.body == B.body) continue;
      if (A.is_link() && B.is_link() && A.finger == B.finger) continue;
      const bool palm_a = A.body >= 0 && bodies_[A.body].palm;
      const bool palm_b = B.body >= 0 && bodies_[B.body].palm;
      if ((palm_a && B.is_link()) || (palm_b && A.is_link())) continue;
      if (!responds(A) && !responds(B)) continue;
      if (!aabb_overlap(boxes[i], boxes[j], 0.002)) continue;

      const WorldShape& sa = shapes_now[i];
      const WorldShape& sb = shapes_now[j];
      Manifold m;
      if (!sa.is_circle && !sb.is_circle) {
        m = collide_polys(sa.poly, sb.poly);
      } else if (sa.is_circle && !sb.is_circle) {
        m = collide_circle_poly(sa.c, sa.r, sb.poly);
      } else if (!sa.is_circle && sb.is_circle) {
        m = collide_circle_poly(sb.c, sb.r, sa.poly);
        m.normal = -m.normal;  // manifold was computed with the circle as A
      } else {
        m = collide_circles(sa.c, sa.r, sb.c, sb.r);
      }
      if (m.n == 0) continue;

      for (int k = 0; k < m.n; ++k) {
        Row row;
        row.a = A;
        row.b = B;
        row.p = m.pt[k].p;
        row.n = m.normal;
        row.t = perp(m.normal);
        row.pen = m.pt[k].pen;

        // A belt fixture only conveys on its inner face and tip pulley.
        bool belt_active = false;
        double belt_s = 0.0;
        for (int side = 0; side < 2; ++side) {
          const WorldShape& ws = side == 0 ? sa : sb;
          const ContactSide& cs = side == 0 ? A : B;
          if (!ws.belt) continue;
          const Finger& f = fingers_[cs.finger];
          bool active = ws.is_circle;
          if (!active) {
            const double lateral = dot(row.p - f.ip, f.lD);
            active = lateral >= cfg_.h_t - 0.001 && std::abs(dot(row.n, f.lD)) > 0.7;
          }
          if (active) {
            belt_active = true;
            belt_s = f.s;
          }
        }
        // The belt surface slides along the contact tangent at the crawler
        // rate; with t = perp(n) both host sides reduce to the same factor.
        row.belt = belt_active;
        row.jc = belt_active ? -belt_s : 0.0;

        double surf = 0.0;
        if (!A.is_link() && bodies_[A.body].belt_speed != 0.0) surf -= bodies_[A.body].belt_speed;
        if (!B.is_link() && bodies_[B.body].belt_speed != 0.0) surf -= bodies_[B.body].belt_speed;
        row.surf = surf;

        Material ma = sa.mat, mb = sb.mat;
        if (ma == Material::Belt && !belt_active) ma = Material::Link;
        if (mb == Material::Belt && !belt_active) mb = Material::Link;
        row.mat_a = ma;
        row.mat_b = mb;
        row.mu = mu_between(ma, mb);

        row.kn = inv_mass_along(A, row.p, row.n) + inv_mass_along(B, row.p, row.n);
        row.kt = inv_mass_along(A, row.p, row.t) + inv_mass_along(B, row.p, row.t);
        if (row.jc != 0.0) {
          // The tangent Jacobian of a conveying row spans (w_c, w_M2, w_I2);
          // the squared joint terms are in inv_mass_along, so add the crawler
          // diagonal and the crawler-joint cross terms of J*H*J^T.
          row.kt += row.jc * row.jc * H_[0][0];
          for (int side = 0; side < 2; ++side) {
            const ContactSide& cs = side == 0 ? A : B;
            if (!cs.is_link() || !fingers_[cs.finger].crawler) continue;
            const Finger& f = fingers_[cs.finger];
            const double sgn = side == 0 ? 1.0 : -1.0;
            const double gM = dot(f.s * perp(row.p - f.mp), row.t);
            const double gI =
                cs.link == 1 ? dot(f.s * perp(row.p - f.ip), row.t) : 0.0;
            row.kt += 2.0 * row.jc * sgn * (gM * H_[0][1] + gI * H_[0][2]);
          }
        }
        if (row.kn < 1e-12 || row.kt < 1e-12) continue;

        row.bias = std::min(cfg_.baumgarte * std::max(row.pen - cfg_.slop, 0.0) / cfg_.dt,
                            cfg_.bias_cap);

        row.key = (static_cast<uint64_t>(side_code(A)) << 48) |
                  (static_cast<uint64_t>(fix_idx[i] & 0xF) << 44) |
                  (static_cast<uint64_t>(side_code(B)) << 28) |
                  (static_cast<uint64_t>(fix_idx[j] & 0xF) << 24) |
                  static_cast<uint64_t>(m.pt[k].feature & 0xFFFFFF);

        auto hit = warm_.find(row.key);
        if (hit != warm_.end()) {
          row.an = hit->second.first;
          row.at = hit->second.second;
          const Vec2 imp = row.an * row.n + row.at * row.t;
          apply_impulse(row.a, row.p, imp);
          apply_impulse(row.b, row.p, -imp);
          if (row.jc != 0.0) apply_crawler_impulse(row.jc * row.at);
        }
        rows_.push_back(row);
      }
    }
  }
}

void World::solve_rows() {
  for (int it = 0; it < cfg_.solver_iters; ++it) {
    for (Row& r : rows_) {
      const double vn = dot(r.n, point_vel(r.a, r.p) - point_vel(r.b, r.p));
      double dj = (r.bias - vn) / r.kn;
      const double an_new = std::max(r.an + dj, 0.0);
      dj = an_new - r.an;
      r.an = an_new;
      if (dj != 0.0) {
        apply_impulse(r.a, r.p, dj * r.n);
        apply_impulse(r.b, r.p, -dj * r.n);
      }

      const double vt =
          dot(r.t, point_vel(r.a, r.p) - point_vel(r.b, r.p)) + r.jc * w_c_ + r.surf;
      double djt = -vt / r.kt;
      const double hi = r.mu * r.an;
      const double at_new = std::clamp(r.at + djt, -hi, hi);
      djt = at_new - r.at;
      r.at = at_new;
      if (djt != 0.0) {
        apply_impulse(r.a, r.p, djt * r.t);
        apply_impulse(r.b, r.p, -djt * r.t);
        if (r.jc != 0.0) apply_crawler_impulse(r.jc * djt);
      }
    }
  }
  // Final clamp so |friction| <= mu * normal holds exactly after the last
  // normal update.
  for (Row& r : rows_) {
    const double hi = r.mu * r.an;
    if (std::abs(r.at) > hi) {
      const double at_new = std::clamp(r.at, -hi, hi);
      const double djt = at_new - r.at;
      r.at = at_new;
      apply_impulse(r.a, r.p, djt * r.t);
      apply_impulse(r.b, r.p, -djt * r.t);
      if (r.jc != 0.0) apply_crawler_impulse(r.jc * djt);
    }
  }
}

void World::sync_hand_state() {
  hand_state_.theta_M1 = fingers_[0].th_M;
  hand_state_.theta_I1 = fingers_[0].th_I;
  hand_state_.theta_M2 = fingers_[1].th_M;
  hand_state_.theta_I2 = fingers_[1].th_I;
  hand_state_.theta_c = th_c_;
  hand_state_.dtheta_M1 = fingers_[0].w_M;
  hand_state_.dtheta_I1 = fingers_[0].w_I;
  hand_state_.dtheta_M2 = fingers_[1].w_M;
  hand_state_.dtheta_I2 = fingers_[1].w_I;
  hand_state_.dtheta_c = w_c_;
}

SliderState World::slider() const {
  if (!has_hand_) return SliderState{};
  return slider_state(hand_state_, params_, tcfg_);
}

double World::palm_y() const { return bodies_[palm_body_].pos.y; }

double World::lowest_tip_y() const {
  double lowest = 1e30;
  for (int fi = 0; fi < 2; ++fi) {
    const Finger& f = fingers_[fi];
    for (const Fixture& fx : f.fix[1]) {
      WorldShape s;
      link_world_shape(f, 1, fx, s);
      if (s.is_circle) {
        lowest = std::min(lowest, s.c.y - s.r);
      } else {
        for (int i = 0; i < s.poly.n; ++i) lowest = std::min(lowest, s.poly.v[i].y);
      }
    }
  }
  return lowest;
}

void World::check_finite() const {
  for (const Body& b : bodies_) {
    if (!std::isfinite(b.pos.x) || !std::isfinite(b.pos.y) || !std::isfinite(b.vel.x) ||
        !std::isfinite(b.vel.y) || !std::isfinite(b.angle) || !std::isfinite(b.omega)) {
      raise(ErrorKind::Simulation, "simulation diverged (non-finite body state)");
    }
    if (b.inv_m > 0.0 &&
        (len(b.vel) > cfg_.diverge_speed || std::abs(b.omega) > 1000.0)) {
      raise(ErrorKind::Simulation, "simulation diverged (runaway body)");
    }
  }
  if (has_hand_) {
    for (const Finger& f : fingers_) {
      if (!std::isfinite(f.th_M) || !std::isfinite(f.th_I) || !std::isfinite(f.w_M) ||
          !std::isfinite(f.w_I) || std::abs(f.w_M) > 1000.0 || std::abs(f.w_I) > 1000.0) {
        raise(ErrorKind::Simulation, "simulation diverged (runaway finger)");
      }
    }
    if (!std::isfinite(th_c_) || !std::isfinite(w_c_) || std::abs(w_c_) > 1000.0) {
      raise(ErrorKind::Simulation, "simulation diverged (runaway crawler)");
    }
  }
}

void World::step(double T_m, double palm_v) {
  const double dt = cfg_.dt;
  diag_.T_s = 0.0;
  diag_.x_t = 0.0;

  if (has_hand_) {
    bodies_[palm_body_].vel = {0.0, palm_v};

    sync_hand_state();
    // Generalized forces other than the take-up tension. The tension couples
    // the crawler and the crawler-side joints through the stiff series law,
    // so those three rates take one implicit step together afterwards. Active
    // joint stops contribute their stiffness to the same implicit solve: a
    // one-sided stop stepped explicitly bounces harder than it lands.
    const JointTorques tq = net_joint_torques(hand_state_, params_, tcfg_, T_m, 0.0);
    double rest[2][2], stop[2][2];
    for (int fi = 0; fi < 2; ++fi) {
      const Finger& f = fingers_[fi];
      double tau_M = fi == 0 ? tq.tau_M1 : tq.tau_M2;
      double tau_I = fi == 0 ? tq.tau_I1 : tq.tau_I2;
      tau_M += joint_limit_torque(f.th_M, cfg_);
      tau_I += joint_limit_torque(f.th_I, cfg_);
      stop[fi][0] = joint_limit_stiffness(f.th_M, cfg_);
      stop[fi][1] = joint_limit_stiffness(f.th_I, cfg_);

      const double g = cfg_.gravity;
      const double h = f.m2 * params_.l_P * f.d2 * std::sin(f.th_I);
      const double c0 = -h * (2.0 * f.w_M * f.w_I + f.w_I * f.w_I);
      const double c1 = h * f.w_M * f.w_M;
      const double g0 = (f.m1 * f.d1 + f.m2 * params_.l_P) * g * std::sin(f.aP) +
                        f.m2 * f.d2 * g * std::sin(f.aD);
      const double g1 = f.m2 * f.d2 * g * std::sin(f.aD);
      rest[fi][0] = tau_M - c0 - g0;
      rest[fi][1] = tau_I - c1 - g1;
    }

    Finger& plain = fingers_[0];
    refresh_contact_inverse(plain, stop[0][0], stop[0][1]);
    {
      const double r0 = plain.M00 * plain.w_M + plain.M01 * plain.w_I + dt * rest[0][0];
      const double r1 = plain.M01 * plain.w_M + plain.M11 * plain.w_I + dt * rest[0][1];
      plain.w_M = plain.iC00 * r0 + plain.iC01 * r1;
      plain.w_I = plain.iC01 * r0 + plain.iC11 * r1;
    }

    Finger& cf = fingers_[1];
    refresh_contact_inverse(cf, stop[1][0], stop[1][1]);
    const CoupledRates cr = coupled_crawler_rates(
        hand_state_, params_, tcfg_, T_m, rest[1][0], rest[1][1], cf.M00, cf.M01,
        cf.M11, stop[1][0], stop[1][1], dt);
    cf.w_M = cr.w_M;
    cf.w_I = cr.w_I;
    w_c_ = cr.w_c;
    refresh_trio_response(cr.stiffness, stop[1][0], stop[1][1]);
    diag_.T_s = cr.T_s;
    diag_.x_t = cr.x_t;
  }

  for (int bi = 0; bi < static_cast<int>(bodies_.size()); ++bi) {
    Body& b = bodies_[bi];
    if (b.inv_m <= 0.0) continue;
    b.vel.y -= dt * cfg_.gravity;
    if (bi == object_body_) {
      b.vel += dt * b.inv_m * obj_force_;
      b.omega += dt * b.inv_I * obj_torque_;
    }
  }

  build_rows();
  solve_rows();

  diag_.belt_row_impulse = 0.0;
  diag_.contact_count = static_cast<int>(rows_.size());
  contacts_.clear();
  warm_.clear();
  for (const Row& r : rows_) {
    diag_.belt_row_impulse += r.jc * r.at;
    warm_[r.key] = {r.an, r.at};
    ContactPoint cp;
    cp.p = r.p;
    cp.n = r.n;
    cp.jn = r.an;
    cp.jt = r.at;
    cp.pen = r.pen;
    cp.mu = r.mu;
    cp.a = r.a;
    cp.b = r.b;
    cp.mat_a = r.mat_a;
    cp.mat_b = r.mat_b;
    cp.belt = r.belt;
    contacts_.push_back(cp);
  }

  for (Body& b : bodies_) {
    b.pos += dt * b.vel;
    b.angle += dt * b.omega;
  }
  if (has_hand_) {
    for (Finger& f : fingers_) {
      f.th_M += dt * f.w_M;
      f.th_I += dt * f.w_I;
    }
    th_c_ += dt * w_c_;
    refresh_finger_frames();
    sync_hand_state();
    slider_cache_ = slider_state(hand_state_, params_, tcfg_);
  }

  time_ += dt;
  check_finite();
}

double World::energy() const {
  double e = 0.0;
  for (const Body& b : bodies_) {
    if (b.inv_m <= 0.0) continue;
    const double m = 1.0 / b.inv_m;
    e += 0.5 * m * len2(b.vel) + m * cfg_.gravity * b.pos.y;
    if (b.inv_I > 0.0) e += 0.5 * (1.0 / b.inv_I) * b.omega * b.omega;
  }
  if (!has_hand_) return e;
  for (const Finger& f : fingers_) {
    e += 0.5 * (f.M00 * f.w_M * f.w_M + 2.0 * f.M01 * f.w_M * f.w_I + f.M11 * f.w_I * f.w_I);
    const double y1 = f.mp.y + f.d1 * f.uP.y;
    const double y2 = f.ip.y + f.d2 * f.uD.y;
    e += cfg_.gravity * (f.m1 * y1 + f.m2 * y2);
    e += 0.5 * tcfg_.k_e * (f.th_M + tcfg_.theta_ofs) * (f.th_M + tcfg_.theta_ofs);
    const double d = f.th_I - (tcfg_.theta_ofs - f.th_M);
    if (d >= 0.0) {
      e += 0.5 * tcfg_.k_e * (d + tcfg_.theta_e_ofs) * (d + tcfg_.theta_e_ofs);
    } else {
      e += 0.5 * tcfg_.K_prime * d * d;
    }
    e += joint_limit_energy(f.th_M, cfg_) + joint_limit_energy(f.th_I, cfg_);
  }
  e += 0.5 * tcfg_.m_c * w_c_ * w_c_;
  e += slider_potential(slider().x_t, params_, tcfg_);
  return e;
}

World build_world(const DesignParams& p, TransmissionConfig tc, const WorldConfig& wc,
                  const ObjectSpec* obj) {
  tc.x_ofs = start_offset(p, tc);
  World w(wc, p, tc);
  w.add_ground();
  double palm_y = start_palm_height(p, tc, 0.001);
  if (obj != nullptr) {
    const double opening = start_opening(p, tc, wc);
    if (2.0 * obj->half_extent_x() > opening - 0.002) {
      raise(ErrorKind::Geometry,
            "object '" + obj->name + "' does not fit between the open fingertips");
    }
    // The palm plate and the proximal links (which dip half a link thickness
    // below the palm plane) must start clear of tall objects.
    palm_y = std::max(palm_y, 2.0 * obj->half_extent_y() + wc.w_pp + 0.002);
  }
  w.attach_hand(palm_y);
  if (obj != nullptr) {
    const int oi = w.add_body(make_object_body(*obj, {0.0, obj->half_extent_y()}));
    w.set_object(oi);
  }
  return w;
}

double start_palm_height(const DesignParams& p, const TransmissionConfig& tc, double clearance) {
  return clearance + p.l_D + p.l_P * std::cos(tc.theta_ofs);
}

double start_opening(const DesignParams& p, const TransmissionConfig& tc, const WorldConfig& wc) {
  return p.l_M + 2.0 * p.l_P * std::sin(tc.theta_ofs) - 2.0 * wc.h_t;
}

}  // namespace gf
