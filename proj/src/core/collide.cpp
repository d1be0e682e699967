#include "core/collide.hpp"

#include <algorithm>
#include <cmath>

namespace gf {
namespace {

Vec2 edge_normal(const Poly& p, int i) {
  Vec2 e = p.v[(i + 1) % p.n] - p.v[i];
  return normalized(Vec2{e.y, -e.x});
}

struct FaceSep {
  double sep = -1e30;
  int face = -1;
};

// Face of `a` from which `b` is least penetrated (largest separation).
FaceSep max_separation(const Poly& a, const Poly& b) {
  FaceSep out;
  for (int i = 0; i < a.n; ++i) {
    const Vec2 n = edge_normal(a, i);
    double lowest = 1e30;
    for (int j = 0; j < b.n; ++j) lowest = std::min(lowest, dot(n, b.v[j] - a.v[i]));
    if (lowest > out.sep) {
      out.sep = lowest;
      out.face = i;
    }
  }
  return out;
}

struct ClipV {
  Vec2 p;
  uint32_t id;
};

// Keep the part of the segment with dot(n, p) <= offset.
int clip(ClipV out[2], const ClipV in[2], Vec2 n, double offset, uint32_t new_id) {
  int m = 0;
  const double d0 = dot(n, in[0].p) - offset;
  const double d1 = dot(n, in[1].p) - offset;
  if (d0 <= 0.0) out[m++] = in[0];
  if (d1 <= 0.0) out[m++] = in[1];
  if (d0 * d1 < 0.0) {
    const double t = d0 / (d0 - d1);
    out[m].p = in[0].p + t * (in[1].p - in[0].p);
    out[m].id = new_id;
    ++m;
  }
  return m;
}

}  // namespace

void ensure_ccw(Poly& p) {
  double twice_area = 0.0;
  for (int i = 0; i < p.n; ++i) twice_area += cross(p.v[i], p.v[(i + 1) % p.n]);
  if (twice_area < 0.0) std::reverse(p.v, p.v + p.n);
}

Poly make_box(Vec2 lo, Vec2 hi) {
  Poly p;
  p.n = 4;
  p.v[0] = {lo.x, lo.y};
  p.v[1] = {hi.x, lo.y};
  p.v[2] = {hi.x, hi.y};
  p.v[3] = {lo.x, hi.y};
  return p;
}

Poly transform(const Poly& p, Vec2 pos, double angle) {
  Poly out;
  out.n = p.n;
  for (int i = 0; i < p.n; ++i) out.v[i] = pos + rotate(p.v[i], angle);
  return out;
}

Manifold collide_polys(const Poly& a, const Poly& b) {
  Manifold m;
  const FaceSep sa = max_separation(a, b);
  if (sa.sep > 0.0) return m;
  const FaceSep sb = max_separation(b, a);
  if (sb.sep > 0.0) return m;

  // Reference face owns the contact normal; prefer `a` on near-ties so the
  // choice is stable frame to frame.
  const bool ref_is_b = sb.sep > sa.sep + 1e-10;
  const Poly& ref = ref_is_b ? b : a;
  const Poly& inc = ref_is_b ? a : b;
  const int rf = ref_is_b ? sb.face : sa.face;
  const Vec2 rn = edge_normal(ref, rf);

  int incf = 0;
  double most_opposed = 1e30;
  for (int i = 0; i < inc.n; ++i) {
    const double d = dot(edge_normal(inc, i), rn);
    if (d < most_opposed) {
      most_opposed = d;
      incf = i;
    }
  }

  ClipV pts[2] = {{inc.v[incf], static_cast<uint32_t>(incf)},
                  {inc.v[(incf + 1) % inc.n], static_cast<uint32_t>((incf + 1) % inc.n)}};
  const Vec2 rv0 = ref.v[rf];
  const Vec2 rv1 = ref.v[(rf + 1) % ref.n];
  const Vec2 tang = normalized(rv1 - rv0);
  ClipV tmp[2];
  if (clip(tmp, pts, -tang, dot(-tang, rv0), 0x40u | static_cast<uint32_t>(rf)) < 2) return m;
  if (clip(pts, tmp, tang, dot(tang, rv1), 0x50u | static_cast<uint32_t>(rf)) < 2) return m;

  m.normal = ref_is_b ? rn : -rn;
  for (int i = 0; i < 2; ++i) {
    const double sep = dot(rn, pts[i].p - rv0);
    if (sep <= 0.0) {
      ManifoldPoint& mp = m.pt[m.n++];
      mp.p = pts[i].p;
      mp.pen = -sep;
      mp.feature = (ref_is_b ? 0x8000u : 0u) | (static_cast<uint32_t>(rf) << 8) | pts[i].id;
    }
  }
  return m;
}

Manifold collide_circle_poly(Vec2 ca, double ra, const Poly& b) {
  Manifold m;
  double best = -1e30;
  int face = 0;
  for (int i = 0; i < b.n; ++i) {
    const double s = dot(edge_normal(b, i), ca - b.v[i]);
    if (s > best) {
      best = s;
      face = i;
    }
  }
  if (best > ra) return m;

  const Vec2 v1 = b.v[face];
  const Vec2 v2 = b.v[(face + 1) % b.n];

  if (best < 0.0) {  // center inside: push out through the shallowest face
    m.normal = edge_normal(b, face);
    m.n = 1;
    m.pt[0] = {ca - ra * m.normal, ra - best, 0x100u | static_cast<uint32_t>(face)};
    return m;
  }

  const Vec2 e = v2 - v1;
  const double u = dot(ca - v1, e) / len2(e);
  if (u >= 0.0 && u <= 1.0) {  // face region
    m.normal = edge_normal(b, face);
    m.n = 1;
    m.pt[0] = {ca - ra * m.normal, ra - best, 0x100u | static_cast<uint32_t>(face)};
    return m;
  }
  const int vi = u < 0.0 ? face : (face + 1) % b.n;
  const Vec2 d = ca - b.v[vi];
  const double dist = len(d);
  if (dist > ra || dist <= 0.0) return m;
  m.normal = (1.0 / dist) * d;
  m.n = 1;
  m.pt[0] = {ca - ra * m.normal, ra - dist, 0x200u | static_cast<uint32_t>(vi)};
  return m;
}

Manifold collide_circles(Vec2 ca, double ra, Vec2 cb, double rb) {
  Manifold m;
  const Vec2 d = ca - cb;
  const double dist = len(d);
  if (dist > ra + rb) return m;
  m.normal = dist > 1e-12 ? (1.0 / dist) * d : Vec2{0.0, 1.0};
  m.n = 1;
  m.pt[0] = {cb + rb * m.normal, ra + rb - dist, 0x300u};
  return m;
}

}  // namespace gf
