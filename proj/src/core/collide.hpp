#pragma once
#include <cstdint>

#include "core/vec2.hpp"

namespace gf {

struct Poly {
  int n = 0;
  Vec2 v[8];
};

// Winding must be counter-clockwise for the face normals to point outward.
void ensure_ccw(Poly& p);
Poly make_box(Vec2 lo, Vec2 hi);
Poly transform(const Poly& p, Vec2 pos, double angle);

struct ManifoldPoint {
  Vec2 p;
  double pen = 0.0;      // overlap depth, >= 0
  uint32_t feature = 0;  // stable id for impulse warm starting
};

// `normal` points from shape B toward shape A: a positive impulse along it
// pushes A away from B.
struct Manifold {
  Vec2 normal;
  int n = 0;
  ManifoldPoint pt[2];
};

Manifold collide_polys(const Poly& a, const Poly& b);
Manifold collide_circle_poly(Vec2 ca, double ra, const Poly& b);  // circle is A
Manifold collide_circles(Vec2 ca, double ra, Vec2 cb, double rb);

}  // namespace gf
