#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "plasmaviz/fields.hpp"
#include "plasmaviz/isosurface.hpp"
#include "plasmaviz/vec.hpp"

namespace testsupport {

using namespace plasmaviz;

using plasmaviz::GridDims;
using plasmaviz::ScalarField;
using plasmaviz::TriangleMesh;
using plasmaviz::Vec3;

inline GridDims cube_dims(std::size_t n, double spacing = 1.0, Vec3 origin = {0, 0, 0}) {
  GridDims d;
  d.nx = d.ny = d.nz = n;
  d.dx = d.dy = d.dz = spacing;
  d.origin = origin;
  return d;
}

template <typename F>
ScalarField make_scalar(const GridDims& d, F&& f) {
  std::vector<float> v(d.node_count());
  for (std::size_t k = 0; k < d.nz; ++k)
    for (std::size_t j = 0; j < d.ny; ++j)
      for (std::size_t i = 0; i < d.nx; ++i) v[i + d.nx * (j + d.ny * k)] = static_cast<float>(f(i, j, k));
  return ScalarField(d, std::move(v));
}

inline ScalarField random_scalar(const GridDims& d, std::mt19937_64& rng, float lo = -1.f, float hi = 1.f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(d.node_count());
  for (float& x : v) x = u(rng);
  return ScalarField(d, std::move(v));
}

// f = R - |p - c| sampled at the node positions.
inline ScalarField sphere_field(const GridDims& d, const Vec3& c, double radius) {
  return make_scalar(d, [&](std::size_t i, std::size_t j, std::size_t k) {
    return radius - plasmaviz::norm(d.node_position(i, j, k) - c);
  });
}

// Canonical triangle: vertices rounded to 1e-6 lattice, rotated so the
// smallest comes first (winding kept).
using TriKey = std::array<std::array<long long, 3>, 3>;

inline std::array<long long, 3> quantize(const Vec3& p) {
  return {std::llround(p[0] * 1e6), std::llround(p[1] * 1e6), std::llround(p[2] * 1e6)};
}

inline std::vector<TriKey> triangle_keys(const TriangleMesh& m) {
  std::vector<TriKey> out;
  out.reserve(m.triangles.size());
  for (const auto& t : m.triangles) {
    TriKey k = {quantize(m.vertices[t[0]]), quantize(m.vertices[t[1]]), quantize(m.vertices[t[2]])};
    const auto first = std::min_element(k.begin(), k.end()) - k.begin();
    std::rotate(k.begin(), k.begin() + first, k.end());
    out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Vertex-to-vertex matching with a 1e-6 tolerance: every FE triangle has an
// MC triangle with the same corner sequence (up to rotation).
inline bool same_triangles(const TriangleMesh& a, const TriangleMesh& b, double tol = 1e-6) {
  if (a.triangles.size() != b.triangles.size()) return false;
  std::vector<bool> used(b.triangles.size(), false);
  auto close = [&](const Vec3& p, const Vec3& q) {
    return std::abs(p[0] - q[0]) <= tol && std::abs(p[1] - q[1]) <= tol && std::abs(p[2] - q[2]) <= tol;
  };
  std::multimap<long long, std::size_t> bucket;
  auto centroid_key = [&](const TriangleMesh& m, const plasmaviz::Triangle& t) {
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) * (1.0 / 3.0);
    return std::llround(c[0] * 1e3) * 1000003LL * 1000003LL + std::llround(c[1] * 1e3) * 1000003LL +
           std::llround(c[2] * 1e3);
  };
  for (std::size_t n = 0; n < b.triangles.size(); ++n) bucket.emplace(centroid_key(b, b.triangles[n]), n);
  for (const auto& ta : a.triangles) {
    bool found = false;
    const long long key = centroid_key(a, ta);
    for (long long probe : {key}) {
      auto [lo, hi] = bucket.equal_range(probe);
      for (auto it = lo; it != hi && !found; ++it) {
        if (used[it->second]) continue;
        const auto& tb = b.triangles[it->second];
        for (int r = 0; r < 3 && !found; ++r) {
          if (close(a.vertices[ta[0]], b.vertices[tb[r]]) && close(a.vertices[ta[1]], b.vertices[tb[(r + 1) % 3]]) &&
              close(a.vertices[ta[2]], b.vertices[tb[(r + 2) % 3]])) {
            used[it->second] = true;
            found = true;
          }
        }
      }
    }
    if (!found) {
      // Centroid rounding can straddle a bucket edge; fall back to a full scan.
      for (std::size_t n = 0; n < b.triangles.size() && !found; ++n) {
        if (used[n]) continue;
        const auto& tb = b.triangles[n];
        for (int r = 0; r < 3 && !found; ++r) {
          if (close(a.vertices[ta[0]], b.vertices[tb[r]]) && close(a.vertices[ta[1]], b.vertices[tb[(r + 1) % 3]]) &&
              close(a.vertices[ta[2]], b.vertices[tb[(r + 2) % 3]])) {
            used[n] = true;
            found = true;
          }
        }
      }
    }
    if (!found) return false;
  }
  return true;
}

struct Topology {
  std::size_t vertices = 0, edges = 0, faces = 0;
  std::size_t boundary_edges = 0, nonmanifold_edges = 0;
  long long euler() const { return static_cast<long long>(vertices) - static_cast<long long>(edges) +
                                   static_cast<long long>(faces); }
};

inline Topology topology(const TriangleMesh& m) {
  Topology t;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  std::vector<bool> used(m.vertices.size(), false);
  for (const auto& tri : m.triangles) {
    for (int c = 0; c < 3; ++c) {
      used[tri[c]] = true;
      const std::uint32_t a = tri[c], b = tri[(c + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  }
  t.vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
  t.edges = edges.size();
  t.faces = m.triangles.size();
  for (const auto& [e, n] : edges) {
    if (n == 1) ++t.boundary_edges;
    if (n > 2) ++t.nonmanifold_edges;
  }
  return t;
}

// Subdivided icosahedron projected onto the sphere of the given radius.
inline TriangleMesh icosphere(int subdivisions, double radius = 1.0) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v = v * (1.0 / plasmaviz::norm(v));
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      Vec3 c = (m.vertices[a] + m.vertices[b]) * 0.5;
      c = c * (1.0 / plasmaviz::norm(c));
      m.vertices.push_back(c);
      const auto id = static_cast<std::uint32_t>(m.vertices.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<plasmaviz::Triangle> next;
    for (const auto& t : m.triangles) {
      const auto a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) {
    m.normals.push_back(v);
    v = v * radius;
  }
  m.uvs.assign(m.vertices.size(), {0.0, 0.0});
  return m;
}

// (n+1) x (n+1) vertex grid in z = 0 with 2*n*n triangles.
inline TriangleMesh flat_grid(std::size_t n) {
  TriangleMesh m;
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i) m.vertices.push_back({double(i), double(j), 0.0});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::uint32_t>(i + (n + 1) * j);
      const auto b = a + 1, c = a + static_cast<std::uint32_t>(n + 1), d = c + 1;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  m.normals.assign(m.vertices.size(), {0, 0, 1});
  m.uvs.assign(m.vertices.size(), {0, 0});
  return m;
}

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  using plasmaviz::dot;
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return plasmaviz::norm(ap);
  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return plasmaviz::norm(bp);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return plasmaviz::norm(p - (a + ab * (d1 / (d1 - d3))));
  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return plasmaviz::norm(cp);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return plasmaviz::norm(p - (a + ac * (d2 / (d2 - d6))));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return plasmaviz::norm(p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)))));
  const double denom = 1.0 / (va + vb + vc);
  return plasmaviz::norm(p - (a + ab * (vb * denom) + ac * (vc * denom)));
}

// Area-weighted uniform samples plus all vertices.
inline std::vector<Vec3> sample_surface(const TriangleMesh& m, std::size_t count, std::uint64_t seed) {
  std::vector<double> cum;
  double total = 0;
  for (const auto& t : m.triangles) {
    total += 0.5 * plasmaviz::norm(plasmaviz::cross(m.vertices[t[1]] - m.vertices[t[0]],
                                                   m.vertices[t[2]] - m.vertices[t[0]]));
    cum.push_back(total);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out(m.vertices.begin(), m.vertices.end());
  for (std::size_t s = 0; s < count; ++s) {
    const auto idx = std::lower_bound(cum.begin(), cum.end(), u(rng) * total) - cum.begin();
    const auto& t = m.triangles[std::min<std::size_t>(idx, m.triangles.size() - 1)];
    double r1 = std::sqrt(u(rng)), r2 = u(rng);
    out.push_back(m.vertices[t[0]] * (1 - r1) + m.vertices[t[1]] * (r1 * (1 - r2)) + m.vertices[t[2]] * (r1 * r2));
  }
  return out;
}

inline double one_sided_distance(const std::vector<Vec3>& samples, const TriangleMesh& target) {
  double worst = 0;
  for (const Vec3& p : samples) {
    double best = 1e300;
    for (const auto& t : target.triangles)
      best = std::min(best, point_triangle_distance(p, target.vertices[t[0]], target.vertices[t[1]],
                                                    target.vertices[t[2]]));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples = 10000) {
  return std::max(one_sided_distance(sample_surface(a, samples, 1), b),
                  one_sided_distance(sample_surface(b, samples, 2), a));
}

}  // namespace testsupport
