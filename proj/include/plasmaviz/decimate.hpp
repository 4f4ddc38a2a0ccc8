#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "plasmaviz/isosurface.hpp"

namespace plasmaviz {

// Symmetric 4x4 error quadric stored as its 10 unique coefficients
// (aa ab ac ad bb bc bd cc cd dd). Evaluates the weighted sum of squared
// distances to the planes that were accumulated into it.
class Quadric {
 public:
  Quadric() = default;

  // Plane a*x + b*y + c*z + d = 0 with (a,b,c) normalized by the caller.
  static Quadric from_plane(double a, double b, double c, double d, double weight = 1.0);

  double evaluate(const Vec3& p) const noexcept;
  const std::array<double, 10>& coefficients() const noexcept { return q_; }

  // Full symmetric matrix entry (row, col) in 0..3.
  double at(int row, int col) const noexcept;

  Quadric& operator+=(const Quadric& other) noexcept;
  friend Quadric operator+(Quadric a, const Quadric& b) noexcept { return a += b; }

 private:
  std::array<double, 10> q_{};
};

struct CollapseCandidate {
  std::uint32_t v1 = 0, v2 = 0;
  double cost = 0.0;
  Vec3 position{};
};

// Per-vertex sum of the (unit-normal) planes of incident faces. Zero-area
// faces contribute nothing.
std::vector<Quadric> build_quadrics(const TriangleMesh& mesh);

// Optimal contraction target for q1+q2: solves the quadric's linear system
// when its scaled determinant exceeds 1e-10, otherwise picks the cheapest of
// v1, v2 and their midpoint. Cost is clamped at zero.
CollapseCandidate collapse_cost(const Quadric& q1, const Quadric& q2, const Vec3& v1, const Vec3& v2);

struct DecimateOptions {
  double boundary_weight = 1e3;
  // Check at every applied collapse that no other valid candidate is cheaper.
  // O(edges) per collapse; meant for tests.
  bool verify_minimal = false;
};

struct DecimateStats {
  std::size_t collapses = 0;
  std::size_t stale_skipped = 0;
  std::size_t rejected_topology = 0;
  std::size_t rejected_flip = 0;
  std::size_t minimality_violations = 0;
  double total_cost = 0.0;
  std::vector<std::size_t> triangle_counts;  // after each applied collapse
};

// Greedy minimum-cost edge collapse until the triangle count is at most
// target_ratio * original or no legal collapse remains. Collapses
// that would flip a face by more than 90 degrees, break the link condition,
// or touch non-manifold edges are rejected. Boundary edges are held in place
// by perpendicular constraint planes. Ties break on (min index, max index).
TriangleMesh decimate_qem(const TriangleMesh& mesh, double target_ratio, const DecimateOptions& options = {},
                          DecimateStats* stats = nullptr);

// Area-weighted face normals, used when no field is available.
void face_weighted_normals(TriangleMesh& mesh);

}  // namespace plasmaviz
