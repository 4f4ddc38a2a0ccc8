#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "plasmaviz/fields.hpp"

namespace plasmaviz {

using UV = std::array<double, 2>;
using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<UV> uvs;
  std::vector<Triangle> triangles;

  std::size_t vertex_count() const noexcept { return vertices.size(); }
  std::size_t triangle_count() const noexcept { return triangles.size(); }
  bool empty() const noexcept { return triangles.empty(); }

  // Checks array lengths, index bounds, distinct corners and unit normals.
  // Throws Error(validation) naming the first violation.
  void validate() const;
};

enum class UvMode {
  zero,       // (0,0) everywhere
  planar_xy,  // (x, y) normalized to the grid's xy extent
};

struct IsoOptions {
  unsigned workers = 1;  // 0 = hardware concurrency
  UvMode uv_mode = UvMode::zero;
  bool normals = true;  // false leaves +z placeholders
};

// Sizes computed by the counting passes next to what the generation pass wrote.
struct FlyingEdgesStats {
  std::size_t counted_vertices = 0;
  std::size_t counted_triangles = 0;
  std::size_t written_vertices = 0;
  std::size_t written_triangles = 0;
  std::size_t active_rows = 0;  // voxel rows that survived trimming
};

// Flying Edges isocontouring:
//   1. classify x-edges of every grid row and record trim bounds
//   2. count y/z-edge crossings and triangles per voxel row within its trim
//   3. prefix-sum the per-row counts and allocate the output exactly
//   4. write points and triangles into their precomputed slots
// Node values equal to the isovalue count as below it. Triangles wind
// counter-clockwise seen from the side of increasing field value.
TriangleMesh flying_edges(const ScalarField& field, double isovalue, const IsoOptions& options = {},
                          FlyingEdgesStats* stats = nullptr);

// Cube-by-cube marching cubes with the same table, vertex placement and
// winding as flying_edges. Shared edge vertices are merged.
TriangleMesh marching_cubes_reference(const ScalarField& field, double isovalue, const IsoOptions& options = {});

// Per-vertex normals from the normalized central-difference gradient,
// oriented toward increasing field value. Zero gradients fall back to the
// area-weighted face normal, then to +z.
void compute_normals(TriangleMesh& mesh, const ScalarField& field);

// Central-difference gradient interpolated trilinearly at p (clamped to the grid).
Vec3 field_gradient(const ScalarField& field, const Vec3& p);

void assign_uvs(TriangleMesh& mesh, const GridDims& dims, UvMode mode);

}  // namespace plasmaviz
