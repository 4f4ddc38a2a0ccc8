#include "plasmaviz/isosurface.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "mc_tables.hpp"
#include "plasmaviz/error.hpp"
#include "plasmaviz/parallel.hpp"

namespace plasmaviz {

namespace {

using detail::kCornerOffset;
using detail::kEdgeCorners;
using detail::kTriTable;

// Table triangles face the below-isovalue side; reversing two corners makes
// them face increasing field values.
inline Triangle oriented(std::uint32_t a, std::uint32_t b, std::uint32_t c) { return {a, c, b}; }

// Crossing point on the edge from node a to node b (a has the lower index).
inline Vec3 edge_point(const Vec3& pa, const Vec3& pb, double va, double vb, double iso) {
  const double t = (iso - va) / (vb - va);
  return pa + t * (pb - pa);
}

inline bool above(float v, double iso) { return static_cast<double>(v) > iso; }

// Row metadata. Counts become offsets after the prefix-sum pass.
struct RowMeta {
  std::size_t x = 0, y = 0, z = 0, tris = 0;
  std::size_t xmin = 0, xmax = 0;  // first crossing x-edge, one past the last
};

class FlyingEdges {
 public:
  FlyingEdges(const ScalarField& field, double iso, unsigned workers)
      : f_(field),
        d_(field.dims()),
        iso_(iso),
        workers_(workers),
        nx_(d_.nx),
        ny_(d_.ny),
        nz_(d_.nz),
        edge_cases_((nx_ - 1) * ny_ * nz_),
        meta_(ny_ * nz_) {}

  TriangleMesh run(FlyingEdgesStats* stats) {
    parallel_for(0, ny_ * nz_, workers_, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) classify_row(r);
    });
    parallel_for(0, nz_ - 1, workers_, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k)
        for (std::size_t j = 0; j + 1 < ny_; ++j) count_voxel_row(j, k);
    });

    std::size_t points = 0, tris = 0;
    for (RowMeta& m : meta_) {
      const std::size_t nxp = m.x, nyp = m.y, nzp = m.z, nt = m.tris;
      m.x = points;
      points += nxp;
      m.y = points;
      points += nyp;
      m.z = points;
      points += nzp;
      m.tris = tris;
      tris += nt;
    }

    TriangleMesh mesh;
    mesh.vertices.resize(points);
    mesh.triangles.resize(tris);
    std::vector<std::size_t> written_points(nz_, 0), written_tris(nz_, 0), active(nz_, 0);
    parallel_for(0, nz_ - 1, workers_, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k)
        for (std::size_t j = 0; j + 1 < ny_; ++j)
          generate_voxel_row(j, k, mesh, written_points[k], written_tris[k], active[k]);
    });

    if (stats) {
      stats->counted_vertices = points;
      stats->counted_triangles = tris;
      stats->written_vertices = 0;
      stats->written_triangles = 0;
      stats->active_rows = 0;
      for (std::size_t k = 0; k < nz_; ++k) {
        stats->written_vertices += written_points[k];
        stats->written_triangles += written_tris[k];
        stats->active_rows += active[k];
      }
    }
    return mesh;
  }

 private:
  std::size_t row(std::size_t j, std::size_t k) const { return j + ny_ * k; }
  const std::uint8_t* cases(std::size_t r) const { return &edge_cases_[r * (nx_ - 1)]; }

  // Above/below class of node i in row r, read back from the edge cases.
  int node_class(std::size_t r, std::size_t i) const {
    const std::uint8_t* ec = cases(r);
    return i + 1 < nx_ ? (ec[i] & 1) : ((ec[nx_ - 2] >> 1) & 1);
  }

  void classify_row(std::size_t r) {
    const float* v = &f_.values()[r * nx_];
    std::uint8_t* ec = &edge_cases_[r * (nx_ - 1)];
    RowMeta& m = meta_[r];
    m.xmin = nx_;
    m.xmax = 0;
    int left = above(v[0], iso_) ? 1 : 0;
    for (std::size_t i = 0; i + 1 < nx_; ++i) {
      const int right = above(v[i + 1], iso_) ? 1 : 0;
      ec[i] = static_cast<std::uint8_t>(left | (right << 1));
      if (left != right) {
        ++m.x;
        m.xmin = std::min(m.xmin, i);
        m.xmax = i + 1;
      }
      left = right;
    }
  }

  // Voxel-row x-range that can hold crossings, or false when the whole row is empty.
  bool trim(std::size_t j, std::size_t k, std::size_t& xl, std::size_t& xr) const {
    const std::size_t rows[4] = {row(j, k), row(j + 1, k), row(j, k + 1), row(j + 1, k + 1)};
    xl = nx_;
    xr = 0;
    for (std::size_t r : rows) {
      xl = std::min(xl, meta_[r].xmin);
      xr = std::max(xr, meta_[r].xmax);
    }
    // Outside the x-crossings every row is constant; rows that disagree there
    // have y/z crossings all the way to the grid boundary.
    const int c0 = node_class(rows[0], 0);
    const int cn = node_class(rows[0], nx_ - 1);
    for (std::size_t r : rows) {
      if (node_class(r, 0) != c0) xl = 0;
      if (node_class(r, nx_ - 1) != cn) xr = nx_ - 1;
    }
    return xl < xr;
  }

  void count_voxel_row(std::size_t j, std::size_t k) {
    std::size_t xl, xr;
    if (!trim(j, k, xl, xr)) return;
    const std::size_t r00 = row(j, k), r10 = row(j + 1, k), r01 = row(j, k + 1), r11 = row(j + 1, k + 1);
    const std::uint8_t *e0 = cases(r00), *e1 = cases(r10), *e2 = cases(r01), *e3 = cases(r11);
    std::size_t tris = 0;
    for (std::size_t i = xl; i < xr; ++i) tris += detail::triangle_count(cube_case(e0[i], e1[i], e2[i], e3[i]));
    meta_[r00].tris = tris;

    const bool y_top = (k + 2 == nz_);
    const bool z_top = (j + 2 == ny_);
    std::size_t y0 = 0, z0 = 0, y1 = 0, z1 = 0;
    for (std::size_t i = xl; i <= xr; ++i) {
      const int c00 = node_class(r00, i), c10 = node_class(r10, i), c01 = node_class(r01, i);
      y0 += (c00 != c10);
      z0 += (c00 != c01);
      if (y_top) y1 += (c01 != node_class(r11, i));
      if (z_top) z1 += (c10 != node_class(r11, i));
    }
    meta_[r00].y = y0;
    meta_[r00].z = z0;
    if (y_top) meta_[r01].y = y1;
    if (z_top) meta_[r10].z = z1;
  }

  static int cube_case(std::uint8_t e0, std::uint8_t e1, std::uint8_t e2, std::uint8_t e3) {
    // Bit c set when corner c is below; row (j,k) holds corners 0,1, row
    // (j+1,k) corners 3,2, row (j,k+1) corners 4,5, row (j+1,k+1) corners 7,6.
    const int above_bits = (e0 & 1) | ((e0 >> 1) & 1) << 1 | ((e1 >> 1) & 1) << 2 | (e1 & 1) << 3 | (e2 & 1) << 4 |
                           ((e2 >> 1) & 1) << 5 | ((e3 >> 1) & 1) << 6 | (e3 & 1) << 7;
    return (~above_bits) & 0xff;
  }

  Vec3 x_point(std::size_t i, std::size_t j, std::size_t k) const {
    return edge_point(d_.node_position(i, j, k), d_.node_position(i + 1, j, k), f_.at(i, j, k), f_.at(i + 1, j, k),
                      iso_);
  }
  Vec3 y_point(std::size_t i, std::size_t j, std::size_t k) const {
    return edge_point(d_.node_position(i, j, k), d_.node_position(i, j + 1, k), f_.at(i, j, k), f_.at(i, j + 1, k),
                      iso_);
  }
  Vec3 z_point(std::size_t i, std::size_t j, std::size_t k) const {
    return edge_point(d_.node_position(i, j, k), d_.node_position(i, j, k + 1), f_.at(i, j, k), f_.at(i, j, k + 1),
                      iso_);
  }

  void generate_voxel_row(std::size_t j, std::size_t k, TriangleMesh& mesh, std::size_t& points_written,
                          std::size_t& tris_written, std::size_t& active) const {
    std::size_t xl, xr;
    if (!trim(j, k, xl, xr)) return;
    ++active;
    const std::size_t r00 = row(j, k), r10 = row(j + 1, k), r01 = row(j, k + 1), r11 = row(j + 1, k + 1);
    const std::uint8_t *ec0 = cases(r00), *ec1 = cases(r10), *ec2 = cases(r01), *ec3 = cases(r11);
    std::size_t x0 = meta_[r00].x, x1 = meta_[r10].x, x2 = meta_[r01].x, x3 = meta_[r11].x;
    std::size_t y0 = meta_[r00].y, y1 = meta_[r01].y;
    std::size_t z0 = meta_[r00].z, z1 = meta_[r10].z;
    std::size_t t = meta_[r00].tris;
    const bool y_top = (k + 2 == nz_);
    const bool z_top = (j + 2 == ny_);

    auto crosses = [](std::uint8_t ec) -> std::size_t { return ec == 1 || ec == 2; };

    std::uint32_t ids[12];
    for (std::size_t i = xl; i < xr; ++i) {
      const std::uint8_t a = ec0[i], b = ec1[i], c = ec2[i], e = ec3[i];
      const std::size_t cx0 = crosses(a), cx1 = crosses(b), cx2 = crosses(c), cx3 = crosses(e);
      const std::size_t cy0 = (a & 1) != (b & 1), cy0n = (a & 2) != (b & 2);
      const std::size_t cy1 = (c & 1) != (e & 1), cy1n = (c & 2) != (e & 2);
      const std::size_t cz0 = (a & 1) != (c & 1), cz0n = (a & 2) != (c & 2);
      const std::size_t cz1 = (b & 1) != (e & 1), cz1n = (b & 2) != (e & 2);
      const bool last = (i + 1 == xr);

      ids[0] = static_cast<std::uint32_t>(x0);
      ids[2] = static_cast<std::uint32_t>(x1);
      ids[4] = static_cast<std::uint32_t>(x2);
      ids[6] = static_cast<std::uint32_t>(x3);
      ids[3] = static_cast<std::uint32_t>(y0);
      ids[1] = static_cast<std::uint32_t>(y0 + cy0);
      ids[7] = static_cast<std::uint32_t>(y1);
      ids[5] = static_cast<std::uint32_t>(y1 + cy1);
      ids[8] = static_cast<std::uint32_t>(z0);
      ids[9] = static_cast<std::uint32_t>(z0 + cz0);
      ids[11] = static_cast<std::uint32_t>(z1);
      ids[10] = static_cast<std::uint32_t>(z1 + cz1);

      // Each grid edge is written by exactly one voxel.
      auto put = [&](std::size_t id, const Vec3& p) {
        mesh.vertices[id] = p;
        ++points_written;
      };
      if (cx0) put(ids[0], x_point(i, j, k));
      if (cy0) put(ids[3], y_point(i, j, k));
      if (cz0) put(ids[8], z_point(i, j, k));
      if (last) {
        if (cy0n) put(ids[1], y_point(i + 1, j, k));
        if (cz0n) put(ids[9], z_point(i + 1, j, k));
      }
      if (z_top) {
        if (cx1) put(ids[2], x_point(i, j + 1, k));
        if (cz1) put(ids[11], z_point(i, j + 1, k));
        if (last && cz1n) put(ids[10], z_point(i + 1, j + 1, k));
      }
      if (y_top) {
        if (cx2) put(ids[4], x_point(i, j, k + 1));
        if (cy1) put(ids[7], y_point(i, j, k + 1));
        if (last && cy1n) put(ids[5], y_point(i + 1, j, k + 1));
      }
      if (y_top && z_top && cx3) put(ids[6], x_point(i, j + 1, k + 1));

      const auto& tri = kTriTable[cube_case(a, b, c, e)];
      for (int n = 0; n < 15 && tri[n] >= 0; n += 3) {
        mesh.triangles[t++] = oriented(ids[tri[n]], ids[tri[n + 1]], ids[tri[n + 2]]);
        ++tris_written;
      }

      x0 += cx0;
      x1 += cx1;
      x2 += cx2;
      x3 += cx3;
      y0 += cy0;
      y1 += cy1;
      z0 += cz0;
      z1 += cz1;
    }
  }

  const ScalarField& f_;
  const GridDims& d_;
  double iso_;
  unsigned workers_;
  std::size_t nx_, ny_, nz_;
  std::vector<std::uint8_t> edge_cases_;
  std::vector<RowMeta> meta_;
};

void finish(TriangleMesh& mesh, const ScalarField& field, const IsoOptions& options) {
  if (options.normals) {
    compute_normals(mesh, field);
  } else {
    mesh.normals.assign(mesh.vertices.size(), Vec3{0.0, 0.0, 1.0});
  }
  assign_uvs(mesh, field.dims(), options.uv_mode);
}

}  // namespace

void TriangleMesh::validate() const {
  const std::size_t n = vertices.size();
  if (normals.size() != n || uvs.size() != n)
    throw Error(ErrorCode::validation, "mesh attribute arrays differ in length from the vertex array");
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const Triangle& tri = triangles[t];
    for (std::uint32_t v : tri) {
      if (v >= n)
        throw Error(ErrorCode::validation, "triangle " + std::to_string(t) + " references missing vertex " +
                                               std::to_string(v));
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw Error(ErrorCode::validation, "triangle " + std::to_string(t) + " repeats a vertex");
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (std::abs(norm(normals[v]) - 1.0) > 1e-6)
      throw Error(ErrorCode::validation, "normal " + std::to_string(v) + " is not unit length");
  }
}

TriangleMesh flying_edges(const ScalarField& field, double isovalue, const IsoOptions& options,
                          FlyingEdgesStats* stats) {
  if (!std::isfinite(isovalue)) throw Error(ErrorCode::invalid_argument, "isovalue must be finite");
  TriangleMesh mesh = FlyingEdges(field, isovalue, options.workers).run(stats);
  finish(mesh, field, options);
  return mesh;
}

TriangleMesh marching_cubes_reference(const ScalarField& field, double isovalue, const IsoOptions& options) {
  if (!std::isfinite(isovalue)) throw Error(ErrorCode::invalid_argument, "isovalue must be finite");
  const GridDims& d = field.dims();
  TriangleMesh mesh;
  // Key: 3 * linear index of the edge's lower node + axis.
  std::unordered_map<std::size_t, std::uint32_t> edge_vertex;

  for (std::size_t k = 0; k + 1 < d.nz; ++k) {
    for (std::size_t j = 0; j + 1 < d.ny; ++j) {
      for (std::size_t i = 0; i + 1 < d.nx; ++i) {
        double value[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = kCornerOffset[c];
          value[c] = field.at(i + o[0], j + o[1], k + o[2]);
          if (!(value[c] > isovalue)) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;

        std::uint32_t ids[12];
        for (int e = 0; e < 12; ++e) {
          const int ca = kEdgeCorners[e][0], cb = kEdgeCorners[e][1];
          if (((cube >> ca) & 1) == ((cube >> cb) & 1)) continue;
          const auto& oa = kCornerOffset[ca];
          const auto& ob = kCornerOffset[cb];
          const std::size_t ia = i + oa[0], ja = j + oa[1], ka = k + oa[2];
          const int axis = ob[0] != oa[0] ? 0 : (ob[1] != oa[1] ? 1 : 2);
          const std::size_t key = 3 * linear_index(d, ia, ja, ka) + axis;
          auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
          if (inserted) {
            mesh.vertices.push_back(edge_point(d.node_position(ia, ja, ka),
                                               d.node_position(i + ob[0], j + ob[1], k + ob[2]), value[ca],
                                               value[cb], isovalue));
          }
          ids[e] = it->second;
        }
        const auto& tri = kTriTable[cube];
        for (int n = 0; n < 15 && tri[n] >= 0; n += 3)
          mesh.triangles.push_back(oriented(ids[tri[n]], ids[tri[n + 1]], ids[tri[n + 2]]));
      }
    }
  }
  finish(mesh, field, options);
  return mesh;
}

Vec3 field_gradient(const ScalarField& field, const Vec3& p) {
  const GridDims& d = field.dims();
  const std::size_t n[3] = {d.nx, d.ny, d.nz};
  const double h[3] = {d.dx, d.dy, d.dz};
  std::size_t cell[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double u = std::clamp((p[a] - d.origin[a]) / h[a], 0.0, static_cast<double>(n[a] - 1));
    cell[a] = std::min(static_cast<std::size_t>(u), n[a] - 2);
    frac[a] = u - static_cast<double>(cell[a]);
  }
  auto node_gradient = [&](std::size_t i, std::size_t j, std::size_t k) {
    const std::size_t idx[3] = {i, j, k};
    Vec3 g{};
    for (int a = 0; a < 3; ++a) {
      std::size_t lo[3] = {i, j, k}, hi[3] = {i, j, k};
      if (idx[a] > 0) --lo[a];
      if (idx[a] + 1 < n[a]) ++hi[a];
      const double span = static_cast<double>(hi[a] - lo[a]) * h[a];
      g[a] = (static_cast<double>(field.at(hi[0], hi[1], hi[2])) - field.at(lo[0], lo[1], lo[2])) / span;
    }
    return g;
  };
  Vec3 g{};
  for (int c = 0; c < 8; ++c) {
    const auto& o = kCornerOffset[c];
    const double w = (o[0] ? frac[0] : 1.0 - frac[0]) * (o[1] ? frac[1] : 1.0 - frac[1]) *
                     (o[2] ? frac[2] : 1.0 - frac[2]);
    if (w == 0.0) continue;
    g += w * node_gradient(cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]);
  }
  return g;
}

void compute_normals(TriangleMesh& mesh, const ScalarField& field) {
  const std::size_t n = mesh.vertices.size();
  mesh.normals.assign(n, Vec3{});
  std::vector<char> needs_fallback(n, 0);
  bool any_fallback = false;
  for (std::size_t v = 0; v < n; ++v) {
    const Vec3 g = field_gradient(field, mesh.vertices[v]);
    const double len = norm(g);
    if (len > 0.0 && std::isfinite(len)) {
      mesh.normals[v] = (1.0 / len) * g;
    } else {
      needs_fallback[v] = 1;
      any_fallback = true;
    }
  }
  if (!any_fallback) return;

  std::vector<Vec3> face_sum(n, Vec3{});
  for (const Triangle& t : mesh.triangles) {
    const Vec3 area2 = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (std::uint32_t v : t) face_sum[v] += area2;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!needs_fallback[v]) continue;
    const double len = norm(face_sum[v]);
    mesh.normals[v] = len > 0.0 ? (1.0 / len) * face_sum[v] : Vec3{0.0, 0.0, 1.0};
  }
}

void assign_uvs(TriangleMesh& mesh, const GridDims& dims, UvMode mode) {
  if (mode == UvMode::zero) {
    mesh.uvs.assign(mesh.vertices.size(), UV{0.0, 0.0});
    return;
  }
  const Vec3 hi = dims.upper_corner();
  const double wx = hi[0] - dims.origin[0], wy = hi[1] - dims.origin[1];
  mesh.uvs.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    mesh.uvs[v] = {(mesh.vertices[v][0] - dims.origin[0]) / wx, (mesh.vertices[v][1] - dims.origin[1]) / wy};
  }
}

}  // namespace plasmaviz
