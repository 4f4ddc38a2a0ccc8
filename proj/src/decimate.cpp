#include "plasmaviz/decimate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>

#include "plasmaviz/error.hpp"

namespace plasmaviz {

namespace {

constexpr int kIndex[4][4] = {{0, 1, 2, 3}, {1, 4, 5, 6}, {2, 5, 7, 8}, {3, 6, 8, 9}};

// Unit plane (n, d) through a triangle, or false when it has no area.
bool face_plane(const Vec3& a, const Vec3& b, const Vec3& c, Vec3& n, double& d) {
  const Vec3 raw = cross(b - a, c - a);
  const double len = norm(raw);
  if (!(len > 0.0)) return false;
  n = (1.0 / len) * raw;
  d = -dot(n, a);
  return true;
}

}  // namespace

Quadric Quadric::from_plane(double a, double b, double c, double d, double weight) {
  Quadric q;
  const double p[4] = {a, b, c, d};
  for (int r = 0; r < 4; ++r)
    for (int col = r; col < 4; ++col) q.q_[kIndex[r][col]] = weight * p[r] * p[col];
  return q;
}

double Quadric::at(int row, int col) const noexcept { return q_[kIndex[row][col]]; }

double Quadric::evaluate(const Vec3& p) const noexcept {
  const double v[4] = {p[0], p[1], p[2], 1.0};
  double sum = 0.0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) sum += at(r, c) * v[r] * v[c];
  return sum;
}

Quadric& Quadric::operator+=(const Quadric& other) noexcept {
  for (std::size_t n = 0; n < q_.size(); ++n) q_[n] += other.q_[n];
  return *this;
}

std::vector<Quadric> build_quadrics(const TriangleMesh& mesh) {
  std::vector<Quadric> quadrics(mesh.vertices.size());
  for (const Triangle& t : mesh.triangles) {
    Vec3 n;
    double d;
    if (!face_plane(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], n, d)) continue;
    const Quadric q = Quadric::from_plane(n[0], n[1], n[2], d);
    for (std::uint32_t v : t) quadrics[v] += q;
  }
  return quadrics;
}

CollapseCandidate collapse_cost(const Quadric& q1, const Quadric& q2, const Vec3& v1, const Vec3& v2) {
  const Quadric q = q1 + q2;
  CollapseCandidate out;

  double a[3][3], b[3];
  double scale = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      a[r][c] = q.at(r, c);
      scale = std::max(scale, std::abs(a[r][c]));
    }
    b[r] = -q.at(r, 3);
  }
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double det = det3(a);
  if (scale > 0.0 && std::abs(det / (scale * scale * scale)) > 1e-10) {
    // Cramer's rule on A x = -b.
    for (int axis = 0; axis < 3; ++axis) {
      double m[3][3];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r][c] = (c == axis) ? b[r] : a[r][c];
      out.position[axis] = det3(m) / det;
    }
    out.cost = std::max(0.0, q.evaluate(out.position));
    return out;
  }

  const Vec3 options[3] = {v1, v2, 0.5 * (v1 + v2)};
  out.position = options[0];
  out.cost = q.evaluate(options[0]);
  for (int n = 1; n < 3; ++n) {
    const double c = q.evaluate(options[n]);
    if (c < out.cost) {
      out.cost = c;
      out.position = options[n];
    }
  }
  out.cost = std::max(0.0, out.cost);
  return out;
}

void face_weighted_normals(TriangleMesh& mesh) {
  std::vector<Vec3> sum(mesh.vertices.size(), Vec3{});
  for (const Triangle& t : mesh.triangles) {
    const Vec3 area2 = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (std::uint32_t v : t) sum[v] += area2;
  }
  mesh.normals.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < sum.size(); ++v) {
    const double len = norm(sum[v]);
    mesh.normals[v] = len > 0.0 ? (1.0 / len) * sum[v] : Vec3{0.0, 0.0, 1.0};
  }
}

namespace {

struct HeapEntry {
  double cost;
  std::uint32_t a, b;  // a < b
  std::uint32_t ver_a, ver_b;
  Vec3 position;
};

// std::priority_queue pops the "largest"; order so that the cheapest and
// then lexicographically smallest edge comes out first.
struct HeapOrder {
  bool operator()(const HeapEntry& x, const HeapEntry& y) const {
    if (x.cost != y.cost) return x.cost > y.cost;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

class Decimator {
 public:
  Decimator(const TriangleMesh& mesh, const DecimateOptions& options, DecimateStats& stats)
      : options_(options),
        stats_(stats),
        pos_(mesh.vertices),
        faces_(mesh.triangles),
        face_alive_(mesh.triangles.size(), 1),
        vertex_alive_(mesh.vertices.size(), 1),
        version_(mesh.vertices.size(), 0),
        vfaces_(mesh.vertices.size()),
        alive_faces_(mesh.triangles.size()) {
    for (std::uint32_t f = 0; f < faces_.size(); ++f)
      for (std::uint32_t v : faces_[f]) vfaces_[v].push_back(f);
    quadrics_ = build_quadrics(mesh);
    add_boundary_constraints();
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const Triangle& t : faces_) {
      for (int e = 0; e < 3; ++e) {
        const std::uint32_t a = t[e], b = t[(e + 1) % 3];
        edges.emplace(std::min(a, b), std::max(a, b));
      }
    }
    for (const auto& [a, b] : edges) push(a, b);
  }

  void run(std::size_t target) {
    while (alive_faces_ > target && !heap_.empty()) {
      const HeapEntry top = heap_.top();
      heap_.pop();
      if (!vertex_alive_[top.a] || !vertex_alive_[top.b] || version_[top.a] != top.ver_a ||
          version_[top.b] != top.ver_b) {
        ++stats_.stale_skipped;
        continue;
      }
      if (!topology_ok(top.a, top.b)) {
        ++stats_.rejected_topology;
        reject(top);
        continue;
      }
      if (!orientation_ok(top.a, top.b, top.position)) {
        ++stats_.rejected_flip;
        reject(top);
        continue;
      }
      if (options_.verify_minimal && !is_minimal(top)) ++stats_.minimality_violations;
      collapse(top);
    }
  }

  TriangleMesh result(const TriangleMesh& input) const {
    TriangleMesh out;
    std::vector<std::uint32_t> remap(pos_.size(), 0);
    for (std::uint32_t v = 0; v < pos_.size(); ++v) {
      if (!vertex_alive_[v] || live_faces(v).empty()) continue;
      remap[v] = static_cast<std::uint32_t>(out.vertices.size());
      out.vertices.push_back(pos_[v]);
      out.uvs.push_back(input.uvs.size() == pos_.size() ? input.uvs[v] : UV{0.0, 0.0});
    }
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Triangle& t = faces_[f];
      out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }
    face_weighted_normals(out);
    return out;
  }

 private:
  std::vector<std::uint32_t> live_faces(std::uint32_t v) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t f : vfaces_[v])
      if (face_alive_[f]) out.push_back(f);
    return out;
  }

  static bool has(const Triangle& t, std::uint32_t v) { return t[0] == v || t[1] == v || t[2] == v; }

  static std::uint32_t third(const Triangle& t, std::uint32_t a, std::uint32_t b) {
    for (std::uint32_t v : t)
      if (v != a && v != b) return v;
    return t[0];
  }

  void add_boundary_constraints() {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> edge_faces;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      const Triangle& t = faces_[f];
      for (int e = 0; e < 3; ++e) {
        const std::uint32_t a = t[e], b = t[(e + 1) % 3];
        edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
      }
    }
    for (const auto& [edge, fs] : edge_faces) {
      if (fs.size() != 1) continue;
      const Triangle& t = faces_[fs.front()];
      Vec3 n;
      double d;
      if (!face_plane(pos_[t[0]], pos_[t[1]], pos_[t[2]], n, d)) continue;
      const Vec3& p = pos_[edge.first];
      const Vec3 m_raw = cross(pos_[edge.second] - p, n);
      const double len = norm(m_raw);
      if (!(len > 0.0)) continue;
      const Vec3 m = (1.0 / len) * m_raw;
      const Quadric q = Quadric::from_plane(m[0], m[1], m[2], -dot(m, p), options_.boundary_weight);
      quadrics_[edge.first] += q;
      quadrics_[edge.second] += q;
    }
  }

  CollapseCandidate candidate(std::uint32_t a, std::uint32_t b) const {
    CollapseCandidate c = collapse_cost(quadrics_[a], quadrics_[b], pos_[a], pos_[b]);
    c.v1 = a;
    c.v2 = b;
    return c;
  }

  void push(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    const CollapseCandidate c = candidate(a, b);
    heap_.push({c.cost, a, b, version_[a], version_[b], c.position});
  }

  void reject(const HeapEntry& e) { rejected_.insert({e.a, e.b, e.ver_a, e.ver_b}); }

  // Edge must be manifold, satisfy the link condition, and not pinch two
  // boundary loops together.
  bool topology_ok(std::uint32_t a, std::uint32_t b) const {
    const auto fa = live_faces(a);
    const auto fb = live_faces(b);
    std::set<std::uint32_t> shared_opposite;
    std::size_t shared = 0;
    for (std::uint32_t f : fa) {
      if (has(faces_[f], b)) {
        ++shared;
        shared_opposite.insert(third(faces_[f], a, b));
      }
    }
    if (shared == 0 || shared > 2) return false;
    if (fa.size() == shared && fb.size() == shared && shared == 2) return false;  // isolated pair of faces

    std::set<std::uint32_t> na, nb;
    for (std::uint32_t f : fa)
      for (std::uint32_t v : faces_[f])
        if (v != a) na.insert(v);
    for (std::uint32_t f : fb)
      for (std::uint32_t v : faces_[f])
        if (v != b) nb.insert(v);
    std::size_t common = 0;
    for (std::uint32_t v : na)
      if (v != b && nb.count(v)) {
        if (!shared_opposite.count(v)) return false;
        ++common;
      }
    if (common != shared_opposite.size()) return false;

    if (shared == 2 && on_boundary(a) && on_boundary(b)) return false;

    // Would the collapse duplicate an existing face?
    std::set<std::array<std::uint32_t, 3>> seen;
    for (std::uint32_t f : fa) {
      if (has(faces_[f], b)) continue;
      std::array<std::uint32_t, 3> key = faces_[f];
      std::sort(key.begin(), key.end());
      seen.insert(key);
    }
    for (std::uint32_t f : fb) {
      if (has(faces_[f], a)) continue;
      std::array<std::uint32_t, 3> key = faces_[f];
      for (auto& v : key)
        if (v == b) v = a;
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) return false;
    }
    return true;
  }

  bool on_boundary(std::uint32_t v) const {
    std::map<std::uint32_t, int> edge_use;
    for (std::uint32_t f : live_faces(v))
      for (std::uint32_t w : faces_[f])
        if (w != v) ++edge_use[w];
    for (const auto& [w, n] : edge_use)
      if (n == 1) return true;
    return false;
  }

  // No surviving face may turn by more than 90 degrees or lose its area.
  bool orientation_ok(std::uint32_t a, std::uint32_t b, const Vec3& target) const {
    for (std::uint32_t v : {a, b}) {
      const std::uint32_t other = (v == a) ? b : a;
      for (std::uint32_t f : live_faces(v)) {
        const Triangle& t = faces_[f];
        if (has(t, other)) continue;
        Vec3 before[3], after[3];
        for (int c = 0; c < 3; ++c) {
          before[c] = pos_[t[c]];
          after[c] = (t[c] == v) ? target : pos_[t[c]];
        }
        const Vec3 n0 = cross(before[1] - before[0], before[2] - before[0]);
        const Vec3 n1 = cross(after[1] - after[0], after[2] - after[0]);
        if (!(dot(n0, n1) > 0.0)) return false;
      }
    }
    return true;
  }

  bool is_minimal(const HeapEntry& applied) const {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Triangle& t = faces_[f];
      for (int e = 0; e < 3; ++e) {
        const std::uint32_t a = t[e], b = t[(e + 1) % 3];
        edges.emplace(std::min(a, b), std::max(a, b));
      }
    }
    for (const auto& [a, b] : edges) {
      if (rejected_.count({a, b, version_[a], version_[b]})) continue;
      const double c = candidate(a, b).cost;
      if (c < applied.cost - 1e-12 * (1.0 + applied.cost)) return false;
    }
    return true;
  }

  void collapse(const HeapEntry& e) {
    const std::uint32_t keep = e.a, gone = e.b;
    for (std::uint32_t f : vfaces_[gone]) {
      if (!face_alive_[f]) continue;
      if (has(faces_[f], keep)) {
        face_alive_[f] = 0;
        --alive_faces_;
        continue;
      }
      for (auto& v : faces_[f])
        if (v == gone) v = keep;
      vfaces_[keep].push_back(f);
    }
    vfaces_[gone].clear();
    vertex_alive_[gone] = 0;
    std::erase_if(vfaces_[keep], [&](std::uint32_t f) { return !face_alive_[f]; });
    std::sort(vfaces_[keep].begin(), vfaces_[keep].end());
    vfaces_[keep].erase(std::unique(vfaces_[keep].begin(), vfaces_[keep].end()), vfaces_[keep].end());

    pos_[keep] = e.position;
    quadrics_[keep] += quadrics_[gone];
    ++version_[keep];
    ++stats_.collapses;
    stats_.total_cost += e.cost;
    stats_.triangle_counts.push_back(alive_faces_);

    std::set<std::uint32_t> neighbors;
    for (std::uint32_t f : vfaces_[keep])
      for (std::uint32_t v : faces_[f])
        if (v != keep) neighbors.insert(v);
    for (std::uint32_t w : neighbors) push(keep, w);
  }

  const DecimateOptions& options_;
  DecimateStats& stats_;
  std::vector<Vec3> pos_;
  std::vector<Triangle> faces_;
  std::vector<char> face_alive_;
  std::vector<char> vertex_alive_;
  std::vector<std::uint32_t> version_;
  std::vector<std::vector<std::uint32_t>> vfaces_;
  std::vector<Quadric> quadrics_;
  std::size_t alive_faces_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap_;
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>> rejected_;
};

}  // namespace

TriangleMesh decimate_qem(const TriangleMesh& mesh, double target_ratio, const DecimateOptions& options,
                          DecimateStats* stats) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0))
    throw Error(ErrorCode::invalid_argument, "target_ratio must lie in (0, 1], got " + std::to_string(target_ratio));
  DecimateStats local;
  DecimateStats& s = stats ? *stats : local;
  s = DecimateStats{};
  // Stop once count <= ratio * original holds for the real product.
  const auto target =
      static_cast<std::size_t>(std::floor(target_ratio * static_cast<double>(mesh.triangle_count()) + 1e-9));
  if (target >= mesh.triangle_count()) return mesh;

  Decimator d(mesh, options, s);
  d.run(target);
  return d.result(mesh);
}

}  // namespace plasmaviz
