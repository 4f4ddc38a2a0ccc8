#include <charconv>
#include <cstdio>
#include <string>

#include "plasmaviz/error.hpp"
#include "plasmaviz/io.hpp"

namespace plasmaviz {

namespace {

void append_fmt(std::string& out, const char* fmt, double a, double b) {
  char buf[96];
  const int n = std::snprintf(buf, sizeof buf, fmt, a, b);
  out.append(buf, static_cast<std::size_t>(n));
}

void append_fmt(std::string& out, const char* fmt, double a, double b, double c) {
  char buf[128];
  const int n = std::snprintf(buf, sizeof buf, fmt, a, b, c);
  out.append(buf, static_cast<std::size_t>(n));
}

std::string_view next_token(std::string_view& line) {
  std::size_t start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  std::size_t end = line.find_first_of(" \t\r", start);
  if (end == std::string_view::npos) end = line.size();
  std::string_view tok = line.substr(start, end - start);
  line.remove_prefix(end);
  return tok;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(ErrorCode::validation, "OBJ line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

long parse_index(std::string_view tok, std::size_t count, std::size_t line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0)
    throw Error(ErrorCode::validation, "OBJ line " + std::to_string(line_no) + ": bad index '" + std::string(tok) + "'");
  if (v < 0) v += static_cast<long>(count) + 1;
  if (v < 1 || static_cast<std::size_t>(v) > count)
    throw Error(ErrorCode::validation, "OBJ line " + std::to_string(line_no) + ": index out of range");
  return v - 1;
}

}  // namespace

std::string write_obj(const TriangleMesh& mesh) {
  std::string out = "# plasmaviz mesh: " + std::to_string(mesh.vertices.size()) + " vertices, " +
                    std::to_string(mesh.triangles.size()) + " triangles\n";
  if (mesh.triangles.empty() && mesh.vertices.empty()) return out;
  out.reserve(out.size() + mesh.vertices.size() * 100 + mesh.triangles.size() * 40);
  for (const Vec3& v : mesh.vertices) append_fmt(out, "v %.6f %.6f %.6f\n", v[0], v[1], v[2]);
  for (std::size_t n = 0; n < mesh.vertices.size(); ++n) {
    const UV uv = n < mesh.uvs.size() ? mesh.uvs[n] : UV{0.0, 0.0};
    append_fmt(out, "vt %.6f %.6f\n", uv[0], uv[1]);
  }
  for (std::size_t n = 0; n < mesh.vertices.size(); ++n) {
    const Vec3 nv = n < mesh.normals.size() ? mesh.normals[n] : Vec3{0.0, 0.0, 0.0};
    append_fmt(out, "vn %.6f %.6f %.6f\n", nv[0], nv[1], nv[2]);
  }
  for (const Triangle& t : mesh.triangles) {
    out += 'f';
    for (std::uint32_t v : t) {
      const std::string idx = std::to_string(v + 1);
      out += ' ' + idx + '/' + idx + '/' + idx;
    }
    out += '\n';
  }
  return out;
}

std::string write_obj_lines(const std::vector<Streamline>& lines) {
  std::size_t points = 0, kept = 0;
  for (const Streamline& l : lines) {
    if (l.points.size() >= 2) {
      points += l.points.size();
      ++kept;
    }
  }
  std::string out = "# plasmaviz streamlines: " + std::to_string(kept) + " lines, " + std::to_string(points) +
                    " points\n";
  for (const Streamline& l : lines) {
    if (l.points.size() < 2) continue;
    for (const StreamPoint& p : l.points)
      append_fmt(out, "v %.6f %.6f %.6f\n", p.position[0], p.position[1], p.position[2]);
  }
  std::size_t base = 1;
  for (const Streamline& l : lines) {
    if (l.points.size() < 2) continue;
    out += 'l';
    for (std::size_t n = 0; n < l.points.size(); ++n) out += ' ' + std::to_string(base + n);
    out += '\n';
    base += l.points.size();
  }
  return out;
}

TriangleMesh read_obj(std::string_view text) {
  TriangleMesh mesh;
  std::vector<UV> uvs;
  std::vector<Vec3> normals;
  struct Corner {
    long v, vt, vn;
  };
  std::vector<std::array<Corner, 3>> faces;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    const std::string_view kind = next_token(line);
    if (kind.empty() || kind[0] == '#') continue;
    if (kind == "v" || kind == "vn") {
      Vec3 p;
      for (double& c : p) c = parse_double(next_token(line), line_no);
      (kind == "v" ? mesh.vertices : normals).push_back(p);
    } else if (kind == "vt") {
      UV uv;
      for (double& c : uv) c = parse_double(next_token(line), line_no);
      uvs.push_back(uv);
    } else if (kind == "f") {
      std::vector<Corner> poly;
      for (std::string_view tok = next_token(line); !tok.empty(); tok = next_token(line)) {
        Corner c{-1, -1, -1};
        const std::size_t s1 = tok.find('/');
        c.v = parse_index(tok.substr(0, s1), mesh.vertices.size(), line_no);
        if (s1 != std::string_view::npos) {
          std::string_view rest = tok.substr(s1 + 1);
          const std::size_t s2 = rest.find('/');
          const std::string_view vt = rest.substr(0, s2);
          if (!vt.empty()) c.vt = parse_index(vt, uvs.size(), line_no);
          if (s2 != std::string_view::npos && s2 + 1 < rest.size())
            c.vn = parse_index(rest.substr(s2 + 1), normals.size(), line_no);
        }
        poly.push_back(c);
      }
      if (poly.size() < 3) throw Error(ErrorCode::validation, "OBJ line " + std::to_string(line_no) + ": face needs 3 corners");
      for (std::size_t n = 1; n + 1 < poly.size(); ++n) faces.push_back({poly[0], poly[n], poly[n + 1]});
    }
  }
  mesh.uvs.assign(mesh.vertices.size(), UV{0.0, 0.0});
  mesh.normals.assign(mesh.vertices.size(), Vec3{0.0, 0.0, 1.0});
  for (const auto& f : faces) {
    Triangle t;
    for (int c = 0; c < 3; ++c) {
      t[c] = static_cast<std::uint32_t>(f[c].v);
      if (f[c].vt >= 0) mesh.uvs[f[c].v] = uvs[f[c].vt];
      if (f[c].vn >= 0) mesh.normals[f[c].v] = normals[f[c].vn];
    }
    mesh.triangles.push_back(t);
  }
  return mesh;
}

}  // namespace plasmaviz
