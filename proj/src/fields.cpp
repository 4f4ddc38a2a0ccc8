#include "plasmaviz/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace plasmaviz {

bool GridDims::contains(const Vec3& p) const noexcept {
  const Vec3 hi = upper_corner();
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= origin[a] && p[a] <= hi[a])) return false;
  }
  return true;
}

double GridDims::min_spacing() const noexcept { return std::min({dx, dy, dz}); }
double GridDims::max_spacing() const noexcept { return std::max({dx, dy, dz}); }

void GridDims::validate() const {
  if (nx < 2 || ny < 2 || nz < 2)
    throw Error(ErrorCode::validation, "grid needs at least 2 nodes per axis, got " + std::to_string(nx) + "x" +
                                           std::to_string(ny) + "x" + std::to_string(nz));
  for (double d : {dx, dy, dz}) {
    if (!(d > 0.0) || !std::isfinite(d)) throw Error(ErrorCode::validation, "grid spacing must be positive and finite");
  }
  for (double o : origin) {
    if (!std::isfinite(o)) throw Error(ErrorCode::validation, "grid origin must be finite");
  }
}

std::size_t linear_index(const GridDims& dims, std::size_t i, std::size_t j, std::size_t k) {
  if (i >= dims.nx || j >= dims.ny || k >= dims.nz)
    throw Error(ErrorCode::out_of_range, "node (" + std::to_string(i) + "," + std::to_string(j) + "," +
                                             std::to_string(k) + ") outside grid");
  return i + dims.nx * (j + dims.ny * k);
}

namespace {

void check_finite(const std::vector<float>& values, const char* what) {
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n]))
      throw Error(ErrorCode::bad_value, std::string(what) + " holds a non-finite value at index " + std::to_string(n));
  }
}

void check_length(const GridDims& dims, const std::vector<float>& values, const char* what) {
  if (values.size() != dims.node_count())
    throw Error(ErrorCode::size_mismatch, std::string(what) + " has " + std::to_string(values.size()) +
                                              " values, grid needs " + std::to_string(dims.node_count()));
}

// Cell index and fractional offset along one axis; assumes the coordinate is in range.
struct AxisCoord {
  std::size_t cell;
  double frac;
};

AxisCoord locate(double p, double origin, double spacing, std::size_t n) {
  const double u = (p - origin) / spacing;
  auto cell = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
  cell = std::min(cell, n - 2);
  return {cell, std::clamp(u - static_cast<double>(cell), 0.0, 1.0)};
}

struct Stencil {
  std::size_t base;  // linear index of the lower corner
  std::size_t sy, sz;
  double fx, fy, fz;
};

Stencil stencil_at(const GridDims& d, const Vec3& p) {
  const AxisCoord x = locate(p[0], d.origin[0], d.dx, d.nx);
  const AxisCoord y = locate(p[1], d.origin[1], d.dy, d.ny);
  const AxisCoord z = locate(p[2], d.origin[2], d.dz, d.nz);
  return {x.cell + d.nx * (y.cell + d.ny * z.cell), d.nx, d.nx * d.ny, x.frac, y.frac, z.frac};
}

double trilerp(const std::vector<float>& v, const Stencil& s) {
  const std::size_t b = s.base;
  auto lerp_x = [&](std::size_t at) {
    const double lo = v[at], hi = v[at + 1];
    return lo + s.fx * (hi - lo);
  };
  const double c00 = lerp_x(b);
  const double c10 = lerp_x(b + s.sy);
  const double c01 = lerp_x(b + s.sz);
  const double c11 = lerp_x(b + s.sy + s.sz);
  const double c0 = c00 + s.fy * (c10 - c00);
  const double c1 = c01 + s.fy * (c11 - c01);
  return c0 + s.fz * (c1 - c0);
}

}  // namespace

ScalarField::ScalarField(GridDims dims, std::vector<float> values) : dims_(dims), values_(std::move(values)) {
  dims_.validate();
  check_length(dims_, values_, "scalar field");
  check_finite(values_, "scalar field");
}

VectorField::VectorField(GridDims dims, std::vector<float> vx, std::vector<float> vy, std::vector<float> vz)
    : dims_(dims), vx_(std::move(vx)), vy_(std::move(vy)), vz_(std::move(vz)) {
  dims_.validate();
  check_length(dims_, vx_, "vector field x component");
  check_length(dims_, vy_, "vector field y component");
  check_length(dims_, vz_, "vector field z component");
  check_finite(vx_, "vector field x component");
  check_finite(vy_, "vector field y component");
  check_finite(vz_, "vector field z component");
}

std::optional<Vec3> sample_vector(const VectorField& field, const Vec3& p) {
  if (!field.dims().contains(p)) return std::nullopt;
  const Stencil s = stencil_at(field.dims(), p);
  return Vec3{trilerp(field.vx(), s), trilerp(field.vy(), s), trilerp(field.vz(), s)};
}

std::optional<double> sample_scalar(const ScalarField& field, const Vec3& p) {
  if (!field.dims().contains(p)) return std::nullopt;
  return trilerp(field.values(), stencil_at(field.dims(), p));
}

MinMax field_minmax(const ScalarField& field) {
  const auto [lo, hi] = std::minmax_element(field.values().begin(), field.values().end());
  return {*lo, *hi};
}

}  // namespace plasmaviz
