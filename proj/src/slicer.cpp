#include "plasmaviz/slicer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plasmaviz/error.hpp"

namespace plasmaviz {

Axis parse_axis(std::string_view text) {
  if (text == "x" || text == "X") return Axis::x;
  if (text == "y" || text == "Y") return Axis::y;
  if (text == "z" || text == "Z") return Axis::z;
  throw Error(ErrorCode::invalid_argument, "axis must be x, y or z, got '" + std::string(text) + "'");
}

char axis_name(Axis axis) noexcept {
  switch (axis) {
    case Axis::x: return 'x';
    case Axis::y: return 'y';
    case Axis::z: return 'z';
  }
  return '?';
}

ColorGradient::ColorGradient(std::vector<Stop> stops) : stops_(std::move(stops)) {
  if (stops_.size() < 2) throw Error(ErrorCode::validation, "a color gradient needs at least two stops");
  if (stops_.front().t != 0.0 || stops_.back().t != 1.0)
    throw Error(ErrorCode::validation, "gradient stops must start at t=0 and end at t=1");
  for (std::size_t n = 1; n < stops_.size(); ++n) {
    if (!(stops_[n].t > stops_[n - 1].t))
      throw Error(ErrorCode::validation, "gradient stop positions must increase strictly");
  }
}

ColorGradient ColorGradient::default_ramp() {
  // Every channel is nondecreasing, so rounded luminance never drops.
  return ColorGradient({{0.0, {0, 0, 12}},
                        {0.25, {64, 10, 100}},
                        {0.5, {176, 44, 112}},
                        {0.75, {246, 136, 112}},
                        {1.0, {255, 250, 200}}});
}

Rgb ColorGradient::lookup(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  auto hi = std::upper_bound(stops_.begin(), stops_.end(), t, [](double v, const Stop& s) { return v < s.t; });
  if (hi == stops_.end()) return stops_.back().color;
  const Stop& b = *hi;
  const Stop& a = *(hi - 1);
  const double w = (t - a.t) / (b.t - a.t);
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    const double v = a.color[c] + w * (static_cast<double>(b.color[c]) - a.color[c]);
    out[c] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  }
  return out;
}

Slice extract_slice(const ScalarField& field, const SlicePlaneState& plane) {
  const GridDims& d = field.dims();
  const std::size_t axis_count = plane.axis == Axis::x ? d.nx : plane.axis == Axis::y ? d.ny : d.nz;
  if (plane.index >= axis_count)
    throw Error(ErrorCode::invalid_argument, std::string("slice index ") + std::to_string(plane.index) +
                                                 " outside 0.." + std::to_string(axis_count - 1) + " on axis " +
                                                 axis_name(plane.axis));
  Slice s;
  s.plane = plane;
  const float* v = field.values().data();
  const std::size_t layer = d.nx * d.ny;
  switch (plane.axis) {
    case Axis::z: {
      s.width = d.nx;
      s.height = d.ny;
      const float* base = v + plane.index * layer;
      s.values.assign(base, base + layer);
      break;
    }
    case Axis::y: {
      s.width = d.nx;
      s.height = d.nz;
      s.values.resize(s.width * s.height);
      for (std::size_t k = 0; k < d.nz; ++k) {
        const float* row = v + k * layer + plane.index * d.nx;
        std::copy(row, row + d.nx, s.values.begin() + static_cast<std::ptrdiff_t>(k * d.nx));
      }
      break;
    }
    case Axis::x: {
      s.width = d.ny;
      s.height = d.nz;
      s.values.resize(s.width * s.height);
      for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j) s.values[k * d.ny + j] = v[k * layer + j * d.nx + plane.index];
      break;
    }
  }
  return s;
}

SliceHeatmap render_heatmap(const Slice& slice, const ColorGradient& gradient, double vmin, double vmax) {
  if (!(vmin <= vmax)) throw Error(ErrorCode::invalid_argument, "heatmap range needs vmin <= vmax");
  SliceHeatmap h;
  h.plane = slice.plane;
  h.width = slice.width;
  h.height = slice.height;
  h.values = slice.values;
  h.vmin = vmin;
  h.vmax = vmax;
  h.image.resize(slice.values.size());
  const double span = vmax - vmin;
  for (std::size_t n = 0; n < slice.values.size(); ++n) {
    const double t = span > 0.0 ? std::clamp((slice.values[n] - vmin) / span, 0.0, 1.0) : 0.0;
    h.image[n] = gradient.lookup(t);
  }
  return h;
}

}  // namespace plasmaviz
