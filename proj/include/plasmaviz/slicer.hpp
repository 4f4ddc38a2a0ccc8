#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "plasmaviz/fields.hpp"

namespace plasmaviz {

enum class Axis { x, y, z };

// Throws Error(invalid_argument) for anything but x/y/z (either case).
Axis parse_axis(std::string_view text);
char axis_name(Axis axis) noexcept;

struct SlicePlaneState {
  Axis axis = Axis::z;
  std::size_t index = 0;
};

// Values of one plane. Columns run along the faster of the two remaining
// axes in storage order: Z -> (x, y), Y -> (x, z), X -> (y, z).
struct Slice {
  SlicePlaneState plane;
  std::size_t width = 0, height = 0;
  std::vector<float> values;  // row-major, values[row * width + col]

  float at(std::size_t col, std::size_t row) const noexcept { return values[row * width + col]; }
};

using Rgb = std::array<std::uint8_t, 3>;

class ColorGradient {
 public:
  struct Stop {
    double t;
    Rgb color;
  };

  // Requires >= 2 stops, t strictly increasing from 0 to 1.
  explicit ColorGradient(std::vector<Stop> stops);

  // Five-stop ramp, near-black through purple and orange to pale yellow.
  static ColorGradient default_ramp();

  const std::vector<Stop>& stops() const noexcept { return stops_; }

  // Piecewise-linear between bracketing stops, each channel rounded half up.
  Rgb lookup(double t) const;

 private:
  std::vector<Stop> stops_;
};

struct SliceHeatmap {
  SlicePlaneState plane;
  std::size_t width = 0, height = 0;
  std::vector<float> values;
  double vmin = 0.0, vmax = 0.0;
  std::vector<Rgb> image;  // width * height, same order as values
};

Slice extract_slice(const ScalarField& field, const SlicePlaneState& plane);

// t = (v - vmin) / (vmax - vmin) clamped to [0,1]; t = 0 when vmin == vmax.
SliceHeatmap render_heatmap(const Slice& slice, const ColorGradient& gradient, double vmin, double vmax);

inline Rgb gradient_lookup(const ColorGradient& gradient, double t) { return gradient.lookup(t); }

}  // namespace plasmaviz
