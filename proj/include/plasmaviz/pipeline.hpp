#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "plasmaviz/decimate.hpp"
#include "plasmaviz/io.hpp"
#include "plasmaviz/isosurface.hpp"
#include "plasmaviz/particles.hpp"
#include "plasmaviz/slicer.hpp"
#include "plasmaviz/streamline.hpp"

// Derived products shared by the CLI and the explorer service, so both
// emit the same bytes for the same parameters.
namespace plasmaviz {

inline constexpr double kDefaultDecimationRatio = 0.25;

struct IsoParams {
  double isovalue = 0.0;
  double ratio = 1.0;  // 1 = no decimation
  UvMode uv_mode = UvMode::zero;
  unsigned workers = 1;
};

// Flying Edges, optional QEM decimation, then field-gradient normals and UVs.
TriangleMesh extract_isosurface(const ScalarField& field, const IsoParams& params);

struct LineParams {
  std::array<std::size_t, 3> stride{1, 1, 1};
  TraceConfig trace;
  unsigned workers = 1;
};

// Stride aiming at roughly 8 seeds per axis.
std::array<std::size_t, 3> default_stride(const GridDims& dims);
LineParams default_line_params(const GridDims& dims);
// "4" or "4,2,8".
std::array<std::size_t, 3> parse_stride(std::string_view text);
std::vector<Streamline> trace_lattice(const VectorField& field, const LineParams& params);

struct ParticleParams {
  double fraction = 1.0;
  std::uint32_t resolution = kDefaultTextureResolution;
  std::uint64_t seed = 0;
};

// Subsample then encode; the capacity check applies to the subsampled frame.
ParticleTexture particle_texture(const ParticleFrame& frame, const ParticleParams& params);

enum class HeatmapScope { frame, dataset };

HeatmapScope parse_heatmap_scope(std::string_view text);

SliceHeatmap slice_heatmap(const ScalarField& field, const SlicePlaneState& plane, const MinMax& range,
                           const ColorGradient& gradient = ColorGradient::default_ramp());
Bytes slice_png(const ScalarField& field, const SlicePlaneState& plane, const MinMax& range,
                const ColorGradient& gradient = ColorGradient::default_ramp());

// Min/max across every scalar frame, for the dataset-scoped heatmap switch.
MinMax dataset_minmax(const DatasetManifest& manifest);

// File names used by the CLI for per-frame outputs.
std::string frame_file_name(std::string_view stem, std::size_t frame, std::string_view extension);
std::string slice_file_name(const SlicePlaneState& plane, std::size_t frame);

// Inclusive "a..b", a single "k", or empty for every frame.
struct FrameRange {
  std::size_t first = 0, last = 0;
};
FrameRange parse_frame_range(std::string_view text, std::size_t frame_count);

}  // namespace plasmaviz
