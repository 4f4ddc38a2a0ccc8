#include "plasmaviz/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "plasmaviz/error.hpp"

namespace plasmaviz {

namespace {

std::size_t parse_size(std::string_view text, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::invalid_argument, std::string(what) + " '" + std::string(text) + "' is not a nonnegative integer");
  return v;
}

}  // namespace

TriangleMesh extract_isosurface(const ScalarField& field, const IsoParams& params) {
  if (!std::isfinite(params.isovalue)) throw Error(ErrorCode::invalid_argument, "isovalue must be finite");
  if (!(params.ratio > 0.0 && params.ratio <= 1.0))
    throw Error(ErrorCode::invalid_argument, "ratio must lie in (0, 1], got " + std::to_string(params.ratio));
  IsoOptions opts;
  opts.workers = params.workers;
  opts.uv_mode = params.uv_mode;
  TriangleMesh mesh = flying_edges(field, params.isovalue, opts);
  if (params.ratio < 1.0 && !mesh.empty()) {
    mesh = decimate_qem(mesh, params.ratio);
    compute_normals(mesh, field);
    assign_uvs(mesh, field.dims(), params.uv_mode);
  }
  return mesh;
}

std::array<std::size_t, 3> default_stride(const GridDims& dims) {
  auto s = [](std::size_t n) { return std::max<std::size_t>(1, (n + 7) / 8); };
  return {s(dims.nx), s(dims.ny), s(dims.nz)};
}

LineParams default_line_params(const GridDims& dims) {
  LineParams p;
  p.stride = default_stride(dims);
  p.trace = TraceConfig::defaults_for(dims);
  return p;
}

std::array<std::size_t, 3> parse_stride(std::string_view text) {
  std::array<std::size_t, 3> out{};
  const std::size_t c1 = text.find(',');
  if (c1 == std::string_view::npos) {
    out.fill(parse_size(text, "stride"));
  } else {
    const std::size_t c2 = text.find(',', c1 + 1);
    if (c2 == std::string_view::npos || text.find(',', c2 + 1) != std::string_view::npos)
      throw Error(ErrorCode::invalid_argument, "stride must be one integer or three comma-separated integers");
    out = {parse_size(text.substr(0, c1), "stride"), parse_size(text.substr(c1 + 1, c2 - c1 - 1), "stride"),
           parse_size(text.substr(c2 + 1), "stride")};
  }
  for (std::size_t s : out)
    if (s < 1) throw Error(ErrorCode::invalid_argument, "stride entries must be at least 1");
  return out;
}

std::vector<Streamline> trace_lattice(const VectorField& field, const LineParams& params) {
  return trace_all(field, seed_lattice(field.dims(), params.stride), params.trace, params.workers);
}

ParticleTexture particle_texture(const ParticleFrame& frame, const ParticleParams& params) {
  if (params.resolution < 1) throw Error(ErrorCode::invalid_argument, "texture resolution must be at least 1");
  return encode_texture(subsample(frame, params.fraction, params.seed), params.resolution);
}

HeatmapScope parse_heatmap_scope(std::string_view text) {
  if (text == "frame") return HeatmapScope::frame;
  if (text == "dataset" || text == "global") return HeatmapScope::dataset;
  throw Error(ErrorCode::invalid_argument, "heatmap scope must be 'frame' or 'dataset', got '" + std::string(text) + "'");
}

SliceHeatmap slice_heatmap(const ScalarField& field, const SlicePlaneState& plane, const MinMax& range,
                           const ColorGradient& gradient) {
  return render_heatmap(extract_slice(field, plane), gradient, range.min, range.max);
}

Bytes slice_png(const ScalarField& field, const SlicePlaneState& plane, const MinMax& range,
                const ColorGradient& gradient) {
  return write_png(slice_heatmap(field, plane, range, gradient));
}

MinMax dataset_minmax(const DatasetManifest& manifest) {
  if (!manifest.has(Modality::scalar)) throw Error(ErrorCode::not_found, "dataset has no scalar modality");
  MinMax out{};
  for (std::size_t k = 0; k < manifest.frame_count; ++k) {
    const MinMax m = field_minmax(read_scalar_frame(manifest, k));
    out = k == 0 ? m : MinMax{std::min(out.min, m.min), std::max(out.max, m.max)};
  }
  return out;
}

std::string frame_file_name(std::string_view stem, std::size_t frame, std::string_view extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu.", frame);
  return std::string(stem) + buf + std::string(extension);
}

std::string slice_file_name(const SlicePlaneState& plane, std::size_t frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "slice_%c%04zu_%04zu.png", axis_name(plane.axis), plane.index, frame);
  return buf;
}

FrameRange parse_frame_range(std::string_view text, std::size_t frame_count) {
  if (frame_count == 0) throw Error(ErrorCode::invalid_argument, "dataset has no frames");
  FrameRange r{0, frame_count - 1};
  if (!text.empty()) {
    const std::size_t dots = text.find("..");
    if (dots == std::string_view::npos) {
      r.first = r.last = parse_size(text, "frame");
    } else {
      r.first = parse_size(text.substr(0, dots), "frame range start");
      r.last = parse_size(text.substr(dots + 2), "frame range end");
    }
  }
  if (r.first > r.last || r.last >= frame_count)
    throw Error(ErrorCode::out_of_range, "frame range " + std::string(text) + " outside 0.." +
                                             std::to_string(frame_count - 1));
  return r;
}

}  // namespace plasmaviz
