#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plasmaviz/fields.hpp"
#include "plasmaviz/isosurface.hpp"
#include "plasmaviz/particles.hpp"
#include "plasmaviz/slicer.hpp"
#include "plasmaviz/streamline.hpp"

namespace plasmaviz {

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Dataset layout
//
//   <root>/manifest.json
//   {
//     "name": "...", "frame_count": N,
//     "dtype": "float32le",                                  (optional)
//     "scalar":    {"dims": [nx,ny,nz], "spacing": [dx,dy,dz],
//                   "origin": [x,y,z], "pattern": "scalar_%04d.f32"},
//     "vector":    { same keys as scalar },
//     "particles": {"counts": [n0, n1, ...], "pattern": "particles_%04d.f32"}
//   }
//
// Frame payloads are little-endian float32:
//   scalar    nx*ny*nz values, x fastest
//   vector    three consecutive component planes (vx, vy, vz), each as scalar
//   particles n records of (x, y, z, scalar)
// ---------------------------------------------------------------------------

enum class Modality { scalar, vector, particles };

std::string_view modality_name(Modality m) noexcept;

struct GridSpec {
  GridDims dims;
  std::string pattern;
};

struct ParticleSpec {
  std::vector<std::uint64_t> counts;
  std::string pattern;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string name;
  std::size_t frame_count = 0;
  std::optional<GridSpec> scalar;
  std::optional<GridSpec> vector;
  std::optional<ParticleSpec> particles;

  bool has(Modality m) const noexcept;
  std::filesystem::path frame_path(Modality m, std::size_t frame) const;
  std::uint64_t expected_bytes(Modality m, std::size_t frame) const;
};

// Expands the single %d / %0Nd conversion in a frame pattern.
std::string format_frame_pattern(std::string_view pattern, std::size_t frame);

// `path` may name the dataset directory or its manifest.json. Validates the
// schema and checks every declared frame file for existence and exact size.
DatasetManifest read_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root);
std::string manifest_to_json(const DatasetManifest& manifest);

ScalarField read_scalar_frame(const DatasetManifest& manifest, std::size_t frame);
VectorField read_vector_frame(const DatasetManifest& manifest, std::size_t frame);
ParticleFrame read_particle_frame(const DatasetManifest& manifest, std::size_t frame);

Bytes encode_scalar_frame(const ScalarField& field);
Bytes encode_vector_frame(const VectorField& field);
Bytes encode_particle_frame(const ParticleFrame& frame);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
Bytes read_binary_file(const std::filesystem::path& path);
// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);

// ---------------------------------------------------------------------------
// OBJ: fixed 6-decimal output, 1-based indices, v/vt/vn always present.
// ---------------------------------------------------------------------------

std::string write_obj(const TriangleMesh& mesh);
// v records for every point, then one l record per polyline with >= 2 points.
std::string write_obj_lines(const std::vector<Streamline>& lines);
// Reads v/vt/vn/f records (triangles or fans of polygons). Missing
// attributes are zero-filled.
TriangleMesh read_obj(std::string_view text);

// ---------------------------------------------------------------------------
// PNG: 8-bit RGB, filter 0, zlib-compressed IDAT.
// ---------------------------------------------------------------------------

Bytes write_png(std::size_t width, std::size_t height, std::span<const Rgb> pixels);
inline Bytes write_png(const SliceHeatmap& heatmap) {
  return write_png(heatmap.width, heatmap.height, heatmap.image);
}

// ---------------------------------------------------------------------------
// Bulk payload framing, all little-endian:
//   "PVZ1"  u32 chunk_count
//   chunk:  4-byte tag, u64 byte_length, payload
//
// mesh:        MHDR (u32 vertices, u32 triangles) VPOS (f32 x3) VNRM (f32 x3)
//              VTUV (f32 x2) TIDX (u32 x3)
// streamlines: LHDR (u32 lines, u32 points) LOFF (u32 x lines+1)
//              LPTS (f32 x,y,z,magnitude per point) LTRM (u8 per line)
// texture:     THDR (u32 resolution, u32 occupancy) TPLN (f32 planes x, y,
//              z, scalar; each resolution^2 values)
// ---------------------------------------------------------------------------

struct Chunk {
  std::array<char, 4> tag;
  Bytes payload;
};

Bytes encode_chunks(const std::vector<Chunk>& chunks);
std::vector<Chunk> decode_chunks(std::span<const std::uint8_t> data);

Bytes encode_mesh_payload(const TriangleMesh& mesh);
TriangleMesh decode_mesh_payload(std::span<const std::uint8_t> data);
Bytes encode_lines_payload(const std::vector<Streamline>& lines);
std::vector<Streamline> decode_lines_payload(std::span<const std::uint8_t> data);
Bytes encode_texture_payload(const ParticleTexture& texture);
ParticleTexture decode_texture_payload(std::span<const std::uint8_t> data);

}  // namespace plasmaviz
