#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "plasmaviz/error.hpp"
#include "plasmaviz/io.hpp"

namespace plasmaviz {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::scalar: return "scalar";
    case Modality::vector: return "vector";
    case Modality::particles: return "particles";
  }
  return "unknown";
}

bool DatasetManifest::has(Modality m) const noexcept {
  switch (m) {
    case Modality::scalar: return scalar.has_value();
    case Modality::vector: return vector.has_value();
    case Modality::particles: return particles.has_value();
  }
  return false;
}

std::string format_frame_pattern(std::string_view pattern, std::size_t frame) {
  std::string out;
  bool substituted = false;
  for (std::size_t n = 0; n < pattern.size(); ++n) {
    if (pattern[n] != '%') {
      out.push_back(pattern[n]);
      continue;
    }
    if (n + 1 < pattern.size() && pattern[n + 1] == '%') {
      out.push_back('%');
      ++n;
      continue;
    }
    std::size_t m = n + 1;
    bool zero = false;
    if (m < pattern.size() && pattern[m] == '0') {
      zero = true;
      ++m;
    }
    std::size_t width = 0;
    while (m < pattern.size() && pattern[m] >= '0' && pattern[m] <= '9') width = width * 10 + (pattern[m++] - '0');
    if (m >= pattern.size() || pattern[m] != 'd' || substituted || width > 32)
      throw Error(ErrorCode::validation, "frame pattern '" + std::string(pattern) + "' needs exactly one %d or %0Nd");
    std::string digits = std::to_string(frame);
    if (digits.size() < width) digits.insert(0, width - digits.size(), zero ? '0' : ' ');
    out += digits;
    substituted = true;
    n = m;
  }
  if (!substituted)
    throw Error(ErrorCode::validation, "frame pattern '" + std::string(pattern) + "' has no frame number conversion");
  return out;
}

fs::path DatasetManifest::frame_path(Modality m, std::size_t frame) const {
  const std::string* pattern = nullptr;
  if (m == Modality::scalar && scalar) pattern = &scalar->pattern;
  if (m == Modality::vector && vector) pattern = &vector->pattern;
  if (m == Modality::particles && particles) pattern = &particles->pattern;
  if (!pattern) throw Error(ErrorCode::not_found, "dataset has no " + std::string(modality_name(m)) + " modality");
  return root / format_frame_pattern(*pattern, frame);
}

std::uint64_t DatasetManifest::expected_bytes(Modality m, std::size_t frame) const {
  switch (m) {
    case Modality::scalar: return 4ull * scalar->dims.node_count();
    case Modality::vector: return 12ull * vector->dims.node_count();
    case Modality::particles: return 16ull * particles->counts.at(frame);
  }
  return 0;
}

namespace {

std::string frame_label(Modality m, std::size_t frame) {
  return std::string(modality_name(m)) + " frame " + std::to_string(frame);
}

template <std::size_t N, typename T>
std::array<T, N> fixed_array(const json& j, const char* key, const char* section) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N)
    throw Error(ErrorCode::validation,
                std::string(section) + "." + key + " must be an array of " + std::to_string(N) + " numbers");
  std::array<T, N> out;
  for (std::size_t n = 0; n < N; ++n) out[n] = v[n].get<T>();
  return out;
}

GridSpec parse_grid(const json& j, const char* section) {
  if (!j.is_object()) throw Error(ErrorCode::validation, std::string(section) + " must be an object");
  GridSpec spec;
  const auto dims = fixed_array<3, long long>(j, "dims", section);
  for (long long d : dims) {
    if (d < 2) throw Error(ErrorCode::validation, std::string(section) + ".dims entries must be >= 2");
  }
  spec.dims.nx = static_cast<std::size_t>(dims[0]);
  spec.dims.ny = static_cast<std::size_t>(dims[1]);
  spec.dims.nz = static_cast<std::size_t>(dims[2]);
  if (j.contains("spacing")) {
    const auto s = fixed_array<3, double>(j, "spacing", section);
    spec.dims.dx = s[0];
    spec.dims.dy = s[1];
    spec.dims.dz = s[2];
  }
  if (j.contains("origin")) spec.dims.origin = fixed_array<3, double>(j, "origin", section);
  spec.dims.validate();
  spec.pattern = j.at("pattern").get<std::string>();
  return spec;
}

json grid_to_json(const GridSpec& g) {
  return {{"dims", {g.dims.nx, g.dims.ny, g.dims.nz}},
          {"spacing", {g.dims.dx, g.dims.dy, g.dims.dz}},
          {"origin", {g.dims.origin[0], g.dims.origin[1], g.dims.origin[2]}},
          {"pattern", g.pattern}};
}

void check_frame_file(const DatasetManifest& m, Modality mod, std::size_t frame) {
  const fs::path p = m.frame_path(mod, frame);
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  if (ec) throw Error(ErrorCode::not_found, frame_label(mod, frame) + ": missing file " + p.string());
  const std::uint64_t expected = m.expected_bytes(mod, frame);
  if (size != expected)
    throw Error(ErrorCode::size_mismatch, frame_label(mod, frame) + ": " + p.string() + " holds " +
                                              std::to_string(size) + " bytes, expected " + std::to_string(expected));
}

// Reads exactly `count` little-endian float32 values into `out`.
void read_floats(const DatasetManifest& m, Modality mod, std::size_t frame, std::vector<float>& out,
                 std::size_t count) {
  check_frame_file(m, mod, frame);
  const fs::path p = m.frame_path(mod, frame);
  std::FILE* f = std::fopen(p.c_str(), "rb");
  if (!f) throw Error(ErrorCode::io, frame_label(mod, frame) + ": cannot open " + p.string());
  out.resize(count);
  const std::size_t got = std::fread(out.data(), sizeof(float), count, f);
  std::fclose(f);
  if (got != count) throw Error(ErrorCode::size_mismatch, frame_label(mod, frame) + ": short read from " + p.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : out) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
  }
}

void append_floats(Bytes& out, const std::vector<float>& values) {
  const std::size_t at = out.size();
  out.resize(at + 4 * values.size());
  std::uint8_t* dst = out.data() + at;
  for (float v : values) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    dst[0] = static_cast<std::uint8_t>(u);
    dst[1] = static_cast<std::uint8_t>(u >> 8);
    dst[2] = static_cast<std::uint8_t>(u >> 16);
    dst[3] = static_cast<std::uint8_t>(u >> 24);
    dst += 4;
  }
}

}  // namespace

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::validation, "manifest must be a JSON object");
  static const std::set<std::string> known = {"name", "frame_count", "dtype", "scalar", "vector", "particles"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw Error(ErrorCode::unknown_modality, "manifest declares unknown modality '" + key + "'");
  }
  try {
    m.name = doc.value("name", std::string{});
    const long long frames = doc.at("frame_count").get<long long>();
    if (frames < 1) throw Error(ErrorCode::validation, "frame_count must be at least 1, got " + std::to_string(frames));
    m.frame_count = static_cast<std::size_t>(frames);
    if (doc.contains("dtype") && doc["dtype"].get<std::string>() != "float32le")
      throw Error(ErrorCode::validation, "only dtype float32le is supported");
    if (doc.contains("scalar")) m.scalar = parse_grid(doc["scalar"], "scalar");
    if (doc.contains("vector")) m.vector = parse_grid(doc["vector"], "vector");
    if (doc.contains("particles")) {
      const json& p = doc["particles"];
      ParticleSpec spec;
      spec.counts = p.at("counts").get<std::vector<std::uint64_t>>();
      spec.pattern = p.at("pattern").get<std::string>();
      if (spec.counts.size() != m.frame_count)
        throw Error(ErrorCode::validation, "particles.counts lists " + std::to_string(spec.counts.size()) +
                                               " frames, frame_count is " + std::to_string(m.frame_count));
      m.particles = std::move(spec);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("manifest schema error: ") + e.what());
  }
  if (!m.scalar && !m.vector && !m.particles)
    throw Error(ErrorCode::validation, "manifest declares no modality");
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["name"] = m.name;
  doc["frame_count"] = m.frame_count;
  doc["dtype"] = "float32le";
  if (m.scalar) doc["scalar"] = grid_to_json(*m.scalar);
  if (m.vector) doc["vector"] = grid_to_json(*m.vector);
  if (m.particles) doc["particles"] = {{"counts", m.particles->counts}, {"pattern", m.particles->pattern}};
  return doc.dump(2) + "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
  std::error_code ec;
  const bool is_dir = fs::is_directory(path, ec);
  const fs::path file = is_dir ? path / "manifest.json" : path;
  if (!fs::is_regular_file(file, ec)) throw Error(ErrorCode::not_found, "manifest not found: " + file.string());
  DatasetManifest m = parse_manifest(read_text_file(file), file.parent_path());
  for (Modality mod : {Modality::scalar, Modality::vector, Modality::particles}) {
    if (!m.has(mod)) continue;
    for (std::size_t k = 0; k < m.frame_count; ++k) check_frame_file(m, mod, k);
  }
  return m;
}

ScalarField read_scalar_frame(const DatasetManifest& m, std::size_t frame) {
  if (!m.scalar) throw Error(ErrorCode::not_found, "dataset has no scalar modality");
  if (frame >= m.frame_count) throw Error(ErrorCode::out_of_range, "scalar frame " + std::to_string(frame) + " out of range");
  const GridDims& d = m.scalar->dims;
  std::vector<float> values;
  read_floats(m, Modality::scalar, frame, values, d.node_count());
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n])) {
      const std::size_t i = n % d.nx, j = (n / d.nx) % d.ny, k = n / (d.nx * d.ny);
      throw Error(ErrorCode::bad_value, frame_label(Modality::scalar, frame) + ": non-finite value at node (" +
                                            std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) +
                                            "), index " + std::to_string(n));
    }
  }
  return ScalarField(d, std::move(values));
}

VectorField read_vector_frame(const DatasetManifest& m, std::size_t frame) {
  if (!m.vector) throw Error(ErrorCode::not_found, "dataset has no vector modality");
  if (frame >= m.frame_count) throw Error(ErrorCode::out_of_range, "vector frame " + std::to_string(frame) + " out of range");
  const GridDims& d = m.vector->dims;
  const std::size_t n = d.node_count();
  std::vector<float> all;
  read_floats(m, Modality::vector, frame, all, 3 * n);
  for (std::size_t v = 0; v < all.size(); ++v) {
    if (!std::isfinite(all[v]))
      throw Error(ErrorCode::bad_value, frame_label(Modality::vector, frame) + ": non-finite value at component " +
                                            std::to_string(v / n) + ", index " + std::to_string(v % n));
  }
  std::vector<float> vx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<float> vy(all.begin() + static_cast<std::ptrdiff_t>(n), all.begin() + static_cast<std::ptrdiff_t>(2 * n));
  std::vector<float> vz(all.begin() + static_cast<std::ptrdiff_t>(2 * n), all.end());
  return VectorField(d, std::move(vx), std::move(vy), std::move(vz));
}

ParticleFrame read_particle_frame(const DatasetManifest& m, std::size_t frame) {
  if (!m.particles) throw Error(ErrorCode::not_found, "dataset has no particle modality");
  if (frame >= m.frame_count) throw Error(ErrorCode::out_of_range, "particle frame " + std::to_string(frame) + " out of range");
  const std::size_t count = m.particles->counts[frame];
  std::vector<float> raw;
  read_floats(m, Modality::particles, frame, raw, 4 * count);
  ParticleFrame out;
  out.positions.resize(count);
  out.scalar.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.positions[i] = {raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]};
    out.scalar[i] = raw[4 * i + 3];
  }
  try {
    out.validate();
  } catch (const Error& e) {
    throw Error(e.code(), frame_label(Modality::particles, frame) + ": " + e.what());
  }
  return out;
}

Bytes encode_scalar_frame(const ScalarField& field) {
  Bytes out;
  out.reserve(4 * field.values().size());
  append_floats(out, field.values());
  return out;
}

Bytes encode_vector_frame(const VectorField& field) {
  Bytes out;
  out.reserve(12 * field.vx().size());
  append_floats(out, field.vx());
  append_floats(out, field.vy());
  append_floats(out, field.vz());
  return out;
}

Bytes encode_particle_frame(const ParticleFrame& frame) {
  std::vector<float> raw;
  raw.reserve(4 * frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    raw.insert(raw.end(), {frame.positions[i][0], frame.positions[i][1], frame.positions[i][2], frame.scalar[i]});
  }
  Bytes out;
  append_floats(out, raw);
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bytes read_binary_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  return Bytes(text.begin(), text.end());
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> data) {
  static std::atomic<unsigned long> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::io, "cannot move output into " + path.string());
  }
}

void write_file_atomic(const fs::path& path, std::string_view data) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

}  // namespace plasmaviz
