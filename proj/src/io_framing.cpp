#include <bit>
#include <cstring>
#include <map>
#include <string>

#include "plasmaviz/error.hpp"
#include "plasmaviz/io.hpp"

namespace plasmaviz {

namespace {

constexpr char kMagic[4] = {'P', 'V', 'Z', '1'};

template <typename T>
void put_le(Bytes& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                                    std::uint8_t>>;
  const U u = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                                    std::uint8_t>>;
  U u = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) u |= static_cast<U>(static_cast<U>(p[b]) << (8 * b));
  return std::bit_cast<T>(u);
}

Chunk make_chunk(const char (&tag)[5], Bytes payload) {
  Chunk c;
  std::memcpy(c.tag.data(), tag, 4);
  c.payload = std::move(payload);
  return c;
}

std::string tag_string(const std::array<char, 4>& tag) { return std::string(tag.begin(), tag.end()); }

// Named chunk lookup with an element-count check.
class ChunkReader {
 public:
  explicit ChunkReader(std::span<const std::uint8_t> data) {
    for (Chunk& c : decode_chunks(data)) chunks_[tag_string(c.tag)] = std::move(c.payload);
  }

  const Bytes& get(const char* tag, std::size_t expected_bytes) const {
    auto it = chunks_.find(tag);
    if (it == chunks_.end()) throw Error(ErrorCode::validation, std::string("payload is missing chunk ") + tag);
    if (it->second.size() != expected_bytes)
      throw Error(ErrorCode::size_mismatch, std::string("chunk ") + tag + " holds " +
                                                std::to_string(it->second.size()) + " bytes, expected " +
                                                std::to_string(expected_bytes));
    return it->second;
  }

 private:
  std::map<std::string, Bytes> chunks_;
};

}  // namespace

Bytes encode_chunks(const std::vector<Chunk>& chunks) {
  std::size_t total = 8;
  for (const Chunk& c : chunks) total += 12 + c.payload.size();
  Bytes out;
  out.reserve(total);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_le(out, static_cast<std::uint32_t>(chunks.size()));
  for (const Chunk& c : chunks) {
    out.insert(out.end(), c.tag.begin(), c.tag.end());
    put_le(out, static_cast<std::uint64_t>(c.payload.size()));
    out.insert(out.end(), c.payload.begin(), c.payload.end());
  }
  return out;
}

std::vector<Chunk> decode_chunks(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::validation, "payload does not start with PVZ1 header");
  const std::uint32_t count = get_le<std::uint32_t>(data.data() + 4);
  std::vector<Chunk> out;
  std::size_t at = 8;
  for (std::uint32_t n = 0; n < count; ++n) {
    if (data.size() - at < 12) throw Error(ErrorCode::validation, "payload truncated in chunk header");
    Chunk c;
    std::memcpy(c.tag.data(), data.data() + at, 4);
    const std::uint64_t len = get_le<std::uint64_t>(data.data() + at + 4);
    at += 12;
    if (len > data.size() - at) throw Error(ErrorCode::validation, "payload truncated in chunk " + tag_string(c.tag));
    c.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(at), data.begin() + static_cast<std::ptrdiff_t>(at + len));
    at += len;
    out.push_back(std::move(c));
  }
  if (at != data.size()) throw Error(ErrorCode::validation, "trailing bytes after last chunk");
  return out;
}

Bytes encode_mesh_payload(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  Bytes hdr, pos, nrm, uv, idx;
  put_le(hdr, static_cast<std::uint32_t>(nv));
  put_le(hdr, static_cast<std::uint32_t>(mesh.triangles.size()));
  pos.reserve(12 * nv);
  nrm.reserve(12 * nv);
  uv.reserve(8 * nv);
  for (std::size_t n = 0; n < nv; ++n) {
    for (double c : mesh.vertices[n]) put_le(pos, static_cast<float>(c));
    const Vec3 nn = n < mesh.normals.size() ? mesh.normals[n] : Vec3{0, 0, 0};
    for (double c : nn) put_le(nrm, static_cast<float>(c));
    const UV t = n < mesh.uvs.size() ? mesh.uvs[n] : UV{0, 0};
    for (double c : t) put_le(uv, static_cast<float>(c));
  }
  idx.reserve(12 * mesh.triangles.size());
  for (const Triangle& t : mesh.triangles)
    for (std::uint32_t v : t) put_le(idx, v);
  return encode_chunks({make_chunk("MHDR", std::move(hdr)), make_chunk("VPOS", std::move(pos)),
                        make_chunk("VNRM", std::move(nrm)), make_chunk("VTUV", std::move(uv)),
                        make_chunk("TIDX", std::move(idx))});
}

TriangleMesh decode_mesh_payload(std::span<const std::uint8_t> data) {
  ChunkReader r(data);
  const Bytes& hdr = r.get("MHDR", 8);
  const std::size_t nv = get_le<std::uint32_t>(hdr.data());
  const std::size_t nt = get_le<std::uint32_t>(hdr.data() + 4);
  const Bytes& pos = r.get("VPOS", 12 * nv);
  const Bytes& nrm = r.get("VNRM", 12 * nv);
  const Bytes& uv = r.get("VTUV", 8 * nv);
  const Bytes& idx = r.get("TIDX", 12 * nt);
  TriangleMesh m;
  m.vertices.resize(nv);
  m.normals.resize(nv);
  m.uvs.resize(nv);
  for (std::size_t n = 0; n < nv; ++n) {
    for (int c = 0; c < 3; ++c) {
      m.vertices[n][c] = get_le<float>(pos.data() + 12 * n + 4 * c);
      m.normals[n][c] = get_le<float>(nrm.data() + 12 * n + 4 * c);
    }
    for (int c = 0; c < 2; ++c) m.uvs[n][c] = get_le<float>(uv.data() + 8 * n + 4 * c);
  }
  m.triangles.resize(nt);
  for (std::size_t t = 0; t < nt; ++t)
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t v = get_le<std::uint32_t>(idx.data() + 12 * t + 4 * c);
      if (v >= nv) throw Error(ErrorCode::validation, "triangle index out of range in mesh payload");
      m.triangles[t][c] = v;
    }
  return m;
}

Bytes encode_lines_payload(const std::vector<Streamline>& lines) {
  Bytes hdr, off, pts, trm;
  std::uint32_t total = 0;
  put_le(off, total);
  for (const Streamline& l : lines) {
    total += static_cast<std::uint32_t>(l.points.size());
    put_le(off, total);
    for (const StreamPoint& p : l.points) {
      for (double c : p.position) put_le(pts, static_cast<float>(c));
      put_le(pts, static_cast<float>(p.magnitude));
    }
    trm.push_back(static_cast<std::uint8_t>(l.termination));
  }
  put_le(hdr, static_cast<std::uint32_t>(lines.size()));
  put_le(hdr, total);
  return encode_chunks({make_chunk("LHDR", std::move(hdr)), make_chunk("LOFF", std::move(off)),
                        make_chunk("LPTS", std::move(pts)), make_chunk("LTRM", std::move(trm))});
}

std::vector<Streamline> decode_lines_payload(std::span<const std::uint8_t> data) {
  ChunkReader r(data);
  const Bytes& hdr = r.get("LHDR", 8);
  const std::size_t nl = get_le<std::uint32_t>(hdr.data());
  const std::size_t np = get_le<std::uint32_t>(hdr.data() + 4);
  const Bytes& off = r.get("LOFF", 4 * (nl + 1));
  const Bytes& pts = r.get("LPTS", 16 * np);
  const Bytes& trm = r.get("LTRM", nl);
  std::vector<Streamline> out(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const std::size_t a = get_le<std::uint32_t>(off.data() + 4 * l);
    const std::size_t b = get_le<std::uint32_t>(off.data() + 4 * (l + 1));
    if (a > b || b > np) throw Error(ErrorCode::validation, "line offsets out of order");
    if (trm[l] > 2) throw Error(ErrorCode::validation, "unknown termination code");
    out[l].termination = static_cast<Termination>(trm[l]);
    for (std::size_t p = a; p < b; ++p) {
      const std::uint8_t* q = pts.data() + 16 * p;
      out[l].points.push_back({{get_le<float>(q), get_le<float>(q + 4), get_le<float>(q + 8)}, get_le<float>(q + 12)});
    }
  }
  return out;
}

Bytes encode_texture_payload(const ParticleTexture& texture) {
  const std::size_t cap = texture.capacity();
  if (texture.texels.size() != 4 * cap) throw Error(ErrorCode::size_mismatch, "texture texel count does not match resolution");
  Bytes hdr, planes;
  put_le(hdr, texture.resolution);
  put_le(hdr, texture.occupancy);
  planes.reserve(16 * cap);
  for (int c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < cap; ++t) put_le(planes, texture.texels[4 * t + c]);
  return encode_chunks({make_chunk("THDR", std::move(hdr)), make_chunk("TPLN", std::move(planes))});
}

ParticleTexture decode_texture_payload(std::span<const std::uint8_t> data) {
  ChunkReader r(data);
  const Bytes& hdr = r.get("THDR", 8);
  ParticleTexture t;
  t.resolution = get_le<std::uint32_t>(hdr.data());
  t.occupancy = get_le<std::uint32_t>(hdr.data() + 4);
  const std::size_t cap = t.capacity();
  if (t.occupancy > cap) throw Error(ErrorCode::validation, "texture occupancy exceeds capacity");
  const Bytes& planes = r.get("TPLN", 16 * cap);
  t.texels.resize(4 * cap);
  for (int c = 0; c < 4; ++c)
    for (std::size_t n = 0; n < cap; ++n) t.texels[4 * n + c] = get_le<float>(planes.data() + 4 * (c * cap + n));
  return t;
}

}  // namespace plasmaviz
