#include <gtest/gtest.h>
#include <png.h>

#include <random>

#include "dataset_support.hpp"
#include "plasmaviz/io.hpp"
#include "support.hpp"

using namespace plasmaviz;
using namespace testsupport;

namespace {

ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::io;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::vector<ScalarField> three_frames() {
  std::mt19937_64 rng(1);
  std::vector<ScalarField> out;
  for (int k = 0; k < 3; ++k) out.push_back(random_scalar(cube_dims(8), rng));
  return out;
}

std::vector<Rgb> png_decode(const Bytes& png, std::size_t& w, std::size_t& h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png.data(), png.size())) return {};
  img.format = PNG_FORMAT_RGB;
  std::vector<Rgb> px(img.width * img.height);
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) return {};
  w = img.width;
  h = img.height;
  return px;
}

}  // namespace

TEST(Manifest, LoadsThreeScalarFrames) {
  const auto dir = fresh_dir("io_three");
  DatasetWriter w(dir, "three", 3);
  const auto frames = three_frames();
  w.scalars(frames);
  w.finish();
  const DatasetManifest m = read_manifest(dir);
  EXPECT_EQ(m.frame_count, 3u);
  EXPECT_TRUE(m.has(Modality::scalar));
  EXPECT_FALSE(m.has(Modality::vector));
  EXPECT_EQ(m.scalar->dims, frames[0].dims());
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(read_scalar_frame(m, k).values(), frames[k].values());
  EXPECT_EQ(read_manifest(dir / "manifest.json").frame_count, 3u);
}

TEST(Manifest, TruncatedFrameNamesTheFrame) {
  const auto dir = fresh_dir("io_trunc");
  DatasetWriter w(dir, "t", 3);
  w.scalars(three_frames());
  w.finish();
  fs::resize_file(dir / "scalar_0001.f32", 8 * 8 * 8 * 4 - 4);
  EXPECT_EQ(error_of([&] { read_manifest(dir); }), ErrorCode::size_mismatch);
  EXPECT_NE(message_of([&] { read_manifest(dir); }).find("frame 1"), std::string::npos);
}

TEST(Manifest, SchemaErrors) {
  const fs::path root = "/nonexistent";
  EXPECT_EQ(error_of([&] { parse_manifest(R"({"frame_count": 0})", root); }), ErrorCode::validation);
  EXPECT_EQ(error_of([&] { parse_manifest(R"({"frame_count": 1, "tensor": {}})", root); }), ErrorCode::unknown_modality);
  EXPECT_EQ(error_of([&] { parse_manifest("{not json", root); }), ErrorCode::validation);
  EXPECT_EQ(error_of([&] {
              parse_manifest(R"({"frame_count": 2, "particles": {"counts": [1], "pattern": "p_%d.f32"}})", root);
            }),
            ErrorCode::validation);
  EXPECT_EQ(error_of([&] {
              parse_manifest(R"({"frame_count": 1, "scalar": {"dims": [1,2,2], "pattern": "s%d"}})", root);
            }),
            ErrorCode::validation);
  EXPECT_EQ(error_of([&] { read_manifest("/nonexistent/plasmaviz"); }), ErrorCode::not_found);
  const auto dir = fresh_dir("io_missing_frame");
  DatasetWriter w(dir, "m", 3);
  w.scalars(three_frames());
  w.finish();
  fs::remove(dir / "scalar_0002.f32");
  EXPECT_EQ(error_of([&] { read_manifest(dir); }), ErrorCode::not_found);
}

TEST(Manifest, FramePattern) {
  EXPECT_EQ(format_frame_pattern("scalar_%04d.f32", 7), "scalar_0007.f32");
  EXPECT_EQ(format_frame_pattern("f%d", 123), "f123");
  EXPECT_EQ(format_frame_pattern("100%%_%d", 2), "100%_2");
  EXPECT_THROW(format_frame_pattern("nothing", 1), Error);
  EXPECT_THROW(format_frame_pattern("%d_%d", 1), Error);
  EXPECT_THROW(format_frame_pattern("%s", 1), Error);
}

TEST(Frames, ScalarLayoutFromHandEncodedBytes) {
  const auto dir = fresh_dir("io_hand");
  Bytes raw;
  for (int v = 0; v < 8; ++v) {
    const float f = static_cast<float>(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&f);
    raw.insert(raw.end(), p, p + 4);
  }
  ASSERT_EQ(raw.size(), 32u);
  write_bytes(dir / "s_0.f32", raw);
  std::ofstream(dir / "manifest.json") << R"({"frame_count": 1, "scalar": {"dims": [2,2,2], "pattern": "s_%d.f32"}})";
  const ScalarField f = read_scalar_frame(read_manifest(dir), 0);
  EXPECT_EQ(f.at(1, 1, 1), 7.f);
  EXPECT_EQ(f.at(1, 0, 0), 1.f);
  EXPECT_EQ(f.at(0, 1, 0), 2.f);
  EXPECT_EQ(f.at(0, 0, 1), 4.f);
}

TEST(Frames, ParticlesAndVectors) {
  const auto dir = fresh_dir("io_pv");
  DatasetWriter w(dir, "pv", 1);
  ParticleFrame p;
  p.positions = {{1, 2, 3}, {5, 6, 7}};
  p.scalar = {4, 8};
  w.particles({p});
  const GridDims d = cube_dims(3);
  w.vectors({VectorField(d, std::vector<float>(27), std::vector<float>(27), std::vector<float>(27))});
  w.finish();
  const DatasetManifest m = read_manifest(dir);
  EXPECT_EQ(read_particle_frame(m, 0), p);
  const VectorField v = read_vector_frame(m, 0);
  for (float x : v.vx()) EXPECT_EQ(x, 0.f);
  EXPECT_EQ(v.dims(), d);
  EXPECT_THROW(read_scalar_frame(m, 0), Error);
}

TEST(Frames, NonFiniteRejectedWithPosition) {
  const auto dir = fresh_dir("io_nan");
  std::vector<float> vals(8, 1.f);
  vals[5] = std::numeric_limits<float>::infinity();
  Bytes raw(reinterpret_cast<const std::uint8_t*>(vals.data()),
            reinterpret_cast<const std::uint8_t*>(vals.data()) + 32);
  write_bytes(dir / "s_0.f32", raw);
  std::ofstream(dir / "manifest.json") << R"({"frame_count": 1, "scalar": {"dims": [2,2,2], "pattern": "s_%d.f32"}})";
  const DatasetManifest m = read_manifest(dir);
  EXPECT_EQ(error_of([&] { read_scalar_frame(m, 0); }), ErrorCode::bad_value);
  EXPECT_NE(message_of([&] { read_scalar_frame(m, 0); }).find("(1,0,1)"), std::string::npos);
}

TEST(Frames, ReadWriteReadIsByteIdentical) {
  const auto dir = fresh_dir("io_rwr");
  DatasetWriter w(dir, "r", 3);
  w.scalars(three_frames());
  w.finish();
  const DatasetManifest m = read_manifest(dir);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_EQ(encode_scalar_frame(read_scalar_frame(m, k)), read_binary_file(m.frame_path(Modality::scalar, k)));
}

TEST(Obj, SingleTriangle) {
  TriangleMesh m;
  m.vertices = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.normals.assign(3, {0.57735, 0.57735, 0.57735});
  m.uvs.assign(3, {0, 0});
  m.triangles = {{0, 1, 2}};
  const std::string obj = write_obj(m);
  std::size_t v = 0, vt = 0, vn = 0, f = 0;
  std::istringstream in(obj);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("vt ", 0) == 0) ++vt;
    if (line.rfind("vn ", 0) == 0) ++vn;
    if (line.rfind("f ", 0) == 0) {
      ++f;
      EXPECT_EQ(line, "f 1/1/1 2/2/2 3/3/3");
    }
  }
  EXPECT_EQ(v, 3u);
  EXPECT_EQ(vt, 3u);
  EXPECT_EQ(vn, 3u);
  EXPECT_EQ(f, 1u);
  EXPECT_NE(obj.find("v 1.000000 0.000000 0.000000\n"), std::string::npos);
}

TEST(Obj, EmptyMeshIsHeaderOnly) {
  const std::string obj = write_obj(TriangleMesh{});
  EXPECT_EQ(obj.front(), '#');
  EXPECT_EQ(std::count(obj.begin(), obj.end(), '\n'), 1);
}

TEST(Obj, ReparseAndStability) {
  const ScalarField f = sphere_field(cube_dims(12, 0.37), {2, 2, 2}, 1.3);
  const TriangleMesh m = flying_edges(f, 0.0);
  const std::string obj = write_obj(m);
  EXPECT_EQ(obj, write_obj(m));
  const TriangleMesh back = read_obj(obj);
  ASSERT_EQ(back.vertex_count(), m.vertex_count());
  EXPECT_EQ(back.triangles, m.triangles);
  for (std::size_t n = 0; n < m.vertex_count(); ++n)
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(back.vertices[n][c], m.vertices[n][c], 5e-7);
      EXPECT_NEAR(back.normals[n][c], m.normals[n][c], 5e-7);
    }
}

TEST(Obj, LineSets) {
  std::vector<Streamline> lines(3);
  lines[0].points = {{{0, 0, 0}, 1}, {{1, 0, 0}, 1}};
  lines[1].points = {{{5, 5, 5}, 0}};
  lines[2].points = {{{0, 1, 0}, 2}, {{0, 2, 0}, 2}, {{0, 3, 0}, 2}};
  const std::string obj = write_obj_lines(lines);
  EXPECT_NE(obj.find("\nl 1 2\n"), std::string::npos);
  EXPECT_NE(obj.find("\nl 3 4 5\n"), std::string::npos);
  EXPECT_EQ(obj.find("5.000000"), std::string::npos);
}

TEST(Png, OneWhitePixel) {
  const Bytes png = write_png(1, 1, std::vector<Rgb>{{255, 255, 255}});
  std::size_t w = 0, h = 0;
  const auto px = png_decode(png, w, h);
  ASSERT_EQ(px.size(), 1u);
  EXPECT_EQ(px[0], (Rgb{255, 255, 255}));
}

TEST(Png, RandomImageRoundtripsThroughLibpng) {
  std::mt19937_64 rng(77);
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{17, 5}, {1, 40}, {64, 64}}) {
    std::vector<Rgb> img(w * h);
    for (Rgb& p : img) p = {std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
    std::size_t dw = 0, dh = 0;
    EXPECT_EQ(png_decode(write_png(w, h, img), dw, dh), img);
    EXPECT_EQ(dw, w);
    EXPECT_EQ(dh, h);
  }
}

TEST(Png, ConstantHeatmapIsSingleColor) {
  const ScalarField c = make_scalar(cube_dims(6), [](auto, auto, auto) { return 1.0; });
  const SliceHeatmap hm = render_heatmap(extract_slice(c, {Axis::z, 2}), ColorGradient::default_ramp(), 1.0, 1.0);
  std::size_t w = 0, h = 0;
  const auto px = png_decode(write_png(hm), w, h);
  ASSERT_EQ(px.size(), 36u);
  for (const Rgb& p : px) EXPECT_EQ(p, px[0]);
}

TEST(Framing, ChunksRoundtripAndRejectGarbage) {
  std::vector<Chunk> chunks(2);
  chunks[0].tag = {'A', 'B', 'C', 'D'};
  chunks[0].payload = {1, 2, 3};
  chunks[1].tag = {'E', 'F', 'G', 'H'};
  const Bytes b = encode_chunks(chunks);
  EXPECT_EQ(b.size(), 8u + 12 + 3 + 12);
  const auto back = decode_chunks(b);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].payload, chunks[0].payload);
  EXPECT_EQ(back[1].tag, chunks[1].tag);
  Bytes cut(b.begin(), b.end() - 1);
  EXPECT_THROW(decode_chunks(cut), Error);
  EXPECT_THROW(decode_chunks(Bytes{'X', 'Y', 'Z', '1', 0, 0, 0, 0}), Error);
}

TEST(Framing, MeshLinesTexturePayloads) {
  const ScalarField f = sphere_field(cube_dims(10), {4.5, 4.5, 4.5}, 3);
  const TriangleMesh m = flying_edges(f, 0.0);
  const TriangleMesh back = decode_mesh_payload(encode_mesh_payload(m));
  EXPECT_EQ(back.triangles, m.triangles);
  for (std::size_t n = 0; n < m.vertex_count(); ++n)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(back.vertices[n][c], static_cast<float>(m.vertices[n][c]));
  EXPECT_TRUE(decode_mesh_payload(encode_mesh_payload(TriangleMesh{})).empty());

  std::vector<Streamline> lines(2);
  lines[0].points = {{{1, 2, 3}, 4}, {{5, 6, 7}, 8}};
  lines[0].termination = Termination::stagnation;
  lines[1].points = {{{0.5, 0.25, 0.125}, 1}};
  const auto lb = decode_lines_payload(encode_lines_payload(lines));
  ASSERT_EQ(lb.size(), 2u);
  EXPECT_EQ(lb[0].points, lines[0].points);
  EXPECT_EQ(lb[0].termination, Termination::stagnation);
  EXPECT_EQ(lb[1].points, lines[1].points);

  ParticleFrame p;
  p.positions = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  p.scalar = {0.5f, -1.f, 2.f};
  const ParticleTexture t = encode_texture(p, 2);
  const ParticleTexture tb = decode_texture_payload(encode_texture_payload(t));
  EXPECT_EQ(tb.resolution, 2u);
  EXPECT_EQ(tb.occupancy, 3u);
  EXPECT_EQ(decode_texture(tb), p);
  EXPECT_TRUE(std::isnan(tb.texels[12]));
}

TEST(Files, AtomicWriteReplaces) {
  const auto dir = fresh_dir("io_atomic");
  write_file_atomic(dir / "a.txt", std::string_view("one"));
  write_file_atomic(dir / "a.txt", std::string_view("two"));
  EXPECT_EQ(read_text_file(dir / "a.txt"), "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
}
