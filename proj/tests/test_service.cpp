#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "dataset_support.hpp"
#include "httplib.h"
#include "plasmaviz/annotate_json.hpp"
#include "plasmaviz/service.hpp"
#include "support.hpp"

using namespace plasmaviz;
using namespace testsupport;
using nlohmann::json;

namespace {

struct VirtualClock {
  std::shared_ptr<std::atomic<double>> now = std::make_shared<std::atomic<double>>(100.0);
  Clock clock() const {
    auto n = now;
    return [n] { return n->load(); };
  }
  void advance(double s) { now->store(now->load() + s); }
};

fs::path make_dataset(const std::string& name, std::size_t frames, bool all = false, std::size_t n = 12) {
  const fs::path dir = fresh_dir(name);
  DatasetWriter w(dir, name, frames);
  std::vector<ScalarField> scalars;
  for (std::size_t k = 0; k < frames; ++k)
    scalars.push_back(sphere_field(cube_dims(n), {5.5, 5.5, 5.5}, 3.0 + 0.5 * static_cast<double>(k)));
  w.scalars(scalars);
  if (all) {
    std::vector<VectorField> vectors;
    std::vector<ParticleFrame> particles;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(0.f, 10.f);
    for (std::size_t k = 0; k < frames; ++k) {
      const GridDims d = cube_dims(8);
      std::vector<float> vx(d.node_count(), 1.f), vy(d.node_count(), 0.25f), vz(d.node_count(), 0.f);
      vectors.emplace_back(d, vx, vy, vz);
      ParticleFrame p;
      for (int i = 0; i < 300; ++i) {
        p.positions.push_back({u(rng), u(rng), u(rng)});
        p.scalar.push_back(u(rng));
      }
      particles.push_back(std::move(p));
    }
    w.vectors(vectors);
    w.particles(particles);
  }
  w.finish();
  return dir;
}

Request get(std::string path, std::map<std::string, std::string> query = {}) {
  return {"GET", std::move(path), std::move(query), ""};
}

Request send(std::string method, std::string path, const json& body) {
  return {std::move(method), std::move(path), {}, body.dump()};
}

std::string code_of(const Response& r) { return json::parse(r.body)["error"]["code"].get<std::string>(); }

}  // namespace

TEST(Playback, PauseSeek) {
  VirtualClock vc;
  Playback p(8, vc.clock());
  p.play();
  vc.advance(0.35);
  p.pause();
  const auto s = p.seek(5);
  EXPECT_EQ(s.frame, 5u);
  EXPECT_FALSE(s.playing);
  vc.advance(3.0);
  EXPECT_EQ(p.state().frame, 5u);
}

TEST(Playback, TenFpsForOneSecondOnFourFrames) {
  for (std::size_t start = 0; start < 4; ++start) {
    VirtualClock vc;
    Playback p(4, vc.clock(), 10.0);
    p.seek(start);
    p.play();
    vc.advance(1.0);
    EXPECT_EQ(p.state().frame, (start + 2) % 4);
  }
}

TEST(Playback, SeekPastEndAndBadRate) {
  VirtualClock vc;
  Playback p(4, vc.clock());
  try {
    p.seek(4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
  EXPECT_THROW(p.set_rate(0.0), Error);
  EXPECT_THROW(p.set_rate(-1.0), Error);
  EXPECT_THROW(p.set_rate(std::numeric_limits<double>::infinity()), Error);
}

TEST(Playback, SeekKeepsPlayingAndWrapsMonotonically) {
  VirtualClock vc;
  Playback p(5, vc.clock(), 4.0);
  p.play();
  p.seek(3);
  EXPECT_TRUE(p.state().playing);
  std::size_t prev = p.state().frame, steps = 0;
  for (int i = 0; i < 40; ++i) {
    vc.advance(0.1);
    const std::size_t f = p.state().frame;
    steps += (f + 5 - prev) % 5;
    EXPECT_LE((f + 5 - prev) % 5, 1u);
    prev = f;
  }
  EXPECT_EQ(steps, 16u);
}

TEST(Playback, RateChangeKeepsCurrentFrame) {
  VirtualClock vc;
  Playback p(100, vc.clock(), 10.0);
  p.play();
  vc.advance(1.0);
  EXPECT_EQ(p.set_rate(2.0).frame, 10u);
  vc.advance(1.0);
  EXPECT_EQ(p.state().frame, 12u);
}

TEST(Service, LoadSummaries) {
  ExplorerService svc;
  EXPECT_EQ(code_of(svc.handle(get("/frames/0/stats"))), "no_session");
  const auto dir = make_dataset("svc_summary", 3);
  const json s = svc.load_dataset(dir);
  EXPECT_EQ(s["frames"], 3);
  EXPECT_EQ(s["scalar"]["dims"], json({12, 12, 12}));
  EXPECT_EQ(s["modalities"], json({"scalar"}));

  const auto all = make_dataset("svc_summary_all", 2, true);
  const Response r = svc.handle(send("POST", "/session/load", {{"path", all.string()}}));
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(json::parse(r.body)["modalities"], json({"scalar", "vector", "particles"}));

  const Response missing = svc.handle(send("POST", "/session/load", {{"path", (dir / "nope").string()}}));
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(code_of(missing), "not_found");
}

TEST(Service, SliceCachedAndIdentical) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_slice", 2));
  const Response a = svc.handle(get("/frames/1/slice/z/4"));
  const Response b = svc.handle(get("/frames/1/slice/z/4"));
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.content_type, "image/png");
  EXPECT_FALSE(a.cached);
  EXPECT_TRUE(b.cached);
  EXPECT_EQ(a.body, b.body);

  const ScalarField f = read_scalar_frame(read_manifest(fs::temp_directory_path() / "plasmaviz_svc_slice"), 1);
  const Bytes direct = slice_png(f, {Axis::z, 4}, field_minmax(f));
  EXPECT_EQ(a.body, std::string(direct.begin(), direct.end()));
  EXPECT_NE(svc.handle(get("/frames/1/slice/z/4", {{"scope", "dataset"}})).body, a.body);
}

TEST(Service, MeshOutsideRangeIsEmpty) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_mesh", 1));
  const Response r = svc.handle(get("/frames/0/mesh", {{"iso", "1000"}}));
  ASSERT_EQ(r.status, 200) << r.body;
  const TriangleMesh m = decode_mesh_payload({reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()});
  EXPECT_EQ(m.triangle_count(), 0u);

  const Response obj = svc.handle(get("/frames/0/mesh", {{"iso", "0"}, {"ratio", "1"}, {"format", "obj"}}));
  ASSERT_EQ(obj.status, 200);
  const Response bin = svc.handle(get("/frames/0/mesh", {{"iso", "0"}, {"ratio", "1"}}));
  const TriangleMesh a = read_obj(obj.body);
  const TriangleMesh b = decode_mesh_payload({reinterpret_cast<const std::uint8_t*>(bin.body.data()), bin.body.size()});
  EXPECT_GT(b.triangle_count(), 100u);
  EXPECT_TRUE(same_triangles(a, b, 1e-5));
}

TEST(Service, ParticleCapacityError) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_particles", 1, true));
  const Response ok = svc.handle(get("/frames/0/particles", {{"fraction", "1"}, {"res", "32"}}));
  ASSERT_EQ(ok.status, 200) << ok.body;
  const auto tex = decode_texture_payload({reinterpret_cast<const std::uint8_t*>(ok.body.data()), ok.body.size()});
  EXPECT_EQ(tex.occupancy, 300u);

  const Response bad = svc.handle(get("/frames/0/particles", {{"fraction", "1"}, {"res", "16"}}));
  EXPECT_EQ(bad.status, 422);
  EXPECT_EQ(code_of(bad), "capacity_exceeded");
  const std::string msg = json::parse(bad.body)["error"]["message"];
  EXPECT_NE(msg.find("300"), std::string::npos);
  EXPECT_NE(msg.find("256"), std::string::npos);
}

TEST(Service, StreamlinesAndErrors) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_lines", 2, true));
  const Response r = svc.handle(get("/frames/0/streamlines", {{"stride", "4"}, {"h", "0.5"}}));
  ASSERT_EQ(r.status, 200) << r.body;
  const auto lines = decode_lines_payload({reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()});
  EXPECT_EQ(lines.size(), 8u);
  EXPECT_EQ(svc.handle(get("/frames/9/stats")).status, 400);
  EXPECT_EQ(svc.handle(get("/frames/x/stats")).status, 400);
  EXPECT_EQ(svc.handle(get("/frames/0/streamlines", {{"h", "-1"}})).status, 400);
  EXPECT_EQ(svc.handle(get("/frames/0/slice/w/0")).status, 400);
  EXPECT_EQ(svc.handle(get("/frames/0/slice/z/99")).status, 400);
  EXPECT_EQ(svc.handle(get("/nowhere")).status, 404);
}

TEST(Service, PlaybackEndpoints) {
  VirtualClock vc;
  ServiceConfig cfg;
  cfg.clock = vc.clock();
  ExplorerService svc(cfg);
  svc.load_dataset(make_dataset("svc_playback", 4, false, 6));
  svc.handle(send("POST", "/playback", {{"command", "pause"}}));
  Response r = svc.handle(send("POST", "/playback", {{"command", "seek"}, {"frame", 3}}));
  EXPECT_EQ(json::parse(r.body)["frame"], 3);
  EXPECT_EQ(json::parse(r.body)["playing"], false);
  svc.handle(send("POST", "/playback", {{"command", "play"}}));
  vc.advance(1.0);
  EXPECT_EQ(json::parse(svc.handle(get("/playback")).body)["frame"], 1);
  EXPECT_EQ(svc.handle(send("POST", "/playback", {{"command", "seek"}, {"frame", 4}})).status, 400);
  EXPECT_EQ(svc.handle(send("POST", "/playback", {{"command", "set_rate"}, {"fps", 0}})).status, 400);
  EXPECT_EQ(svc.handle(send("POST", "/playback", {{"command", "rewind"}})).status, 400);
}

TEST(Service, AnnotationsMatchStore) {
  const auto dir = make_dataset("svc_annot", 8, false, 6);
  ServiceConfig cfg;
  ExplorerService svc(cfg);
  svc.load_dataset(dir);
  AnnotationStore direct(8);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const std::int64_t a = static_cast<std::int64_t>(rng() % 8), b = a + static_cast<std::int64_t>(rng() % (8 - a));
    const json body = {{"group", i % 2 ? "odd" : "even"},
                       {"color", {1, 2, 3}},
                       {"frame_start", a},
                       {"frame_end", b},
                       {"strokes", {{{0, 0, 0}, {1, 1, 1}}}}};
    const Response r = svc.handle(send("POST", "/annotations", body));
    ASSERT_EQ(r.status, 201) << r.body;
    direct.create(annotation_from_json(body, false));
  }
  for (std::int64_t f = 0; f < 8; ++f) {
    const json v = json::parse(svc.handle(get("/annotations/visible", {{"frame", std::to_string(f)}})).body);
    json expect = json::array();
    for (const auto& a : direct.visible_at(f)) expect.push_back(annotation_to_json(a));
    EXPECT_EQ(v["annotations"], expect);
  }
  EXPECT_EQ(svc.handle(get("/annotations/visible", {{"frame", "8"}})).status, 400);
  EXPECT_EQ(json::parse(svc.handle(get("/annotations", {{"group", "odd"}})).body)["annotations"].size(), 10u);

  const Response patch = svc.handle(send("PATCH", "/annotations/1", {{"frame_end", 7}}));
  EXPECT_EQ(patch.status, 200) << patch.body;
  EXPECT_EQ(svc.handle(send("PATCH", "/annotations/1", {{"frame_end", 9}})).status, 400);
  EXPECT_EQ(svc.handle(send("PATCH", "/annotations/1", {{"bogus", 1}})).status, 400);
  EXPECT_EQ(svc.handle({"DELETE", "/annotations/2", {}, ""}).status, 200);
  const Response gone = svc.handle({"DELETE", "/annotations/999", {}, ""});
  EXPECT_EQ(gone.status, 404);
  EXPECT_EQ(code_of(gone), "not_found");

  // Flushed after each mutation; a fresh session sees the same store.
  const AnnotationStore on_disk = AnnotationStore::load(dir / "annotations.json", 8);
  EXPECT_EQ(on_disk.list().size(), 19u);
  ExplorerService again;
  again.load_dataset(dir);
  EXPECT_EQ(svc.handle(get("/annotations")).body, again.handle(get("/annotations")).body);
}

TEST(Service, ConcurrentCreateAndListNeverTorn) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_annot_conc", 4, false, 6));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      const json l = json::parse(svc.handle(get("/annotations")).body);
      const auto rev = l["revision"].get<std::uint64_t>();
      if (l["annotations"].size() != rev) ++bad;
      for (const auto& a : l["annotations"])
        if (a["strokes"].size() != 3 || a["frame_start"] != 1 || a["frame_end"] != 2) ++bad;
    }
  });
  for (int i = 0; i < 60; ++i) {
    const json body = {{"color", {9, 9, 9}},
                       {"frame_start", 1},
                       {"frame_end", 2},
                       {"strokes", json::parse("[[[0,0,0],[1,0,0]],[[1,1,1],[2,1,1]],[[2,2,2],[3,2,2]]]")}};
    ASSERT_EQ(svc.handle(send("POST", "/annotations", body)).status, 201);
  }
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Service, DeduplicatesInflightAndVerifies) {
  ServiceConfig cfg;
  cfg.verify_every = 1;
  ExplorerService svc(cfg);
  svc.load_dataset(make_dataset("svc_dedup", 1, false, 24));
  std::vector<std::thread> threads;
  std::vector<std::string> bodies(4);
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] { bodies[t] = svc.handle(get("/frames/0/mesh", {{"iso", "0.1"}})).body; });
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
  CacheStats s = svc.cache_stats();
  EXPECT_EQ(s.computations, 1u);
  EXPECT_EQ(s.misses, 1u);
  EXPECT_EQ(s.hits + s.shared_inflight, 3u);
  svc.handle(get("/frames/0/mesh", {{"iso", "0.1"}}));
  s = svc.cache_stats();
  EXPECT_GE(s.verified, 1u);
  EXPECT_EQ(s.verify_mismatches, 0u);
}

TEST(Service, FailedComputationsAreNotCached) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_nocache", 1, true));
  EXPECT_EQ(svc.handle(get("/frames/0/particles", {{"res", "8"}})).status, 422);
  EXPECT_EQ(svc.cache_stats().entries, 0u);
}

TEST(Service, PrecomputeFillsMeshCache) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_pre", 3, false, 10));
  const Response r = svc.handle(send("POST", "/session/precompute", {{"iso", 0.0}}));
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(json::parse(r.body)["computed"], 3);
  EXPECT_TRUE(svc.handle(get("/frames/2/mesh", {{"iso", "0"}})).cached);
}

TEST(Service, CacheEvictsOldest) {
  ServiceConfig cfg;
  cfg.cache_capacity = 2;
  ExplorerService svc(cfg);
  svc.load_dataset(make_dataset("svc_evict", 1, false, 8));
  svc.handle(get("/frames/0/slice/x/0"));
  svc.handle(get("/frames/0/slice/x/1"));
  svc.handle(get("/frames/0/slice/x/2"));
  EXPECT_EQ(svc.cache_stats().entries, 2u);
  EXPECT_FALSE(svc.handle(get("/frames/0/slice/x/0")).cached);
  EXPECT_TRUE(svc.handle(get("/frames/0/slice/x/2")).cached);
}

TEST(HttpServer, RoundTripAndEvents) {
  ExplorerService svc;
  svc.load_dataset(make_dataset("svc_http", 2, false, 8));
  HttpServer server(svc);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);

  auto a = cli.Get("/frames/0/slice/y/3");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(a->get_header_value("X-Cache"), "miss");
  EXPECT_EQ(a->get_header_value("Access-Control-Allow-Origin"), "*");
  auto b = cli.Get("/frames/0/slice/y/3");
  ASSERT_TRUE(b);
  EXPECT_EQ(b->get_header_value("X-Cache"), "hit");
  EXPECT_EQ(a->body, b->body);

  auto seek = cli.Post("/playback", R"({"command":"seek","frame":1})", "application/json");
  ASSERT_TRUE(seek);
  EXPECT_EQ(json::parse(seek->body)["frame"], 1);
  auto bad = cli.Get("/frames/7/stats");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "out_of_range");

  auto ev = cli.Get("/playback/events?once=1");
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->get_header_value("Content-Type"), "text/event-stream");
  const auto pos = ev->body.find("data: ");
  ASSERT_NE(pos, std::string::npos);
  const auto end = ev->body.find('\n', pos);
  EXPECT_EQ(json::parse(ev->body.substr(pos + 6, end - pos - 6))["frame"], 1);
  server.stop();
}
