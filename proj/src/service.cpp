#include "plasmaviz/service.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

#include "plasmaviz/annotate_json.hpp"
#include "plasmaviz/error.hpp"

namespace plasmaviz {

using nlohmann::json;
namespace fs = std::filesystem;

Clock steady_clock_seconds() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

// ---------------------------------------------------------------------------
// Playback

Playback::Playback(std::size_t frame_count, Clock clock, double fps)
    : frame_count_(frame_count), clock_(clock ? std::move(clock) : steady_clock_seconds()), fps_(fps) {
  if (frame_count_ == 0) throw Error(ErrorCode::invalid_argument, "playback needs at least one frame");
  if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw Error(ErrorCode::invalid_argument, "fps must be positive");
  anchor_time_ = clock_();
}

std::size_t Playback::frame_at(double now) const {
  if (!playing_) return anchor_frame_;
  const double elapsed = std::max(0.0, now - anchor_time_);
  // Tiny slack so that e.g. 1.0 s at 10 fps is 10 steps despite rounding.
  const auto steps = static_cast<std::uint64_t>(std::floor(elapsed * fps_ + 1e-9));
  return static_cast<std::size_t>((anchor_frame_ + steps) % frame_count_);
}

PlaybackState Playback::state() const {
  std::lock_guard lock(mutex_);
  return {frame_at(clock_()), playing_, fps_};
}

PlaybackState Playback::play() {
  std::lock_guard lock(mutex_);
  const double now = clock_();
  if (!playing_) {
    anchor_time_ = now;
    playing_ = true;
  }
  return {frame_at(now), playing_, fps_};
}

PlaybackState Playback::pause() {
  std::lock_guard lock(mutex_);
  const double now = clock_();
  anchor_frame_ = frame_at(now);
  anchor_time_ = now;
  playing_ = false;
  return {anchor_frame_, playing_, fps_};
}

PlaybackState Playback::seek(std::size_t frame) {
  if (frame >= frame_count_)
    throw Error(ErrorCode::out_of_range,
                "seek target " + std::to_string(frame) + " outside 0.." + std::to_string(frame_count_ - 1));
  std::lock_guard lock(mutex_);
  anchor_frame_ = frame;
  anchor_time_ = clock_();
  return {anchor_frame_, playing_, fps_};
}

PlaybackState Playback::set_rate(double fps) {
  if (!(fps > 0.0) || !std::isfinite(fps))
    throw Error(ErrorCode::invalid_argument, "fps must be positive and finite");
  std::lock_guard lock(mutex_);
  const double now = clock_();
  anchor_frame_ = frame_at(now);
  anchor_time_ = now;
  fps_ = fps;
  return {anchor_frame_, playing_, fps_};
}

// ---------------------------------------------------------------------------
// Errors

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::out_of_range:
    case ErrorCode::validation: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::no_session: return 409;
    case ErrorCode::capacity_exceeded:
    case ErrorCode::size_mismatch:
    case ErrorCode::bad_value:
    case ErrorCode::unknown_modality: return 422;
    case ErrorCode::io: return 500;
  }
  return 500;
}

std::string error_body(ErrorCode code, std::string_view message) {
  return json{{"error", {{"code", error_code_name(code)}, {"message", message}}}}.dump();
}

// ---------------------------------------------------------------------------
// Session

struct ExplorerService::Session {
  DatasetManifest manifest;
  std::unique_ptr<FrameSeries<ScalarField>> scalars;
  std::unique_ptr<FrameSeries<VectorField>> vectors;
  std::unique_ptr<FrameSeries<ParticleFrame>> particles;
  fs::path annotations_path;
  AnnotationStore annotations;
  Playback playback;

  std::mutex cache_mutex;
  std::map<std::string, std::shared_future<std::shared_ptr<const Payload>>> cache;
  std::deque<std::string> order;
  CacheStats stats;
  std::size_t hits_since_verify = 0;

  std::mutex range_mutex;
  std::map<std::size_t, std::shared_future<MinMax>> frame_ranges;
  std::optional<std::shared_future<MinMax>> dataset_range;

  Session(DatasetManifest m, const ServiceConfig& cfg)
      : manifest(std::move(m)),
        annotations(static_cast<std::int64_t>(manifest.frame_count)),
        playback(manifest.frame_count, cfg.clock, cfg.default_fps) {
    const DatasetManifest* man = &manifest;
    if (manifest.has(Modality::scalar))
      scalars = std::make_unique<FrameSeries<ScalarField>>(
          manifest.frame_count, cfg.load_policy,
          [man](std::size_t k) { return std::make_shared<const ScalarField>(read_scalar_frame(*man, k)); },
          cfg.resident_frames);
    if (manifest.has(Modality::vector))
      vectors = std::make_unique<FrameSeries<VectorField>>(
          manifest.frame_count, cfg.load_policy,
          [man](std::size_t k) { return std::make_shared<const VectorField>(read_vector_frame(*man, k)); },
          cfg.resident_frames);
    if (manifest.has(Modality::particles))
      particles = std::make_unique<FrameSeries<ParticleFrame>>(
          manifest.frame_count, cfg.load_policy,
          [man](std::size_t k) { return std::make_shared<const ParticleFrame>(read_particle_frame(*man, k)); },
          cfg.resident_frames);
    annotations_path = cfg.annotations_path ? *cfg.annotations_path : manifest.root / "annotations.json";
    if (fs::exists(annotations_path))
      annotations = AnnotationStore::load(annotations_path, static_cast<std::int64_t>(manifest.frame_count));
  }

  void check_frame(std::size_t frame) const {
    if (frame >= manifest.frame_count)
      throw Error(ErrorCode::out_of_range, "frame " + std::to_string(frame) + " outside 0.." +
                                               std::to_string(manifest.frame_count - 1));
  }

  template <typename T>
  std::shared_ptr<const T> frame_of(const std::unique_ptr<FrameSeries<T>>& series, Modality m, std::size_t frame) {
    check_frame(frame);
    if (!series) throw Error(ErrorCode::not_found, "dataset has no " + std::string(modality_name(m)) + " modality");
    return series->get(frame);
  }

  MinMax range_for(std::size_t frame) {
    check_frame(frame);
    std::shared_future<MinMax> fut;
    std::promise<MinMax> promise;
    bool owner = false;
    {
      std::lock_guard lock(range_mutex);
      auto it = frame_ranges.find(frame);
      if (it == frame_ranges.end()) {
        fut = promise.get_future().share();
        frame_ranges.emplace(frame, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(field_minmax(*frame_of(scalars, Modality::scalar, frame)));
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(range_mutex);
        frame_ranges.erase(frame);
      }
    }
    return fut.get();
  }

  MinMax global_range() {
    std::shared_future<MinMax> fut;
    std::promise<MinMax> promise;
    bool owner = false;
    {
      std::lock_guard lock(range_mutex);
      if (dataset_range) {
        fut = *dataset_range;
      } else {
        fut = promise.get_future().share();
        dataset_range = fut;
        owner = true;
      }
    }
    if (owner) {
      try {
        MinMax out{};
        for (std::size_t k = 0; k < manifest.frame_count; ++k) {
          const MinMax m = range_for(k);
          out = k == 0 ? m : MinMax{std::min(out.min, m.min), std::max(out.max, m.max)};
        }
        promise.set_value(out);
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(range_mutex);
        dataset_range.reset();
      }
    }
    return fut.get();
  }
};

namespace {

json dims_json(const GridDims& d) {
  return {{"dims", {d.nx, d.ny, d.nz}},
          {"spacing", {d.dx, d.dy, d.dz}},
          {"origin", {d.origin[0], d.origin[1], d.origin[2]}}};
}

json playback_json(const PlaybackState& s, std::size_t frame_count) {
  return {{"frame", s.frame}, {"playing", s.playing}, {"fps", s.fps}, {"frame_count", frame_count}};
}

std::string number_key(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string bytes_to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

}  // namespace

ExplorerService::ExplorerService(ServiceConfig config) : config_(std::move(config)) {
  if (!config_.clock) config_.clock = steady_clock_seconds();
}

ExplorerService::~ExplorerService() = default;

std::shared_ptr<ExplorerService::Session> ExplorerService::session() const {
  std::shared_lock lock(session_mutex_);
  if (!session_) throw Error(ErrorCode::no_session, "no dataset loaded; POST /session/load first");
  return session_;
}

json ExplorerService::load_dataset(const fs::path& path) {
  DatasetManifest manifest = read_manifest(path);
  auto fresh = std::make_shared<Session>(std::move(manifest), config_);
  if (config_.eager_minmax && fresh->scalars) {
    for (std::size_t k = 0; k < fresh->manifest.frame_count; ++k) fresh->range_for(k);
  }
  {
    std::unique_lock lock(session_mutex_);
    session_ = std::move(fresh);
  }
  return session_summary();
}

json ExplorerService::session_summary() const {
  std::shared_ptr<Session> s;
  {
    std::shared_lock lock(session_mutex_);
    s = session_;
  }
  if (!s) return {{"loaded", false}};
  const DatasetManifest& m = s->manifest;
  json out = {{"loaded", true}, {"name", m.name}, {"root", m.root.string()}, {"frames", m.frame_count}};
  json modalities = json::array();
  if (m.scalar) {
    modalities.push_back("scalar");
    out["scalar"] = dims_json(m.scalar->dims);
  }
  if (m.vector) {
    modalities.push_back("vector");
    out["vector"] = dims_json(m.vector->dims);
  }
  if (m.particles) {
    modalities.push_back("particles");
    out["particles"] = {{"counts", m.particles->counts}};
  }
  out["modalities"] = modalities;
  out["playback"] = playback_json(s->playback.state(), m.frame_count);
  out["heatmap_scope"] = config_.heatmap_scope == HeatmapScope::frame ? "frame" : "dataset";
  out["annotations"] = {{"revision", s->annotations.revision()}, {"path", s->annotations_path.string()}};
  const CacheStats c = cache_stats();
  out["cache"] = {{"entries", c.entries},       {"hits", c.hits},
                  {"misses", c.misses},         {"computations", c.computations},
                  {"shared_inflight", c.shared_inflight}, {"verified", c.verified},
                  {"verify_mismatches", c.verify_mismatches}};
  return out;
}

CacheStats ExplorerService::cache_stats() const {
  std::shared_ptr<Session> s;
  {
    std::shared_lock lock(session_mutex_);
    s = session_;
  }
  if (!s) return {};
  std::lock_guard lock(s->cache_mutex);
  CacheStats out = s->stats;
  out.entries = s->cache.size();
  return out;
}

ExplorerService::Result ExplorerService::cached(Session& s, const std::string& key,
                                                const std::function<Payload()>& compute) {
  std::shared_future<std::shared_ptr<const Payload>> fut;
  std::promise<std::shared_ptr<const Payload>> promise;
  bool owner = false, verify = false;
  {
    std::lock_guard lock(s.cache_mutex);
    auto it = s.cache.find(key);
    if (it != s.cache.end()) {
      fut = it->second;
      if (fut.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
        ++s.stats.hits;
        if (config_.verify_every > 0 && ++s.hits_since_verify >= config_.verify_every) {
          s.hits_since_verify = 0;
          verify = true;
        }
      } else {
        ++s.stats.shared_inflight;
      }
    } else {
      fut = promise.get_future().share();
      s.cache.emplace(key, fut);
      s.order.push_back(key);
      ++s.stats.misses;
      owner = true;
      while (s.cache.size() > std::max<std::size_t>(1, config_.cache_capacity) && !s.order.empty()) {
        s.cache.erase(s.order.front());
        s.order.pop_front();
      }
    }
  }
  if (owner) {
    try {
      auto payload = std::make_shared<const Payload>(compute());
      {
        std::lock_guard lock(s.cache_mutex);
        ++s.stats.computations;
      }
      promise.set_value(std::move(payload));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(s.cache_mutex);
      // Errors are not cached.
      if (auto it = s.cache.find(key); it != s.cache.end()) {
        s.cache.erase(it);
        for (auto o = s.order.begin(); o != s.order.end(); ++o) {
          if (*o == key) {
            s.order.erase(o);
            break;
          }
        }
      }
    }
  }
  std::shared_ptr<const Payload> payload = fut.get();
  if (payload->key != key) throw Error(ErrorCode::validation, "cache entry key mismatch for " + key);
  if (verify) {
    const Payload fresh = compute();
    std::lock_guard lock(s.cache_mutex);
    ++s.stats.verified;
    if (fresh.bytes != payload->bytes) ++s.stats.verify_mismatches;
  }
  return {payload, !owner};
}

MinMax ExplorerService::frame_minmax(std::size_t frame) { return session()->range_for(frame); }

ExplorerService::Result ExplorerService::get_mesh(std::size_t frame, const IsoParams& params, bool obj) {
  auto s = session();
  s->check_frame(frame);
  const std::string key = "mesh|" + std::to_string(frame) + "|" + number_key(params.isovalue) + "|" +
                          number_key(params.ratio) + "|" + std::to_string(static_cast<int>(params.uv_mode)) +
                          (obj ? "|obj" : "|bin");
  return cached(*s, key, [&] {
    auto field = s->frame_of(s->scalars, Modality::scalar, frame);
    IsoParams p = params;
    p.workers = config_.workers;
    const TriangleMesh mesh = extract_isosurface(*field, p);
    Payload out;
    out.key = key;
    if (obj) {
      out.content_type = "model/obj";
      out.bytes = write_obj(mesh);
    } else {
      out.content_type = "application/octet-stream";
      out.bytes = bytes_to_string(encode_mesh_payload(mesh));
    }
    out.headers = {{"X-Vertices", std::to_string(mesh.vertex_count())},
                   {"X-Triangles", std::to_string(mesh.triangle_count())}};
    return out;
  });
}

std::size_t ExplorerService::precompute_meshes(const IsoParams& params) {
  const std::size_t frames = session()->manifest.frame_count;
  std::size_t computed = 0;
  for (std::size_t k = 0; k < frames; ++k)
    if (!get_mesh(k, params).cached) ++computed;
  return computed;
}

ExplorerService::Result ExplorerService::get_streamlines(std::size_t frame, const LineParams& params, bool obj) {
  auto s = session();
  s->check_frame(frame);
  params.trace.validate();
  const std::string key = "lines|" + std::to_string(frame) + "|" + std::to_string(params.stride[0]) + "," +
                          std::to_string(params.stride[1]) + "," + std::to_string(params.stride[2]) + "|" +
                          number_key(params.trace.step) + "|" + std::to_string(params.trace.max_steps) + "|" +
                          number_key(params.trace.stagnation_eps) + "|" +
                          std::to_string(static_cast<int>(params.trace.direction)) + (obj ? "|obj" : "|bin");
  return cached(*s, key, [&] {
    auto field = s->frame_of(s->vectors, Modality::vector, frame);
    LineParams p = params;
    p.workers = config_.workers;
    const auto lines = trace_lattice(*field, p);
    Payload out;
    out.key = key;
    if (obj) {
      out.content_type = "model/obj";
      out.bytes = write_obj_lines(lines);
    } else {
      out.content_type = "application/octet-stream";
      out.bytes = bytes_to_string(encode_lines_payload(lines));
    }
    out.headers = {{"X-Lines", std::to_string(lines.size())}};
    return out;
  });
}

ExplorerService::Result ExplorerService::get_particles(std::size_t frame, const ParticleParams& params) {
  auto s = session();
  s->check_frame(frame);
  const std::string key = "particles|" + std::to_string(frame) + "|" + number_key(params.fraction) + "|" +
                          std::to_string(params.resolution) + "|" + std::to_string(params.seed);
  return cached(*s, key, [&] {
    auto particles = s->frame_of(s->particles, Modality::particles, frame);
    const ParticleTexture tex = particle_texture(*particles, params);
    Payload out;
    out.key = key;
    out.content_type = "application/octet-stream";
    out.bytes = bytes_to_string(encode_texture_payload(tex));
    out.headers = {{"X-Occupancy", std::to_string(tex.occupancy)}, {"X-Resolution", std::to_string(tex.resolution)}};
    return out;
  });
}

ExplorerService::Result ExplorerService::get_slice(std::size_t frame, const SlicePlaneState& plane,
                                                   std::optional<HeatmapScope> scope) {
  auto s = session();
  s->check_frame(frame);
  const HeatmapScope sc = scope.value_or(config_.heatmap_scope);
  const std::string key = std::string("slice|") + std::to_string(frame) + "|" + axis_name(plane.axis) + "|" +
                          std::to_string(plane.index) + "|" + (sc == HeatmapScope::frame ? "frame" : "dataset");
  return cached(*s, key, [&] {
    auto field = s->frame_of(s->scalars, Modality::scalar, frame);
    const MinMax range = sc == HeatmapScope::frame ? s->range_for(frame) : s->global_range();
    const SliceHeatmap heat = slice_heatmap(*field, plane, range);
    Payload out;
    out.key = key;
    out.content_type = "image/png";
    out.bytes = bytes_to_string(write_png(heat));
    out.headers = {{"X-Slice-Width", std::to_string(heat.width)},
                   {"X-Slice-Height", std::to_string(heat.height)},
                   {"X-Slice-Min", number_key(range.min)},
                   {"X-Slice-Max", number_key(range.max)}};
    return out;
  });
}

PlaybackState ExplorerService::playback_state() const { return session()->playback.state(); }

PlaybackState ExplorerService::playback(const json& command) {
  auto s = session();
  if (!command.is_object() || !command.contains("command") || !command["command"].is_string())
    throw Error(ErrorCode::invalid_argument, "playback body needs a \"command\" string");
  const std::string c = command["command"].get<std::string>();
  try {
    if (c == "play") return s->playback.play();
    if (c == "pause") return s->playback.pause();
    if (c == "seek") {
      const long long f = command.at("frame").get<long long>();
      if (f < 0) throw Error(ErrorCode::out_of_range, "seek target must be nonnegative");
      return s->playback.seek(static_cast<std::size_t>(f));
    }
    if (c == "set_rate") return s->playback.set_rate(command.at("fps").get<double>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad playback command: ") + e.what());
  }
  throw Error(ErrorCode::invalid_argument, "unknown playback command '" + c + "'");
}

AnnotationId ExplorerService::create_annotation(const Annotation& a) {
  auto s = session();
  std::lock_guard lock(annotation_write_mutex_);
  const AnnotationId id = s->annotations.create(a);
  s->annotations.save(s->annotations_path);
  return id;
}

std::uint64_t ExplorerService::update_annotation(AnnotationId id, const AnnotationPatch& patch) {
  auto s = session();
  std::lock_guard lock(annotation_write_mutex_);
  const std::uint64_t rev = s->annotations.update(id, patch);
  s->annotations.save(s->annotations_path);
  return rev;
}

std::uint64_t ExplorerService::delete_annotation(AnnotationId id) {
  auto s = session();
  std::lock_guard lock(annotation_write_mutex_);
  const std::uint64_t rev = s->annotations.remove(id);
  s->annotations.save(s->annotations_path);
  return rev;
}

std::vector<Annotation> ExplorerService::list_annotations(const std::optional<std::string>& group) const {
  return session()->annotations.list(group);
}

std::vector<Annotation> ExplorerService::visible_annotations(std::int64_t frame) const {
  auto s = session();
  if (frame < 0 || static_cast<std::size_t>(frame) >= s->manifest.frame_count)
    throw Error(ErrorCode::out_of_range, "frame " + std::to_string(frame) + " outside 0.." +
                                             std::to_string(s->manifest.frame_count - 1));
  return s->annotations.visible_at(frame);
}

// ---------------------------------------------------------------------------
// Routing

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '/');)
    if (!part.empty()) out.push_back(part);
  return out;
}

std::size_t to_index(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text[0] == '-' || text[0] == '+') throw std::invalid_argument(text);
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw Error(ErrorCode::invalid_argument, std::string(what) + " '" + text + "' is not a nonnegative integer");
  return static_cast<std::size_t>(v);
}

class Query {
 public:
  explicit Query(const std::map<std::string, std::string>& q) : q_(q) {}

  std::optional<std::string> text(const std::string& name) const {
    auto it = q_.find(name);
    if (it == q_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> number(const std::string& name) const {
    auto t = text(name);
    if (!t) return std::nullopt;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(*t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t->size() || t->empty() || !std::isfinite(v))
      throw Error(ErrorCode::invalid_argument, "query parameter " + name + "='" + *t + "' is not a finite number");
    return v;
  }

  std::optional<std::size_t> index(const std::string& name) const {
    auto t = text(name);
    if (!t) return std::nullopt;
    return to_index(*t, ("query parameter " + name).c_str());
  }

 private:
  const std::map<std::string, std::string>& q_;
};

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("request body is not valid JSON: ") + e.what());
  }
}

Response json_response(const json& j, int status = 200) {
  Response r;
  r.status = status;
  r.body = j.dump();
  return r;
}

Response payload_response(const ExplorerService::Result& res) {
  Response r;
  r.content_type = res.payload->content_type;
  r.body = res.payload->bytes;
  r.cached = res.cached;
  r.headers = res.payload->headers;
  return r;
}

json annotations_json(const std::vector<Annotation>& list) {
  json out = json::array();
  for (const Annotation& a : list) out.push_back(annotation_to_json(a));
  return out;
}

bool wants_obj(const Query& q) {
  const auto f = q.text("format");
  if (!f || *f == "bin") return false;
  if (*f == "obj") return true;
  throw Error(ErrorCode::invalid_argument, "format must be 'bin' or 'obj'");
}

}  // namespace

Response ExplorerService::handle(const Request& req) {
  try {
    const auto seg = split_path(req.path);
    const Query q(req.query);
    const std::string& m = req.method;
    auto route_error = [&] {
      return Response{404, "application/json",
                      error_body(ErrorCode::not_found, "no route for " + m + " " + req.path), false, {}};
    };

    if (seg.size() == 1 && seg[0] == "session" && m == "GET") return json_response(session_summary());
    if (seg.size() == 2 && seg[0] == "session" && seg[1] == "load" && m == "POST") {
      const json body = parse_body(req.body);
      if (!body.contains("path") || !body["path"].is_string())
        throw Error(ErrorCode::invalid_argument, "load body needs a \"path\" string");
      return json_response(load_dataset(body["path"].get<std::string>()));
    }
    if (seg.size() == 2 && seg[0] == "session" && seg[1] == "precompute" && m == "POST") {
      const json body = parse_body(req.body);
      IsoParams p;
      if (!body.contains("iso") || !body["iso"].is_number())
        throw Error(ErrorCode::invalid_argument, "precompute body needs a numeric \"iso\"");
      p.isovalue = body["iso"].get<double>();
      p.ratio = body.value("ratio", kDefaultDecimationRatio);
      return json_response({{"computed", precompute_meshes(p)}, {"frames", session()->manifest.frame_count}});
    }

    if (seg.size() >= 3 && seg[0] == "frames" && m == "GET") {
      const std::size_t frame = to_index(seg[1], "frame");
      const std::string& what = seg[2];
      if (what == "stats" && seg.size() == 3) {
        const MinMax r = frame_minmax(frame);
        return json_response({{"frame", frame}, {"min", r.min}, {"max", r.max}});
      }
      if (what == "mesh" && seg.size() == 3) {
        IsoParams p;
        if (auto iso = q.number("iso")) {
          p.isovalue = *iso;
        } else {
          const MinMax r = frame_minmax(frame);
          p.isovalue = 0.5 * (r.min + r.max);
        }
        p.ratio = q.number("ratio").value_or(kDefaultDecimationRatio);
        if (auto uv = q.text("uv")) {
          if (*uv == "planar") p.uv_mode = UvMode::planar_xy;
          else if (*uv != "zero") throw Error(ErrorCode::invalid_argument, "uv must be 'zero' or 'planar'");
        }
        return payload_response(get_mesh(frame, p, wants_obj(q)));
      }
      if (what == "streamlines" && seg.size() == 3) {
        auto s = session();
        if (!s->manifest.vector) throw Error(ErrorCode::not_found, "dataset has no vector modality");
        LineParams p = default_line_params(s->manifest.vector->dims);
        if (auto st = q.text("stride")) p.stride = parse_stride(*st);
        if (auto h = q.number("h")) p.trace.step = *h;
        if (auto ms = q.index("max_steps")) p.trace.max_steps = *ms;
        if (auto dir = q.text("direction")) {
          if (*dir == "forward") p.trace.direction = Direction::forward;
          else if (*dir == "backward") p.trace.direction = Direction::backward;
          else if (*dir == "both") p.trace.direction = Direction::both;
          else throw Error(ErrorCode::invalid_argument, "direction must be forward, backward or both");
        }
        return payload_response(get_streamlines(frame, p, wants_obj(q)));
      }
      if (what == "particles" && seg.size() == 3) {
        ParticleParams p;
        p.fraction = q.number("fraction").value_or(1.0);
        if (auto r = q.index("res")) {
          if (*r > 16384) throw Error(ErrorCode::invalid_argument, "texture resolution above 16384");
          p.resolution = static_cast<std::uint32_t>(*r);
        }
        if (auto seed = q.index("seed")) p.seed = *seed;
        return payload_response(get_particles(frame, p));
      }
      if (what == "slice" && seg.size() == 5) {
        SlicePlaneState plane{parse_axis(seg[3]), to_index(seg[4], "slice index")};
        std::optional<HeatmapScope> scope;
        if (auto sc = q.text("scope")) scope = parse_heatmap_scope(*sc);
        return payload_response(get_slice(frame, plane, scope));
      }
      return route_error();
    }

    if (!seg.empty() && seg[0] == "annotations") {
      if (seg.size() == 1 && m == "GET") {
        auto [rev, list] = session()->annotations.snapshot(q.text("group"));
        return json_response({{"revision", rev}, {"annotations", annotations_json(list)}});
      }
      if (seg.size() == 1 && m == "POST") {
        const Annotation a = annotation_from_json(parse_body(req.body), false);
        const AnnotationId id = create_annotation(a);
        auto s = session();
        return json_response({{"id", id}, {"revision", s->annotations.revision()},
                              {"annotation", annotation_to_json(*s->annotations.get(id))}},
                             201);
      }
      if (seg.size() == 2 && seg[1] == "visible" && m == "GET") {
        const auto frame = q.index("frame");
        if (!frame) throw Error(ErrorCode::invalid_argument, "visible needs ?frame=k");
        const auto list = visible_annotations(static_cast<std::int64_t>(*frame));
        return json_response({{"frame", *frame}, {"annotations", annotations_json(list)}});
      }
      if (seg.size() == 2) {
        const AnnotationId id = to_index(seg[1], "annotation id");
        if (m == "GET") {
          auto a = session()->annotations.get(id);
          if (!a) throw Error(ErrorCode::not_found, "annotation " + std::to_string(id) + " not found");
          return json_response(annotation_to_json(*a));
        }
        if (m == "PATCH") {
          const std::uint64_t rev = update_annotation(id, patch_from_json(parse_body(req.body)));
          auto a = session()->annotations.get(id);
          return json_response({{"revision", rev}, {"annotation", a ? annotation_to_json(*a) : json(nullptr)}});
        }
        if (m == "DELETE") return json_response({{"revision", delete_annotation(id)}});
      }
      return route_error();
    }

    if (seg.size() == 1 && seg[0] == "playback") {
      auto s = session();
      if (m == "GET") return json_response(playback_json(s->playback.state(), s->manifest.frame_count));
      if (m == "POST") return json_response(playback_json(playback(parse_body(req.body)), s->manifest.frame_count));
    }
    return route_error();
  } catch (const Error& e) {
    return Response{http_status_for(e.code()), "application/json", error_body(e.code(), e.what()), false, {}};
  } catch (const json::exception& e) {
    return Response{400, "application/json", error_body(ErrorCode::invalid_argument, e.what()), false, {}};
  } catch (const std::exception& e) {
    return Response{500, "application/json", error_body(ErrorCode::io, e.what()), false, {}};
  }
}

}  // namespace plasmaviz
