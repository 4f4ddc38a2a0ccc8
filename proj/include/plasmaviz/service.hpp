#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plasmaviz/annotate.hpp"
#include "plasmaviz/fields.hpp"
#include "plasmaviz/io.hpp"
#include "plasmaviz/pipeline.hpp"

namespace plasmaviz {

// Seconds on some monotone timeline. Tests drive a virtual one.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

struct PlaybackState {
  std::size_t frame = 0;
  bool playing = false;
  double fps = 10.0;
  friend bool operator==(const PlaybackState&, const PlaybackState&) = default;
};

// Frame advance is derived from the clock rather than ticked: while playing,
// frame = anchor_frame + floor((now - anchor_time) * fps), mod frame_count.
class Playback {
 public:
  Playback(std::size_t frame_count, Clock clock, double fps = 10.0);

  PlaybackState state() const;
  PlaybackState play();
  PlaybackState pause();
  // Keeps the playing flag. Throws Error(out_of_range) past the last frame.
  PlaybackState seek(std::size_t frame);
  // Throws Error(invalid_argument) unless fps > 0 and finite.
  PlaybackState set_rate(double fps);
  std::size_t frame_count() const noexcept { return frame_count_; }

 private:
  std::size_t frame_at(double now) const;

  std::size_t frame_count_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::size_t anchor_frame_ = 0;
  double anchor_time_ = 0.0;
  double fps_;
  bool playing_ = false;
};

struct ServiceConfig {
  LoadPolicy load_policy = LoadPolicy::lazy;
  std::size_t resident_frames = 4;   // lazy policy only
  bool eager_minmax = false;         // compute every frame's min/max at load
  HeatmapScope heatmap_scope = HeatmapScope::frame;
  unsigned workers = 1;              // per derivation
  std::size_t cache_capacity = 256;  // derived payloads kept, oldest evicted first
  // Recompute every Nth cache hit and compare bytes with the cached copy. 0 = off.
  std::size_t verify_every = 0;
  double default_fps = 10.0;
  // Default: <dataset root>/annotations.json
  std::optional<std::filesystem::path> annotations_path;
  Clock clock;  // empty = steady clock
};

struct Request {
  std::string method;  // GET, POST, PATCH, DELETE
  std::string path;    // without query string
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  bool cached = false;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct CacheStats {
  std::size_t entries = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t computations = 0;
  std::size_t shared_inflight = 0;  // requests that joined an in-flight computation
  std::size_t verified = 0;
  std::size_t verify_mismatches = 0;
};

// A derived payload together with its content type and extra headers.
struct Payload {
  std::string key;
  std::string content_type;
  std::string bytes;
  std::vector<std::pair<std::string, std::string>> headers;
};

class ExplorerService {
 public:
  explicit ExplorerService(ServiceConfig config = {});
  ~ExplorerService();
  ExplorerService(const ExplorerService&) = delete;
  ExplorerService& operator=(const ExplorerService&) = delete;

  // Transport-independent entry point used by the HTTP adapter and tests.
  Response handle(const Request& request);

  nlohmann::json load_dataset(const std::filesystem::path& path);
  nlohmann::json session_summary() const;

  struct Result {
    std::shared_ptr<const Payload> payload;
    bool cached = false;
  };
  Result get_mesh(std::size_t frame, const IsoParams& params, bool obj = false);
  Result get_streamlines(std::size_t frame, const LineParams& params, bool obj = false);
  Result get_particles(std::size_t frame, const ParticleParams& params);
  Result get_slice(std::size_t frame, const SlicePlaneState& plane, std::optional<HeatmapScope> scope = {});
  MinMax frame_minmax(std::size_t frame);
  // Fills the mesh cache for every frame up front. Returns the number of
  // frames computed (as opposed to already cached).
  std::size_t precompute_meshes(const IsoParams& params);

  PlaybackState playback(const nlohmann::json& command);
  PlaybackState playback_state() const;

  AnnotationId create_annotation(const Annotation& a);
  std::uint64_t update_annotation(AnnotationId id, const AnnotationPatch& patch);
  std::uint64_t delete_annotation(AnnotationId id);
  std::vector<Annotation> list_annotations(const std::optional<std::string>& group = {}) const;
  std::vector<Annotation> visible_annotations(std::int64_t frame) const;

  CacheStats cache_stats() const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Session;
  std::shared_ptr<Session> session() const;
  Result cached(Session& s, const std::string& key, const std::function<Payload()>& compute);

  ServiceConfig config_;
  mutable std::shared_mutex session_mutex_;
  std::shared_ptr<Session> session_;
  std::mutex annotation_write_mutex_;
};

// Minimal HTTP front end on cpp-httplib. Routes every method to
// ExplorerService::handle, plus GET /playback/events as server-sent events.
class HttpServer {
 public:
  explicit HttpServer(ExplorerService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; returns the bound port
  // (pass 0 for an ephemeral port).
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Status code the API uses for each error code.
int http_status_for(ErrorCode code) noexcept;
std::string error_body(ErrorCode code, std::string_view message);

}  // namespace plasmaviz
