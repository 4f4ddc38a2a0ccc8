#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "plasmaviz/error.hpp"
#include "plasmaviz/service.hpp"

using namespace plasmaviz;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUser = 1;
constexpr int kExitData = 2;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument:
    case ErrorCode::out_of_range:
    case ErrorCode::not_found:
    case ErrorCode::capacity_exceeded:
    case ErrorCode::no_session: return kExitUser;
    default: return kExitData;
  }
}

void fail_line(std::string_view code, std::string_view message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

std::mutex log_mutex;

void progress(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << "\n";
}

struct DatasetArg {
  std::string path;

  void attach(CLI::App* app) { app->add_option("dataset,--dataset", path, "dataset directory or manifest.json"); }

  fs::path resolve() const {
    if (!path.empty()) return path;
    if (const char* env = std::getenv("PLASMAVIZ_DATASET"); env && *env) return env;
    throw Error(ErrorCode::invalid_argument, "no dataset given and PLASMAVIZ_DATASET is unset");
  }
};

// Runs fn(frame) for every frame in range on up to `jobs` threads. The first
// failure is rethrown after the workers drain.
void for_frames(const FrameRange& range, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t count = range.last - range.first + 1;
  std::atomic<std::size_t> next{range.first};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k; !failed && (k = next++) <= range.last;) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), count));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

UvMode parse_uv(const std::string& s) {
  if (s == "zero") return UvMode::zero;
  if (s == "planar") return UvMode::planar_xy;
  throw Error(ErrorCode::invalid_argument, "--uv must be zero or planar");
}

json summary_json(const DatasetManifest& m) {
  json out = {{"name", m.name}, {"frames", m.frame_count}};
  json mods = json::array();
  auto grid = [](const GridSpec& g) {
    return json{{"dims", {g.dims.nx, g.dims.ny, g.dims.nz}}, {"spacing", {g.dims.dx, g.dims.dy, g.dims.dz}}};
  };
  if (m.scalar) {
    mods.push_back("scalar");
    out["scalar"] = grid(*m.scalar);
  }
  if (m.vector) {
    mods.push_back("vector");
    out["vector"] = grid(*m.vector);
  }
  if (m.particles) {
    mods.push_back("particles");
    out["particles"] = {{"counts", m.particles->counts}};
  }
  out["modalities"] = mods;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plasmaviz: batch processing for time-varying plasma simulation data"};
  app.require_subcommand(1);

  // validate
  DatasetArg validate_ds;
  bool validate_deep = false;
  auto* validate = app.add_subcommand("validate", "check a dataset layout and print its summary");
  validate_ds.attach(validate);
  validate->add_flag("--deep", validate_deep, "also decode every frame and reject non-finite values");

  // iso
  DatasetArg iso_ds;
  double iso_value = 0.0, iso_ratio = kDefaultDecimationRatio;
  std::string iso_frames, iso_out = ".", iso_uv = "zero";
  unsigned iso_jobs = 1;
  auto* iso = app.add_subcommand("iso", "extract per-frame isosurfaces to OBJ");
  iso_ds.attach(iso);
  iso->add_option("--isovalue", iso_value, "isovalue")->required();
  iso->add_option("--ratio", iso_ratio, "keep this fraction of triangles (1 = no decimation)");
  iso->add_option("--frames", iso_frames, "inclusive range a..b or a single frame");
  iso->add_option("--out", iso_out, "output directory");
  iso->add_option("--jobs,-j", iso_jobs, "frames processed in parallel");
  iso->add_option("--uv", iso_uv, "zero or planar");

  // decimate
  std::string dec_in, dec_out;
  double dec_ratio = kDefaultDecimationRatio;
  auto* dec = app.add_subcommand("decimate", "QEM-decimate an OBJ mesh");
  dec->add_option("--in", dec_in, "input OBJ")->required();
  dec->add_option("--out", dec_out, "output OBJ")->required();
  dec->add_option("--ratio", dec_ratio, "keep this fraction of triangles");

  // streamlines
  DatasetArg sl_ds;
  std::string sl_stride, sl_frames, sl_out = ".", sl_dir = "both";
  double sl_step = 0.0;
  std::size_t sl_max_steps = 0;
  unsigned sl_jobs = 1;
  auto* sl = app.add_subcommand("streamlines", "trace lattice-seeded streamlines to OBJ line sets");
  sl_ds.attach(sl);
  sl->add_option("--stride", sl_stride, "seed stride, n or nx,ny,nz (default: about 8 seeds per axis)");
  sl->add_option("--step", sl_step, "RK4 step length in world units");
  sl->add_option("--max-steps", sl_max_steps, "step budget per direction");
  sl->add_option("--direction", sl_dir, "forward, backward or both");
  sl->add_option("--frames", sl_frames, "inclusive range a..b or a single frame");
  sl->add_option("--out", sl_out, "output directory");
  sl->add_option("--jobs,-j", sl_jobs, "frames processed in parallel");

  // particles
  DatasetArg pt_ds;
  double pt_fraction = 1.0;
  std::uint32_t pt_res = kDefaultTextureResolution;
  std::uint64_t pt_seed = 0;
  std::string pt_frames, pt_out = ".";
  unsigned pt_jobs = 1;
  auto* pt = app.add_subcommand("particles", "subsample particles into framed texture blobs");
  pt_ds.attach(pt);
  pt->add_option("--fraction", pt_fraction, "keep probability per particle");
  pt->add_option("--res", pt_res, "texture resolution R (capacity R*R)");
  pt->add_option("--seed", pt_seed, "subsampling seed");
  pt->add_option("--frames", pt_frames, "inclusive range a..b or a single frame");
  pt->add_option("--out", pt_out, "output directory");
  pt->add_option("--jobs,-j", pt_jobs, "frames processed in parallel");

  // slice
  DatasetArg sc_ds;
  std::string sc_axis = "z", sc_frames, sc_out = ".", sc_scope = "frame";
  std::size_t sc_index = 0;
  unsigned sc_jobs = 1;
  auto* sc = app.add_subcommand("slice", "render axis-aligned slice heatmaps to PNG");
  sc_ds.attach(sc);
  sc->add_option("--axis", sc_axis, "x, y or z");
  sc->add_option("--index", sc_index, "plane index along the axis")->required();
  auto* sc_frame_opt = sc->add_option("--frame", sc_frames, "single frame");
  sc->add_option("--frames", sc_frames, "inclusive range a..b")->excludes(sc_frame_opt);
  sc->add_option("--scope", sc_scope, "heatmap range: frame or dataset");
  sc->add_option("--out", sc_out, "output directory");
  sc->add_option("--jobs,-j", sc_jobs, "frames processed in parallel");

  // serve
  DatasetArg sv_ds;
  std::string sv_host = "127.0.0.1", sv_scope = "frame", sv_annotations;
  int sv_port = 8080;
  unsigned sv_workers = 1;
  std::size_t sv_cache = 256, sv_verify = 0;
  bool sv_eager = false;
  auto* sv = app.add_subcommand("serve", "start the explorer service");
  sv_ds.attach(sv);
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--port", sv_port, "port (0 = ephemeral)");
  sv->add_option("--workers", sv_workers, "threads per derivation");
  sv->add_option("--cache", sv_cache, "derived payloads kept in memory");
  sv->add_option("--verify-every", sv_verify, "recompute every Nth cache hit and compare");
  sv->add_option("--scope", sv_scope, "default heatmap range: frame or dataset");
  sv->add_option("--annotations", sv_annotations, "annotation file (default <dataset>/annotations.json)");
  sv->add_flag("--eager", sv_eager, "load every frame and its min/max up front");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line("invalid_argument", e.what());
    return kExitUser;
  }

  try {
    if (validate->parsed()) {
      const DatasetManifest m = read_manifest(validate_ds.resolve());
      if (validate_deep) {
        for (std::size_t k = 0; k < m.frame_count; ++k) {
          if (m.scalar) read_scalar_frame(m, k);
          if (m.vector) read_vector_frame(m, k);
          if (m.particles) read_particle_frame(m, k);
        }
      }
      std::cout << summary_json(m).dump() << "\n";
      return 0;
    }

    if (iso->parsed()) {
      const DatasetManifest m = read_manifest(iso_ds.resolve());
      if (!m.scalar) throw Error(ErrorCode::not_found, "dataset has no scalar modality");
      const FrameRange range = parse_frame_range(iso_frames, m.frame_count);
      IsoParams p{iso_value, iso_ratio, parse_uv(iso_uv), 1};
      ensure_dir(iso_out);
      for_frames(range, iso_jobs, [&](std::size_t k) {
        const TriangleMesh mesh = extract_isosurface(read_scalar_frame(m, k), p);
        const fs::path file = fs::path(iso_out) / frame_file_name("iso", k, "obj");
        write_file_atomic(file, write_obj(mesh));
        progress("frame " + std::to_string(k) + ": " + std::to_string(mesh.triangle_count()) + " triangles -> " +
                 file.string());
      });
      return 0;
    }

    if (dec->parsed()) {
      if (!(dec_ratio > 0.0 && dec_ratio <= 1.0))
        throw Error(ErrorCode::invalid_argument, "--ratio must be in (0, 1]");
      const TriangleMesh in = read_obj(read_text_file(dec_in));
      TriangleMesh out = decimate_qem(in, dec_ratio);
      face_weighted_normals(out);
      write_file_atomic(dec_out, write_obj(out));
      progress(std::to_string(in.triangle_count()) + " -> " + std::to_string(out.triangle_count()) + " triangles");
      return 0;
    }

    if (sl->parsed()) {
      const DatasetManifest m = read_manifest(sl_ds.resolve());
      if (!m.vector) throw Error(ErrorCode::not_found, "dataset has no vector modality");
      LineParams p = default_line_params(m.vector->dims);
      if (!sl_stride.empty()) p.stride = parse_stride(sl_stride);
      if (sl->count("--step")) p.trace.step = sl_step;
      if (sl->count("--max-steps")) p.trace.max_steps = sl_max_steps;
      if (sl_dir == "forward") p.trace.direction = Direction::forward;
      else if (sl_dir == "backward") p.trace.direction = Direction::backward;
      else if (sl_dir != "both") throw Error(ErrorCode::invalid_argument, "--direction must be forward, backward or both");
      p.trace.validate();
      const FrameRange range = parse_frame_range(sl_frames, m.frame_count);
      ensure_dir(sl_out);
      for_frames(range, sl_jobs, [&](std::size_t k) {
        const auto lines = trace_lattice(read_vector_frame(m, k), p);
        const fs::path file = fs::path(sl_out) / frame_file_name("streamlines", k, "obj");
        write_file_atomic(file, write_obj_lines(lines));
        progress("frame " + std::to_string(k) + ": " + std::to_string(lines.size()) + " lines -> " + file.string());
      });
      return 0;
    }

    if (pt->parsed()) {
      const DatasetManifest m = read_manifest(pt_ds.resolve());
      if (!m.particles) throw Error(ErrorCode::not_found, "dataset has no particle modality");
      const FrameRange range = parse_frame_range(pt_frames, m.frame_count);
      const ParticleParams p{pt_fraction, pt_res, pt_seed};
      ensure_dir(pt_out);
      for_frames(range, pt_jobs, [&](std::size_t k) {
        const ParticleTexture tex = particle_texture(read_particle_frame(m, k), p);
        const fs::path file = fs::path(pt_out) / frame_file_name("particles", k, "pvz");
        write_file_atomic(file, encode_texture_payload(tex));
        progress("frame " + std::to_string(k) + ": " + std::to_string(tex.occupancy) + " particles -> " +
                 file.string());
      });
      return 0;
    }

    if (sc->parsed()) {
      const DatasetManifest m = read_manifest(sc_ds.resolve());
      if (!m.scalar) throw Error(ErrorCode::not_found, "dataset has no scalar modality");
      const SlicePlaneState plane{parse_axis(sc_axis), sc_index};
      const HeatmapScope scope = parse_heatmap_scope(sc_scope);
      const FrameRange range = parse_frame_range(sc_frames, m.frame_count);
      std::optional<MinMax> global;
      if (scope == HeatmapScope::dataset) global = dataset_minmax(m);
      ensure_dir(sc_out);
      for_frames(range, sc_jobs, [&](std::size_t k) {
        const ScalarField f = read_scalar_frame(m, k);
        const fs::path file = fs::path(sc_out) / slice_file_name(plane, k);
        write_file_atomic(file, slice_png(f, plane, global ? *global : field_minmax(f)));
        progress("frame " + std::to_string(k) + " -> " + file.string());
      });
      return 0;
    }

    if (sv->parsed()) {
      ServiceConfig cfg;
      cfg.workers = std::max(1u, sv_workers);
      cfg.cache_capacity = sv_cache;
      cfg.verify_every = sv_verify;
      cfg.heatmap_scope = parse_heatmap_scope(sv_scope);
      if (sv_eager) {
        cfg.load_policy = LoadPolicy::eager;
        cfg.eager_minmax = true;
      }
      if (!sv_annotations.empty()) cfg.annotations_path = sv_annotations;
      ExplorerService service(cfg);
      if (!sv_ds.path.empty() || std::getenv("PLASMAVIZ_DATASET")) {
        const json s = service.load_dataset(sv_ds.resolve());
        progress("loaded " + s["name"].get<std::string>() + " (" + std::to_string(s["frames"].get<std::size_t>()) +
                 " frames)");
      }
      HttpServer server(service);
      progress("listening on " + sv_host + ":" + std::to_string(sv_port));
      if (!server.listen(sv_host, sv_port))
        throw Error(ErrorCode::io, "cannot listen on " + sv_host + ":" + std::to_string(sv_port));
      return 0;
    }
  } catch (const Error& e) {
    fail_line(error_code_name(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    fail_line("io", e.what());
    return kExitData;
  }
  return 0;
}
