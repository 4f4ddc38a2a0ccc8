#include "plasmaviz/streamline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "plasmaviz/error.hpp"
#include "plasmaviz/parallel.hpp"

namespace plasmaviz {

namespace {

bool stagnant(double magnitude, double eps) { return magnitude == 0.0 || magnitude < eps; }

struct Leg {
  std::vector<StreamPoint> points;  // excluding the seed
  Termination termination;
};

Leg trace_leg(const VectorField& field, const Vec3& seed, double seed_magnitude, const TraceConfig& cfg, double sign) {
  Leg leg{{}, Termination::max_steps};
  if (stagnant(seed_magnitude, cfg.stagnation_eps)) {
    leg.termination = Termination::stagnation;
    return leg;
  }
  Vec3 p = seed;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const StepResult r = rk4_step(field, p, cfg.step, cfg.stagnation_eps, sign);
    if (r.status == StepStatus::domain_exit) {
      leg.termination = Termination::domain_exit;
      return leg;
    }
    if (r.status == StepStatus::stagnation) {
      leg.termination = Termination::stagnation;
      return leg;
    }
    const auto v = sample_vector(field, r.position);
    const double magnitude = norm(*v);
    p = r.position;
    leg.points.push_back({p, magnitude});
    if (stagnant(magnitude, cfg.stagnation_eps)) {
      leg.termination = Termination::stagnation;
      return leg;
    }
  }
  leg.termination = Termination::max_steps;
  return leg;
}

}  // namespace

TraceConfig TraceConfig::defaults_for(const GridDims& dims) {
  TraceConfig cfg;
  cfg.step = dims.min_spacing() / 2.0;
  return cfg;
}

void TraceConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::invalid_argument, "step must be positive");
  if (max_steps < 1) throw Error(ErrorCode::invalid_argument, "max_steps must be at least 1");
  if (!(stagnation_eps >= 0.0)) throw Error(ErrorCode::invalid_argument, "stagnation_eps must be nonnegative");
}

StepResult rk4_step(const VectorField& field, const Vec3& p, double h, double stagnation_eps, double sign) {
  auto direction = [&](const Vec3& q) -> std::optional<Vec3> {
    const auto v = sample_vector(field, q);
    if (!v) return std::nullopt;
    const double m = norm(*v);
    if (stagnant(m, stagnation_eps)) return Vec3{0.0, 0.0, 0.0};
    return (sign / m) * *v;
  };
  auto unit = [&](const Vec3& q, Vec3& out) -> StepStatus {
    const auto d = direction(q);
    if (!d) return StepStatus::domain_exit;
    if ((*d)[0] == 0.0 && (*d)[1] == 0.0 && (*d)[2] == 0.0) return StepStatus::stagnation;
    out = *d;
    return StepStatus::ok;
  };

  Vec3 k1, k2, k3, k4;
  if (auto s = unit(p, k1); s != StepStatus::ok) return {s, p};
  if (auto s = unit(p + (h / 2.0) * k1, k2); s != StepStatus::ok) return {s, p};
  if (auto s = unit(p + (h / 2.0) * k2, k3); s != StepStatus::ok) return {s, p};
  if (auto s = unit(p + h * k3, k4); s != StepStatus::ok) return {s, p};
  return {StepStatus::ok, p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)};
}

Streamline trace(const VectorField& field, const Vec3& seed, const TraceConfig& cfg) {
  cfg.validate();
  const auto v0 = sample_vector(field, seed);
  if (!v0) throw Error(ErrorCode::invalid_argument, "seed lies outside the grid");
  const double m0 = norm(*v0);

  Streamline line;
  if (cfg.direction == Direction::backward || cfg.direction == Direction::both) {
    Leg back = trace_leg(field, seed, m0, cfg, -1.0);
    line.backward_termination = back.termination;
    line.points.assign(back.points.rbegin(), back.points.rend());
    if (cfg.direction == Direction::backward) line.termination = back.termination;
  }
  line.points.push_back({seed, m0});
  if (cfg.direction == Direction::forward || cfg.direction == Direction::both) {
    Leg fwd = trace_leg(field, seed, m0, cfg, 1.0);
    line.termination = fwd.termination;
    line.points.insert(line.points.end(), fwd.points.begin(), fwd.points.end());
    if (cfg.direction == Direction::forward) line.backward_termination = fwd.termination;
  }
  return line;
}

std::vector<Vec3> seed_lattice(const GridDims& dims, const std::array<std::size_t, 3>& stride) {
  for (std::size_t s : stride) {
    if (s < 1) throw Error(ErrorCode::invalid_argument, "seed stride must be at least 1");
  }
  const std::size_t n[3] = {dims.nx, dims.ny, dims.nz};
  const double h[3] = {dims.dx, dims.dy, dims.dz};
  std::vector<double> coords[3];
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < n[a]; i += stride[a]) {
      const double offset = (i + 1 < n[a]) ? 0.5 : -0.5;
      coords[a].push_back(dims.origin[a] + (static_cast<double>(i) + offset) * h[a]);
    }
  }
  std::vector<Vec3> seeds;
  seeds.reserve(coords[0].size() * coords[1].size() * coords[2].size());
  for (double z : coords[2])
    for (double y : coords[1])
      for (double x : coords[0]) seeds.push_back({x, y, z});
  return seeds;
}

std::vector<Streamline> trace_all(const VectorField& field, const std::vector<Vec3>& seeds, const TraceConfig& cfg,
                                  unsigned workers) {
  cfg.validate();
  std::vector<Streamline> lines(seeds.size());
  parallel_for(0, seeds.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) lines[s] = trace(field, seeds[s], cfg);
  });
  return lines;
}

}  // namespace plasmaviz
