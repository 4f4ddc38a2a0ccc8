#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "plasmaviz/fields.hpp"

namespace plasmaviz {

enum class Termination { domain_exit, max_steps, stagnation };
enum class Direction { forward, backward, both };

struct StreamPoint {
  Vec3 position;
  double magnitude;  // |field| before normalization
  friend bool operator==(const StreamPoint&, const StreamPoint&) = default;
};

struct Streamline {
  std::vector<StreamPoint> points;
  Termination termination = Termination::max_steps;  // of the forward leg (or the only leg)
  Termination backward_termination = Termination::max_steps;
};

struct TraceConfig {
  double step = 0.5;  // arc length per step, world units
  std::size_t max_steps = 2000;
  double stagnation_eps = 1e-12;
  Direction direction = Direction::both;

  // step = min spacing / 2, everything else at the defaults above.
  static TraceConfig defaults_for(const GridDims& dims);
  void validate() const;
};

enum class StepStatus { ok, domain_exit, stagnation };

struct StepResult {
  StepStatus status;
  Vec3 position;
};

// One classic RK4 step along the normalized field direction, so h is the arc
// length advanced. `sign` = -1 integrates against the field. Any stage point
// outside the grid reports domain_exit; a stage field magnitude of zero (or
// below stagnation_eps) reports stagnation.
StepResult rk4_step(const VectorField& field, const Vec3& p, double h, double stagnation_eps = 0.0,
                    double sign = 1.0);

// Throws Error(invalid_argument) when the seed lies outside the grid.
Streamline trace(const VectorField& field, const Vec3& seed, const TraceConfig& cfg);

// Nodes whose indices are multiples of the stride, pulled half a cell toward
// the interior along each axis.
std::vector<Vec3> seed_lattice(const GridDims& dims, const std::array<std::size_t, 3>& stride);

// Traces every seed; results keep seed order regardless of worker count.
std::vector<Streamline> trace_all(const VectorField& field, const std::vector<Vec3>& seeds, const TraceConfig& cfg,
                                  unsigned workers = 1);

}  // namespace plasmaviz
