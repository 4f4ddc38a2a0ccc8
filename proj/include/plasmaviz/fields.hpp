#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plasmaviz/error.hpp"
#include "plasmaviz/vec.hpp"

namespace plasmaviz {

// Regular grid geometry. Node (i,j,k) sits at origin + (i*dx, j*dy, k*dz).
struct GridDims {
  std::size_t nx = 2, ny = 2, nz = 2;
  double dx = 1.0, dy = 1.0, dz = 1.0;
  Vec3 origin{0.0, 0.0, 0.0};

  std::size_t node_count() const noexcept { return nx * ny * nz; }
  Vec3 node_position(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return {origin[0] + static_cast<double>(i) * dx, origin[1] + static_cast<double>(j) * dy,
            origin[2] + static_cast<double>(k) * dz};
  }
  Vec3 upper_corner() const noexcept { return node_position(nx - 1, ny - 1, nz - 1); }
  bool contains(const Vec3& p) const noexcept;
  double min_spacing() const noexcept;
  double max_spacing() const noexcept;

  // Throws Error(validation) unless nx,ny,nz >= 2 and spacings are positive and finite.
  void validate() const;

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

// x-fastest layout: i + nx*(j + ny*k). Throws Error(out_of_range) on bad indices.
std::size_t linear_index(const GridDims& dims, std::size_t i, std::size_t j, std::size_t k);

class ScalarField {
 public:
  ScalarField(GridDims dims, std::vector<float> values);

  const GridDims& dims() const noexcept { return dims_; }
  const std::vector<float>& values() const noexcept { return values_; }
  float at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return values_[i + dims_.nx * (j + dims_.ny * k)];
  }

 private:
  GridDims dims_;
  std::vector<float> values_;
};

class VectorField {
 public:
  VectorField(GridDims dims, std::vector<float> vx, std::vector<float> vy, std::vector<float> vz);

  const GridDims& dims() const noexcept { return dims_; }
  const std::vector<float>& vx() const noexcept { return vx_; }
  const std::vector<float>& vy() const noexcept { return vy_; }
  const std::vector<float>& vz() const noexcept { return vz_; }
  Vec3 at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    const std::size_t n = i + dims_.nx * (j + dims_.ny * k);
    return {vx_[n], vy_[n], vz_[n]};
  }

 private:
  GridDims dims_;
  std::vector<float> vx_, vy_, vz_;
};

// Trilinear interpolation of the eight enclosing node vectors. Returns
// std::nullopt when p lies outside the grid bounding box (domain exit).
std::optional<Vec3> sample_vector(const VectorField& field, const Vec3& p);

// Trilinear interpolation of a scalar field; nullopt outside the domain.
std::optional<double> sample_scalar(const ScalarField& field, const Vec3& p);

struct MinMax {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const MinMax&, const MinMax&) = default;
};

MinMax field_minmax(const ScalarField& field);

enum class LoadPolicy { eager, lazy };

// Timestep sequence of one modality. Payloads are loaded through the supplied
// loader, either all at construction (eager) or on first access (lazy).
// Safe for concurrent get() calls.
template <typename Payload>
class FrameSeries {
 public:
  using Loader = std::function<std::shared_ptr<const Payload>(std::size_t frame)>;

  FrameSeries(std::size_t frame_count, LoadPolicy policy, Loader loader, std::size_t lazy_capacity = 4)
      : frame_count_(frame_count), policy_(policy), loader_(std::move(loader)), capacity_(lazy_capacity) {
    if (policy_ == LoadPolicy::eager) {
      for (std::size_t k = 0; k < frame_count_; ++k) resident_.emplace(k, loader_(k));
    }
  }

  std::size_t frame_count() const noexcept { return frame_count_; }
  LoadPolicy policy() const noexcept { return policy_; }

  std::shared_ptr<const Payload> get(std::size_t frame) const {
    if (frame >= frame_count_)
      throw Error(ErrorCode::out_of_range,
                  "frame " + std::to_string(frame) + " outside 0.." + std::to_string(frame_count_ - 1));
    {
      std::lock_guard lock(mutex_);
      if (auto it = resident_.find(frame); it != resident_.end()) return it->second;
    }
    auto payload = loader_(frame);
    std::lock_guard lock(mutex_);
    if (auto it = resident_.find(frame); it != resident_.end()) return it->second;
    if (policy_ == LoadPolicy::lazy) {
      while (!order_.empty() && resident_.size() >= capacity_) {
        resident_.erase(order_.front());
        order_.erase(order_.begin());
      }
      order_.push_back(frame);
    }
    resident_.emplace(frame, payload);
    return payload;
  }

 private:
  std::size_t frame_count_;
  LoadPolicy policy_;
  Loader loader_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const Payload>> resident_;
  mutable std::vector<std::size_t> order_;
};

}  // namespace plasmaviz
