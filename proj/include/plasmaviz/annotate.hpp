#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "plasmaviz/slicer.hpp"
#include "plasmaviz/vec.hpp"

namespace plasmaviz {

using AnnotationId = std::uint64_t;
using Stroke = std::vector<Vec3>;

struct Annotation {
  AnnotationId id = 0;
  std::string group;
  Rgb color{255, 255, 255};
  std::vector<Stroke> strokes;
  std::int64_t frame_start = 0;
  std::int64_t frame_end = 0;  // inclusive

  bool visible_at(std::int64_t frame) const noexcept { return frame_start <= frame && frame <= frame_end; }
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationPatch {
  std::optional<std::string> group;
  std::optional<Rgb> color;
  std::optional<std::vector<Stroke>> strokes;
  std::optional<std::int64_t> frame_start;
  std::optional<std::int64_t> frame_end;
};

// Single-writer, multi-reader annotation storage. Every mutation bumps the
// revision; reads see a consistent snapshot.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::int64_t frame_count);

  std::int64_t frame_count() const noexcept { return frame_count_; }

  // Assigns and returns a fresh id; the incoming id is ignored.
  AnnotationId create(Annotation annotation);
  std::uint64_t update(AnnotationId id, const AnnotationPatch& patch);
  std::uint64_t remove(AnnotationId id);

  std::optional<Annotation> get(AnnotationId id) const;
  std::vector<Annotation> list(const std::optional<std::string>& group = std::nullopt) const;
  std::vector<Annotation> visible_at(std::int64_t frame) const;
  std::uint64_t revision() const;
  // Revision and listing taken under one lock.
  std::pair<std::uint64_t, std::vector<Annotation>> snapshot(const std::optional<std::string>& group = std::nullopt) const;

  // Persistence document: { revision, next_id, annotations: [...] }.
  std::string to_json() const;
  static AnnotationStore from_json(const std::string& text, std::int64_t frame_count);

  // Written to a temporary sibling and renamed into place.
  void save(const std::filesystem::path& path) const;
  static AnnotationStore load(const std::filesystem::path& path, std::int64_t frame_count);

  friend bool operator==(const AnnotationStore& a, const AnnotationStore& b);

 private:
  void validate(const Annotation& a) const;

  std::int64_t frame_count_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
  std::map<AnnotationId, Annotation> annotations_;
  std::uint64_t revision_ = 0;
  AnnotationId next_id_ = 1;
};

}  // namespace plasmaviz
