#include "plasmaviz/annotate.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "plasmaviz/annotate_json.hpp"
#include "plasmaviz/error.hpp"
#include "plasmaviz/io.hpp"

namespace plasmaviz {

using nlohmann::json;

namespace {

Rgb color_from_json(const json& j) {
  const auto color = j.get<std::vector<int>>();
  if (color.size() != 3) throw Error(ErrorCode::validation, "annotation color needs three channels");
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    if (color[c] < 0 || color[c] > 255) throw Error(ErrorCode::validation, "annotation color channel out of 0..255");
    out[c] = static_cast<std::uint8_t>(color[c]);
  }
  return out;
}

std::vector<Stroke> strokes_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::validation, "strokes must be an array of polylines");
  std::vector<Stroke> out;
  for (const json& s : j) {
    if (!s.is_array()) throw Error(ErrorCode::validation, "each stroke must be an array of points");
    Stroke stroke;
    for (const json& p : s) {
      const auto xyz = p.get<std::vector<double>>();
      if (xyz.size() != 3) throw Error(ErrorCode::validation, "stroke points need three coordinates");
      stroke.push_back({xyz[0], xyz[1], xyz[2]});
    }
    out.push_back(std::move(stroke));
  }
  return out;
}

template <typename Fn>
auto json_guard(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("malformed annotation: ") + e.what());
  }
}

}  // namespace

json annotation_to_json(const Annotation& a) {
  json strokes = json::array();
  for (const Stroke& s : a.strokes) {
    json pts = json::array();
    for (const Vec3& p : s) pts.push_back({p[0], p[1], p[2]});
    strokes.push_back(std::move(pts));
  }
  return {{"id", a.id},
          {"group", a.group},
          {"color", {a.color[0], a.color[1], a.color[2]}},
          {"frame_start", a.frame_start},
          {"frame_end", a.frame_end},
          {"strokes", std::move(strokes)}};
}

Annotation annotation_from_json(const json& j, bool require_id) {
  return json_guard([&] {
    if (!j.is_object()) throw Error(ErrorCode::validation, "annotation must be a JSON object");
    Annotation a;
    if (require_id || j.contains("id")) a.id = j.at("id").get<AnnotationId>();
    a.group = require_id ? j.at("group").get<std::string>() : j.value("group", std::string{});
    if (require_id || j.contains("color")) a.color = color_from_json(j.at("color"));
    a.frame_start = j.at("frame_start").get<std::int64_t>();
    a.frame_end = j.at("frame_end").get<std::int64_t>();
    a.strokes = strokes_from_json(j.at("strokes"));
    return a;
  });
}

AnnotationPatch patch_from_json(const json& j) {
  return json_guard([&] {
    if (!j.is_object()) throw Error(ErrorCode::validation, "annotation patch must be a JSON object");
    AnnotationPatch p;
    for (const auto& [key, value] : j.items()) {
      if (key == "group") p.group = value.get<std::string>();
      else if (key == "color") p.color = color_from_json(value);
      else if (key == "strokes") p.strokes = strokes_from_json(value);
      else if (key == "frame_start") p.frame_start = value.get<std::int64_t>();
      else if (key == "frame_end") p.frame_end = value.get<std::int64_t>();
      else throw Error(ErrorCode::validation, "annotation patch has unknown field '" + key + "'");
    }
    return p;
  });
}

AnnotationStore::AnnotationStore(std::int64_t frame_count) : frame_count_(frame_count) {
  if (frame_count < 1) throw Error(ErrorCode::validation, "annotation store needs at least one frame");
}

void AnnotationStore::validate(const Annotation& a) const {
  if (a.frame_start < 0 || a.frame_start > a.frame_end || a.frame_end >= frame_count_)
    throw Error(ErrorCode::validation, "annotation frame range [" + std::to_string(a.frame_start) + ", " +
                                           std::to_string(a.frame_end) + "] invalid for " +
                                           std::to_string(frame_count_) + " frames");
  for (std::size_t s = 0; s < a.strokes.size(); ++s) {
    if (a.strokes[s].size() < 2)
      throw Error(ErrorCode::validation, "stroke " + std::to_string(s) + " needs at least two points");
    for (const Vec3& p : a.strokes[s]) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
        throw Error(ErrorCode::validation, "stroke " + std::to_string(s) + " holds a non-finite point");
    }
  }
}

AnnotationId AnnotationStore::create(Annotation annotation) {
  std::unique_lock lock(*mutex_);
  validate(annotation);
  annotation.id = next_id_++;
  const AnnotationId id = annotation.id;
  annotations_.emplace(id, std::move(annotation));
  ++revision_;
  return id;
}

std::uint64_t AnnotationStore::update(AnnotationId id, const AnnotationPatch& patch) {
  std::unique_lock lock(*mutex_);
  auto it = annotations_.find(id);
  if (it == annotations_.end()) throw Error(ErrorCode::not_found, "no annotation with id " + std::to_string(id));
  Annotation next = it->second;
  if (patch.group) next.group = *patch.group;
  if (patch.color) next.color = *patch.color;
  if (patch.strokes) next.strokes = *patch.strokes;
  if (patch.frame_start) next.frame_start = *patch.frame_start;
  if (patch.frame_end) next.frame_end = *patch.frame_end;
  validate(next);
  it->second = std::move(next);
  return ++revision_;
}

std::uint64_t AnnotationStore::remove(AnnotationId id) {
  std::unique_lock lock(*mutex_);
  if (annotations_.erase(id) == 0) throw Error(ErrorCode::not_found, "no annotation with id " + std::to_string(id));
  return ++revision_;
}

std::optional<Annotation> AnnotationStore::get(AnnotationId id) const {
  std::shared_lock lock(*mutex_);
  auto it = annotations_.find(id);
  if (it == annotations_.end()) return std::nullopt;
  return it->second;
}

std::vector<Annotation> AnnotationStore::list(const std::optional<std::string>& group) const {
  return snapshot(group).second;
}

std::vector<Annotation> AnnotationStore::visible_at(std::int64_t frame) const {
  std::shared_lock lock(*mutex_);
  std::vector<Annotation> out;
  for (const auto& [id, a] : annotations_)
    if (a.visible_at(frame)) out.push_back(a);
  return out;
}

std::pair<std::uint64_t, std::vector<Annotation>> AnnotationStore::snapshot(
    const std::optional<std::string>& group) const {
  std::shared_lock lock(*mutex_);
  std::vector<Annotation> out;
  for (const auto& [id, a] : annotations_)
    if (!group || a.group == *group) out.push_back(a);
  return {revision_, std::move(out)};
}

std::uint64_t AnnotationStore::revision() const {
  std::shared_lock lock(*mutex_);
  return revision_;
}

std::string AnnotationStore::to_json() const {
  std::shared_lock lock(*mutex_);
  json doc;
  doc["revision"] = revision_;
  doc["next_id"] = next_id_;
  doc["annotations"] = json::array();
  for (const auto& [id, a] : annotations_) doc["annotations"].push_back(annotation_to_json(a));
  return doc.dump(2) + "\n";
}

AnnotationStore AnnotationStore::from_json(const std::string& text, std::int64_t frame_count) {
  AnnotationStore store(frame_count);
  try {
    const json doc = json::parse(text);
    store.revision_ = doc.at("revision").get<std::uint64_t>();
    for (const json& j : doc.at("annotations")) {
      Annotation a = annotation_from_json(j);
      store.validate(a);
      if (!store.annotations_.emplace(a.id, a).second)
        throw Error(ErrorCode::validation, "duplicate annotation id " + std::to_string(a.id));
      store.next_id_ = std::max(store.next_id_, a.id + 1);
    }
    if (doc.contains("next_id")) store.next_id_ = std::max(store.next_id_, doc["next_id"].get<AnnotationId>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("malformed annotation document: ") + e.what());
  }
  return store;
}

void AnnotationStore::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

AnnotationStore AnnotationStore::load(const std::filesystem::path& path, std::int64_t frame_count) {
  return from_json(read_text_file(path), frame_count);
}

bool operator==(const AnnotationStore& a, const AnnotationStore& b) {
  if (&a == &b) return true;
  std::shared_lock la(*a.mutex_, std::defer_lock);
  std::shared_lock lb(*b.mutex_, std::defer_lock);
  std::lock(la, lb);
  return a.frame_count_ == b.frame_count_ && a.revision_ == b.revision_ && a.annotations_ == b.annotations_ &&
         a.next_id_ == b.next_id_;
}

}  // namespace plasmaviz
