#pragma once

#include "json.hpp"
#include "plasmaviz/annotate.hpp"

namespace plasmaviz {

// {id, group, color: [r,g,b], frame_start, frame_end, strokes: [[[x,y,z], ...], ...]}
nlohmann::json annotation_to_json(const Annotation& a);

// With require_id false the id may be absent (API create); group defaults to
// "" and color to white. Throws Error(validation) on malformed input.
Annotation annotation_from_json(const nlohmann::json& j, bool require_id = true);

// Any subset of group, color, strokes, frame_start, frame_end. Unknown keys
// are rejected.
AnnotationPatch patch_from_json(const nlohmann::json& j);

}  // namespace plasmaviz
