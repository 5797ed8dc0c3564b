#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "metacog/geometry.hpp"
#include "metacog/types.hpp"

namespace metacog::detail {

struct MatchScratch {
  std::vector<double> px, py;
  std::vector<std::size_t> obj_index;
  std::vector<std::size_t> obj_category;
};

inline MatchScratch& match_scratch() {
  thread_local MatchScratch s;
  return s;
}

// Shared matching pass over one frame. Invokes, in deterministic order:
//   vis.on_visible(object_index, category)            every in-view object
//   vis.on_match(visible_slot, dx, dy)                matched detection
//   vis.on_hallucination(category)                    unmatched detection
// `visible_slot` indexes the on_visible sequence, not world.objects.
template <class Visitor>
void match_frame(const WorldState& world, const FrameObservation& frame,
                 const CameraIntrinsics& intr, double radius_px, Visitor&& vis) {
  if (!(radius_px > 0.0)) throw std::invalid_argument("matching radius must be positive");
  MatchScratch& s = match_scratch();
  s.px.clear();
  s.py.clear();
  s.obj_index.clear();
  s.obj_category.clear();
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto& obj = world.objects[i];
    const auto pix = project(obj.position, frame.camera, intr);
    if (!pix || pix->x < 0.0 || pix->x > intr.image_width || pix->y < 0.0 ||
        pix->y > intr.image_height) {
      continue;
    }
    s.px.push_back(pix->x);
    s.py.push_back(pix->y);
    s.obj_index.push_back(i);
    s.obj_category.push_back(obj.category);
    vis.on_visible(i, obj.category);
  }
  const double radius_sq = radius_px * radius_px;
  for (const auto& det : frame.detections) {
    double best_sq = std::numeric_limits<double>::infinity();
    std::size_t best_slot = static_cast<std::size_t>(-1);
    for (std::size_t v = 0; v < s.px.size(); ++v) {
      if (s.obj_category[v] != det.category) continue;
      const double dx = det.x - s.px[v];
      const double dy = det.y - s.py[v];
      const double d_sq = dx * dx + dy * dy;
      if (d_sq < best_sq) {
        best_sq = d_sq;
        best_slot = v;
      }
    }
    if (best_slot != static_cast<std::size_t>(-1) && best_sq <= radius_sq) {
      vis.on_match(best_slot, det.x - s.px[best_slot], det.y - s.py[best_slot]);
    } else {
      vis.on_hallucination(det.category);
    }
  }
}

}  // namespace metacog::detail
