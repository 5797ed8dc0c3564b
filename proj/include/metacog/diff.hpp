#pragma once

#include <cstddef>
#include <vector>

#include "metacog/geometry.hpp"
#include "metacog/types.hpp"

namespace metacog {

// One in-view object in one frame; matched_count == 0 is a miss event.
struct ObjectEvent {
  std::size_t object_index = 0;
  std::size_t category = 0;
  int matched_count = 0;
};

struct DiffResult {
  std::vector<int> hallucinations;  // unmatched detections per category
  std::vector<ObjectEvent> events;  // one entry per visible object
};

// Matches each detection to the nearest same-category visible projected object
// within `radius_px` (ties: lower object index). Objects may collect several
// detections; each detection matches at most one object. Unmatched detections
// are hallucinations. Conserves detections:
// sum of matched counts + sum of hallucinations == |frame.detections|.
DiffResult diff_world_detections(const WorldState& world, const FrameObservation& frame,
                                 const CameraIntrinsics& intr, double radius_px,
                                 std::size_t num_categories);

}  // namespace metacog
