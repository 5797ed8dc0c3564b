#include "metacog/diff.hpp"

#include <stdexcept>

#include "match_detail.hpp"

namespace metacog {

namespace {

struct DiffVisitor {
  DiffResult* out;
  std::vector<std::size_t>* slot_to_event;

  void on_visible(std::size_t object_index, std::size_t category) {
    slot_to_event->push_back(out->events.size());
    out->events.push_back(ObjectEvent{object_index, category, 0});
  }
  void on_match(std::size_t visible_slot, double, double) {
    ++out->events[(*slot_to_event)[visible_slot]].matched_count;
  }
  void on_hallucination(std::size_t category) { ++out->hallucinations[category]; }
};

}  // namespace

DiffResult diff_world_detections(const WorldState& world, const FrameObservation& frame,
                                 const CameraIntrinsics& intr, double radius_px,
                                 std::size_t num_categories) {
  for (const auto& obj : world.objects) {
    if (obj.category >= num_categories) {
      throw std::invalid_argument("diff: object category out of range");
    }
  }
  for (const auto& det : frame.detections) {
    if (det.category >= num_categories) {
      throw std::invalid_argument("diff: detection category out of range");
    }
  }
  DiffResult out;
  out.hallucinations.assign(num_categories, 0);
  std::vector<std::size_t> slot_to_event;
  detail::match_frame(world, frame, intr, radius_px,
                      DiffVisitor{&out, &slot_to_event});
  return out;
}

}  // namespace metacog
