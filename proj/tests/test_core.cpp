#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "metacog/beliefs.hpp"
#include "metacog/diff.hpp"
#include "metacog/geometry.hpp"
#include "metacog/rng.hpp"
#include "metacog/types.hpp"

using namespace metacog;

namespace {

// Object dead ahead of this pose projects to the image center.
CameraPose straight_pose() {
  CameraPose pose;
  pose.position = {0.0, 1.0, 4.0};
  pose.focal_point = {0.0, 1.0, 0.0};
  return pose;
}

FrameObservation frame_with(std::vector<Detection2D> dets) {
  FrameObservation f;
  f.camera = straight_pose();
  f.detections = std::move(dets);
  return f;
}

}  // namespace

TEST_CASE("category table lookups and validation") {
  CategoryTable t = CategoryTable::standard();
  CHECK(t.size() == 5);
  CHECK(t.index_of(t.names[0]).value() == 0);
  CHECK_FALSE(t.index_of("no-such-thing").has_value());
  CategoryTable dup;
  dup.names = {"a", "a"};
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
  CategoryTable empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("theta validation rejects mismatched or out-of-range rates") {
  Theta t;
  t.halluc_rates = {0.5, 0.5};
  t.det_rates = {0.5};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.det_rates = {0.5, 1.5};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.det_rates = {0.5, 0.5};
  t.halluc_rates = {-0.1, 0.5};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.halluc_rates = {0.0, 0.5};
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("vec3 arithmetic") {
  Vec3 a{1, 2, 3}, b{4, -5, 6};
  Vec3 c = a + b;
  CHECK(c.x == 5);
  CHECK(c.y == -3);
  CHECK(c.z == 9);
  Vec3 d = b - a;
  CHECK(d.x == 3);
  CHECK(a.dot(b) == doctest::Approx(1 * 4 - 2 * 5 + 3 * 6));
  CHECK(Vec3{3, 4, 0}.norm() == doctest::Approx(5.0));
  CHECK(Vec3{0, 2, 0}.normalized().y == doctest::Approx(1.0));
  CHECK(Vec3{1, 0, 0}.cross(Vec3{0, 1, 0}).z == doctest::Approx(1.0));
  CHECK((a * 2.0).x == doctest::Approx(2.0));
}

TEST_CASE("diff matches nearest same-category object and conserves detections") {
  CameraIntrinsics intr;
  WorldState world;
  world.objects = {{{0.0, 1.0, 0.0}, 0}, {{1.0, 1.0, 0.0}, 0}, {{-1.0, 1.0, 0.0}, 1}};

  // Project the three objects to find their pixel locations.
  auto p0 = project(world.objects[0].position, straight_pose(), intr);
  auto p1 = project(world.objects[1].position, straight_pose(), intr);
  auto p2 = project(world.objects[2].position, straight_pose(), intr);
  REQUIRE(p0.has_value());
  REQUIRE(p1.has_value());
  REQUIRE(p2.has_value());

  SUBCASE("detection near an object matches it") {
    auto f = frame_with({{p0->x + 3.0, p0->y - 2.0, 0}});
    DiffResult d = diff_world_detections(world, f, intr, 20.0, 2);
    CHECK(d.events.size() == 3);
    int matched_total = 0;
    for (auto& e : d.events) matched_total += e.matched_count;
    CHECK(matched_total == 1);
    CHECK(std::accumulate(d.hallucinations.begin(), d.hallucinations.end(), 0) == 0);
    // The match lands on object 0, not the farther object 1.
    for (auto& e : d.events)
      if (e.object_index == 0) CHECK(e.matched_count == 1);
  }

  SUBCASE("category mismatch prevents matching") {
    auto f = frame_with({{p0->x, p0->y, 1}});  // category 1 at object 0's pixel
    // Object 2 (category 1) is far away in image space, so no match.
    DiffResult d = diff_world_detections(world, f, intr, 20.0, 2);
    int matched_total = 0;
    for (auto& e : d.events) matched_total += e.matched_count;
    CHECK(matched_total == 0);
    CHECK(d.hallucinations[1] == 1);
    CHECK(d.hallucinations[0] == 0);
  }

  SUBCASE("radius boundary") {
    auto f = frame_with({{p0->x + 30.0, p0->y, 0}});
    DiffResult near = diff_world_detections(world, f, intr, 30.0, 2);
    int matched = 0;
    for (auto& e : near.events) matched += e.matched_count;
    CHECK(matched == 1);  // exactly at the radius still matches
    DiffResult far = diff_world_detections(world, f, intr, 29.0, 2);
    matched = 0;
    for (auto& e : far.events) matched += e.matched_count;
    CHECK(matched == 0);
    CHECK(far.hallucinations[0] == 1);
  }

  SUBCASE("several detections can match one object") {
    auto f = frame_with({{p0->x + 1, p0->y, 0}, {p0->x - 1, p0->y, 0}, {p0->x, p0->y + 2, 0}});
    DiffResult d = diff_world_detections(world, f, intr, 20.0, 2);
    for (auto& e : d.events)
      if (e.object_index == 0) CHECK(e.matched_count == 3);
    CHECK(std::accumulate(d.hallucinations.begin(), d.hallucinations.end(), 0) == 0);
  }

  SUBCASE("conservation holds over random frames") {
    Rng rng(314);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Detection2D> dets;
      int n = int(rng.uniform_int(0, 8));
      for (int i = 0; i < n; ++i)
        dets.push_back(
            {rng.uniform(0, 800), rng.uniform(0, 800), std::size_t(rng.uniform_int(0, 1))});
      DiffResult d = diff_world_detections(world, frame_with(dets), intr, 60.0, 2);
      int matched = 0;
      for (auto& e : d.events) matched += e.matched_count;
      int halluc = std::accumulate(d.hallucinations.begin(), d.hallucinations.end(), 0);
      CHECK(matched + halluc == n);
      CHECK(d.events.size() == 3);  // all three objects are in view
    }
  }

  SUBCASE("detection order does not change totals") {
    std::vector<Detection2D> dets = {{p0->x + 5, p0->y, 0},
                                     {p1->x - 5, p1->y, 0},
                                     {p2->x, p2->y + 5, 1},
                                     {400.0, 100.0, 0}};
    DiffResult a = diff_world_detections(world, frame_with(dets), intr, 20.0, 2);
    std::reverse(dets.begin(), dets.end());
    DiffResult b = diff_world_detections(world, frame_with(dets), intr, 20.0, 2);
    CHECK(a.hallucinations == b.hallucinations);
    auto key = [](const ObjectEvent& e) { return e.object_index; };
    std::sort(a.events.begin(), a.events.end(),
              [&](auto& x, auto& y) { return key(x) < key(y); });
    std::sort(b.events.begin(), b.events.end(),
              [&](auto& x, auto& y) { return key(x) < key(y); });
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
      CHECK(a.events[i].object_index == b.events[i].object_index);
      CHECK(a.events[i].matched_count == b.events[i].matched_count);
    }
  }

  SUBCASE("out-of-view objects produce no events") {
    WorldState behind;
    behind.objects = {{{0.0, 1.0, 10.0}, 0}};  // behind the camera at z=4
    DiffResult d = diff_world_detections(behind, frame_with({}), intr, 20.0, 2);
    CHECK(d.events.empty());
  }
}

TEST_CASE("prior beliefs and expected theta reference point") {
  MetaBeliefs b = prior_beliefs(3);
  REQUIRE(b.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(b.gamma_params[c].alpha == doctest::Approx(1.0));
    CHECK(b.gamma_params[c].beta == doctest::Approx(1.0));
    CHECK(b.beta_params[c].alpha == doctest::Approx(1.0));
    CHECK(b.beta_params[c].beta == doctest::Approx(1.0));
  }
  Theta t = expected_theta(b);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(t.halluc_rates[c] == doctest::Approx(1.0));
    CHECK(t.det_rates[c] == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(prior_beliefs(std::size_t{0}), std::invalid_argument);
}

TEST_CASE("conjugate update matches a hand-folded oracle exactly") {
  // Two frames, two categories. Frame 1: object of category 0 matched twice,
  // object of category 1 missed, one category-1 hallucination. Frame 2:
  // category-0 object missed, two category-0 hallucinations.
  DiffResult d1;
  d1.hallucinations = {0, 1};
  d1.events = {{0, 0, 2}, {1, 1, 0}};
  DiffResult d2;
  d2.hallucinations = {2, 0};
  d2.events = {{0, 0, 0}};
  std::vector<DiffResult> diffs = {d1, d2};

  MetaBeliefs b = update_beliefs(prior_beliefs(2), diffs, 2);

  // Gamma: alpha += total hallucinations of the category, beta += num_frames.
  CHECK(b.gamma_params[0].alpha == doctest::Approx(1.0 + 2.0));
  CHECK(b.gamma_params[0].beta == doctest::Approx(1.0 + 2.0));
  CHECK(b.gamma_params[1].alpha == doctest::Approx(1.0 + 1.0));
  CHECK(b.gamma_params[1].beta == doctest::Approx(1.0 + 2.0));

  // Beta over the geometric rate: alpha += matched detections, beta += events.
  CHECK(b.beta_params[0].alpha == doctest::Approx(1.0 + 2.0));
  CHECK(b.beta_params[0].beta == doctest::Approx(1.0 + 2.0));
  CHECK(b.beta_params[1].alpha == doctest::Approx(1.0 + 0.0));
  CHECK(b.beta_params[1].beta == doctest::Approx(1.0 + 1.0));

  // Posterior means follow the conjugate formulas.
  Theta t = expected_theta(b);
  CHECK(t.halluc_rates[0] == doctest::Approx(3.0 / 3.0));
  CHECK(t.halluc_rates[1] == doctest::Approx(2.0 / 3.0));
  CHECK(t.det_rates[0] == doctest::Approx(3.0 / 6.0));
  CHECK(t.det_rates[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("update_beliefs validates input shapes") {
  DiffResult d;
  d.hallucinations = {0};  // one category, beliefs have two
  std::vector<DiffResult> diffs = {d};
  CHECK_THROWS_AS(update_beliefs(prior_beliefs(2), diffs, 1), std::invalid_argument);
  CHECK_THROWS_AS(update_beliefs(prior_beliefs(1), diffs, 0), std::invalid_argument);
}

TEST_CASE("update_beliefs folds sequentially the same as jointly") {
  // Conjugate updates are associative: folding scene by scene must equal one
  // update over the concatenated diffs with summed frame counts.
  Rng rng(2718);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DiffResult> part1, part2;
    auto random_diff = [&](int cats) {
      DiffResult d;
      d.hallucinations.resize(cats);
      for (auto& h : d.hallucinations) h = int(rng.uniform_int(0, 3));
      int n_events = int(rng.uniform_int(0, 4));
      for (int i = 0; i < n_events; ++i)
        d.events.push_back({std::size_t(i), std::size_t(rng.uniform_int(0, cats - 1)),
                            int(rng.uniform_int(0, 3))});
      return d;
    };
    for (int i = 0; i < 3; ++i) part1.push_back(random_diff(2));
    for (int i = 0; i < 2; ++i) part2.push_back(random_diff(2));

    MetaBeliefs seq = update_beliefs(update_beliefs(prior_beliefs(2), part1, 3), part2, 2);
    std::vector<DiffResult> all = part1;
    all.insert(all.end(), part2.begin(), part2.end());
    MetaBeliefs joint = update_beliefs(prior_beliefs(2), all, 5);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(seq.gamma_params[c].alpha == doctest::Approx(joint.gamma_params[c].alpha));
      CHECK(seq.gamma_params[c].beta == doctest::Approx(joint.gamma_params[c].beta));
      CHECK(seq.beta_params[c].alpha == doctest::Approx(joint.beta_params[c].alpha));
      CHECK(seq.beta_params[c].beta == doctest::Approx(joint.beta_params[c].beta));
    }
  }
}

TEST_CASE("sample_theta concentrates around the posterior mean as evidence grows") {
  // Strong evidence: 400 hallucination counts of 2 per frame, detection
  // matched 3-of-3... use a directly constructed posterior instead.
  MetaBeliefs b = prior_beliefs(1);
  b.gamma_params[0] = {801.0, 401.0};  // mean ~ 2.0, sd ~ 0.07
  b.beta_params[0] = {601.0, 201.0};   // mean 0.75, tight
  Rng rng(37);
  double sh = 0.0, sd2 = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    Theta t = sample_theta(b, rng);
    REQUIRE(t.halluc_rates.size() == 1);
    CHECK(t.det_rates[0] >= 0.0);
    CHECK(t.det_rates[0] <= 1.0);
    sh += t.halluc_rates[0];
    sd2 += t.det_rates[0];
  }
  CHECK(sh / n == doctest::Approx(801.0 / 401.0).epsilon(0.01));
  CHECK(sd2 / n == doctest::Approx(601.0 / 802.0).epsilon(0.01));
}
