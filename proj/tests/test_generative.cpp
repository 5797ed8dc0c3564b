#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "metacog/diff.hpp"
#include "metacog/generative.hpp"
#include "metacog/geometry.hpp"
#include "metacog/rng.hpp"

using namespace metacog;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Tiny 2x2 image at 90 degree fov: focal length is exactly one pixel, and an
// object straight ahead projects to the exact image center (1, 1).
CameraIntrinsics tiny_image() {
  CameraIntrinsics intr;
  intr.image_width = 2;
  intr.image_height = 2;
  intr.vertical_fov_deg = 90.0;
  return intr;
}

CameraPose straight_pose() {
  CameraPose pose;
  pose.position = {0.0, 1.0, 4.0};
  pose.focal_point = {0.0, 1.0, 0.0};
  return pose;
}

FrameObservation frame_of(std::vector<Detection2D> dets) {
  FrameObservation f;
  f.camera = straight_pose();
  f.detections = std::move(dets);
  return f;
}

Theta one_cat_theta(double lambda, double p) {
  Theta t;
  t.halluc_rates = {lambda};
  t.det_rates = {p};
  return t;
}

// Integral of exp(frame_log_likelihood) over ordered k-tuples of detection
// positions on the image, by the midpoint rule on a g x g grid per detection.
double integrate_k(const WorldState& world, const Theta& theta, const CameraIntrinsics& intr,
                   const NoiseModel& noise, int k, int g) {
  const double w = intr.image_width, h = intr.image_height;
  const double dx = w / g, dy = h / g;
  std::vector<Pixel> pts;
  pts.reserve(std::size_t(g) * g);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) pts.push_back({(i + 0.5) * dx, (j + 0.5) * dy});
  const double cell = dx * dy;
  if (k == 0) {
    return std::exp(frame_log_likelihood(frame_of({}), world, theta, intr, noise));
  }
  if (k == 1) {
    double s = 0.0;
    FrameObservation f = frame_of({{0, 0, 0}});
    for (const auto& p : pts) {
      f.detections[0] = {p.x, p.y, 0};
      s += std::exp(frame_log_likelihood(f, world, theta, intr, noise));
    }
    return s * cell;
  }
  REQUIRE(k == 2);
  double s = 0.0;
  FrameObservation f = frame_of({{0, 0, 0}, {0, 0, 0}});
  for (const auto& a : pts) {
    f.detections[0] = {a.x, a.y, 0};
    for (const auto& b : pts) {
      f.detections[1] = {b.x, b.y, 0};
      s += std::exp(frame_log_likelihood(f, world, theta, intr, noise));
    }
  }
  return s * cell * cell;
}

}  // namespace

TEST_CASE("room bounds and prior validation") {
  RoomBounds b;
  CHECK_NOTHROW(b.validate());
  CHECK(b.volume() == doctest::Approx(12.0 * 1.0 * 8.0));
  CHECK(b.contains({0, 0.5, 0}));
  CHECK(b.contains({-6.0, 0.0, 4.0}));  // inclusive edges
  CHECK_FALSE(b.contains({6.1, 0.5, 0}));
  RoomBounds bad = b;
  bad.x_min = bad.x_max;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ScenePrior prior;
  CHECK_NOTHROW(prior.validate());
  ScenePrior p2 = prior;
  p2.count_p = 1.0;
  CHECK_THROWS_AS(p2.validate(), std::invalid_argument);
  p2 = prior;
  p2.repulsion_sigma_sq = 0.0;
  CHECK_THROWS_AS(p2.validate(), std::invalid_argument);
  p2 = prior;
  p2.num_categories = 0;
  CHECK_THROWS_AS(p2.validate(), std::invalid_argument);

  NoiseModel n;
  CHECK_NOTHROW(n.validate());
  n.spatial_sigma_px = 0.0;
  CHECK_THROWS_AS(n.validate(), std::invalid_argument);
}

TEST_CASE("world log prior matches the closed form") {
  ScenePrior prior;  // p=0.9, sigma_sq=1, default room, 5 categories
  const double log_v = std::log(96.0);

  WorldState empty;
  CHECK(world_log_prior(empty, prior) == doctest::Approx(std::log(0.9)).epsilon(1e-12));

  WorldState one;
  one.objects = {{{2.0, 0.5, -1.0}, 3}};
  CHECK(world_log_prior(one, prior) ==
        doctest::Approx(std::log(0.9) + std::log(0.1) - std::log(5.0) - log_v).epsilon(1e-12));

  WorldState two = one;
  two.objects.push_back({{2.0, 0.5, 1.5}, 0});
  const double d2 = 2.5 * 2.5;
  const double expect = std::log(0.9) + 2.0 * std::log(0.1) - 2.0 * std::log(5.0) -
                        2.0 * log_v + std::log(1.0 - std::exp(-d2 / 2.0));
  CHECK(world_log_prior(two, prior) == doctest::Approx(expect).epsilon(1e-12));

  // Repulsion is symmetric in object order.
  std::swap(two.objects[0], two.objects[1]);
  CHECK(world_log_prior(two, prior) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("world log prior edge cases") {
  ScenePrior prior;
  WorldState out;
  out.objects = {{{7.0, 0.5, 0.0}, 0}};
  CHECK(world_log_prior(out, prior) == -std::numeric_limits<double>::infinity());
  WorldState low;
  low.objects = {{{0.0, -0.1, 0.0}, 0}};
  CHECK(world_log_prior(low, prior) == -std::numeric_limits<double>::infinity());

  WorldState coincident;
  coincident.objects = {{{1.0, 0.5, 1.0}, 0}, {{1.0, 0.5, 1.0}, 1}};
  CHECK(world_log_prior(coincident, prior) == -std::numeric_limits<double>::infinity());

  WorldState bad_cat;
  bad_cat.objects = {{{0.0, 0.5, 0.0}, 9}};
  CHECK_THROWS_AS(world_log_prior(bad_cat, prior), std::invalid_argument);
}

TEST_CASE("prior samples agree with the prior's construction") {
  ScenePrior prior;
  Rng rng(6060);
  const int n = 50000;
  int zero_count = 0;
  double sum_n = 0.0;
  double sum_x = 0.0, sum_x2 = 0.0;
  std::vector<int> cat_counts(prior.num_categories, 0);
  for (int i = 0; i < n; ++i) {
    WorldState w = sample_world_prior(prior, rng);
    if (w.objects.empty()) ++zero_count;
    sum_n += double(w.objects.size());
    for (const auto& o : w.objects) {
      CHECK(prior.bounds.contains(o.position));
      CHECK(o.category < prior.num_categories);
      sum_x += o.position.x;
      sum_x2 += o.position.x * o.position.x;
      ++cat_counts[o.category];
    }
  }
  // Geometric count: P(N=0) = 0.9, E[N] = (1-p)/p = 1/9.
  CHECK(zero_count / double(n) == doctest::Approx(0.9).epsilon(0.01));
  CHECK(sum_n / n == doctest::Approx(1.0 / 9.0).epsilon(0.05));
  // Uniform positions over x in [-6, 6]: mean 0, variance 12.
  const double total_objs = sum_n;
  CHECK(sum_x / total_objs == doctest::Approx(0.0).epsilon(0.15));
  CHECK(sum_x2 / total_objs == doctest::Approx(12.0).epsilon(0.05));
  // Categories uniform.
  for (std::size_t c = 0; c < prior.num_categories; ++c) {
    CHECK(cat_counts[c] / total_objs == doctest::Approx(0.2).epsilon(0.1));
  }
}

TEST_CASE("empty-world likelihood is an exactly normalized Poisson process") {
  // With no objects every detection is a hallucination, so summing the
  // integrated density over tuples of size <= 2 must give the Poisson cdf at
  // 2, exactly (the integrand is constant in position).
  const CameraIntrinsics intr = tiny_image();
  NoiseModel noise;
  noise.spatial_sigma_px = 0.35;
  noise.matching_radius_px = 10.0;
  WorldState empty;
  for (double lambda : {0.3, 1.0, 2.5}) {
    const Theta theta = one_cat_theta(lambda, 0.5);
    double total = 0.0;
    for (int k = 0; k <= 2; ++k) total += integrate_k(empty, theta, intr, noise, k, 8);
    const double cdf2 =
        std::exp(-lambda) * (1.0 + lambda + lambda * lambda / 2.0);
    CHECK(total == doctest::Approx(cdf2).epsilon(1e-10));
  }
}

TEST_CASE("single-object likelihood integrates to the detection-count law") {
  // One visible object at the image center with a matching radius covering
  // the whole image: every detection matches, so the integrated density over
  // k-tuples is P(N=k) times the in-image Gaussian mass to the k-th power.
  const CameraIntrinsics intr = tiny_image();
  NoiseModel noise;
  noise.spatial_sigma_px = 0.35;
  noise.matching_radius_px = 10.0;
  WorldState world;
  world.objects = {{{0.0, 1.0, 0.0}, 0}};

  const double mass1d = 2.0 * normal_cdf(1.0 / noise.spatial_sigma_px) - 1.0;
  const double m = mass1d * mass1d;  // Gaussian mass inside the image

  for (auto [lambda, p] : {std::pair{0.7, 0.6}, std::pair{0.2, 0.3}}) {
    const Theta theta = one_cat_theta(lambda, p);
    const double i0 = integrate_k(world, theta, intr, noise, 0, 1);
    const double i1 = integrate_k(world, theta, intr, noise, 1, 160);
    CHECK(i0 == doctest::Approx(std::exp(-lambda) * (1.0 - p)).epsilon(1e-10));
    CHECK(i1 == doctest::Approx(std::exp(-lambda) * (1.0 - p) * p * m).epsilon(2e-3));
  }

  // Two-detection tuple for one setting (quartic grid, so kept coarser).
  const Theta theta = one_cat_theta(0.7, 0.6);
  const double i2 = integrate_k(world, theta, intr, noise, 2, 48);
  CHECK(i2 ==
        doctest::Approx(std::exp(-0.7) * 0.4 * 0.36 * m * m).epsilon(5e-3));
}

TEST_CASE("radius-limited likelihood splits mass between matches and hallucinations") {
  // Matching radius smaller than the image: detections inside the disc match
  // the object, the rest are hallucinations. Closed form for k <= 2.
  const CameraIntrinsics intr = tiny_image();
  NoiseModel noise;
  noise.spatial_sigma_px = 0.35;
  noise.matching_radius_px = 0.55;
  WorldState world;
  world.objects = {{{0.0, 1.0, 0.0}, 0}};
  const double lambda = 0.8, p = 0.45;
  const Theta theta = one_cat_theta(lambda, p);

  const double r = noise.matching_radius_px, s = noise.spatial_sigma_px;
  const double area = 4.0;
  const double disc_mass = 1.0 - std::exp(-r * r / (2.0 * s * s));  // isotropic Gaussian
  const double out_frac = (area - M_PI * r * r) / area;
  const double e = std::exp(-lambda), q = 1.0 - p;

  const double expect0 = e * q;
  const double expect1 = e * q * (p * disc_mass + lambda * out_frac);
  const double expect2 = e * q *
                         (p * p * disc_mass * disc_mass +
                          2.0 * p * disc_mass * lambda * out_frac +
                          0.5 * lambda * lambda * out_frac * out_frac);

  CHECK(integrate_k(world, theta, intr, noise, 0, 1) ==
        doctest::Approx(expect0).epsilon(1e-10));
  CHECK(integrate_k(world, theta, intr, noise, 1, 200) ==
        doctest::Approx(expect1).epsilon(0.02));
  CHECK(integrate_k(world, theta, intr, noise, 2, 56) ==
        doctest::Approx(expect2).epsilon(0.04));
}

TEST_CASE("likelihood edge cases") {
  const CameraIntrinsics intr = tiny_image();
  NoiseModel noise;
  noise.spatial_sigma_px = 0.35;
  noise.matching_radius_px = 10.0;
  const double neg_inf = -std::numeric_limits<double>::infinity();

  // A hallucination under a zero hallucination rate is impossible.
  WorldState empty;
  CHECK(frame_log_likelihood(frame_of({{0.5, 0.5, 0}}), empty, one_cat_theta(0.0, 0.5), intr,
                             noise) == neg_inf);
  // ...but an empty frame under a zero rate is certain (count term is 1).
  CHECK(frame_log_likelihood(frame_of({}), empty, one_cat_theta(0.0, 0.5), intr, noise) ==
        doctest::Approx(0.0));

  // A matched detection under detection rate zero is impossible.
  WorldState world;
  world.objects = {{{0.0, 1.0, 0.0}, 0}};
  CHECK(frame_log_likelihood(frame_of({{1.0, 1.0, 0}}), world, one_cat_theta(0.0, 0.0), intr,
                             noise) == neg_inf);

  // An invisible object contributes nothing: likelihood equals the
  // empty-world value exactly.
  WorldState behind;
  behind.objects = {{{0.0, 1.0, 10.0}, 0}};
  const Theta t = one_cat_theta(0.4, 0.7);
  auto f = frame_of({{0.5, 1.5, 0}});
  CHECK(frame_log_likelihood(f, behind, t, intr, noise) ==
        doctest::Approx(frame_log_likelihood(f, empty, t, intr, noise)).epsilon(1e-12));
}

TEST_CASE("likelihood is invariant to detection order") {
  CameraIntrinsics intr;  // full-size image
  NoiseModel noise;       // defaults: sigma 200, radius 200
  Theta theta;
  theta.halluc_rates = {0.5, 0.8};
  theta.det_rates = {0.6, 0.4};
  WorldState world;
  world.objects = {{{0.5, 0.5, -0.5}, 0}, {{-1.0, 0.5, 0.5}, 1}};
  Rng rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection2D> dets;
    const int n = int(rng.uniform_int(0, 6));
    for (int i = 0; i < n; ++i)
      dets.push_back({rng.uniform(0, 800), rng.uniform(0, 800),
                      std::size_t(rng.uniform_int(0, 1))});
    FrameObservation f;
    f.camera = straight_pose();
    f.detections = dets;
    const double a = frame_log_likelihood(f, world, theta, intr, noise);
    auto perm = rng.permutation(dets.size());
    FrameObservation g;
    g.camera = straight_pose();
    for (auto idx : perm) g.detections.push_back(dets[idx]);
    const double b = frame_log_likelihood(g, world, theta, intr, noise);
    if (std::isinf(a)) {
      CHECK(std::isinf(b));
    } else {
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
  }
}

TEST_CASE("scene likelihood sums frames and rejects empty scenes") {
  CameraIntrinsics intr;
  NoiseModel noise;
  Theta theta = one_cat_theta(0.5, 0.5);
  WorldState world;
  world.objects = {{{0.0, 0.5, 0.0}, 0}};
  SceneData scene;
  scene.frames.push_back(frame_of({{400, 400, 0}}));
  scene.frames.push_back(frame_of({}));
  const double total = scene_log_likelihood(scene, world, theta, intr, noise);
  const double f0 = frame_log_likelihood(scene.frames[0], world, theta, intr, noise);
  const double f1 = frame_log_likelihood(scene.frames[1], world, theta, intr, noise);
  CHECK(total == doctest::Approx(f0 + f1).epsilon(1e-12));
  SceneData empty;
  CHECK_THROWS_AS(scene_log_likelihood(empty, world, theta, intr, noise),
                  std::invalid_argument);
}

TEST_CASE("simulated detections match the stated distributions") {
  // Three categories: the first two have objects in view, the third only
  // hallucinates, giving an exact Poisson stream to test against.
  CameraIntrinsics intr;
  NoiseModel noise;
  noise.spatial_sigma_px = 15.0;
  noise.matching_radius_px = 60.0;
  Theta theta;
  theta.halluc_rates = {0.5, 0.2, 0.8};
  theta.det_rates = {0.7, 0.4, 0.5};
  WorldState world;
  world.objects = {{{1.5, 0.5, 0.0}, 0}, {{-1.5, 0.5, 0.0}, 1}};
  std::vector<CameraPose> poses = {straight_pose()};

  Rng rng(121212);
  const int n = 30000;
  double h2_sum = 0.0, h2_sq = 0.0;
  double m0_sum = 0.0, m1_sum = 0.0;
  long m0_max = 0;
  for (int i = 0; i < n; ++i) {
    auto frames = simulate_detections(world, theta, poses, intr, noise, rng);
    REQUIRE(frames.size() == 1);
    DiffResult d = diff_world_detections(world, frames[0], intr, noise.matching_radius_px, 3);
    h2_sum += d.hallucinations[2];
    h2_sq += double(d.hallucinations[2]) * d.hallucinations[2];
    for (const auto& ev : d.events) {
      if (ev.object_index == 0) m0_sum += ev.matched_count;
      if (ev.object_index == 1) m1_sum += ev.matched_count;
      m0_max = std::max(m0_max, long(ev.matched_count));
    }
  }
  // Category 2 has no object: hallucination counts are exactly Poisson(0.8).
  const double h2_mean = h2_sum / n;
  CHECK(h2_mean == doctest::Approx(0.8).epsilon(0.02));
  CHECK(h2_sq / n - h2_mean * h2_mean == doctest::Approx(0.8).epsilon(0.04));
  // Matched counts approximate the geometric law mean p/(1-p); same-category
  // hallucinations landing within the radius add a small positive bias.
  CHECK(m0_sum / n == doctest::Approx(0.7 / 0.3).epsilon(0.03));
  CHECK(m1_sum / n == doctest::Approx(0.4 / 0.6).epsilon(0.04));
  CHECK(m0_max <= 21);  // generation caps per-object detections
}

TEST_CASE("scene match counts track per-object detections") {
  CameraIntrinsics intr;
  NoiseModel noise;
  WorldState world;
  world.objects = {{{1.5, 0.5, 0.0}, 0}, {{-1.5, 0.5, 0.0}, 1}};
  auto p0 = project(world.objects[0].position, straight_pose(), intr);
  auto p1 = project(world.objects[1].position, straight_pose(), intr);
  REQUIRE(p0.has_value());
  REQUIRE(p1.has_value());
  SceneData scene;
  scene.frames.push_back(frame_of({{p0->x, p0->y, 0}, {p0->x + 5, p0->y, 0}}));
  scene.frames.push_back(frame_of({{p1->x, p1->y, 1}}));
  scene.frames.push_back(frame_of({{100.0, 100.0, 1}}));  // hallucination far away
  auto counts = scene_match_counts(scene, world, intr, noise);
  REQUIRE(counts.size() == 2);
  CHECK(counts[0] == 2);
  CHECK(counts[1] == 1);
}

TEST_CASE("simulate validates inputs") {
  CameraIntrinsics intr;
  NoiseModel noise;
  Rng rng(1);
  std::vector<CameraPose> poses = {straight_pose()};
  WorldState world;
  world.objects = {{{0.0, 0.5, 0.0}, 7}};  // category out of range
  CHECK_THROWS_AS(simulate_detections(world, one_cat_theta(0.5, 0.5), poses, intr, noise, rng),
                  std::invalid_argument);
  Theta bad;
  bad.halluc_rates = {0.5};
  bad.det_rates = {1.5};
  WorldState ok;
  CHECK_THROWS_AS(simulate_detections(ok, bad, poses, intr, noise, rng),
                  std::invalid_argument);
}
