#include "qtrack/parallel.hpp"
#include "qtrack/scene.hpp"
#include "qtrack/tracker.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace qtrack;

namespace {

// Point-to-line distance through the projection onto the line direction.
double projected_distance(const Point2& a, const Point2& b, const Point2& p) {
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  const double t = ((p.x() - a.x()) * dx + (p.y() - a.y()) * dy) / (dx * dx + dy * dy);
  const double fx = a.x() + t * dx, fy = a.y() + t * dy;
  return std::hypot(p.x() - fx, p.y() - fy);
}

FlowResult flow(double dx, double dy, bool tracked = true) {
  FlowResult f;
  f.displacement = {dx, dy};
  f.tracked = tracked;
  return f;
}

Swarm swarm_at(std::vector<Point2> pbests, std::vector<double> values, const Bounds& bounds) {
  Swarm s;
  s.bounds = bounds;
  for (std::size_t i = 0; i < pbests.size(); ++i) {
    Particle p;
    p.position = p.pbest = pbests[i];
    p.value = p.pbest_value = values[i];
    s.particles.push_back(p);
  }
  update_gbest(s);
  return s;
}

bool box_close(const BoundingBox& a, const BoundingBox& b, double tol) {
  return (a.q - b.q).cwiseAbs().maxCoeff() <= tol && std::abs(a.breadth - b.breadth) <= tol &&
         std::abs(a.length - b.length) <= tol;
}

}  // namespace

TEST_CASE("segment length") {
  CHECK(segment_length<double>({0, 0}, {3, 4}) == 5.0);
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 100; ++i) {
    const Point2 a(u(gen), u(gen)), b(u(gen), u(gen));
    CHECK(std::abs(segment_length(a, b) -
                   std::sqrt((a.x() - b.x()) * (a.x() - b.x()) + (a.y() - b.y()) * (a.y() - b.y()))) < 1e-12);
  }
}

TEST_CASE("perpendicular distance examples") {
  CHECK(perp_dist<double>({0, 0}, {10, 0}, {5, 3}) == doctest::Approx(3.0));
  CHECK(perp_dist<double>({0, 0}, {2, 2}, {1, 1}) == doctest::Approx(0.0));
  // Distance to the line, not to the clipped segment.
  CHECK(perp_dist<double>({0, 0}, {10, 0}, {-4, 2}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(perp_dist<double>({1, 1}, {1, 1}, {0, 0}), TrackerError);
}

TEST_CASE("perpendicular distance properties") {
  std::mt19937 gen(2);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 500; ++i) {
    const Point2 a(u(gen), u(gen)), b(u(gen), u(gen)), p(u(gen), u(gen)), shift(u(gen), u(gen));
    const double scale = 0.1 + std::abs(u(gen)) / 10;
    const double d = perp_dist(a, b, p);
    CHECK(d >= 0);
    CHECK(d == doctest::Approx(projected_distance(a, b, p)).epsilon(1e-9));
    CHECK(std::abs(perp_dist(b, a, p) - d) < 1e-9);
    CHECK(std::abs(perp_dist<double>(a + shift, b + shift, p + shift) - d) < 1e-9);
    CHECK(std::abs(perp_dist<double>(scale * a, scale * b, scale * p) - scale * d) < 1e-9);
    const double t = u(gen) / 50;
    CHECK(perp_dist<double>(a, b, a + t * (b - a)) < 1e-12 * (1 + (b - a).norm()));
  }
}

TEST_CASE("curvature fitness") {
  const CurvatureSegment seg{{2, 3}, {12, 8}};
  const Fitness f = curvature_fitness(seg);
  CHECK(f(seg.d1) == doctest::Approx(0.0));
  const Point2 dir = (seg.d2 - seg.d1).normalized();
  const Point2 normal(-dir.y(), dir.x());
  CHECK(f(0.5 * (seg.d1 + seg.d2) + normal) == doctest::Approx(1.0));

  // The accepted set is the open slab of half-width 2 around the line.
  for (double x = -5; x <= 20; x += 0.37)
    for (double y = -5; y <= 20; y += 0.41) {
      const Point2 p(x, y);
      const bool in_slab = std::abs((p - seg.d1).dot(normal)) < 2.0;
      if (std::abs(std::abs((p - seg.d1).dot(normal)) - 2.0) > 1e-9) CHECK((f(p) < 2.0) == in_slab);
    }
  CHECK_THROWS_AS(curvature_fitness({{1, 1}, {1, 1}}), TrackerError);
}

TEST_CASE("segment pairing") {
  const std::vector<Point2> four{{0, 0}, {5, 0}, {5, 5}, {0, 5}};
  SUBCASE("disjoint") {
    const Pairing p4 = pair_segments(four, PairingMode::disjoint);
    CHECK(p4.segments.size() == 2);
    CHECK_FALSE(p4.unpaired_last);
    CHECK(p4.segments[1].d1 == four[2]);
    CHECK(p4.segments[1].first == 2);

    const std::vector<Point2> five{{0, 0}, {5, 0}, {5, 5}, {0, 5}, {2, 7}};
    const Pairing p5 = pair_segments(five, PairingMode::disjoint);
    CHECK(p5.segments.size() == 2);
    CHECK(p5.unpaired_last);

    const std::vector<Point2> dup{{0, 0}, {0, 0}, {1, 1}, {2, 2}};
    const Pairing pd = pair_segments(dup, PairingMode::disjoint);
    CHECK(pd.segments.size() == 1);
    CHECK(pd.degenerate_dropped == 1);
    CHECK(pd.segments[0].d1 == Point2(1, 1));
  }
  SUBCASE("closed chain") {
    const Pairing p = pair_segments(four, PairingMode::closed_chain);
    REQUIRE(p.segments.size() == 4);
    CHECK(p.segments[3].d1 == four[3]);
    CHECK(p.segments[3].d2 == four[0]);
    CHECK(pair_segments(std::vector<Point2>{{0, 0}, {1, 0}}, PairingMode::closed_chain).segments.size() == 1);
  }
  SUBCASE("errors and names") {
    CHECK_THROWS_AS(pair_segments(std::vector<Point2>{{0, 0}}), TrackerError);
    CHECK(parse_pairing(to_string(PairingMode::closed_chain)) == PairingMode::closed_chain);
    CHECK(parse_pairing("disjoint") == PairingMode::disjoint);
    CHECK_THROWS_AS(parse_pairing("zigzag"), TrackerError);
  }
}

TEST_CASE("bounding box") {
  SUBCASE("corners with p = 1") {
    const std::vector<Point2> pts{{10, 10}, {30, 10}, {10, 50}, {30, 50}};
    const BoundingBox b = bounding_box(pts, 1);
    CHECK(b.q == Point2(10, 10));
    CHECK(b.breadth == 20);
    CHECK(b.length == 40);
    CHECK(b.ql() == Point2(10, 50));
    CHECK(b.qb() == Point2(30, 10));
    CHECK(b.qlb() == Point2(30, 50));
  }
  SUBCASE("single point") {
    const std::vector<Point2> pts(5, Point2(3.2, 7.7));
    const BoundingBox b = bounding_box(pts, 10);
    CHECK(b.q == Point2(4, 8));
    CHECK(b.breadth == 0);
    CHECK(b.length == 0);
  }
  SUBCASE("uniform sample in a rectangle") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> ux(20, 80), uy(10, 40);
    std::vector<Point2> pts(100);
    for (auto& p : pts) p = {ux(gen), uy(gen)};
    const BoundingBox b = bounding_box(pts, 10);
    CHECK(std::abs(b.q.x() - 20) <= 0.1 * 60);
    CHECK(std::abs(b.q.y() - 10) <= 0.1 * 30);
    CHECK(std::abs(b.q.x() + b.breadth - 80) <= 0.1 * 60);
    CHECK(std::abs(b.q.y() + b.length - 40) <= 0.1 * 30);
  }
  SUBCASE("clip and errors") {
    const std::vector<Point2> pts{{-5, -5}, {50, 50}};
    const BoundingBox b = bounding_box(pts, 1, Rect{0, 0, 39, 29});
    CHECK(b.rect() == Rect{0, 0, 39, 29});
    CHECK_THROWS_AS(bounding_box(std::vector<Point2>{}, 3), TrackerError);
  }
  SUBCASE("centroid lies inside up to the anchor rounding") {
    std::mt19937 gen(4);
    for (int trial = 0; trial < 200; ++trial) {
      std::uniform_real_distribution<double> u(0, 1 + trial);
      std::vector<Point2> pts(std::uniform_int_distribution<int>(1, 40)(gen));
      Point2 centroid = Point2::Zero();
      for (auto& p : pts) {
        p = {u(gen), u(gen)};
        centroid += p / double(pts.size());
      }
      const Rect r = bounding_box(pts, 10).rect();
      CHECK(centroid.x() >= r.x0 - 1);
      CHECK(centroid.y() >= r.y0 - 1);
      CHECK(centroid.x() <= r.x1 + 1e-9);
      CHECK(centroid.y() <= r.y1 + 1e-9);
      CHECK(r.width() >= 0);
      CHECK(r.height() >= 0);
    }
  }
}

TEST_CASE("particle reinitialization") {
  const Bounds image = Bounds::of_image(100, 100);
  const Fitness zero = [](const Point2&) { return 0.0; };
  SUBCASE("between the accepted neighbours") {
    Swarm s = swarm_at({{2, 10}, {50, 90}, {8, 30}, {70, 70}}, {0.5, 9, 0.5, 9}, image);
    RandomStream rng(5);
    for (int k = 0; k < 50; ++k) {
      const Point2 p = reinit_particle(s, 1, rng, zero, 2.0);
      CHECK((p.x() >= 2 && p.x() <= 8));
      CHECK((p.y() >= 10 && p.y() <= 30));
      CHECK(s.particles[1].pbest == p);
      CHECK(s.particles[1].pbest_value == 0.0);
      // Put particle 1 back out of the accepted set.
      s.particles[1].pbest_value = 9;
    }
  }
  SUBCASE("falls back to the best pbests") {
    Swarm s = swarm_at({{0, 0}, {40, 40}, {60, 20}, {99, 99}}, {5, 4, 3, 7}, image);
    RandomStream rng(6);
    const Point2 p = reinit_particle(s, 0, rng, zero, 1.0);
    CHECK((p.x() >= 40 && p.x() <= 60));
    CHECK((p.y() >= 20 && p.y() <= 40));
    CHECK(s.gbest_index == 0);
  }
  SUBCASE("two particles draw over the bounds") {
    Swarm s = swarm_at({{10, 10}, {11, 11}}, {0, 0}, image);
    RandomStream rng(7);
    bool far = false;
    for (int k = 0; k < 20; ++k) {
      const Point2 p = reinit_particle(s, 0, rng, zero, 2.0);
      CHECK(image.contains(p));
      far |= (p - Point2(10.5, 10.5)).norm() > 5;
    }
    CHECK(far);
  }
  SUBCASE("reproducible") {
    Swarm a = swarm_at({{2, 10}, {50, 90}, {8, 30}}, {0.5, 9, 0.5}, image);
    Swarm b = a;
    RandomStream ra(8), rb(8);
    for (int k = 0; k < 5; ++k) CHECK(reinit_particle(a, 1, ra, zero, 2.0) == reinit_particle(b, 1, rb, zero, 2.0));
  }
}

TEST_CASE("point propagation") {
  SUBCASE("without consensus failures drop") {
    const std::vector<FlowResult> f{flow(2, 0), flow(0, 0, false), flow(2.1, 0)};
    const Propagation p = propagate_points(f, false, 0.5);
    CHECK(p.moves[0] == Point2(2, 0));
    CHECK_FALSE(p.moves[1].has_value());
    CHECK(p.coasted == 0);
    CHECK_FALSE(p.consensus.has_value());
  }
  SUBCASE("consensus coasts failed and stuck points") {
    const std::vector<FlowResult> f{flow(2, 0), flow(0, 0, false), flow(2.2, 0.1), flow(0, 0), flow(1.9, -0.1)};
    const Propagation p = propagate_points(f, true, 0.5);
    REQUIRE(p.consensus.has_value());
    CHECK(*p.consensus == Point2(2, 0));
    CHECK(p.moves[0] == Point2(2, 0));
    CHECK(p.moves[1] == Point2(2, 0));
    CHECK(p.moves[2] == Point2(2.2, 0.1));
    CHECK(p.moves[3] == Point2(2, 0));
    CHECK(p.coasted == 2);
  }
  SUBCASE("even split follows the previous motion") {
    const std::vector<FlowResult> f{flow(0, 0), flow(2, 0), flow(0, 0), flow(2, 0)};
    CHECK(*propagate_points(f, true, 0.5, {2, 0}).consensus == Point2(2, 0));
    CHECK(*propagate_points(f, true, 0.5, {0, 0}).consensus == Point2(0, 0));
  }
  SUBCASE("a lone tracked point is no consensus") {
    const std::vector<FlowResult> f{flow(1, 1), flow(0, 0, false)};
    const Propagation p = propagate_points(f, true, 0.5);
    CHECK_FALSE(p.consensus.has_value());
    CHECK(p.moves[0] == Point2(1, 1));
    CHECK_FALSE(p.moves[1].has_value());
  }
}

TEST_CASE("search bounds") {
  const CurvatureSegment seg{{10, 20}, {4, 30}};
  const Bounds b = search_bounds(seg, SearchRegion::segment, 6, 100, 100);
  CHECK(b.lo == Point2(0, 14));
  CHECK(b.hi == Point2(16, 36));
  const Bounds img = search_bounds(seg, SearchRegion::image, 6, 100, 80);
  CHECK(img.lo == Point2(0, 0));
  CHECK(img.hi == Point2(99, 79));
}

TEST_CASE("tracker config") {
  TrackerConfig c;
  CHECK(c.effective_swarm_size() == 7);
  CHECK(c.effective_group_size() == 5);
  c.background = BackgroundMode::variable_background;
  CHECK(c.effective_swarm_size() == 10);
  CHECK(c.effective_group_size() == 10);
  c.swarm_size = 4;
  CHECK(c.effective_swarm_size() == 4);
  CHECK_NOTHROW(c.validate());

  auto rejects = [](auto mutate) {
    TrackerConfig bad;
    mutate(bad);
    CHECK_THROWS(bad.validate());
  };
  rejects([](TrackerConfig& t) { t.swarm_size = 1; });
  rejects([](TrackerConfig& t) { t.fitness_epsilon = 0; });
  rejects([](TrackerConfig& t) { t.bbox_p = 0; });
  rejects([](TrackerConfig& t) { t.max_iters = 0; });
  rejects([](TrackerConfig& t) { t.beta_end = 0; });
  rejects([](TrackerConfig& t) {
    t.optimizer = OptimizerKind::pso;
    t.pso_w = 1.5;
  });
  CHECK(parse_background("dynamic") == BackgroundMode::variable_background);
  CHECK(parse_optimizer("pso") == OptimizerKind::pso);
  CHECK_THROWS_AS(parse_optimizer("ga"), TrackerError);
}

TEST_CASE("dominant points for tracking") {
  SceneSpec spec;
  const RenderedFrame f = render_scene(spec, 0);
  const DominantPointSet d = tracking_dominant_points(f.mask, 5, 4);
  REQUIRE(d.size() == 4);
  const std::vector<Point2> corners{{16, 40}, {35, 40}, {35, 59}, {16, 59}};
  for (const auto& c : corners) {
    double nearest = 1e9;
    for (const auto& p : d.points) nearest = std::min(nearest, (p - c).norm());
    CHECK(nearest <= 2.0);
  }
}

TEST_CASE("region segmentation") {
  SceneSpec spec;
  const RenderedFrame f = render_scene(spec, 3);
  const Rect region{f.box.x0 - 8.0, f.box.y0 - 8.0, f.box.x1 + 8.0, f.box.y1 + 8.0};
  const BinaryMask m = segment_region(f.image, region);
  CHECK(((m.pixels() != 0) == (f.mask.pixels() != 0)).all());

  SceneSpec dark = spec;
  std::swap(dark.foreground, dark.background);
  const RenderedFrame g = render_scene(dark, 3);
  CHECK(((segment_region(g.image, region).pixels() != 0) == (g.mask.pixels() != 0)).all());

  CHECK_THROWS_AS(segment_region(GrayImage(40, 40, 0.0), Rect{5, 5, 30, 30}), TrackerError);
}

TEST_CASE("tracker on the synthetic square") {
  SceneSpec spec;
  const RenderedFrame f0 = render_scene(spec, 0);
  const RenderedFrame f1 = render_scene(spec, 1);

  SUBCASE("init") {
    Tracker t{TrackerConfig{}};
    const FrameReport r = t.init(f0.image, f0.mask);
    CHECK(r.frame == 0);
    CHECK(r.alive_swarms == t.state().initial_segments);
    CHECK(r.accepted_particles > 0);
    CHECK(iou(r.box.rect(), f0.box.rect()) >= 0.5);
    for (const auto& slot : t.state().swarms) {
      CHECK(static_cast<int>(slot.trace.size()) == slot.last_iterations);
      std::size_t accepted = 0;
      for (const auto& p : slot.swarm.particles) accepted += p.value < 2.0;
      if (slot.last_converged) CHECK(accepted == slot.swarm.size());
    }
  }

  SUBCASE("zero motion is a fixed point") {
    Tracker t{TrackerConfig{}};
    const FrameReport r0 = t.init(f0.image, f0.mask);
    const std::vector<Point2> before = t.state().points;
    const FrameReport r1 = t.advance(f0.image, f0.image);
    REQUIRE(t.state().points.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK((t.state().points[i] - before[i]).norm() < 1e-6);
    CHECK(box_close(r0.box, r1.box, 1.0));
  }

  SUBCASE("a two pixel shift moves the anchor by about two") {
    Tracker t{TrackerConfig{}};
    const FrameReport r0 = t.init(f0.image, f0.mask);
    const FrameReport r1 = t.advance(f0.image, f1.image);
    CHECK(std::abs(r1.box.q.x() - r0.box.q.x() - 2) <= 1);
    CHECK(r1.flow.size() == t.state().points.size());
  }

  SUBCASE("a blank frame loses the track") {
    Tracker t{TrackerConfig{}};
    const FrameReport r0 = t.init(f0.image, f0.mask);
    const GrayImage blank(spec.width, spec.height, 0.0);
    try {
      t.advance(f0.image, blank);
      FAIL("expected an error");
    } catch (const TrackingLost& e) {
      CHECK(e.last_box().rect() == r0.box.rect());
    }
  }

  SUBCASE("failed flow kills swarms without consensus") {
    TrackerConfig c;
    c.flow_consensus = false;
    Tracker t{c};
    t.init(f0.image, f0.mask);
    GrayImage prev = f0.image, next = f1.image;
    // Flatten the right half so the windows of the right corners see no texture.
    for (int y = 0; y < spec.height; ++y)
      for (int x = 26; x < spec.width; ++x) prev(x, y) = next(x, y) = 0.5;
    const FrameReport r = t.advance(prev, next);
    REQUIRE_FALSE(r.redetected);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < r.flow.size(); ++i) {
      failed += !r.flow[i].tracked;
      CHECK(t.state().point_alive[i] == r.flow[i].tracked);
    }
    CHECK(failed > 0);
    for (const auto& slot : t.state().swarms)
      CHECK(slot.alive == (t.state().point_alive[slot.segment.first] && t.state().point_alive[slot.segment.second]));
    CHECK(r.alive_swarms < t.state().initial_segments);
  }

  SUBCASE("identical runs with and without the executor") {
    TrackerConfig c;
    c.parallel = true;
    Executor pool(4);
    Tracker a{c, &pool}, b{TrackerConfig{}};
    a.init(f0.image, f0.mask);
    b.init(f0.image, f0.mask);
    for (int k = 1; k < 6; ++k) {
      const RenderedFrame prev = render_scene(spec, k - 1), next = render_scene(spec, k);
      const FrameReport ra = a.advance(prev.image, next.image);
      const FrameReport rb = b.advance(prev.image, next.image);
      CHECK(ra.box.rect() == rb.box.rect());
      CHECK(ra.total_iterations == rb.total_iterations);
    }
  }

  SUBCASE("observer sees every iteration in swarm order") {
    Tracker t{TrackerConfig{}};
    std::vector<std::pair<int, IterationRecord>> seen;
    t.set_observer([&seen](int id, const IterationRecord& r) { seen.emplace_back(id, r); });
    const FrameReport r = t.init(f0.image, f0.mask);
    CHECK(static_cast<int>(seen.size()) == r.total_iterations);
    for (std::size_t k = 1; k < seen.size(); ++k) CHECK(seen[k].first >= seen[k - 1].first);
  }

  SUBCASE("errors") {
    Tracker t{TrackerConfig{}};
    CHECK_THROWS_AS(t.advance(f0.image, f1.image), TrackerError);
    t.init(f0.image, f0.mask);
    CHECK_THROWS_AS(t.advance(f0.image, GrayImage(10, 10)), TrackerError);
  }
}
