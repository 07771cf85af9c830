#include "qtrack/optical_flow.hpp"
#include "qtrack/parallel.hpp"
#include "qtrack/scene.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace qtrack;

TEST_CASE("identical frames give zero flow") {
  const test::SmoothTexture tex(3);
  const GrayImage img = tex.render(48, 48);
  const FlowResult r = lk_track_point(img, img, {24, 24});
  CHECK(r.tracked);
  CHECK(r.displacement.norm() < 1e-6);
  CHECK(r.residual < 1e-12);
  CHECK(r.condition >= 1.0);
}

TEST_CASE("zero-motion identity over random textures") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const GrayImage img = test::SmoothTexture(seed).render(40, 40);
    const FlowResult r = lk_track_point(img, img, {20.5, 19.25});
    REQUIRE(r.tracked);
    CHECK(r.displacement.norm() < 1e-6);
  }
}

TEST_CASE("smooth texture shifted by (2,1)") {
  const test::SmoothTexture tex(11);
  const GrayImage prev = tex.render(64, 64);
  const GrayImage next = tex.render(64, 64, 2, 1);
  const FlowResult r = lk_track_point(prev, next, {32, 32}, 15, 10);
  CHECK(r.tracked);
  CHECK((r.displacement - Point2(2, 1)).norm() < 0.3);
  CHECK(r.residual >= 0);
  CHECK(r.iterations >= 1);
  CHECK(r.iterations <= 10);
}

TEST_CASE("a single linear solve undershoots a 2 px shift") {
  const test::SmoothTexture tex(11);
  const GrayImage prev = tex.render(64, 64);
  const GrayImage next = tex.render(64, 64, 2, 1);
  const FlowResult one = lk_track_point(prev, next, {32, 32}, 15, 1);
  const FlowResult many = lk_track_point(prev, next, {32, 32}, 15, 10);
  CHECK(one.iterations == 1);
  CHECK((many.displacement - Point2(2, 1)).norm() < (one.displacement - Point2(2, 1)).norm());
}

TEST_CASE("flat images are not trackable") {
  const GrayImage flat(32, 32, 0.5);
  const FlowResult r = lk_track_point(flat, flat, {16, 16});
  CHECK_FALSE(r.tracked);
}

TEST_CASE("window must fit at the start point") {
  const GrayImage img = test::SmoothTexture(1).render(32, 32);
  CHECK_THROWS_AS(lk_track_point(img, img, {3, 16}), FlowError);
  CHECK_THROWS_AS(lk_track_point(img, img, {16, 30}), FlowError);
  LkOptions even;
  even.window = 4;
  CHECK_THROWS_AS(lk_track_point(img, img, {16, 16}, even), FlowError);
  CHECK_THROWS_AS(lk_track_point(img, GrayImage(31, 32), {16, 16}), FlowError);
}

TEST_CASE("structure tensor is symmetric positive semidefinite") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const GrayImage img = test::random_image(20, 20, seed);
    const Gradients g = spatial_gradients(img);
    for (const Point2 p : {Point2(9, 9), Point2(10.3, 8.7), Point2(7, 12)}) {
      const Eigen::Matrix2d t = structure_tensor(g, p, 7);
      CHECK(std::abs(t(0, 1) - t(1, 0)) < 1e-12);
      const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(t).eigenvalues();
      CHECK(ev.minCoeff() >= -1e-12);
    }
  }
}

TEST_CASE("track_points") {
  SceneSpec spec;
  spec.width = 80;
  spec.height = 60;
  spec.origin = {25, 20};
  spec.velocity = {2, 1};
  spec.frames = 2;
  const RenderedFrame f0 = render_scene(spec, 0);
  const RenderedFrame f1 = render_scene(spec, 1);

  SUBCASE("empty list") { CHECK(track_points(f0.image, f1.image, {}).empty()); }

  SUBCASE("corners of a translated square") {
    const std::vector<Point2> corners{{25, 20}, {44, 20}, {44, 39}, {25, 39}};
    const auto flow = track_points(f0.image, f1.image, corners);
    REQUIRE(flow.size() == 4);
    for (const auto& r : flow) {
      CHECK(r.tracked);
      CHECK((r.displacement - Point2(2, 1)).norm() < 0.3);
    }
  }

  SUBCASE("a flat point fails alone") {
    GrayImage prev = f0.image, next = f1.image;
    for (int y = 0; y < 60; ++y)
      for (int x = 60; x < 80; ++x) prev(x, y) = next(x, y) = 0.2;
    const std::vector<Point2> points{{25, 20}, {70, 30}, {44, 39}};
    const auto flow = track_points(prev, next, points);
    REQUIRE(flow.size() == 3);
    CHECK(flow[0].tracked);
    CHECK_FALSE(flow[1].tracked);
    CHECK(flow[2].tracked);
    const auto alone = track_points(prev, next, std::vector<Point2>{points[0]});
    CHECK(alone[0].displacement == flow[0].displacement);
  }

  SUBCASE("points near the edge are flagged, not thrown") {
    const auto flow = track_points(f0.image, f1.image, std::vector<Point2>{{2, 2}, {25, 20}});
    CHECK_FALSE(flow[0].tracked);
    CHECK(flow[1].tracked);
  }

  SUBCASE("executor gives the same results in order") {
    Executor pool(4);
    std::vector<Point2> points;
    for (int i = 0; i < 12; ++i) points.emplace_back(22 + 2 * i, 20 + i);
    const auto serial = track_points(f0.image, f1.image, points);
    const auto parallel = track_points(f0.image, f1.image, points, {}, &pool);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial[i].displacement == parallel[i].displacement);
      CHECK(serial[i].tracked == parallel[i].tracked);
    }
  }
}

TEST_CASE("forward-backward consistency") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const test::SmoothTexture tex(seed + 100);
    const GrayImage prev = tex.render(64, 64);
    const GrayImage next = tex.render(64, 64, 2, 1);
    const Point2 p(30, 33);
    const FlowResult fwd = lk_track_point(prev, next, p);
    REQUIRE(fwd.tracked);
    const FlowResult back = lk_track_point(next, prev, p + fwd.displacement);
    REQUIRE(back.tracked);
    CHECK((p + fwd.displacement + back.displacement - p).norm() < 0.5);
  }
}

TEST_CASE("motion beyond the window is not trusted") {
  const test::SmoothTexture tex(21);
  const GrayImage prev = tex.render(64, 64);
  const FlowResult blank = lk_track_point(prev, GrayImage(64, 64, 0.0), {32, 32});
  CHECK_FALSE(blank.tracked);
}
