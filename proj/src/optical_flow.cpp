#include "qtrack/optical_flow.hpp"

#include "qtrack/parallel.hpp"

#include <cmath>

namespace qtrack {

namespace {

bool window_inside(const GrayImage& img, const Point2& p, int half) {
  return std::floor(p.x() - half) >= 0 && std::floor(p.y() - half) >= 0 && std::ceil(p.x() + half) <= img.width() - 1 &&
         std::ceil(p.y() + half) <= img.height() - 1 && p.allFinite();
}

void check_options(const LkOptions& options) {
  if (options.window < 3 || options.window % 2 == 0) throw FlowError("LK window must be odd and at least 3");
  if (options.max_iters < 1) throw FlowError("LK max_iters must be at least 1");
}

}  // namespace

Eigen::Matrix2d structure_tensor(const Gradients& grad, const Point2& p, int window) {
  const int half = window / 2;
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const Eigen::Vector2d d(grad.ix.sample(p.x() + dx, p.y() + dy), grad.iy.sample(p.x() + dx, p.y() + dy));
      g.noalias() += d * d.transpose();
    }
  }
  return g / double(window * window);
}

FlowResult lk_track_point(const Gradients& prev_grad, const GrayImage& prev, const GrayImage& next, const Point2& p,
                          const LkOptions& options) {
  check_options(options);
  if (!prev.same_size(next)) throw FlowError("LK frames differ in size");
  const int half = options.window / 2;
  if (!window_inside(prev, p, half))
    throw FlowError("LK window at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ") leaves the frame");

  const int n = options.window * options.window;
  Eigen::Matrix<double, Eigen::Dynamic, 2> a(n, 2);
  Eigen::VectorXd base(n);
  for (int dy = -half, k = 0; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx, ++k) {
      a(k, 0) = prev_grad.ix.sample(p.x() + dx, p.y() + dy);
      a(k, 1) = prev_grad.iy.sample(p.x() + dx, p.y() + dy);
      base(k) = prev.sample(p.x() + dx, p.y() + dy);
    }
  }
  const Eigen::Matrix2d g = (a.transpose() * a) / double(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(g, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(1);

  FlowResult result;
  result.condition = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();

  auto residual_at = [&](const Point2& v, Eigen::VectorXd& it) {
    for (int dy = -half, k = 0; dy <= half; ++dy)
      for (int dx = -half; dx <= half; ++dx, ++k) it(k) = next.sample(p.x() + v.x() + dx, p.y() + v.y() + dy) - base(k);
  };

  Eigen::VectorXd it(n);
  if (!(lo >= options.min_eigenvalue)) {
    residual_at(Point2::Zero(), it);
    result.residual = it.squaredNorm() / n;
    return result;
  }

  const Eigen::LDLT<Eigen::Matrix2d> solver(g);
  Point2 v = Point2::Zero();
  bool inside = true;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    residual_at(v, it);
    const Eigen::Vector2d rhs = -(a.transpose() * it) / double(n);
    const Eigen::Vector2d step = solver.solve(rhs);
    v += step;
    result.iterations = iter + 1;
    if (!window_inside(next, p + v, half)) {
      inside = false;
      break;
    }
    if (step.norm() < options.min_step) break;
  }
  result.displacement = v;
  // a single level cannot measure motion larger than the window reaches
  result.tracked = inside && v.allFinite() && v.cwiseAbs().maxCoeff() <= half;
  residual_at(v, it);
  result.residual = it.squaredNorm() / n;
  return result;
}

FlowResult lk_track_point(const GrayImage& prev, const GrayImage& next, const Point2& p, const LkOptions& options) {
  return lk_track_point(spatial_gradients(prev), prev, next, p, options);
}

FlowResult lk_track_point(const GrayImage& prev, const GrayImage& next, const Point2& p, int window, int max_iters) {
  LkOptions options;
  options.window = window;
  options.max_iters = max_iters;
  return lk_track_point(prev, next, p, options);
}

std::vector<FlowResult> track_points(const GrayImage& prev, const GrayImage& next, std::span<const Point2> points,
                                     const LkOptions& options, Executor* executor) {
  check_options(options);
  if (!prev.same_size(next)) throw FlowError("LK frames differ in size");
  std::vector<FlowResult> out(points.size());
  if (points.empty()) return out;
  const Gradients grad = spatial_gradients(prev);
  auto body = [&](std::size_t i) {
    try {
      out[i] = lk_track_point(grad, prev, next, points[i], options);
    } catch (const FlowError&) {
      out[i] = FlowResult{};
    }
  };
  if (executor)
    executor->for_each(points.size(), body);
  else
    for (std::size_t i = 0; i < points.size(); ++i) body(i);
  return out;
}

}  // namespace qtrack
