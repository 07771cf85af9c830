#include "qtrack/swarm.hpp"

#include "qtrack/parallel.hpp"

#include <cmath>

namespace qtrack {

namespace {

constexpr std::uint64_t kInitStreams = 0;
constexpr std::uint64_t kStepStreams = 1;

template <typename F>
void for_each_particle(std::size_t n, Executor* executor, F&& body) {
  if (executor)
    executor->for_each(n, body);
  else
    for (std::size_t i = 0; i < n; ++i) body(i);
}

void check_finite(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw SwarmError("fitness returned a non-finite value at particle " + std::to_string(i), i);
}

// Sequential fold in particle order; strict improvement only.
void commit(Swarm& swarm, const std::vector<Point2>& positions, const std::vector<double>& values) {
  check_finite(values);
  for (std::size_t i = 0; i < swarm.size(); ++i) {
    Particle& p = swarm.particles[i];
    p.position = positions[i];
    p.value = values[i];
    if (values[i] < p.pbest_value) {
      p.pbest = positions[i];
      p.pbest_value = values[i];
    }
  }
  update_gbest(swarm);
  ++swarm.iteration;
}

}  // namespace

void QpsoParams::validate() const {
  if (!(beta_end > 0) || !(beta_start >= beta_end)) throw SwarmError("QPSO needs beta_start >= beta_end > 0");
  if (max_iters < 1) throw SwarmError("max_iters must be at least 1");
}

double QpsoParams::beta_at(int t) const {
  if (max_iters <= 1) return beta_start;
  const double frac = std::clamp(double(t) / double(max_iters - 1), 0.0, 1.0);
  return beta_start + (beta_end - beta_start) * frac;
}

void PsoParams::validate() const {
  if (!(w > 0 && w <= 1)) throw SwarmError("PSO inertia weight must lie in (0,1]");
  if (!(c1 > 0) || !(c2 > 0)) throw SwarmError("PSO learning rates must be positive");
  if (!(v_max > 0)) throw SwarmError("PSO v_max must be positive");
  if (max_iters < 1) throw SwarmError("max_iters must be at least 1");
}

SwarmRng::SwarmRng(std::uint64_t seed, std::size_t particles) {
  const RandomStream root = RandomStream(seed).split(kStepStreams);
  streams_.reserve(particles);
  for (std::size_t i = 0; i < particles; ++i) streams_.push_back(root.split(i));
}

Swarm init_swarm(std::size_t size, const Bounds& bounds, std::uint64_t seed) {
  if (size < 1) throw SwarmError("swarm size must be at least 1");
  if (bounds.empty()) throw SwarmError("swarm bounds are empty");
  Swarm swarm;
  swarm.bounds = bounds;
  swarm.particles.resize(size);
  const RandomStream root = RandomStream(seed).split(kInitStreams);
  for (std::size_t i = 0; i < size; ++i) {
    RandomStream s = root.split(i);
    Particle& p = swarm.particles[i];
    p.position = {s.uniform(bounds.lo.x(), bounds.hi.x()), s.uniform(bounds.lo.y(), bounds.hi.y())};
    p.pbest = p.position;
  }
  return swarm;
}

Swarm init_swarm(std::size_t size, const Bounds& bounds, std::uint64_t seed, const Fitness& fitness,
                 Executor* executor) {
  Swarm swarm = init_swarm(size, bounds, seed);
  evaluate_swarm(swarm, fitness, executor);
  return swarm;
}

void evaluate_swarm(Swarm& swarm, const Fitness& fitness, Executor* executor) {
  std::vector<double> values(swarm.size());
  for_each_particle(swarm.size(), executor, [&](std::size_t i) { values[i] = fitness(swarm.particles[i].position); });
  check_finite(values);
  for (std::size_t i = 0; i < swarm.size(); ++i) {
    Particle& p = swarm.particles[i];
    p.value = values[i];
    p.pbest = p.position;
    p.pbest_value = values[i];
  }
  update_gbest(swarm);
}

void update_gbest(Swarm& swarm) {
  if (swarm.particles.empty()) return;
  std::size_t best = 0;
  for (std::size_t i = 1; i < swarm.size(); ++i)
    if (swarm.particles[i].pbest_value < swarm.particles[best].pbest_value) best = i;
  swarm.gbest_index = best;
  swarm.gbest = swarm.particles[best].pbest;
  swarm.gbest_value = swarm.particles[best].pbest_value;
}

Point2 compute_mbest(const Swarm& swarm) {
  if (swarm.particles.empty()) throw SwarmError("compute_mbest on an empty swarm");
  Point2 sum = Point2::Zero();
  for (const auto& p : swarm.particles) sum += p.pbest;
  return sum / double(swarm.size());
}

Point2 qpso_move(const Point2& x, const Point2& pbest, const Point2& gbest, const Point2& mbest, double beta,
                 const QpsoDraw& draw) {
  const Point2 attractor = qpso_attractor(pbest, gbest, draw.phi);
  const Point2 spread = beta * std::log(1.0 / draw.u) * (mbest - x).cwiseAbs();
  return draw.k >= 0.5 ? Point2(attractor - spread) : Point2(attractor + spread);
}

Point2 pso_velocity(const Point2& v, const Point2& x, const Point2& pbest, const Point2& gbest, const PsoParams& params,
                    const PsoDraw& draw) {
  const Point2 next = params.w * v + params.c1 * draw.r1.cwiseProduct(pbest - x) + params.c2 * draw.r2.cwiseProduct(gbest - x);
  return next.cwiseMax(Point2::Constant(-params.v_max)).cwiseMin(Point2::Constant(params.v_max));
}

QpsoDraw draw_qpso(RandomStream& rng) {
  QpsoDraw d;
  d.phi = rng.uniform();
  d.u = rng.uniform_open();
  d.k = rng.uniform();
  return d;
}

PsoDraw draw_pso(RandomStream& rng) {
  PsoDraw d;
  d.r1.x() = rng.uniform();
  d.r1.y() = rng.uniform();
  d.r2.x() = rng.uniform();
  d.r2.y() = rng.uniform();
  return d;
}

void qpso_step(Swarm& swarm, const Fitness& fitness, double beta, SwarmRng& rng, Executor* executor) {
  if (!(beta > 0)) throw SwarmError("QPSO beta must be positive");
  if (rng.size() < swarm.size()) throw SwarmError("not enough random streams for the swarm");
  const Point2 mbest = compute_mbest(swarm);
  const Point2 gbest = swarm.gbest;
  std::vector<Point2> positions(swarm.size());
  std::vector<double> values(swarm.size());
  for_each_particle(swarm.size(), executor, [&](std::size_t i) {
    const Particle& p = swarm.particles[i];
    const QpsoDraw draw = draw_qpso(rng[i]);
    positions[i] = swarm.bounds.clamp(qpso_move(p.position, p.pbest, gbest, mbest, beta, draw));
    values[i] = fitness(positions[i]);
  });
  commit(swarm, positions, values);
}

void pso_step(Swarm& swarm, const Fitness& fitness, const PsoParams& params, SwarmRng& rng, Executor* executor) {
  if (rng.size() < swarm.size()) throw SwarmError("not enough random streams for the swarm");
  const Point2 gbest = swarm.gbest;
  std::vector<Point2> positions(swarm.size());
  std::vector<Point2> velocities(swarm.size());
  std::vector<double> values(swarm.size());
  for_each_particle(swarm.size(), executor, [&](std::size_t i) {
    const Particle& p = swarm.particles[i];
    velocities[i] = pso_velocity(p.velocity, p.position, p.pbest, gbest, params, draw_pso(rng[i]));
    positions[i] = swarm.bounds.clamp(p.position + velocities[i]);
    values[i] = fitness(positions[i]);
  });
  for (std::size_t i = 0; i < swarm.size(); ++i) swarm.particles[i].velocity = velocities[i];
  commit(swarm, positions, values);
}

RunResult run_to_convergence(Swarm& swarm, const Fitness& fitness, const OptimizerParams& params, SwarmRng& rng,
                             Executor* executor, const RunHooks& hooks) {
  const int max_iters = std::visit([](const auto& p) { p.validate(); return p.max_iters; }, params);
  const double target = std::visit([](const auto& p) { return p.target_fitness; }, params);
  auto converged = [&] { return hooks.converged ? hooks.converged(swarm) : swarm.gbest_value <= target; };

  RunResult result;
  for (int t = 0; t < max_iters; ++t) {
    if (const auto* q = std::get_if<QpsoParams>(&params))
      qpso_step(swarm, fitness, q->beta_at(t), rng, executor);
    else
      pso_step(swarm, fitness, std::get<PsoParams>(params), rng, executor);
    result.iterations = t + 1;
    if (hooks.after_step) hooks.after_step(swarm, t);
    if (converged()) {
      result.converged = true;
      break;
    }
  }
  return result;
}

RunResult run_to_convergence(Swarm& swarm, const Fitness& fitness, const OptimizerParams& params, Executor* executor,
                             const RunHooks& hooks) {
  const std::uint64_t seed = std::visit([](const auto& p) { return p.seed; }, params);
  SwarmRng rng(seed, swarm.size());
  return run_to_convergence(swarm, fitness, params, rng, executor, hooks);
}

}  // namespace qtrack
