// Two-dimensional swarm optimizers: quantum-behaved PSO and inertia-weight
// PSO, both minimizing a caller-supplied fitness over a search rectangle.
//
// Determinism: every particle draws from its own counter-based stream, and
// the pbest/gbest reduction is a sequential fold in particle order after all
// evaluations of an iteration finish. Running fitness evaluations on an
// Executor therefore gives the same trajectory as running them inline.
#pragma once

#include "qtrack/image.hpp"
#include "qtrack/rng.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

namespace qtrack {

class Executor;

class SwarmError : public std::runtime_error {
 public:
  SwarmError(const std::string& what, std::size_t particle = npos) : std::runtime_error(what), particle_(particle) {}
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  /// Offending particle, or npos.
  std::size_t particle() const { return particle_; }

 private:
  std::size_t particle_;
};

struct Bounds {
  Point2 lo = Point2::Zero();
  Point2 hi = Point2::Zero();

  static Bounds of_image(int width, int height) { return {{0.0, 0.0}, {width - 1.0, height - 1.0}}; }

  bool empty() const { return !(hi.x() > lo.x()) || !(hi.y() > lo.y()); }
  bool contains(const Point2& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
  Point2 clamp(const Point2& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

struct Particle {
  Point2 position = Point2::Zero();
  /// Used by PSO only.
  Point2 velocity = Point2::Zero();
  Point2 pbest = Point2::Zero();
  double pbest_value = std::numeric_limits<double>::infinity();
  /// Fitness at the current position.
  double value = std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  Point2 gbest = Point2::Zero();
  double gbest_value = std::numeric_limits<double>::infinity();
  std::size_t gbest_index = 0;
  int iteration = 0;
  Bounds bounds;

  std::size_t size() const { return particles.size(); }
};

using Fitness = std::function<double(const Point2&)>;

struct QpsoParams {
  double beta_start = 1.0;
  double beta_end = 0.5;
  int max_iters = 100;
  double target_fitness = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
  /// Contraction-expansion coefficient at iteration t (0-based), linear over max_iters.
  double beta_at(int t) const;
};

struct PsoParams {
  double w = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  double v_max = std::numeric_limits<double>::infinity();
  int max_iters = 1000;
  double target_fitness = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

using OptimizerParams = std::variant<QpsoParams, PsoParams>;

/// One independent stream per particle.
class SwarmRng {
 public:
  SwarmRng() = default;
  SwarmRng(std::uint64_t seed, std::size_t particles);
  RandomStream& operator[](std::size_t i) { return streams_.at(i); }
  std::size_t size() const { return streams_.size(); }

 private:
  std::vector<RandomStream> streams_;
};

/// Positions i.i.d. uniform over bounds; pbest = position; velocities zero.
/// Fitness values are left at +inf until evaluate_swarm runs.
Swarm init_swarm(std::size_t size, const Bounds& bounds, std::uint64_t seed);

/// init_swarm followed by one fitness pass.
Swarm init_swarm(std::size_t size, const Bounds& bounds, std::uint64_t seed, const Fitness& fitness,
                 Executor* executor = nullptr);

/// Evaluates every position, resets pbest to the position, and recomputes gbest.
void evaluate_swarm(Swarm& swarm, const Fitness& fitness, Executor* executor = nullptr);

/// Recomputes gbest from the pbests (lowest index on ties).
void update_gbest(Swarm& swarm);

/// Mean of all pbest positions.
Point2 compute_mbest(const Swarm& swarm);

struct QpsoDraw {
  double phi;
  double u;
  double k;
};

struct PsoDraw {
  Point2 r1;
  Point2 r2;
};

/// Local attractor phi * pbest + (1 - phi) * gbest.
inline Point2 qpso_attractor(const Point2& pbest, const Point2& gbest, double phi) {
  return phi * pbest + (1.0 - phi) * gbest;
}

/// Unclamped QPSO position update: the attractor minus (k >= 0.5) or plus
/// (k < 0.5) beta * |mbest - x| * ln(1/u), per coordinate.
Point2 qpso_move(const Point2& x, const Point2& pbest, const Point2& gbest, const Point2& mbest, double beta,
                 const QpsoDraw& draw);

/// Inertia-weight velocity, clamped to +-v_max per coordinate.
Point2 pso_velocity(const Point2& v, const Point2& x, const Point2& pbest, const Point2& gbest, const PsoParams& params,
                    const PsoDraw& draw);

QpsoDraw draw_qpso(RandomStream& rng);
PsoDraw draw_pso(RandomStream& rng);

void qpso_step(Swarm& swarm, const Fitness& fitness, double beta, SwarmRng& rng, Executor* executor = nullptr);
void pso_step(Swarm& swarm, const Fitness& fitness, const PsoParams& params, SwarmRng& rng, Executor* executor = nullptr);

struct RunResult {
  int iterations = 0;
  bool converged = false;
};

struct RunHooks {
  /// Overrides the gbest_value <= target_fitness test.
  std::function<bool(const Swarm&)> converged;
  /// Called after every step, before the convergence test.
  std::function<void(Swarm&, int iteration)> after_step;
};

/// Steps until converged or max_iters; always performs at least one step.
RunResult run_to_convergence(Swarm& swarm, const Fitness& fitness, const OptimizerParams& params, SwarmRng& rng,
                             Executor* executor = nullptr, const RunHooks& hooks = {});

/// Convenience overload with a fresh SwarmRng seeded from params.
RunResult run_to_convergence(Swarm& swarm, const Fitness& fitness, const OptimizerParams& params,
                             Executor* executor = nullptr, const RunHooks& hooks = {});

}  // namespace qtrack
