#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cloth/net.hpp"
#include "cloth/rng.hpp"
#include "cloth/scene.hpp"

namespace cloth {

enum class ScheduleKind { Step, Cosine };

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Step;
  double lr0 = 1e-2;
  // step schedule
  double gamma = 0.5;
  int interval = 250;
  // cosine annealing
  double floor = 1e-5;
  int period = 1000;
};

/// lr at an optimizer step. Step: lr0 * gamma^(step/interval).
/// Cosine: floor + (lr0 - floor) * (1 + cos(pi step/period)) / 2, clamped
/// to the floor after one period.
double schedule_lr(const ScheduleConfig& cfg, int step);

struct DeConfig {
  int population = 64;
  int generations = 60;
  double bound = 4.0;      // search box is [-bound, bound]^6
  double cross_prob = 0.9;
  double diff_weight = 0.7;
  int probe_batch = 32;    // transitions used by the pre-search loss probe
};

struct TrainConfig {
  double alpha = 0.5;  // physics/data loss mix
  int batch_size = 128;
  int epochs = 2000;
  ScheduleConfig schedule;
  uint64_t seed = 0;
  DeConfig de;
  int checkpoint_interval = 500;
  /// Groups frozen on top of the params' own flags (fine-tune mode).
  std::vector<ParamGroup> freeze;

  void validate(int transition_count) const;
};

/// A minibatch of transitions: frame indices into the trajectory plus the
/// per-node force-integration targets f_k * dt evaluated by the simulator
/// on frame k. Targets exclude the scene's plug-in forces, which the
/// network step re-adds analytically.
struct TrainBatch {
  const Trajectory* traj = nullptr;
  const Scene* scene = nullptr;
  std::vector<int> indices;
  std::vector<Vec3Field> force_dt;
};

/// Uniform sample of batch_size distinct transition indices from
/// [0, frames-2], with targets. Deterministic given the rng state.
TrainBatch sample_batch(const Trajectory& traj, const Scene& scene, int batch_size, Rng& rng);

struct LossValue {
  double total = 0.0;
  double physics = 0.0;
  double data = 0.0;
};

/// Hybrid loss alpha * <physics residual^2> + (1 - alpha) * <data
/// residual^2> and its parameter gradients. The physics residual compares
/// the cell impulse with the mass-normalized force integration; the data
/// residual stacks position and velocity errors of the full network step
/// against the next frame. Pinned nodes are masked out; projection is
/// pass-through for gradients on unconstrained nodes and a stop-gradient on
/// constrained ones.
LossValue compute_loss(const NetworkParams& params, const TrainBatch& batch, double alpha,
                       ParamGradients* grads);

struct DeResult {
  std::vector<double> best;
  double best_value = 0.0;
};

/// DE/rand/1/bin minimizer over a box. Candidates are clamped to the
/// bounds. Deterministic given the rng state. `seed_population` rows, when
/// given, replace the leading uniform initial draws.
DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective,
                                std::span<const double> lo, std::span<const double> hi,
                                int population, int generations, double diff_weight,
                                double cross_prob, Rng& rng,
                                const std::vector<std::vector<double>>* seed_population = nullptr);

/// Pre-search over per-group scale and sign (6 dimensions: linear, bias,
/// nonlinear, deriv, self-velocity, and the ISRU alpha on a log axis),
/// minimizing a short-horizon loss probe. Returns params with the bracket
/// fields set and values drawn uniformly within the brackets.
NetworkParams de_preprocess(const Trajectory& traj, const Scene& scene, const TrainConfig& cfg,
                            Rng& rng);

/// Adam accumulators over the flat 53-scalar parameter vector.
struct AdamState {
  std::array<double, NetworkParams::kScalarCount> m{};
  std::array<double, NetworkParams::kScalarCount> v{};
  int64_t step = 0;
};

/// Standard Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected).
/// Frozen groups are left untouched, moments included.
void adam_update(NetworkParams& params, const ParamGradients& grads, AdamState& opt, double lr);

struct LossRow {
  int step = 0;
  double lr = 0.0;
  double physics = 0.0;
  double data = 0.0;
  double total = 0.0;
};

struct TrainResult {
  NetworkParams params;
  AdamState opt;
  std::vector<LossRow> history;
};

/// Called at every checkpoint interval and after the last step.
using CheckpointSink = std::function<void(int step, const NetworkParams&, const AdamState&)>;

/// Full pipeline: DE pre-search, uniform init within the brackets, then
/// epochs of sample -> loss -> Adam -> schedule. When `resume` is given the
/// pre-search and init are skipped and training continues from its
/// parameters, optimizer state and step counter (fine-tune mode, typically
/// with cfg.freeze set and a cosine schedule).
TrainResult train_loop(const TrainConfig& cfg, const Scene& scene, const Trajectory& traj,
                       const CheckpointSink& on_checkpoint = nullptr,
                       std::optional<TrainResult> resume = std::nullopt);

}  // namespace cloth
