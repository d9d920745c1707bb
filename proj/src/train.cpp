#include "cloth/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cloth/error.hpp"
#include "cloth/sim.hpp"

namespace cloth {

namespace {

// Substream tags for the per-step RNG derivation. Optimizer steps use the
// step index itself, so these must stay far outside any plausible range.
constexpr uint64_t kDeStream = 0xde5ea4c400000001ULL;
constexpr uint64_t kProbeStream = 0xde5ea4c400000002ULL;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::array<double, NetworkParams::kScalarCount> flatten(const ParamGradients& grads) {
  std::array<double, NetworkParams::kScalarCount> flat{};
  int idx = 0;
  ParamGradients g = grads;
  for_each_gradient(g, [&](ParamGroup, int, double& v) { flat[static_cast<size_t>(idx++)] = v; });
  return flat;
}

/// Per-group scale/sign decode of one DE vector. The first five axes carry
/// sign and log-magnitude (|z| - 2 decades) for the weight groups, the last
/// is the ISRU alpha on a pure log axis.
struct DeDecode {
  double linear, bias, nonlinear, deriv, self_velocity, alpha;
};

DeDecode decode_de(std::span<const double> z) {
  auto scale = [](double v) { return (v >= 0.0 ? 1.0 : -1.0) * std::pow(10.0, std::abs(v) - 2.0); };
  return {scale(z[0]), scale(z[1]), scale(z[2]), scale(z[3]), scale(z[4]),
          std::pow(10.0, z[5] / 2.0)};
}

NetworkParams group_constant_params(const DeDecode& d) {
  NetworkParams p;
  p.linear_w.fill(d.linear);
  p.linear_b = Vec3{d.bias, d.bias, d.bias};
  p.nonlinear_w.fill(d.nonlinear);
  p.deriv_w.fill(d.deriv);
  p.self_velocity_w = d.self_velocity;
  p.isru_alpha = d.alpha;
  return p;
}

}  // namespace

double schedule_lr(const ScheduleConfig& cfg, int step) {
  if (cfg.kind == ScheduleKind::Step)
    return cfg.lr0 * std::pow(cfg.gamma, step / cfg.interval);
  if (step >= cfg.period) return cfg.floor;
  return cfg.floor +
         (cfg.lr0 - cfg.floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * step / cfg.period));
}

void TrainConfig::validate(int transition_count) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("train.alpha: must be in [0, 1]");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (batch_size > transition_count)
    throw ConfigError("train.batch_size: exceeds the " + std::to_string(transition_count) +
                      " available transitions");
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (!(schedule.lr0 > 0.0)) throw ConfigError("train.lr0: must be > 0");
  if (!(schedule.gamma > 0.0 && schedule.gamma <= 1.0))
    throw ConfigError("train.gamma: must be in (0, 1]");
  if (schedule.interval < 1) throw ConfigError("train.interval: must be >= 1");
  if (schedule.period < 1) throw ConfigError("train.period: must be >= 1");
  if (!(schedule.floor >= 0.0)) throw ConfigError("train.floor: must be >= 0");
  if (de.population < 4) throw ConfigError("train.de.population: must be >= 4");
  if (de.generations < 0) throw ConfigError("train.de.generations: must be >= 0");
  if (!(de.bound > 0.0)) throw ConfigError("train.de.bound: must be > 0");
  if (!(de.cross_prob >= 0.0 && de.cross_prob <= 1.0))
    throw ConfigError("train.de.cross_prob: must be in [0, 1]");
  if (!(de.diff_weight > 0.0 && de.diff_weight <= 2.0))
    throw ConfigError("train.de.diff_weight: must be in (0, 2]");
  if (de.probe_batch < 1) throw ConfigError("train.de.probe_batch: must be >= 1");
  if (checkpoint_interval < 1) throw ConfigError("train.checkpoint_interval: must be >= 1");
}

TrainBatch sample_batch(const Trajectory& traj, const Scene& scene, int batch_size, Rng& rng) {
  const int transitions = traj.frame_count() - 1;
  if (transitions < 1) throw ConfigError("trajectory has no transitions to sample");
  if (batch_size < 1 || batch_size > transitions)
    throw ConfigError("batch size " + std::to_string(batch_size) + " not in [1, " +
                      std::to_string(transitions) + "]");

  TrainBatch batch;
  batch.traj = &traj;
  batch.scene = &scene;
  std::vector<int> pool(static_cast<size_t>(transitions));
  std::iota(pool.begin(), pool.end(), 0);
  for (int k = 0; k < batch_size; ++k) {
    const int j = k + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(transitions - k)));
    std::swap(pool[static_cast<size_t>(k)], pool[static_cast<size_t>(j)]);
    batch.indices.push_back(pool[static_cast<size_t>(k)]);
  }

  const MaterialParams& m = scene.material;
  batch.force_dt.reserve(batch.indices.size());
  for (int k : batch.indices) {
    const ClothState& state = traj.frames[static_cast<size_t>(k)];
    ForceField f = elastic_force(state, scene.topology, m.stiffness);
    const ForceField fd = damping_force(state, scene.topology, m.damping);
    for (size_t i = 0; i < f.size(); ++i) f[i] += fd[i];
    if (!scene.plugs(PlugForce::Pressure)) {
      const ForceField fp = pressure_force(state, scene.topology, m.pressure);
      for (size_t i = 0; i < f.size(); ++i) f[i] += fp[i];
    }
    const Vec3 g = scene.plugs(PlugForce::Gravity) ? Vec3{} : m.gravity;
    const double d = scene.plugs(PlugForce::Drag) ? 0.0 : m.drag;
    for (size_t i = 0; i < f.size(); ++i)
      f[i] = (f[i] + g * m.mass - state.v[i] * d) * scene.dt;
    batch.force_dt.push_back(std::move(f));
  }
  return batch;
}

LossValue compute_loss(const NetworkParams& params, const TrainBatch& batch, double alpha,
                       ParamGradients* grads) {
  if (!batch.traj || !batch.scene || batch.indices.empty())
    throw ConfigError("compute_loss: empty batch");
  const Scene& scene = *batch.scene;
  const Trajectory& traj = *batch.traj;
  const int n = scene.topology.node_count();
  const double dt = scene.dt;
  const double inv_mass = 1.0 / scene.material.mass;
  const size_t batch_n = batch.indices.size();

  std::vector<uint8_t> pinned(static_cast<size_t>(n), 0);
  for (int i : scene.bc.nodes) pinned[static_cast<size_t>(i)] = 1;
  const int free_count = n - static_cast<int>(scene.bc.nodes.size());

  // residuals kept per element so the gradient pass can weight them once
  // the batch-wide normalizers are known
  std::vector<Vec3Field> phys_residual(grads ? batch_n : 0);
  std::vector<Vec3Field> data_residual(grads ? batch_n : 0);
  double phys_sq = 0.0;
  double data_sq = 0.0;
  int64_t data_count = 0;

  std::vector<uint8_t> constrained;
  for (size_t b = 0; b < batch_n; ++b) {
    const int k = batch.indices[b];
    const ClothState& state = traj.frames[static_cast<size_t>(k)];
    const ClothState& next = traj.frames[static_cast<size_t>(k) + 1];

    const Vec3Field impulse = forward_impulse(state, scene.topology, params);
    Vec3Field applied = impulse;
    const Vec3Field plug = plug_impulse(state, scene);
    for (size_t i = 0; i < applied.size(); ++i) applied[i] += plug[i];
    const ClothState out =
        advance_with_impulse(state, applied, scene, (k + 1) * dt, &constrained);

    Vec3Field rp(static_cast<size_t>(n), Vec3{});
    Vec3Field rd(static_cast<size_t>(n), Vec3{});
    for (size_t i = 0; i < static_cast<size_t>(n); ++i) {
      if (pinned[i]) continue;
      const Vec3 r = impulse[i] - batch.force_dt[b][i] * inv_mass;
      phys_sq += r.squared_norm();
      rp[i] = r;
      if (constrained[i]) continue;  // projection is a stop-gradient
      const Vec3 rv = out.v[i] - next.v[i];
      const Vec3 rx = out.x[i] - next.x[i];
      data_sq += rv.squared_norm() + rx.squared_norm();
      ++data_count;
      rd[i] = rv + rx * dt;
    }
    if (!std::isfinite(phys_sq) || !std::isfinite(data_sq))
      throw NumericsError("non-finite loss at batch element " + std::to_string(b) + " (frame " +
                          std::to_string(k) + ")");
    if (grads) {
      phys_residual[b] = std::move(rp);
      data_residual[b] = std::move(rd);
    }
  }

  LossValue loss;
  const double phys_denom = 3.0 * static_cast<double>(batch_n) * free_count;
  const double data_denom = 6.0 * static_cast<double>(data_count);
  loss.physics = free_count > 0 ? phys_sq / phys_denom : 0.0;
  loss.data = data_count > 0 ? data_sq / data_denom : 0.0;
  loss.total = alpha * loss.physics + (1.0 - alpha) * loss.data;

  if (grads) {
    *grads = ParamGradients{};
    const double phys_coeff = free_count > 0 ? 2.0 * alpha / phys_denom : 0.0;
    const double data_coeff = data_count > 0 ? 2.0 * (1.0 - alpha) / data_denom : 0.0;
    Vec3Field upstream(static_cast<size_t>(n));
    for (size_t b = 0; b < batch_n; ++b) {
      const ClothState& state = traj.frames[static_cast<size_t>(batch.indices[b])];
      for (size_t i = 0; i < static_cast<size_t>(n); ++i)
        upstream[i] = phys_residual[b][i] * phys_coeff + data_residual[b][i] * data_coeff;
      const ParamGradients g = backward_gradients(state, scene.topology, params, upstream);
      grads->add_scaled(g, 1.0);
    }
  }
  return loss;
}

DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective,
                                std::span<const double> lo, std::span<const double> hi,
                                int population, int generations, double diff_weight,
                                double cross_prob, Rng& rng,
                                const std::vector<std::vector<double>>* seed_population) {
  const size_t dim = lo.size();
  if (dim == 0 || hi.size() != dim) throw ConfigError("differential_evolution: bad bounds");
  for (size_t d = 0; d < dim; ++d)
    if (!(lo[d] <= hi[d])) throw ConfigError("differential_evolution: lo > hi");
  if (population < 4) throw ConfigError("differential_evolution: population must be >= 4");

  const size_t pop_n = static_cast<size_t>(population);
  std::vector<std::vector<double>> pop(pop_n, std::vector<double>(dim));
  for (size_t p = 0; p < pop_n; ++p) {
    if (seed_population && p < seed_population->size()) {
      pop[p] = (*seed_population)[p];
      for (size_t d = 0; d < dim; ++d) pop[p][d] = std::clamp(pop[p][d], lo[d], hi[d]);
    } else {
      for (size_t d = 0; d < dim; ++d) pop[p][d] = rng.uniform(lo[d], hi[d]);
    }
  }
  std::vector<double> value(pop_n);
  for (size_t p = 0; p < pop_n; ++p) value[p] = objective(pop[p]);

  std::vector<double> trial(dim);
  for (int gen = 0; gen < generations; ++gen) {
    for (size_t p = 0; p < pop_n; ++p) {
      size_t a, b, c;
      do a = rng.uniform_below(pop_n);
      while (a == p);
      do b = rng.uniform_below(pop_n);
      while (b == p || b == a);
      do c = rng.uniform_below(pop_n);
      while (c == p || c == a || c == b);
      const size_t forced = rng.uniform_below(dim);
      for (size_t d = 0; d < dim; ++d) {
        if (rng.uniform01() < cross_prob || d == forced)
          trial[d] = std::clamp(pop[a][d] + diff_weight * (pop[b][d] - pop[c][d]), lo[d], hi[d]);
        else
          trial[d] = pop[p][d];
      }
      const double tv = objective(trial);
      if (tv <= value[p]) {
        pop[p] = trial;
        value[p] = tv;
      }
    }
  }

  size_t best = 0;
  for (size_t p = 1; p < pop_n; ++p)
    if (value[p] < value[best]) best = p;
  return {pop[best], value[best]};
}

NetworkParams de_preprocess(const Trajectory& traj, const Scene& scene, const TrainConfig& cfg,
                            Rng& rng) {
  const int transitions = traj.frame_count() - 1;
  Rng probe_rng(Rng::mix(cfg.seed, kProbeStream));
  const TrainBatch probe =
      sample_batch(traj, scene, std::min(cfg.de.probe_batch, transitions), probe_rng);

  auto objective = [&](std::span<const double> z) {
    try {
      return compute_loss(group_constant_params(decode_de(z)), probe, cfg.alpha, nullptr).total;
    } catch (const NumericsError&) {
      return 1e300;
    }
  };

  constexpr size_t kDim = 6;
  std::vector<double> lo(kDim, -cfg.de.bound), hi(kDim, cfg.de.bound);
  // initial candidates drawn from a 6-level lattice per axis
  std::vector<std::vector<double>> seed(static_cast<size_t>(cfg.de.population),
                                        std::vector<double>(kDim));
  for (auto& row : seed)
    for (size_t d = 0; d < kDim; ++d) {
      const double level = static_cast<double>(rng.uniform_below(6));
      row[d] = -cfg.de.bound + (level + 0.5) * (2.0 * cfg.de.bound / 6.0);
    }
  const DeResult result =
      differential_evolution(objective, lo, hi, cfg.de.population, cfg.de.generations,
                             cfg.de.diff_weight, cfg.de.cross_prob, rng, &seed);

  const DeDecode best = decode_de(result.best);
  NetworkParams params;
  auto bracket = [](double s) {
    const double w = std::max(std::abs(s), 0.05);
    return InitBracket{s - w, s + w};
  };
  params.brackets[static_cast<size_t>(ParamGroup::Kernel)] = {1.0, 1.0};
  params.brackets[static_cast<size_t>(ParamGroup::Linear)] = bracket(best.linear);
  params.brackets[static_cast<size_t>(ParamGroup::Bias)] = bracket(best.bias);
  params.brackets[static_cast<size_t>(ParamGroup::Nonlinear)] = bracket(best.nonlinear);
  params.brackets[static_cast<size_t>(ParamGroup::Deriv)] = bracket(best.deriv);
  params.brackets[static_cast<size_t>(ParamGroup::SelfVelocity)] = bracket(best.self_velocity);
  InitBracket alpha_bracket = bracket(best.alpha);
  alpha_bracket.lo = std::max(alpha_bracket.lo, 1e-3);
  params.brackets[static_cast<size_t>(ParamGroup::Alpha)] = alpha_bracket;

  // frozen groups take the searched value exactly; trainable groups draw
  // uniform within their bracket
  params.isru_alpha = best.alpha;
  for_each_scalar(params, [&](ParamGroup g, int, double& scalar) {
    if (!params.is_trainable(g)) return;
    const InitBracket& b = params.brackets[static_cast<size_t>(g)];
    scalar = rng.uniform(b.lo, b.hi);
  });
  return params;
}

void adam_update(NetworkParams& params, const ParamGradients& grads, AdamState& opt, double lr) {
  opt.step += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(opt.step));
  const auto flat = flatten(grads);
  int idx = -1;
  for_each_scalar(params, [&](ParamGroup g, int, double& p) {
    ++idx;
    if (!params.is_trainable(g)) return;
    const size_t s = static_cast<size_t>(idx);
    const double grad = flat[s];
    opt.m[s] = kAdamBeta1 * opt.m[s] + (1.0 - kAdamBeta1) * grad;
    opt.v[s] = kAdamBeta2 * opt.v[s] + (1.0 - kAdamBeta2) * grad * grad;
    const double m_hat = opt.m[s] / c1;
    const double v_hat = opt.v[s] / c2;
    p -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  });
}

TrainResult train_loop(const TrainConfig& cfg, const Scene& scene, const Trajectory& traj,
                       const CheckpointSink& on_checkpoint, std::optional<TrainResult> resume) {
  scene.validate();
  traj.validate();
  cfg.validate(traj.frame_count() - 1);

  TrainResult run;
  if (resume) {
    run.params = resume->params;
    run.opt = resume->opt;
  } else {
    Rng de_rng(Rng::mix(cfg.seed, kDeStream));
    run.params = de_preprocess(traj, scene, cfg, de_rng);
  }
  for (ParamGroup g : cfg.freeze) run.params.set_trainable(g, false);

  const int64_t start = run.opt.step;
  for (int e = 0; e < cfg.epochs; ++e) {
    const int64_t step = start + e;
    const double lr = schedule_lr(cfg.schedule, static_cast<int>(step));
    Rng rng(Rng::mix(cfg.seed, static_cast<uint64_t>(step)));
    const TrainBatch batch = sample_batch(traj, scene, cfg.batch_size, rng);
    ParamGradients grads;
    LossValue loss;
    try {
      loss = compute_loss(run.params, batch, cfg.alpha, &grads);
    } catch (const NumericsError& err) {
      throw NumericsError(std::string(err.what()) + " [optimizer step " + std::to_string(step) +
                          "]");
    }
    adam_update(run.params, grads, run.opt, lr);
    run.history.push_back({static_cast<int>(step), lr, loss.physics, loss.data, loss.total});
    if (on_checkpoint && ((step + 1) % cfg.checkpoint_interval == 0 || e == cfg.epochs - 1))
      on_checkpoint(static_cast<int>(step + 1), run.params, run.opt);
  }
  return run;
}

}  // namespace cloth
