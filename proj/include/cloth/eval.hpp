#pragma once

#include <string>
#include <vector>

#include "cloth/net.hpp"
#include "cloth/scene.hpp"

namespace cloth {

/// Closed-loop rollout of the network cell from the scene's initial state:
/// `steps` applications of nn_step with the same constraint chain as the
/// simulator. steps < 0 uses the scene's own step count.
Trajectory rollout(const NetworkParams& params, const Scene& scene, int steps = -1);

/// Position error against a reference trajectory, per frame:
/// 100 * mean over nodes of |x - x_ref| / D, with D the reference cloth's
/// frame-0 bounding-box diagonal.
struct EvalReport {
  std::string scene_id;
  std::string checkpoint_id;
  std::vector<double> frame_error_pct;
  double mean_error_pct = 0.0;
  double final_error_pct = 0.0;
};

EvalReport evaluate_rollout(const Trajectory& test, const Trajectory& reference);

/// Short content hash of a parameter set, used as the checkpoint id in
/// reports.
std::string params_fingerprint(const NetworkParams& params);

enum class Precision { F32, F64 };

struct BenchResult {
  int steps = 0;
  int warmup = 0;
  Precision precision = Precision::F64;
  double seconds = 0.0;
  double steps_per_second = 0.0;
};

/// Wall-clock throughput of the plain simulator and of the network cell on
/// the same scene. Warmup steps run untimed; the timed loop then advances
/// `steps` further steps.
BenchResult benchmark_sim(const Scene& scene, int steps, int warmup, Precision precision);
BenchResult benchmark_net(const NetworkParams& params, const Scene& scene, int steps, int warmup,
                          Precision precision);

}  // namespace cloth
