#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "cloth/eval.hpp"
#include "cloth/net.hpp"
#include "cloth/scene.hpp"
#include "cloth/train.hpp"

namespace cloth {

/// Parse a scene config from JSON text. Unknown keys, missing required
/// fields, wrong types and out-of-range values are ConfigErrors naming the
/// offending field path.
Scene parse_scene_config(const std::string& json_text);
Scene load_scene(const std::string& path);

/// Trajectory container, magic "CLT1", little-endian. Version 1 stores
/// float64 payloads; version 2 is the float32 variant for viewers. Layout:
/// magic, u32 version, u32 nx, u32 ny, u32 frames, f64 dt, f64 spacing,
/// then per frame all positions xyz, then all velocities xyz.
void write_trajectory(std::ostream& out, const Trajectory& traj, uint32_t version = 1);
Trajectory read_trajectory(std::istream& in);

/// File variants write to a temp sibling and rename into place.
void write_trajectory_file(const std::string& path, const Trajectory& traj, uint32_t version = 1);
Trajectory read_trajectory_file(const std::string& path);

/// Wavefront OBJ export of one frame: nx*ny vertices in node-index order,
/// quads split lower-left to upper-right into two triangles.
void export_obj(std::ostream& out, const Trajectory& traj, int frame);
void export_obj_file(const std::string& path, const Trajectory& traj, int frame);

/// Checkpoint container, magic "CKP1", little-endian. Stores the channel
/// order hash (refuses to load under a different stencil enumeration), the
/// step counter, a free-form training-config echo, named parameter groups
/// with trainable flags and init brackets, and optionally the Adam moments.
struct Checkpoint {
  NetworkParams params;
  std::optional<AdamState> opt;
  int64_t step = 0;
  std::string config_echo;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckp);
Checkpoint load_checkpoint(const std::string& path);

/// Loss history CSV: header step,lr,physics,data,total.
void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows);

/// Per-frame rollout error CSV: header frame,error_pct followed by summary
/// rows mean and final.
void write_eval_csv(const std::string& path, const EvalReport& report);

}  // namespace cloth
