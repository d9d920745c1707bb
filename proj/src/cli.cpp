#include "cloth/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cloth/error.hpp"
#include "cloth/eval.hpp"
#include "cloth/io.hpp"
#include "cloth/net.hpp"
#include "cloth/rng.hpp"
#include "cloth/sim.hpp"
#include "cloth/threads.hpp"
#include "cloth/train.hpp"

namespace cloth {

namespace {

struct CommonOpts {
  int threads = 0;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--threads", opts.threads, "worker threads for node-parallel loops");
  cmd->add_flag("--deterministic", opts.deterministic,
                "accepted for pipeline compatibility; every code path is already "
                "bit-reproducible at any thread count");
}

void apply_common(const CommonOpts& opts) {
  if (opts.threads > 0) set_thread_count(opts.threads);
}

uint32_t traj_version(const std::string& precision) { return precision == "f32" ? 2u : 1u; }

/// "k", "a-b" (inclusive) or "last".
std::pair<int, int> parse_frame_range(const std::string& text, int frame_count) {
  if (text == "last") return {frame_count - 1, frame_count - 1};
  const auto dash = text.find('-');
  try {
    if (dash == std::string::npos) {
      const int k = std::stoi(text);
      return {k, k};
    }
    return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--frames: expected \"k\", \"a-b\" or \"last\", got \"" + text + "\"");
  }
}

std::vector<ParamGroup> parse_freeze(const std::vector<std::string>& names) {
  std::vector<ParamGroup> groups;
  for (const std::string& entry : names) {
    std::stringstream ss(entry);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) groups.push_back(param_group_from_name(name));
  }
  return groups;
}

/// Hand-tooled parameter set for gradcheck and as bench default: every
/// branch active so the measured work is representative.
NetworkParams random_params(Rng& rng) {
  NetworkParams params;
  params.trainable.fill(true);
  for_each_scalar(params, [&](ParamGroup g, int, double& v) {
    if (g == ParamGroup::Kernel)
      v = rng.uniform(0.5, 1.5);
    else if (g == ParamGroup::Alpha)
      v = rng.uniform(0.5, 2.0);
    else
      v = rng.uniform(-0.5, 0.5);
  });
  return params;
}

ClothState random_state(const GridInit& grid, Rng& rng) {
  ClothState state = grid.state;
  const double h = grid.topology.spacing;
  for (Vec3& p : state.x)
    for (int d = 0; d < 3; ++d) p[d] += rng.uniform(-0.3 * h, 0.3 * h);
  for (Vec3& v : state.v)
    for (int d = 0; d < 3; ++d) v[d] = rng.uniform(-0.1, 0.1);
  return state;
}

std::string echo_config(const TrainConfig& cfg) {
  std::ostringstream echo;
  echo << "alpha=" << cfg.alpha << " batch=" << cfg.batch_size << " epochs=" << cfg.epochs
       << " seed=" << cfg.seed << " lr0=" << cfg.schedule.lr0 << " schedule="
       << (cfg.schedule.kind == ScheduleKind::Step ? "step" : "cosine")
       << " gamma=" << cfg.schedule.gamma << " interval=" << cfg.schedule.interval
       << " period=" << cfg.schedule.period << " floor=" << cfg.schedule.floor
       << " de_pop=" << cfg.de.population << " de_gens=" << cfg.de.generations;
  return echo.str();
}

void print_bench(const char* label, const BenchResult& r) {
  std::printf("%s: %.1f steps/sec (%d steps in %.3f s)\n", label, r.steps_per_second, r.steps,
              r.seconds);
}

int run_train(const std::string& scene_path, const std::string& traj_path,
              const std::string& out_path, const std::string& loss_csv, TrainConfig cfg,
              const std::string& resume_path, const std::vector<std::string>& freeze) {
  const Scene scene = load_scene(scene_path);
  const Trajectory traj = read_trajectory_file(traj_path);
  cfg.freeze = parse_freeze(freeze);

  std::optional<TrainResult> resume;
  if (!resume_path.empty()) {
    const Checkpoint ckp = load_checkpoint(resume_path);
    TrainResult r;
    r.params = ckp.params;
    if (ckp.opt) r.opt = *ckp.opt;
    resume = std::move(r);
  }

  const std::string echo = echo_config(cfg);
  auto sink = [&](int step, const NetworkParams& params, const AdamState& opt) {
    save_checkpoint(out_path, {params, opt, step, echo});
  };
  const TrainResult result = train_loop(cfg, scene, traj, sink, std::move(resume));

  if (!loss_csv.empty()) write_loss_csv(loss_csv, result.history);
  std::printf("trained %d steps: loss %.6e -> %.6e (checkpoint %s)\n",
              static_cast<int>(result.history.size()), result.history.front().total,
              result.history.back().total, params_fingerprint(result.params).c_str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"mass-spring cloth: physics simulator, stencil-network training, rollout and "
               "evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run the physics simulator, write a trajectory");
  std::string sim_scene, sim_out, sim_precision = "f64";
  int sim_steps = -1;
  CommonOpts sim_common;
  simulate->add_option("--scene", sim_scene, "scene config (JSON)")->required();
  simulate->add_option("--out", sim_out, "output trajectory path")->required();
  simulate->add_option("--steps", sim_steps, "override the scene's step count");
  simulate->add_option("--precision", sim_precision, "trajectory storage precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  add_common(simulate, sim_common);

  // train
  auto* train = app.add_subcommand("train", "fit the network cell to a simulated trajectory");
  std::string train_scene, train_traj, train_out, train_loss_csv, train_resume;
  std::string train_schedule = "step";
  std::vector<std::string> train_freeze;
  TrainConfig train_cfg;
  CommonOpts train_common;
  train->add_option("--scene", train_scene, "scene config (JSON)")->required();
  train->add_option("--traj", train_traj, "ground-truth trajectory")->required();
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--loss-csv", train_loss_csv, "loss history CSV path");
  train->add_option("--alpha", train_cfg.alpha, "physics/data loss mix")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--batch", train_cfg.batch_size, "transitions per optimizer step");
  train->add_option("--epochs", train_cfg.epochs, "optimizer steps");
  train->add_option("--seed", train_cfg.seed, "RNG seed");
  train->add_option("--lr0", train_cfg.schedule.lr0, "initial learning rate");
  train->add_option("--schedule", train_schedule, "learning-rate schedule")
      ->check(CLI::IsMember({"step", "cosine"}));
  train->add_option("--gamma", train_cfg.schedule.gamma, "step-schedule decay factor");
  train->add_option("--interval", train_cfg.schedule.interval, "step-schedule decay interval");
  train->add_option("--period", train_cfg.schedule.period, "cosine-schedule period");
  train->add_option("--floor", train_cfg.schedule.floor, "cosine-schedule floor");
  train->add_option("--de-pop", train_cfg.de.population, "DE pre-search population");
  train->add_option("--de-gens", train_cfg.de.generations, "DE pre-search generations");
  train->add_option("--de-probe", train_cfg.de.probe_batch, "DE pre-search probe batch");
  train->add_option("--ckpt-interval", train_cfg.checkpoint_interval,
                    "steps between checkpoint writes");
  train->add_option("--resume", train_resume, "checkpoint to continue from (skips DE pre-search)");
  train->add_option("--freeze", train_freeze,
                    "comma-separated parameter groups to freeze (fine-tune mode)");
  add_common(train, train_common);

  // rollout
  auto* rollout_cmd = app.add_subcommand("rollout", "advance the learned cell, write a trajectory");
  std::string roll_scene, roll_ckpt, roll_out, roll_precision = "f64";
  int roll_steps = -1;
  CommonOpts roll_common;
  rollout_cmd->add_option("--scene", roll_scene, "scene config (JSON)")->required();
  rollout_cmd->add_option("--checkpoint", roll_ckpt, "trained checkpoint")->required();
  rollout_cmd->add_option("--out", roll_out, "output trajectory path")->required();
  rollout_cmd->add_option("--steps", roll_steps, "override the scene's step count");
  rollout_cmd->add_option("--precision", roll_precision, "trajectory storage precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  add_common(rollout_cmd, roll_common);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "compare a trajectory against a baseline");
  std::string eval_traj, eval_baseline, eval_out, eval_ckpt;
  CommonOpts eval_common;
  eval_cmd->add_option("--traj", eval_traj, "trajectory under test")->required();
  eval_cmd->add_option("--baseline", eval_baseline, "reference trajectory")->required();
  eval_cmd->add_option("--out", eval_out, "error report CSV path");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint to fingerprint in the report");
  add_common(eval_cmd, eval_common);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "time the simulator and the network cell");
  std::string bench_scene, bench_ckpt, bench_precision = "f64", bench_mode = "both";
  int bench_steps = 100, bench_warmup = 10;
  CommonOpts bench_common;
  bench_cmd->add_option("--scene", bench_scene, "scene config (JSON)")->required();
  bench_cmd->add_option("--steps", bench_steps, "timed steps");
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup steps");
  bench_cmd->add_option("--checkpoint", bench_ckpt, "parameters for the network pass");
  bench_cmd->add_option("--precision", bench_precision, "arithmetic precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  bench_cmd->add_option("--mode", bench_mode, "which loops to time")
      ->check(CLI::IsMember({"both", "sim", "nn"}));
  add_common(bench_cmd, bench_common);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "verify analytic gradients against finite differences");
  uint64_t grad_seed = 7;
  double grad_eps = 1e-6;
  int grad_nx = 8, grad_ny = 8;
  CommonOpts grad_common;
  gradcheck->add_option("--seed", grad_seed, "RNG seed");
  gradcheck->add_option("--eps", grad_eps, "finite-difference step");
  gradcheck->add_option("--nx", grad_nx, "grid width");
  gradcheck->add_option("--ny", grad_ny, "grid height");
  add_common(gradcheck, grad_common);

  // export
  auto* export_cmd = app.add_subcommand("export", "write trajectory frames as OBJ meshes");
  std::string export_traj, export_out, export_frames = "last";
  CommonOpts export_common;
  export_cmd->add_option("--traj", export_traj, "trajectory path")->required();
  export_cmd->add_option("--out", export_out, "output directory")->required();
  export_cmd->add_option("--frames", export_frames, "frame selection: \"k\", \"a-b\" or \"last\"");
  add_common(export_cmd, export_common);

  // repro-desk
  auto* repro = app.add_subcommand("repro-desk",
                                   "run the desk-scale pipeline: simulate, train, rollout, eval");
  std::string repro_out = "desk_out", repro_scenes = "scenes";
  CommonOpts repro_common;
  repro->add_option("--out-dir", repro_out, "working directory for pipeline artifacts");
  repro->add_option("--scenes-dir", repro_scenes, "directory holding the bundled scene configs");
  add_common(repro, repro_common);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("stencilcloth");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      apply_common(sim_common);
      Scene scene = load_scene(sim_scene);
      if (sim_steps >= 0) scene.steps = sim_steps;
      write_trajectory_file(sim_out, simulate_scene(scene), traj_version(sim_precision));
      return 0;
    }
    if (train->parsed()) {
      apply_common(train_common);
      if (train_schedule == "cosine") train_cfg.schedule.kind = ScheduleKind::Cosine;
      return run_train(train_scene, train_traj, train_out, train_loss_csv, train_cfg, train_resume,
                       train_freeze);
    }
    if (rollout_cmd->parsed()) {
      apply_common(roll_common);
      const Scene scene = load_scene(roll_scene);
      const Checkpoint ckp = load_checkpoint(roll_ckpt);
      write_trajectory_file(roll_out, rollout(ckp.params, scene, roll_steps),
                            traj_version(roll_precision));
      return 0;
    }
    if (eval_cmd->parsed()) {
      apply_common(eval_common);
      const Trajectory test = read_trajectory_file(eval_traj);
      const Trajectory baseline = read_trajectory_file(eval_baseline);
      EvalReport report = evaluate_rollout(test, baseline);
      report.scene_id = std::filesystem::path(eval_baseline).stem().string();
      report.checkpoint_id =
          eval_ckpt.empty() ? "-" : params_fingerprint(load_checkpoint(eval_ckpt).params);
      if (!eval_out.empty()) write_eval_csv(eval_out, report);
      std::printf("mean relative error: %.6g%%  final: %.6g%%  (%d frames)\n",
                  report.mean_error_pct, report.final_error_pct,
                  static_cast<int>(report.frame_error_pct.size()));
      return 0;
    }
    if (bench_cmd->parsed()) {
      apply_common(bench_common);
      const Scene scene = load_scene(bench_scene);
      const Precision precision = bench_precision == "f32" ? Precision::F32 : Precision::F64;
      NetworkParams params;
      if (!bench_ckpt.empty()) {
        params = load_checkpoint(bench_ckpt).params;
      } else {
        Rng rng(1);
        params = random_params(rng);
      }
      std::printf("bench scene=%s nodes=%d steps=%d warmup=%d precision=%s threads=%d\n",
                  scene.name.empty() ? "?" : scene.name.c_str(), scene.topology.node_count(),
                  bench_steps, bench_warmup, bench_precision.c_str(), thread_count());
      if (bench_mode != "nn")
        print_bench("pbs", benchmark_sim(scene, bench_steps, bench_warmup, precision));
      if (bench_mode != "sim")
        print_bench("nn ", benchmark_net(params, scene, bench_steps, bench_warmup, precision));
      return 0;
    }
    if (gradcheck->parsed()) {
      apply_common(grad_common);
      Rng rng(grad_seed);
      const GridInit grid = build_grid(grad_nx, grad_ny, 0.1, Vec3{}, GridPlane::XY);
      const ClothState state = random_state(grid, rng);
      const NetworkParams params = random_params(rng);
      const double err = finite_diff_check(state, grid.topology, params, grad_eps);
      std::printf("max relative gradient error: %.6e\n", err);
      return err <= 1e-5 ? 0 : 1;
    }
    if (export_cmd->parsed()) {
      apply_common(export_common);
      const Trajectory traj = read_trajectory_file(export_traj);
      const auto [first, last] = parse_frame_range(export_frames, traj.frame_count());
      if (first < 0 || last >= traj.frame_count() || first > last)
        throw ConfigError("--frames: range " + export_frames + " outside [0, " +
                          std::to_string(traj.frame_count() - 1) + "]");
      std::filesystem::create_directories(export_out);
      for (int f = first; f <= last; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.obj", f);
        export_obj_file((std::filesystem::path(export_out) / name).string(), traj, f);
      }
      return 0;
    }
    if (repro->parsed()) {
      apply_common(repro_common);
      const auto scenes = std::filesystem::path(repro_scenes);
      const auto out = std::filesystem::path(repro_out);
      std::filesystem::create_directories(out);
      const std::string falling = (scenes / "falling_desk.json").string();
      const std::string hanging = (scenes / "hanging_desk.json").string();

      std::printf("[1/5] simulate %s\n", falling.c_str());
      const Scene scene = load_scene(falling);
      const Trajectory gt = simulate_scene(scene);
      write_trajectory_file((out / "falling_gt.clt1").string(), gt);

      std::printf("[2/5] train (2000 steps)\n");
      TrainConfig cfg;
      cfg.batch_size = 256;
      cfg.schedule.kind = ScheduleKind::Cosine;
      cfg.schedule.lr0 = 2e-2;
      cfg.schedule.period = 2000;
      cfg.schedule.floor = 1e-6;
      const std::string ckpt_path = (out / "desk.ckpt").string();
      const std::string echo = echo_config(cfg);
      auto sink = [&](int step, const NetworkParams& p, const AdamState& o) {
        save_checkpoint(ckpt_path, {p, o, step, echo});
      };
      const TrainResult trained = train_loop(cfg, scene, gt, sink);
      write_loss_csv((out / "loss.csv").string(), trained.history);
      const double ratio = trained.history.back().total / trained.history.front().total;
      std::printf("      loss %.6e -> %.6e (ratio %.3e)\n", trained.history.front().total,
                  trained.history.back().total, ratio);

      std::printf("[3/5] rollout 200 steps on the training scene\n");
      const Trajectory nn = rollout(trained.params, scene, 200);
      write_trajectory_file((out / "falling_nn.clt1").string(), nn);
      Trajectory gt200 = gt;
      gt200.frames.resize(201);
      EvalReport report = evaluate_rollout(nn, gt200);
      report.scene_id = scene.name;
      report.checkpoint_id = params_fingerprint(trained.params);
      write_eval_csv((out / "falling_eval.csv").string(), report);
      std::printf("      mean error %.4g%%  final %.4g%%\n", report.mean_error_pct,
                  report.final_error_pct);

      std::printf("[4/5] cross-scene rollout (%s)\n", hanging.c_str());
      const Scene cross = load_scene(hanging);
      Scene cross200 = cross;
      cross200.steps = 200;
      const Trajectory cross_gt = simulate_scene(cross200);
      const Trajectory cross_nn = rollout(trained.params, cross, 200);
      write_trajectory_file((out / "hanging_nn.clt1").string(), cross_nn);
      EvalReport cross_report = evaluate_rollout(cross_nn, cross_gt);
      cross_report.scene_id = cross.name;
      cross_report.checkpoint_id = report.checkpoint_id;
      write_eval_csv((out / "hanging_eval.csv").string(), cross_report);
      std::printf("      mean error %.4g%%  final %.4g%%\n", cross_report.mean_error_pct,
                  cross_report.final_error_pct);

      std::printf("[5/5] done; artifacts in %s\n", out.string().c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace cloth
