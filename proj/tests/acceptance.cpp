// Acceptance gate: one line per criterion, PASS or FAIL, exit 0 only when
// everything passes. Run from the repository root so scenes/ resolves.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "cloth/cli.hpp"
#include "cloth/error.hpp"
#include "cloth/eval.hpp"
#include "cloth/io.hpp"
#include "cloth/net.hpp"
#include "cloth/sim.hpp"
#include "cloth/train.hpp"
#include "oracles.hpp"

using namespace cloth;
namespace fs = std::filesystem;

namespace {

int failures = 0;

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

void report(int idx, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", idx, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void run(int idx, const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    const auto [ok, detail] = fn();
    report(idx, ok, detail);
  } catch (const std::exception& e) {
    report(idx, false, std::string("exception: ") + e.what());
  }
}

struct Capture {
  int code = 0;
  std::string text;
};

Capture run_captured(const std::vector<std::string>& args) {
  std::fflush(stdout);
  std::cout.flush();
  const int saved = ::dup(1);
  char tmpl[] = "/tmp/stencilcloth_cap_XXXXXX";
  const int fd = ::mkstemp(tmpl);
  ::dup2(fd, 1);
  Capture cap;
  try {
    cap.code = run_cli(args);
  } catch (...) {
    std::fflush(stdout);
    std::cout.flush();
    ::dup2(saved, 1);
    ::close(saved);
    ::close(fd);
    ::unlink(tmpl);
    throw;
  }
  std::fflush(stdout);
  std::cout.flush();
  ::dup2(saved, 1);
  ::close(saved);
  ::lseek(fd, 0, SEEK_SET);
  char buf[4096];
  ssize_t n;
  while ((n = ::read(fd, buf, sizeof buf)) > 0) cap.text.append(buf, static_cast<size_t>(n));
  ::close(fd);
  ::unlink(tmpl);
  return cap;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// summary row "<key>,<value>" of an eval CSV
double csv_summary(const std::string& path, const std::string& key) {
  for (const std::string& line : split_lines(read_file(path)))
    if (line.rfind(key + ",", 0) == 0) return std::stod(line.substr(key.size() + 1));
  throw IoError(path + ": no '" + key + "' row");
}

std::pair<double, double> loss_first_last(const std::string& path) {
  const std::vector<std::string> rows = split_lines(read_file(path));
  if (rows.size() < 3) throw IoError(path + ": too short");
  auto total = [](const std::string& row) {
    const size_t comma = row.find_last_of(',');
    return std::stod(row.substr(comma + 1));
  };
  return {total(rows[1]), total(rows.back())};
}

double parse_steps_per_sec(const std::string& text, const std::string& label) {
  for (const std::string& line : split_lines(text)) {
    if (line.rfind(label, 0) != 0) continue;
    const size_t colon = line.find(':');
    return std::stod(line.substr(colon + 1));
  }
  throw IoError("bench output is missing the '" + label + "' line");
}

Trajectory random_trajectory(int nx, int ny, int frames, uint64_t seed) {
  Rng rng(seed);
  Trajectory t;
  t.nx = nx;
  t.ny = ny;
  t.dt = 1e-3;
  t.spacing = 0.1;
  for (int f = 0; f < frames; ++f) {
    ClothState s;
    s.x.resize(static_cast<size_t>(nx * ny));
    s.v.resize(static_cast<size_t>(nx * ny));
    for (auto& x : s.x) x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto& v : s.v) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    t.frames.push_back(std::move(s));
  }
  return t;
}

bool states_equal(const ClothState& a, const ClothState& b) {
  return oracle::bitwise_equal(a.x, b.x) && oracle::bitwise_equal(a.v, b.v);
}

fs::path g_work;

std::string wf(const std::string& name) { return (g_work / name).string(); }

}  // namespace

int main() {
  g_work = fs::temp_directory_path() /
           ("stencilcloth_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  // 1: 100x100 topology has exactly 59,002 unordered spring pairs
  run(1, [] {
    const size_t pairs =
        build_grid(100, 100, 0.01, Vec3{}, GridPlane::XY).topology.spring_pair_count();
    return std::pair{pairs == 59002, fmt("100x100 grid has %zu spring pairs (want 59002)", pairs)};
  });

  // 2: force evaluators vs brute-force gathers, 50 random 8x8 states, <= 1e-12
  run(2, [] {
    const GridInit grid = build_grid(8, 8, 0.1, Vec3{}, GridPlane::XY);
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const ClothState s = oracle::random_state(grid, rng, 0.03, 1.0);
      const double E = rng.uniform(5.0, 120.0);
      const double mu = rng.uniform(0.01, 1.0);
      const double p = rng.uniform(-4.0, 4.0);
      const double m = rng.uniform(0.01, 0.5);
      const double d = rng.uniform(0.0, 0.2);
      const Vec3 g = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-10, 0)};
      worst = std::max(worst, oracle::max_abs_diff(elastic_force(s, grid.topology, E),
                                                   oracle::elastic(s, 8, 8, 0.1, E)));
      worst = std::max(worst, oracle::max_abs_diff(damping_force(s, grid.topology, mu),
                                                   oracle::damping(s, 8, 8, mu)));
      worst = std::max(worst, oracle::max_abs_diff(pressure_force(s, grid.topology, p),
                                                   oracle::pressure(s, 8, 8, p)));
      worst = std::max(worst, oracle::max_abs_diff(external_force(s, m, g, d),
                                                   oracle::external(s, m, g, d)));
    }
    return std::pair{worst <= 1e-12,
                     fmt("worst force deviation vs gather oracle %.3e (tol 1e-12)", worst)};
  });

  // 3: Newton's third law to 1e-9 relative, translation invariance bitwise
  run(3, [] {
    const GridInit grid = build_grid(10, 10, 0.1, Vec3{}, GridPlane::XY);
    Rng rng(3033);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const ClothState s = oracle::random_state(grid, rng, 0.04, 2.0);
      for (const ForceField& f :
           {elastic_force(s, grid.topology, 80.0), damping_force(s, grid.topology, 0.9)}) {
        Vec3 sum{};
        double scale = 0.0;
        for (const Vec3& fi : f) {
          sum += fi;
          scale += fi.norm();
        }
        worst = std::max(worst, sum.norm() / std::max(scale, 1.0));
      }
    }
    bool invariant = true;
    for (int trial = 0; trial < 10; ++trial) {
      const ClothState s = oracle::quantized_state(grid.state.node_count(), rng);
      ClothState t = s;
      for (Vec3& x : t.x) x += Vec3{1.0, 2.0, 4.0};
      invariant = invariant &&
                  oracle::bitwise_equal(elastic_force(s, grid.topology, 33.0),
                                        elastic_force(t, grid.topology, 33.0)) &&
                  oracle::bitwise_equal(damping_force(s, grid.topology, 0.4),
                                        damping_force(t, grid.topology, 0.4)) &&
                  oracle::bitwise_equal(pressure_force(s, grid.topology, 1.7),
                                        pressure_force(t, grid.topology, 1.7));
    }
    return std::pair{worst <= 1e-9 && invariant,
                     fmt("force sum residual %.3e (tol 1e-9), translation bitwise %s", worst,
                         invariant ? "yes" : "NO")};
  });

  // 4: channel extraction vs gather oracle, <= 1e-12, edges masked
  run(4, [] {
    Rng rng(4044);
    double worst = 0.0;
    bool masked = true;
    for (int trial = 0; trial < 30; ++trial) {
      const int nx = 2 + static_cast<int>(rng.uniform_below(9));
      const int ny = 2 + static_cast<int>(rng.uniform_below(9));
      const GridInit grid = build_grid(nx, ny, 0.1, Vec3{}, GridPlane::XY);
      const ClothState s = oracle::random_state(grid, rng, 0.05, 1.5);
      const NetworkParams p = oracle::random_params(rng);
      const ChannelFeatures got = extract_channels(s, grid.topology, p.kernel_gain);
      const oracle::Channels want = oracle::channels(s, nx, ny, p.kernel_gain);
      for (size_t k = 0; k < want.pos.size(); ++k) {
        const Vec3 dp = got.pos_diff[k] - want.pos[k];
        const Vec3 dv = got.vel_diff[k] - want.vel[k];
        worst = std::max({worst, std::fabs(dp.x), std::fabs(dp.y), std::fabs(dp.z),
                          std::fabs(dv.x), std::fabs(dv.y), std::fabs(dv.z)});
      }
      for (int i = 0; i < grid.topology.node_count(); ++i)
        for (int c = 0; c < kChannels; ++c)
          if (!grid.topology.valid(i, c) &&
              !(got.pos_diff[static_cast<size_t>(i * kChannels + c)] == Vec3{} &&
                got.vel_diff[static_cast<size_t>(i * kChannels + c)] == Vec3{}))
            masked = false;
    }
    return std::pair{worst <= 1e-12 && masked,
                     fmt("worst channel deviation %.3e (tol 1e-12), edge masking %s", worst,
                         masked ? "exact" : "BROKEN")};
  });

  // 5: analytic vs central-difference gradients on 20 random states
  run(5, [] {
    const GridInit grid = build_grid(8, 8, 0.1, Vec3{}, GridPlane::XY);
    Rng rng(5055);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const ClothState s = oracle::random_state(grid, rng, 0.04, 1.0);
      NetworkParams p = oracle::random_params(rng);
      for (int g = 0; g < kParamGroups; ++g) p.set_trainable(static_cast<ParamGroup>(g), true);
      worst = std::max(worst, finite_diff_check(s, grid.topology, p, 1e-6));
    }
    return std::pair{worst <= 1e-5,
                     fmt("max relative gradient error %.3e over 20 states (tol 1e-5)", worst)};
  });

  // 6: the network chain fed the physics impulse matches the simulator step
  // bit for bit over 100 ball-scene steps, with zero sphere penetration
  run(6, [] {
    const Scene scene = load_scene("scenes/ball.json");
    const SphereCollider& ball = scene.colliders.at(0);
    ClothState sim = apply_dirichlet(scene.initial, scene.bc, 0.0);
    ClothState chained = sim;
    bool identical = true;
    double min_rel = 1e300;
    int contact_frames = 0;
    for (int k = 0; k < 100; ++k) {
      const double t = (k + 1) * scene.dt;
      sim = step_semi_implicit(sim, scene, t);
      chained = advance_with_impulse(chained, total_impulse(chained, scene), scene, t);
      identical = identical && states_equal(sim, chained);
      bool contact = false;
      for (const Vec3& x : chained.x) {
        const double rel = (x - ball.center).norm() / ball.radius - 1.0;
        min_rel = std::min(min_rel, rel);
        if (rel <= 1e-9) contact = true;
      }
      if (contact) ++contact_frames;
    }
    const bool no_penetration = min_rel >= -1e-12;
    return std::pair{identical && no_penetration && contact_frames > 0,
                     fmt("bitwise identical %s, %d contact frames, worst surface offset %.1e",
                         identical ? "yes" : "NO", contact_frames, min_rel)};
  });

  // 7: desk-scale pipeline: loss drops by 1e3 and the 200-step rollout stays
  // within 2% of the simulator
  const std::string desk_a = (g_work / "desk_a").string();
  run(7, [&] {
    const Capture cap = run_captured(
        {"repro-desk", "--out-dir", desk_a, "--scenes-dir", "scenes", "--deterministic"});
    if (cap.code != 0) return std::pair{false, fmt("repro-desk exited with %d", cap.code)};
    const auto [initial, final_loss] = loss_first_last(desk_a + "/loss.csv");
    const double ratio = final_loss / initial;
    const double mean_err = csv_summary(desk_a + "/falling_eval.csv", "mean");
    const bool ok = ratio <= 1e-3 && mean_err <= 2.0;
    return std::pair{ok, fmt("loss %.3e -> %.3e (ratio %.2e, tol 1e-3), rollout mean error "
                             "%.3f%% (tol 2%%)",
                             initial, final_loss, ratio, mean_err)};
  });

  // 8: the same checkpoint generalizes to the corner-hung scene within 10%
  run(8, [&] {
    const double mean_err = csv_summary(desk_a + "/hanging_eval.csv", "mean");
    const Trajectory nn = read_trajectory_file(desk_a + "/hanging_nn.clt1");
    const Scene scene = load_scene("scenes/hanging_desk.json");
    bool finite = true, pinned = true;
    const int pin = scene.bc.nodes.at(0);
    const Vec3 anchor = scene.bc.anchors.at(0);
    for (const ClothState& f : nn.frames) {
      finite = finite && f.finite();
      pinned = pinned && f.x[static_cast<size_t>(pin)] == anchor;
    }
    const bool ok = mean_err <= 10.0 && finite && pinned;
    return std::pair{ok, fmt("cross-scene mean error %.3f%% (tol 10%%), finite %s, pin fixed %s",
                             mean_err, finite ? "yes" : "NO", pinned ? "yes" : "NO")};
  });

  // 9: bench reports NN and PBS throughput on the 100x100 scene
  run(9, [] {
    const Capture cap = run_captured({"bench", "--scene", "scenes/falling.json", "--steps", "40",
                                      "--warmup", "5", "--deterministic"});
    if (cap.code != 0) return std::pair{false, fmt("bench exited with %d", cap.code)};
    const double pbs = parse_steps_per_sec(cap.text, "pbs");
    const double nn = parse_steps_per_sec(cap.text, "nn ");
    const bool ok = pbs > 0.0 && nn > 0.0;
    return std::pair{ok, fmt("pbs %.1f steps/sec, nn %.1f steps/sec on 10000 nodes", pbs, nn)};
  });

  // 10: round trips are bit-exact, corruption is rejected, OBJ counts match
  run(10, [] {
    std::string detail;

    const Trajectory t = random_trajectory(6, 5, 4, 1001);
    write_trajectory_file(wf("round.clt1"), t);
    const Trajectory t2 = read_trajectory_file(wf("round.clt1"));
    bool traj_ok = t2.nx == t.nx && t2.ny == t.ny && t2.dt == t.dt && t2.spacing == t.spacing &&
                   t2.frame_count() == t.frame_count();
    for (int f = 0; traj_ok && f < t.frame_count(); ++f)
      traj_ok = states_equal(t.frames[static_cast<size_t>(f)], t2.frames[static_cast<size_t>(f)]);

    Rng rng(1002);
    Checkpoint ckp;
    ckp.params = oracle::random_params(rng);
    AdamState opt;
    opt.step = 17;
    for (int k = 0; k < 53; ++k) {
      opt.m[static_cast<size_t>(k)] = rng.uniform(-1, 1);
      opt.v[static_cast<size_t>(k)] = rng.uniform(0, 1);
    }
    ckp.opt = opt;
    ckp.step = 17;
    ckp.config_echo = "alpha=0.5";
    save_checkpoint(wf("round.ckpt"), ckp);
    const Checkpoint back = load_checkpoint(wf("round.ckpt"));
    bool ckp_ok = back.step == 17 && back.config_echo == ckp.config_echo &&
                  back.opt.has_value() && back.opt->m == opt.m && back.opt->v == opt.v;
    NetworkParams pa = ckp.params, pb = back.params;
    std::vector<double> va, vb;
    for_each_scalar(pa, [&](ParamGroup, int, double& v) { va.push_back(v); });
    for_each_scalar(pb, [&](ParamGroup, int, double& v) { vb.push_back(v); });
    ckp_ok = ckp_ok && va == vb;

    bool rejects = true;
    const std::string good = read_file(wf("round.clt1"));
    write_file(wf("trunc.clt1"), good.substr(0, good.size() / 2));
    try {
      read_trajectory_file(wf("trunc.clt1"));
      rejects = false;
    } catch (const IoError& e) {
      rejects = rejects && std::string(e.what()).find("truncated") != std::string::npos;
    }
    std::string bad = read_file(wf("round.ckpt"));
    bad[2] = 'X';
    write_file(wf("bad.ckpt"), bad);
    try {
      load_checkpoint(wf("bad.ckpt"));
      rejects = false;
    } catch (const IoError&) {
    }

    Trajectory big;
    big.nx = 100;
    big.ny = 100;
    big.dt = 1e-3;
    big.spacing = 0.01;
    big.frames.push_back(build_grid(100, 100, 0.01, Vec3{}, GridPlane::XY).state);
    std::stringstream obj;
    export_obj(obj, big, 0);
    int vertices = 0, faces = 0;
    std::string line;
    while (std::getline(obj, line)) {
      if (line.rfind("v ", 0) == 0) ++vertices;
      if (line.rfind("f ", 0) == 0) ++faces;
    }
    const bool obj_ok = vertices == 10000 && faces == 19602;

    const bool ok = traj_ok && ckp_ok && rejects && obj_ok;
    return std::pair{ok, fmt("trajectory bit-exact %s, checkpoint bit-exact %s, corruption "
                             "rejected %s, obj %d vertices %d faces",
                             traj_ok ? "yes" : "NO", ckp_ok ? "yes" : "NO",
                             rejects ? "yes" : "NO", vertices, faces)};
  });

  // 11: every subcommand, run twice with fixed seeds, produces byte-identical
  // files (bench reports wall-clock timings, so only its header is compared)
  run(11, [&] {
    std::vector<std::string> mismatched;
    auto check_pair = [&](const std::string& a, const std::string& b, const std::string& label) {
      const std::string ba = read_file(a), bb = read_file(b);
      if (ba.empty() || ba != bb) mismatched.push_back(label);
    };

    int rc = 0;
    std::vector<std::string> gradcheck_out;
    std::string bench_header[2];
    for (int r = 0; r < 2; ++r) {
      const fs::path dir = g_work / ("rerun_" + std::to_string(r));
      fs::create_directories(dir);
      auto p = [&](const char* name) { return (dir / name).string(); };

      rc |= run_captured({"simulate", "--scene", "scenes/falling_desk.json", "--out",
                          p("gt.clt1"), "--deterministic"})
                .code;
      rc |= run_captured({"simulate", "--scene", "scenes/ball_desk.json", "--out",
                          p("ball32.clt1"), "--precision", "f32", "--deterministic"})
                .code;
      rc |= run_captured({"simulate", "--scene", "scenes/falling_desk.json", "--out",
                          p("base50.clt1"), "--steps", "50", "--deterministic"})
                .code;
      rc |= run_captured({"train", "--scene", "scenes/falling_desk.json", "--traj", p("gt.clt1"),
                          "--out", p("ck.ckpt"), "--loss-csv", p("loss.csv"), "--epochs", "60",
                          "--batch", "32", "--seed", "3", "--alpha", "0.5", "--de-pop", "12",
                          "--de-gens", "6", "--de-probe", "8", "--deterministic"})
                .code;
      rc |= run_captured({"rollout", "--scene", "scenes/falling_desk.json", "--checkpoint",
                          p("ck.ckpt"), "--out", p("roll.clt1"), "--steps", "50",
                          "--deterministic"})
                .code;
      rc |= run_captured({"eval", "--traj", p("roll.clt1"), "--baseline", p("base50.clt1"),
                          "--out", p("eval.csv"), "--checkpoint", p("ck.ckpt"),
                          "--deterministic"})
                .code;
      rc |= run_captured({"export", "--traj", p("roll.clt1"), "--out", (dir / "objs").string(),
                          "--frames", "0-2", "--deterministic"})
                .code;
      const Capture grad = run_captured({"gradcheck", "--seed", "7", "--deterministic"});
      rc |= grad.code;
      gradcheck_out.push_back(grad.text);
      const Capture bench = run_captured({"bench", "--scene", "scenes/falling_desk.json",
                                          "--steps", "5", "--warmup", "1", "--deterministic"});
      rc |= bench.code;
      bench_header[r] = split_lines(bench.text).empty() ? "" : split_lines(bench.text)[0];
    }
    if (rc != 0) return std::pair{false, std::string("a subcommand exited nonzero")};

    const std::string desk_b = (g_work / "desk_b").string();
    const Capture desk = run_captured(
        {"repro-desk", "--out-dir", desk_b, "--scenes-dir", "scenes", "--deterministic"});
    if (desk.code != 0) return std::pair{false, fmt("second repro-desk exited %d", desk.code)};

    const fs::path r0 = g_work / "rerun_0", r1 = g_work / "rerun_1";
    for (const char* name : {"gt.clt1", "ball32.clt1", "base50.clt1", "ck.ckpt", "loss.csv",
                             "roll.clt1", "eval.csv"})
      check_pair((r0 / name).string(), (r1 / name).string(), name);
    for (const char* name : {"frame_00000.obj", "frame_00001.obj", "frame_00002.obj"})
      check_pair((r0 / "objs" / name).string(), (r1 / "objs" / name).string(), name);
    for (const char* name : {"falling_gt.clt1", "desk.ckpt", "loss.csv", "falling_nn.clt1",
                             "falling_eval.csv", "hanging_nn.clt1", "hanging_eval.csv"})
      check_pair(desk_a + "/" + name, desk_b + "/" + name, std::string("desk/") + name);
    if (gradcheck_out[0] != gradcheck_out[1] || gradcheck_out[0].empty())
      mismatched.push_back("gradcheck stdout");
    if (bench_header[0] != bench_header[1] || bench_header[0].empty())
      mismatched.push_back("bench header");

    if (!mismatched.empty()) {
      std::string which;
      for (const std::string& m : mismatched) which += " " + m;
      return std::pair{false, "mismatched artifacts:" + which};
    }
    return std::pair{true,
                     std::string("17 artifacts plus gradcheck/bench stdout byte-identical "
                                 "across reruns")};
  });

  fs::remove_all(g_work);
  if (failures == 0) {
    std::printf("all 11 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", failures);
  return 1;
}
