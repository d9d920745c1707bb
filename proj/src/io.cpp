#include "cloth/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloth/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(cloth::Vec3) == 3 * sizeof(double) && sizeof(cloth::Vec3f) == 3 * sizeof(float),
              "vector fields are serialized as raw component triples");

namespace cloth {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- JSON ----

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required field");
  return *it;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) fail(path.empty() ? key : path + "." + key, "unknown field");
  }
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double as_positive(const json& v, const std::string& path) {
  const double d = as_number(v, path);
  if (!(d > 0.0) || !std::isfinite(d)) fail(path, "must be a finite value > 0");
  return d;
}

double as_non_negative(const json& v, const std::string& path) {
  const double d = as_number(v, path);
  if (!(d >= 0.0) || !std::isfinite(d)) fail(path, "must be a finite value >= 0");
  return d;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

Vec3 as_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected an array of 3 numbers");
  Vec3 out;
  for (int d = 0; d < 3; ++d) {
    const double c = as_number(v[static_cast<size_t>(d)],
                               path + "[" + std::to_string(d) + "]");
    if (!std::isfinite(c)) fail(path, "components must be finite");
    out[d] = c;
  }
  return out;
}

/// Named node selectors for pin sets. "top" is the iy = ny-1 row.
void select_nodes(const std::string& name, const GridTopology& topo, const std::string& path,
                  std::vector<int>& out) {
  const int nx = topo.nx, ny = topo.ny;
  auto row = [&](int iy) {
    for (int ix = 0; ix < nx; ++ix) out.push_back(topo.node_index(ix, iy));
  };
  auto column = [&](int ix) {
    for (int iy = 0; iy < ny; ++iy) out.push_back(topo.node_index(ix, iy));
  };
  if (name == "edges") {
    row(0);
    row(ny - 1);
    column(0);
    column(nx - 1);
  } else if (name == "top_row") {
    row(ny - 1);
  } else if (name == "bottom_row") {
    row(0);
  } else if (name == "left_column") {
    column(0);
  } else if (name == "right_column") {
    column(nx - 1);
  } else if (name == "top_left") {
    out.push_back(topo.node_index(0, ny - 1));
  } else if (name == "top_right") {
    out.push_back(topo.node_index(nx - 1, ny - 1));
  } else if (name == "bottom_left") {
    out.push_back(topo.node_index(0, 0));
  } else if (name == "bottom_right") {
    out.push_back(topo.node_index(nx - 1, 0));
  } else {
    fail(path, "unknown node selector \"" + name + "\"");
  }
}

// -------------------------------------------------------- binary helpers ----

void write_bytes(std::ostream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed");
}

template <typename T>
void write_scalar(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof v);
}

void read_bytes(std::istream& in, void* data, size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw IoError(std::string("truncated file: expected ") + std::to_string(n) + " more bytes of " +
                  what);
}

template <typename T>
T read_scalar(std::istream& in, const char* what) {
  T v;
  read_bytes(in, &v, sizeof v, what);
  return v;
}

/// Bytes left between the current position and the end of the stream.
uint64_t remaining_bytes(std::istream& in) {
  const auto pos = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(pos);
  if (pos < 0 || end < 0) throw IoError("stream does not support size checks");
  return static_cast<uint64_t>(end - pos);
}

/// Writes through a temp sibling and renames into place so failures never
/// leave a partial file at the destination.
template <typename WriteFn>
void atomic_write(const std::string& path, WriteFn&& fn) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    try {
      fn(out);
      out.flush();
      if (!out) throw IoError("write failed: " + tmp);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

constexpr char kTrajectoryMagic[4] = {'C', 'L', 'T', '1'};
constexpr char kCheckpointMagic[4] = {'C', 'K', 'P', '1'};
constexpr std::array<int, kParamGroups> kGroupSizes = {kChannels, kChannels, 3,
                                                       kChannels, kChannels, 1, 1};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ------------------------------------------------------------- scenes ----

Scene parse_scene_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scene config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("scene config: top level must be an object");
  reject_unknown(root, "",
                 {"name", "grid", "material", "time", "pins", "colliders", "plug_forces"});

  Scene scene;
  if (root.contains("name")) {
    if (!root["name"].is_string()) fail("name", "expected a string");
    scene.name = root["name"].get<std::string>();
  }

  const json& grid = require(root, "", "grid");
  if (!grid.is_object()) fail("grid", "expected an object");
  reject_unknown(grid, "grid", {"nx", "ny", "spacing", "origin", "plane"});
  const int nx = as_int(require(grid, "grid", "nx"), "grid.nx");
  const int ny = as_int(require(grid, "grid", "ny"), "grid.ny");
  const double spacing = as_positive(require(grid, "grid", "spacing"), "grid.spacing");
  Vec3 origin{};
  if (grid.contains("origin")) origin = as_vec3(grid["origin"], "grid.origin");
  GridPlane plane = GridPlane::XY;
  if (grid.contains("plane")) {
    if (!grid["plane"].is_string()) fail("grid.plane", "expected a string");
    const std::string p = grid["plane"].get<std::string>();
    if (p == "xy")
      plane = GridPlane::XY;
    else if (p == "xz")
      plane = GridPlane::XZ;
    else if (p == "yz")
      plane = GridPlane::YZ;
    else
      fail("grid.plane", "must be one of \"xy\", \"xz\", \"yz\"");
  }
  GridInit init = build_grid(nx, ny, spacing, origin, plane);
  scene.topology = std::move(init.topology);
  scene.initial = std::move(init.state);

  const json& material = require(root, "", "material");
  if (!material.is_object()) fail("material", "expected an object");
  reject_unknown(material, "material",
                 {"stiffness", "damping", "mass", "gravity", "drag", "pressure", "pressure_side"});
  scene.material.stiffness =
      as_non_negative(require(material, "material", "stiffness"), "material.stiffness");
  scene.material.damping =
      as_non_negative(require(material, "material", "damping"), "material.damping");
  scene.material.mass = as_positive(require(material, "material", "mass"), "material.mass");
  if (material.contains("gravity"))
    scene.material.gravity = as_vec3(material["gravity"], "material.gravity");
  if (material.contains("drag"))
    scene.material.drag = as_non_negative(material["drag"], "material.drag");
  double pressure = 0.0;
  if (material.contains("pressure"))
    pressure = as_non_negative(material["pressure"], "material.pressure");
  if (material.contains("pressure_side")) {
    const int side = as_int(material["pressure_side"], "material.pressure_side");
    if (side != 1 && side != -1) fail("material.pressure_side", "must be 1 or -1");
    pressure *= side;
  }
  scene.material.pressure = pressure;

  const json& time = require(root, "", "time");
  if (!time.is_object()) fail("time", "expected an object");
  reject_unknown(time, "time", {"dt", "steps"});
  scene.steps = as_int(require(time, "time", "steps"), "time.steps");
  if (scene.steps < 0) fail("time.steps", "must be >= 0");
  if (time.contains("dt")) {
    scene.dt = as_positive(time["dt"], "time.dt");
  } else {
    scene.dt = scene.stable_dt();
    if (!std::isfinite(scene.dt))
      fail("time.dt", "required when stiffness is 0 (no stability bound to default to)");
  }

  if (root.contains("pins")) {
    const json& pins = root["pins"];
    if (!pins.is_object()) fail("pins", "expected an object");
    reject_unknown(pins, "pins", {"nodes", "motion"});
    const json& nodes = require(pins, "pins", "nodes");
    std::vector<int> selected;
    auto add_entry = [&](const json& entry, const std::string& path) {
      if (entry.is_string())
        select_nodes(entry.get<std::string>(), scene.topology, path, selected);
      else if (entry.is_number_integer())
        selected.push_back(entry.get<int>());
      else
        fail(path, "expected a node index or a selector string");
    };
    if (nodes.is_array()) {
      for (size_t k = 0; k < nodes.size(); ++k)
        add_entry(nodes[k], "pins.nodes[" + std::to_string(k) + "]");
    } else {
      add_entry(nodes, "pins.nodes");
    }
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
    for (int i : selected)
      if (i < 0 || i >= scene.topology.node_count()) fail("pins.nodes", "index out of range");
    scene.bc.nodes = std::move(selected);
    for (int i : scene.bc.nodes) scene.bc.anchors.push_back(scene.initial.x[static_cast<size_t>(i)]);
    if (pins.contains("motion")) {
      const json& motion = pins["motion"];
      if (!motion.is_object()) fail("pins.motion", "expected an object");
      reject_unknown(motion, "pins.motion", {"velocity"});
      scene.bc.motion = PinMotion{as_vec3(require(motion, "pins.motion", "velocity"),
                                          "pins.motion.velocity")};
    }
  }

  if (root.contains("colliders")) {
    const json& colliders = root["colliders"];
    if (!colliders.is_array()) fail("colliders", "expected an array");
    for (size_t k = 0; k < colliders.size(); ++k) {
      const std::string path = "colliders[" + std::to_string(k) + "]";
      const json& c = colliders[k];
      if (!c.is_object()) fail(path, "expected an object");
      reject_unknown(c, path, {"type", "center", "radius", "friction"});
      const json& type = require(c, path, "type");
      if (!type.is_string() || type.get<std::string>() != "sphere")
        fail(path + ".type", "only \"sphere\" is supported");
      SphereCollider sphere;
      sphere.center = as_vec3(require(c, path, "center"), path + ".center");
      sphere.radius = as_positive(require(c, path, "radius"), path + ".radius");
      if (c.contains("friction")) {
        sphere.friction = as_number(c["friction"], path + ".friction");
        if (!(sphere.friction >= 0.0 && sphere.friction <= 1.0))
          fail(path + ".friction", "must be in [0, 1]");
      }
      scene.colliders.push_back(sphere);
    }
  }

  if (root.contains("plug_forces")) {
    const json& plugs = root["plug_forces"];
    if (!plugs.is_array()) fail("plug_forces", "expected an array");
    for (size_t k = 0; k < plugs.size(); ++k) {
      const std::string path = "plug_forces[" + std::to_string(k) + "]";
      if (!plugs[k].is_string()) fail(path, "expected a string");
      const std::string name = plugs[k].get<std::string>();
      if (name == "pressure")
        scene.plug_forces.push_back(PlugForce::Pressure);
      else if (name == "gravity")
        scene.plug_forces.push_back(PlugForce::Gravity);
      else if (name == "drag")
        scene.plug_forces.push_back(PlugForce::Drag);
      else
        fail(path, "must be one of \"pressure\", \"gravity\", \"drag\"");
    }
  }

  scene.validate();
  if (scene.dt > scene.stable_dt())
    std::fprintf(stderr,
                 "warning: %s: dt %.6g exceeds the explicit-integration stability bound %.6g\n",
                 scene.name.empty() ? "scene" : scene.name.c_str(), scene.dt, scene.stable_dt());
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_scene_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// -------------------------------------------------------- trajectories ----

void write_trajectory(std::ostream& out, const Trajectory& traj, uint32_t version) {
  traj.validate();
  if (version != 1 && version != 2)
    throw IoError("unsupported trajectory version " + std::to_string(version));
  write_bytes(out, kTrajectoryMagic, sizeof kTrajectoryMagic);
  write_scalar<uint32_t>(out, version);
  write_scalar<uint32_t>(out, static_cast<uint32_t>(traj.nx));
  write_scalar<uint32_t>(out, static_cast<uint32_t>(traj.ny));
  write_scalar<uint32_t>(out, static_cast<uint32_t>(traj.frame_count()));
  write_scalar<double>(out, traj.dt);
  write_scalar<double>(out, traj.spacing);
  for (const ClothState& frame : traj.frames) {
    auto write_field = [&](const Vec3Field& field) {
      if (version == 1) {
        write_bytes(out, field.data(), field.size() * sizeof(Vec3));
      } else {
        std::vector<Vec3f> narrow(field.size());
        for (size_t i = 0; i < field.size(); ++i) narrow[i] = field[i].cast<float>();
        write_bytes(out, narrow.data(), narrow.size() * sizeof(Vec3f));
      }
    };
    write_field(frame.x);
    write_field(frame.v);
  }
}

Trajectory read_trajectory(std::istream& in) {
  char magic[4];
  read_bytes(in, magic, sizeof magic, "trajectory magic");
  if (std::memcmp(magic, kTrajectoryMagic, sizeof magic) != 0)
    throw IoError("not a trajectory file (bad magic)");
  const auto version = read_scalar<uint32_t>(in, "trajectory version");
  if (version != 1 && version != 2)
    throw IoError("unsupported trajectory version " + std::to_string(version));
  Trajectory traj;
  traj.nx = static_cast<int>(read_scalar<uint32_t>(in, "trajectory header"));
  traj.ny = static_cast<int>(read_scalar<uint32_t>(in, "trajectory header"));
  const auto frames = read_scalar<uint32_t>(in, "trajectory header");
  traj.dt = read_scalar<double>(in, "trajectory header");
  traj.spacing = read_scalar<double>(in, "trajectory header");
  if (traj.nx < 2 || traj.ny < 2 || traj.nx > 65536 || traj.ny > 65536)
    throw IoError("trajectory header: implausible grid " + std::to_string(traj.nx) + "x" +
                  std::to_string(traj.ny));
  if (frames < 1) throw IoError("trajectory header: zero frames");

  const uint64_t n = static_cast<uint64_t>(traj.nx) * static_cast<uint64_t>(traj.ny);
  const uint64_t scalar_size = version == 1 ? sizeof(double) : sizeof(float);
  const uint64_t expected = static_cast<uint64_t>(frames) * n * 6u * scalar_size;
  const uint64_t available = remaining_bytes(in);
  if (available < expected)
    throw IoError("truncated trajectory: header declares " + std::to_string(expected) +
                  " payload bytes, found " + std::to_string(available));

  traj.frames.resize(frames);
  for (ClothState& frame : traj.frames) {
    auto read_field = [&](Vec3Field& field) {
      field.resize(n);
      if (version == 1) {
        read_bytes(in, field.data(), field.size() * sizeof(Vec3), "trajectory frame");
      } else {
        std::vector<Vec3f> narrow(field.size());
        read_bytes(in, narrow.data(), narrow.size() * sizeof(Vec3f), "trajectory frame");
        for (size_t i = 0; i < field.size(); ++i) field[i] = narrow[i].cast<double>();
      }
    };
    read_field(frame.x);
    read_field(frame.v);
  }
  traj.validate();
  return traj;
}

void write_trajectory_file(const std::string& path, const Trajectory& traj, uint32_t version) {
  atomic_write(path, [&](std::ostream& out) { write_trajectory(out, traj, version); });
}

Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trajectory " + path);
  try {
    return read_trajectory(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// ----------------------------------------------------------------- OBJ ----

void export_obj(std::ostream& out, const Trajectory& traj, int frame) {
  traj.validate();
  if (frame < 0 || frame >= traj.frame_count())
    throw ConfigError("obj export: frame " + std::to_string(frame) + " not in [0, " +
                      std::to_string(traj.frame_count() - 1) + "]");
  const ClothState& state = traj.frames[static_cast<size_t>(frame)];
  char line[128];
  for (const Vec3& p : state.x) {
    std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << line;
  }
  // quads split along the lower-left to upper-right diagonal
  const int nx = traj.nx;
  for (int iy = 0; iy + 1 < traj.ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const int a = iy * nx + ix + 1;  // 1-based OBJ indices
      const int b = a + 1;
      const int c = a + nx + 1;
      const int d = a + nx;
      std::snprintf(line, sizeof line, "f %d %d %d\nf %d %d %d\n", a, b, c, a, c, d);
      out << line;
    }
  }
  if (!out) throw IoError("obj export: write failed");
}

void export_obj_file(const std::string& path, const Trajectory& traj, int frame) {
  atomic_write(path, [&](std::ostream& out) { export_obj(out, traj, frame); });
}

// --------------------------------------------------------- checkpoints ----

void save_checkpoint(const std::string& path, const Checkpoint& ckp) {
  atomic_write(path, [&](std::ostream& out) {
    write_bytes(out, kCheckpointMagic, sizeof kCheckpointMagic);
    write_scalar<uint32_t>(out, 1u);  // format version
    write_scalar<uint64_t>(out, channel_order_hash());
    write_scalar<int64_t>(out, ckp.step);
    write_scalar<uint32_t>(out, static_cast<uint32_t>(ckp.config_echo.size()));
    write_bytes(out, ckp.config_echo.data(), ckp.config_echo.size());
    write_scalar<uint32_t>(out, kParamGroups);

    NetworkParams params = ckp.params;
    std::array<std::vector<double>, kParamGroups> values;
    for_each_scalar(params, [&](ParamGroup g, int, double& v) {
      values[static_cast<size_t>(g)].push_back(v);
    });
    for (int g = 0; g < kParamGroups; ++g) {
      const size_t gi = static_cast<size_t>(g);
      const std::string name = param_group_name(static_cast<ParamGroup>(g));
      write_scalar<uint8_t>(out, static_cast<uint8_t>(name.size()));
      write_bytes(out, name.data(), name.size());
      write_scalar<uint8_t>(out, params.trainable[gi] ? 1 : 0);
      write_scalar<double>(out, params.brackets[gi].lo);
      write_scalar<double>(out, params.brackets[gi].hi);
      write_scalar<uint32_t>(out, static_cast<uint32_t>(values[gi].size()));
      write_bytes(out, values[gi].data(), values[gi].size() * sizeof(double));
    }

    write_scalar<uint8_t>(out, ckp.opt ? 1 : 0);
    if (ckp.opt) {
      write_scalar<int64_t>(out, ckp.opt->step);
      write_bytes(out, ckp.opt->m.data(), ckp.opt->m.size() * sizeof(double));
      write_bytes(out, ckp.opt->v.data(), ckp.opt->v.size() * sizeof(double));
    }
  });
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  try {
    char magic[4];
    read_bytes(in, magic, sizeof magic, "checkpoint magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
      throw IoError("not a checkpoint file (bad magic)");
    const auto version = read_scalar<uint32_t>(in, "checkpoint version");
    if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto hash = read_scalar<uint64_t>(in, "channel order hash");
    if (hash != channel_order_hash())
      throw IoError("checkpoint was written against a different stencil channel ordering");

    Checkpoint ckp;
    ckp.step = read_scalar<int64_t>(in, "step counter");
    const auto echo_len = read_scalar<uint32_t>(in, "config echo length");
    if (echo_len > (1u << 20)) throw IoError("checkpoint config echo implausibly large");
    ckp.config_echo.resize(echo_len);
    read_bytes(in, ckp.config_echo.data(), echo_len, "config echo");

    const auto groups = read_scalar<uint32_t>(in, "group count");
    if (groups != kParamGroups)
      throw IoError("checkpoint declares " + std::to_string(groups) + " parameter groups, expected " +
                    std::to_string(kParamGroups));
    std::array<std::vector<double>, kParamGroups> values;
    for (int g = 0; g < kParamGroups; ++g) {
      const size_t gi = static_cast<size_t>(g);
      const auto name_len = read_scalar<uint8_t>(in, "group name length");
      std::string name(name_len, '\0');
      read_bytes(in, name.data(), name_len, "group name");
      const std::string expected = param_group_name(static_cast<ParamGroup>(g));
      if (name != expected)
        throw IoError("checkpoint group " + std::to_string(g) + " is \"" + name +
                      "\", expected \"" + expected + "\"");
      ckp.params.trainable[gi] = read_scalar<uint8_t>(in, "trainable flag") != 0;
      ckp.params.brackets[gi].lo = read_scalar<double>(in, "bracket");
      ckp.params.brackets[gi].hi = read_scalar<double>(in, "bracket");
      const auto count = read_scalar<uint32_t>(in, "group scalar count");
      if (static_cast<int>(count) != kGroupSizes[gi])
        throw IoError("checkpoint group \"" + name + "\" has " + std::to_string(count) +
                      " scalars, expected " + std::to_string(kGroupSizes[gi]));
      values[gi].resize(count);
      read_bytes(in, values[gi].data(), count * sizeof(double), "group scalars");
    }
    std::array<size_t, kParamGroups> cursor{};
    for_each_scalar(ckp.params, [&](ParamGroup g, int, double& v) {
      v = values[static_cast<size_t>(g)][cursor[static_cast<size_t>(g)]++];
    });
    if (!(ckp.params.isru_alpha > 0.0))
      throw IoError("checkpoint isru_alpha must be > 0");

    if (read_scalar<uint8_t>(in, "optimizer flag") != 0) {
      AdamState opt;
      opt.step = read_scalar<int64_t>(in, "optimizer step");
      read_bytes(in, opt.m.data(), opt.m.size() * sizeof(double), "optimizer moments");
      read_bytes(in, opt.v.data(), opt.v.size() * sizeof(double), "optimizer moments");
      ckp.opt = opt;
    }
    return ckp;
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// ----------------------------------------------------------------- CSV ----

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
  atomic_write(path, [&](std::ostream& out) {
    out << "step,lr,physics,data,total\n";
    for (const LossRow& r : rows)
      out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.physics) << ','
          << format_double(r.data) << ',' << format_double(r.total) << '\n';
    if (!out) throw IoError("write failed: " + path);
  });
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  atomic_write(path, [&](std::ostream& out) {
    out << "scene," << report.scene_id << '\n';
    out << "checkpoint," << report.checkpoint_id << '\n';
    out << "frame,error_pct\n";
    for (size_t f = 0; f < report.frame_error_pct.size(); ++f)
      out << f << ',' << format_double(report.frame_error_pct[f]) << '\n';
    out << "mean," << format_double(report.mean_error_pct) << '\n';
    out << "final," << format_double(report.final_error_pct) << '\n';
    if (!out) throw IoError("write failed: " + path);
  });
}

}  // namespace cloth
