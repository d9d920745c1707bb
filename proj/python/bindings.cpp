#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>

#include "cloth/error.hpp"
#include "cloth/eval.hpp"
#include "cloth/io.hpp"
#include "cloth/net.hpp"
#include "cloth/sim.hpp"
#include "cloth/train.hpp"

namespace py = pybind11;
using namespace cloth;

namespace {

py::array_t<double> field_to_numpy(const Vec3Field& field) {
  py::array_t<double> out({static_cast<py::ssize_t>(field.size()), py::ssize_t(3)});
  std::memcpy(out.mutable_data(), field.data(), field.size() * sizeof(Vec3));
  return out;
}

Vec3Field numpy_to_field(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                         const char* name) {
  if (a.ndim() != 2 || a.shape(1) != 3)
    throw ConfigError(std::string(name) + ": expected an (n, 3) array");
  Vec3Field field(static_cast<size_t>(a.shape(0)));
  std::memcpy(field.data(), a.data(), field.size() * sizeof(Vec3));
  return field;
}

ClothState make_state(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                      const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
  ClothState s;
  s.x = numpy_to_field(x, "positions");
  s.v = numpy_to_field(v, "velocities");
  if (s.x.size() != s.v.size())
    throw ConfigError("positions and velocities disagree on the node count");
  return s;
}

TrainConfig make_train_config(double alpha, int batch_size, int epochs, uint64_t seed, double lr0,
                              int de_population, int de_generations, int de_probe) {
  TrainConfig cfg;
  cfg.alpha = alpha;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.schedule.lr0 = lr0;
  cfg.de.population = de_population;
  cfg.de.generations = de_generations;
  cfg.de.probe_batch = de_probe;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mass-spring cloth simulator with a trainable stencil-convolution step";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericsError>(m, "NumericsError", PyExc_ArithmeticError);

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("name", [](const Scene& s) { return s.name; })
      .def_property_readonly("nx", [](const Scene& s) { return s.topology.nx; })
      .def_property_readonly("ny", [](const Scene& s) { return s.topology.ny; })
      .def_property_readonly("node_count", [](const Scene& s) { return s.topology.node_count(); })
      .def_property_readonly("spacing", [](const Scene& s) { return s.topology.spacing; })
      .def_readonly("dt", &Scene::dt)
      .def_readonly("steps", &Scene::steps)
      .def_property_readonly("pinned_nodes", [](const Scene& s) { return s.bc.nodes; })
      .def("stable_dt", &Scene::stable_dt)
      .def_property_readonly("spring_count",
                             [](const Scene& s) { return s.topology.spring_pair_count(); })
      .def("initial_positions", [](const Scene& s) { return field_to_numpy(s.initial.x); })
      .def("__repr__", [](const Scene& s) {
        return "<Scene " + (s.name.empty() ? "?" : s.name) + " " + std::to_string(s.topology.nx) +
               "x" + std::to_string(s.topology.ny) + ">";
      });

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("nx", &Trajectory::nx)
      .def_readonly("ny", &Trajectory::ny)
      .def_readonly("dt", &Trajectory::dt)
      .def_readonly("spacing", &Trajectory::spacing)
      .def_property_readonly("frame_count", &Trajectory::frame_count)
      .def("positions",
           [](const Trajectory& t, int frame) {
             if (frame < 0 || frame >= t.frame_count())
               throw ConfigError("frame index out of range");
             return field_to_numpy(t.frames[static_cast<size_t>(frame)].x);
           })
      .def("velocities",
           [](const Trajectory& t, int frame) {
             if (frame < 0 || frame >= t.frame_count())
               throw ConfigError("frame index out of range");
             return field_to_numpy(t.frames[static_cast<size_t>(frame)].v);
           })
      .def("__len__", &Trajectory::frame_count)
      .def("__repr__", [](const Trajectory& t) {
        return "<Trajectory " + std::to_string(t.nx) + "x" + std::to_string(t.ny) + ", " +
               std::to_string(t.frame_count()) + " frames>";
      });

  py::class_<NetworkParams>(m, "NetworkParams")
      .def(py::init<>())
      .def_property_readonly("fingerprint", [](const NetworkParams& p) {
        return params_fingerprint(p);
      })
      .def("scalars", [](const NetworkParams& p) {
        NetworkParams copy = p;
        std::vector<double> out;
        for_each_scalar(copy, [&](ParamGroup, int, double& v) { out.push_back(v); });
        return out;
      });

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("scene_id", &EvalReport::scene_id)
      .def_readonly("checkpoint_id", &EvalReport::checkpoint_id)
      .def_readonly("frame_error_pct", &EvalReport::frame_error_pct)
      .def_readonly("mean_error_pct", &EvalReport::mean_error_pct)
      .def_readonly("final_error_pct", &EvalReport::final_error_pct);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<>())
      .def_readwrite("params", &Checkpoint::params)
      .def_readwrite("step", &Checkpoint::step)
      .def_readwrite("config_echo", &Checkpoint::config_echo);

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("parse_scene", &parse_scene_config, py::arg("json_text"));
  m.def("simulate", &simulate_scene, py::arg("scene"),
        py::call_guard<py::gil_scoped_release>());
  m.def("save_trajectory", &write_trajectory_file, py::arg("path"), py::arg("trajectory"),
        py::arg("version") = 1);
  m.def("load_trajectory", &read_trajectory_file, py::arg("path"));
  m.def("export_obj", &export_obj_file, py::arg("path"), py::arg("trajectory"), py::arg("frame"));

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("checkpoint"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "forward_impulse",
      [](const NetworkParams& params, const Scene& scene, const py::array_t<double>& x,
         const py::array_t<double>& v) {
        const ClothState s = make_state(x, v);
        return field_to_numpy(forward_impulse(s, scene.topology, params));
      },
      py::arg("params"), py::arg("scene"), py::arg("positions"), py::arg("velocities"));

  m.def(
      "total_force",
      [](const Scene& scene, const py::array_t<double>& x, const py::array_t<double>& v) {
        return field_to_numpy(total_force(make_state(x, v), scene));
      },
      py::arg("scene"), py::arg("positions"), py::arg("velocities"));

  m.def("rollout", &rollout, py::arg("params"), py::arg("scene"), py::arg("steps") = -1,
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate_rollout, py::arg("test"), py::arg("reference"));

  m.def(
      "train",
      [](const Scene& scene, const Trajectory& traj, double alpha, int batch_size, int epochs,
         uint64_t seed, double lr0, int de_population, int de_generations, int de_probe) {
        const TrainConfig cfg = make_train_config(alpha, batch_size, epochs, seed, lr0,
                                                  de_population, de_generations, de_probe);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train_loop(cfg, scene, traj);
        }
        std::vector<std::tuple<int, double, double, double, double>> history;
        for (const LossRow& r : result.history)
          history.emplace_back(r.step, r.lr, r.physics, r.data, r.total);
        return py::make_tuple(result.params, history);
      },
      py::arg("scene"), py::arg("trajectory"), py::arg("alpha") = 0.5,
      py::arg("batch_size") = 128, py::arg("epochs") = 2000, py::arg("seed") = 0,
      py::arg("lr0") = 1e-2, py::arg("de_population") = 64, py::arg("de_generations") = 60,
      py::arg("de_probe") = 32);

  m.def("gradient_check",
        [](int nx, int ny, uint64_t seed, double eps) {
          Rng rng(seed);
          const GridInit grid = build_grid(nx, ny, 0.1, Vec3{}, GridPlane::XY);
          ClothState s = grid.state;
          for (size_t i = 0; i < s.x.size(); ++i)
            for (int d = 0; d < 3; ++d) {
              s.x[i][d] += rng.uniform(-0.03, 0.03);
              s.v[i][d] = rng.uniform(-1, 1);
            }
          NetworkParams p;
          for (int c = 0; c < kChannels; ++c) {
            p.kernel_gain[static_cast<size_t>(c)] = rng.uniform(0.5, 1.5);
            p.linear_w[static_cast<size_t>(c)] = rng.uniform(-0.5, 0.5);
            p.nonlinear_w[static_cast<size_t>(c)] = rng.uniform(-0.5, 0.5);
            p.deriv_w[static_cast<size_t>(c)] = rng.uniform(-0.5, 0.5);
          }
          for (int d = 0; d < 3; ++d) p.linear_b[d] = rng.uniform(-0.3, 0.3);
          p.self_velocity_w = rng.uniform(-0.5, 0.5);
          p.isru_alpha = rng.uniform(0.5, 2.0);
          for (int g = 0; g < kParamGroups; ++g)
            p.set_trainable(static_cast<ParamGroup>(g), true);
          return finite_diff_check(s, grid.topology, p, eps);
        },
        py::arg("nx") = 8, py::arg("ny") = 8, py::arg("seed") = 7, py::arg("eps") = 1e-6);

  m.def("channel_order_hash", &channel_order_hash);
  m.def("params_fingerprint", &params_fingerprint, py::arg("params"));
}
