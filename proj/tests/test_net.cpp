#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cloth/error.hpp"
#include "cloth/net.hpp"
#include "cloth/sim.hpp"
#include "oracles.hpp"

using namespace cloth;

TEST_CASE("default parameters: zero cell, unit kernel, frozen kernel and alpha") {
  const NetworkParams p;
  for (int c = 0; c < kChannels; ++c) {
    CHECK(p.kernel_gain[static_cast<size_t>(c)] == 1.0);
    CHECK(p.linear_w[static_cast<size_t>(c)] == 0.0);
    CHECK(p.nonlinear_w[static_cast<size_t>(c)] == 0.0);
    CHECK(p.deriv_w[static_cast<size_t>(c)] == 0.0);
  }
  CHECK(p.linear_b == Vec3{});
  CHECK(p.self_velocity_w == 0.0);
  CHECK(p.isru_alpha == 1.0);
  CHECK_FALSE(p.is_trainable(ParamGroup::Kernel));
  CHECK_FALSE(p.is_trainable(ParamGroup::Alpha));
  for (ParamGroup g : {ParamGroup::Linear, ParamGroup::Bias, ParamGroup::Nonlinear,
                       ParamGroup::Deriv, ParamGroup::SelfVelocity})
    CHECK(p.is_trainable(g));
}

TEST_CASE("the parameter vector has exactly 53 scalars in group order") {
  NetworkParams p;
  std::vector<ParamGroup> order;
  int count = 0;
  for_each_scalar(p, [&](ParamGroup g, int, double&) {
    order.push_back(g);
    ++count;
  });
  CHECK(count == NetworkParams::kScalarCount);
  CHECK(count == 53);
  // 12 kernel, 12 linear, 3 bias, 12 nonlinear, 12 deriv, 1 self, 1 alpha
  int at = 0;
  auto expect = [&](ParamGroup g, int n) {
    for (int k = 0; k < n; ++k) CHECK(order[static_cast<size_t>(at++)] == g);
  };
  expect(ParamGroup::Kernel, 12);
  expect(ParamGroup::Linear, 12);
  expect(ParamGroup::Bias, 3);
  expect(ParamGroup::Nonlinear, 12);
  expect(ParamGroup::Deriv, 12);
  expect(ParamGroup::SelfVelocity, 1);
  expect(ParamGroup::Alpha, 1);
}

TEST_CASE("group names round-trip and unknown names are rejected") {
  for (int g = 0; g < kParamGroups; ++g) {
    const ParamGroup pg = static_cast<ParamGroup>(g);
    CHECK(param_group_from_name(param_group_name(pg)) == pg);
  }
  CHECK_THROWS_AS(param_group_from_name("bananas"), ConfigError);
}

TEST_CASE("isru is odd, bounded, monotone and near-linear at the origin") {
  CHECK(isru(0.0, 1.0) == 0.0);
  CHECK(isru(1.0, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(isru(3.0, 1.0) == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-15));
  for (double alpha : {0.25, 1.0, 4.0}) {
    double prev = -1.0 / std::sqrt(alpha);
    for (double z = -50.0; z <= 50.0; z += 0.5) {
      const double y = isru(z, alpha);
      CHECK(y == -isru(-z, alpha));
      CHECK(std::fabs(y) < 1.0 / std::sqrt(alpha));
      CHECK(y > prev);
      prev = y;
    }
  }
  CHECK(isru(1e-9, 1.0) == doctest::Approx(1e-9).epsilon(1e-12));
}

TEST_CASE("channel extraction equals the gather oracle, edges masked to zero") {
  Rng rng(3);
  for (auto [nx, ny] : {std::pair{8, 8}, std::pair{3, 7}, std::pair{2, 2}}) {
    const GridInit grid = build_grid(nx, ny, 0.1, Vec3{}, GridPlane::XY);
    const ClothState s = oracle::random_state(grid, rng, 0.05, 1.5);
    NetworkParams p = oracle::random_params(rng);
    const ChannelFeatures got = extract_channels(s, grid.topology, p.kernel_gain);
    const oracle::Channels want = oracle::channels(s, nx, ny, p.kernel_gain);
    REQUIRE(got.pos_diff.size() == want.pos.size());
    for (size_t k = 0; k < want.pos.size(); ++k) {
      CHECK((got.pos_diff[k] - want.pos[k]).norm() <= 1e-12);
      CHECK((got.vel_diff[k] - want.vel[k]).norm() <= 1e-12);
    }
    for (int i = 0; i < grid.topology.node_count(); ++i) {
      CHECK(got.vel_self[static_cast<size_t>(i)] == s.v[static_cast<size_t>(i)]);
      for (int c = 0; c < kChannels; ++c)
        if (!grid.topology.valid(i, c))
          CHECK(got.pos_diff[static_cast<size_t>(i * kChannels + c)] == Vec3{});
    }
  }
}

TEST_CASE("forward impulse equals the from-scratch cell evaluation") {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    const int nx = 3 + static_cast<int>(rng.uniform_below(6));
    const int ny = 3 + static_cast<int>(rng.uniform_below(6));
    const GridInit grid = build_grid(nx, ny, 0.1, Vec3{}, GridPlane::XY);
    const ClothState s = oracle::random_state(grid, rng, 0.05, 1.5);
    const NetworkParams p = oracle::random_params(rng);
    const Vec3Field got = forward_impulse(s, grid.topology, p);
    const Vec3Field want = oracle::cell_forward(s, nx, ny, p);
    CHECK(oracle::max_abs_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("zero weights give a zero impulse; the bias passes straight through") {
  const GridInit grid = build_grid(4, 4, 0.1, Vec3{}, GridPlane::XY);
  NetworkParams p;
  for (const Vec3& out : forward_impulse(grid.state, grid.topology, p)) CHECK(out == Vec3{});
  p.linear_b = {0.1, -0.2, 0.3};
  for (const Vec3& out : forward_impulse(grid.state, grid.topology, p))
    CHECK(out == p.linear_b);
}

TEST_CASE("analytic gradients agree with central finite differences") {
  Rng rng(23);
  const GridInit grid = build_grid(6, 6, 0.1, Vec3{}, GridPlane::XY);
  for (int trial = 0; trial < 3; ++trial) {
    const ClothState s = oracle::random_state(grid, rng, 0.04, 1.0);
    NetworkParams p = oracle::random_params(rng);
    for (int g = 0; g < kParamGroups; ++g) p.set_trainable(static_cast<ParamGroup>(g), true);
    CHECK(finite_diff_check(s, grid.topology, p, 1e-6) <= 1e-5);
  }
}

TEST_CASE("gradient contraction is linear in the upstream cotangent") {
  Rng rng(29);
  const GridInit grid = build_grid(5, 5, 0.1, Vec3{}, GridPlane::XY);
  const ClothState s = oracle::random_state(grid, rng, 0.04, 1.0);
  const NetworkParams p = oracle::random_params(rng);
  Vec3Field u1(s.x.size()), u2(s.x.size()), u12(s.x.size());
  for (size_t i = 0; i < u1.size(); ++i) {
    u1[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    u2[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    u12[i] = u1[i] + u2[i];
  }
  const ParamGradients a = backward_gradients(s, grid.topology, p, u1);
  const ParamGradients b = backward_gradients(s, grid.topology, p, u2);
  ParamGradients sum = a;
  sum.add_scaled(b, 1.0);
  ParamGradients direct = backward_gradients(s, grid.topology, p, u12);
  double worst = 0.0;
  for_each_gradient(sum, [&](ParamGroup g, int k, double& v) {
    double other = 0.0;
    for_each_gradient(direct, [&](ParamGroup g2, int k2, double& v2) {
      if (g2 == g && k2 == k) other = v2;
    });
    worst = std::max(worst, std::fabs(v - other) / std::max(1.0, std::fabs(other)));
  });
  CHECK(worst <= 1e-12);
}

TEST_CASE("forward failures name the node and branch") {
  const GridInit grid = build_grid(4, 4, 0.1, Vec3{}, GridPlane::XY);
  NetworkParams p;
  p.linear_w[0] = std::numeric_limits<double>::infinity();
  try {
    forward_impulse(grid.state, grid.topology, p);
    FAIL_CHECK("expected a numerics failure");
  } catch (const NumericsError& e) {
    CHECK(std::string(e.what()).find("linear") != std::string::npos);
  }

  NetworkParams bad_alpha;
  bad_alpha.isru_alpha = 0.0;
  CHECK_THROWS_AS(forward_impulse(grid.state, grid.topology, bad_alpha), Error);
}

TEST_CASE("nn_step with the analytic impulse oracle reproduces the simulator step") {
  MaterialParams m;
  m.stiffness = 40.0;
  m.damping = 0.2;
  m.mass = 0.01;
  m.gravity = {0, 0, -9.8};
  m.drag = 0.01;
  GridInit g = build_grid(8, 8, 0.05, Vec3{-0.175, -0.175, 0.28}, GridPlane::XY);
  Scene scene;
  scene.name = "mini_ball";
  scene.topology = std::move(g.topology);
  scene.initial = std::move(g.state);
  scene.material = m;
  scene.dt = 5e-4;
  scene.steps = 60;
  scene.colliders.push_back({{0, 0, 0}, 0.25, 0.3});
  scene.bc.nodes = {0};
  scene.bc.anchors = {scene.initial.x[0]};
  scene.bc.motion = PinMotion{{0.05, 0, 0}};

  ClothState sim = apply_dirichlet(scene.initial, scene.bc, 0.0);
  ClothState chained = sim;
  for (int k = 0; k < 60; ++k) {
    const double t = (k + 1) * scene.dt;
    sim = step_semi_implicit(sim, scene, t);
    chained = advance_with_impulse(chained, total_impulse(chained, scene), scene, t);
    REQUIRE(oracle::bitwise_equal(sim.x, chained.x));
    REQUIRE(oracle::bitwise_equal(sim.v, chained.v));
  }
}

TEST_CASE("nn_step applies the cell impulse plus plug-in forces through the shared chain") {
  MaterialParams m;
  m.stiffness = 0.0;
  m.mass = 0.5;
  m.gravity = {0, 0, -9.8};
  m.drag = 0.3;
  GridInit g = build_grid(4, 4, 0.1, Vec3{}, GridPlane::XY);
  Scene scene;
  scene.name = "plugged";
  scene.topology = std::move(g.topology);
  scene.initial = std::move(g.state);
  scene.material = m;
  scene.dt = 0.01;
  scene.steps = 5;
  scene.plug_forces = {PlugForce::Gravity, PlugForce::Drag};

  ClothState s = scene.initial;
  for (Vec3& v : s.v) v = {0.2, -0.1, 0.4};

  const NetworkParams zero;  // cell contributes nothing, plugs do the work
  const ClothState out = nn_step(s, scene, zero, scene.dt);
  for (size_t i = 0; i < s.x.size(); ++i) {
    const Vec3 want_v =
        s.v[i] + m.gravity * scene.dt - s.v[i] * (m.drag * scene.dt / m.mass);
    CHECK((out.v[i] - want_v).norm() <= 1e-14);
    CHECK((out.x[i] - (s.x[i] + out.v[i] * scene.dt)).norm() <= 1e-14);
  }
}
