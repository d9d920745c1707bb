import math

import numpy as np
import pytest

import stencilcloth as sc


def small_scene():
    return sc.parse_scene(
        """
        {
          "name": "py_mini",
          "grid": {"nx": 6, "ny": 6, "spacing": 0.1, "origin": [0, 0, 1], "plane": "xz"},
          "material": {"stiffness": 40.0, "damping": 0.3, "mass": 0.05,
                       "gravity": [0, -9.8, 0], "drag": 0.02},
          "time": {"dt": 0.002, "steps": 25},
          "pins": {"nodes": "top_row"}
        }
        """
    )


def test_scene_loading_and_grid():
    scene = sc.load_scene("scenes/falling_desk.json")
    assert scene.nx == 16 and scene.ny == 16
    assert scene.node_count == 256
    assert scene.steps == 499  # 500 frames including the initial one
    assert scene.dt <= scene.stable_dt() * (1 + 1e-12)
    assert scene.initial_positions().shape == (256, 3)


def test_spring_count_matches_closed_form():
    scene = small_scene()
    nx, ny = scene.nx, scene.ny
    expected = (
        (nx - 1) * ny + nx * (ny - 1) + 2 * (nx - 1) * (ny - 1) + (nx - 2) * ny + nx * (ny - 2)
    )
    assert scene.spring_count == expected


def test_simulate_and_trajectory_round_trip(tmp_path):
    scene = small_scene()
    traj = sc.simulate(scene)
    assert len(traj) == scene.steps + 1
    x0 = traj.positions(0)
    assert x0.shape == (36, 3)
    assert np.isfinite(traj.positions(scene.steps)).all()

    path = str(tmp_path / "run.clt1")
    sc.save_trajectory(path, traj)
    back = sc.load_trajectory(path)
    assert len(back) == len(traj)
    for f in (0, scene.steps // 2, scene.steps):
        assert np.array_equal(back.positions(f), traj.positions(f))
        assert np.array_equal(back.velocities(f), traj.velocities(f))


def test_pinned_rows_hold():
    scene = small_scene()
    traj = sc.simulate(scene)
    pins = scene.pinned_nodes
    assert len(pins) == 6
    first = traj.positions(0)[pins]
    last = traj.positions(len(traj) - 1)[pins]
    assert np.array_equal(first, last)


def test_forces_and_forward_impulse_shapes():
    scene = small_scene()
    traj = sc.simulate(scene)
    x, v = traj.positions(3), traj.velocities(3)
    force = sc.total_force(scene, x, v)
    assert force.shape == x.shape and np.isfinite(force).all()

    params = sc.NetworkParams()
    impulse = sc.forward_impulse(params, scene, x, v)
    assert impulse.shape == x.shape
    assert np.all(impulse == 0.0)  # default weights are zero


def test_rollout_and_evaluate():
    scene = small_scene()
    reference = sc.simulate(scene)
    params = sc.NetworkParams()
    roll = sc.rollout(params, scene, steps=10)
    assert len(roll) == 11

    report = sc.evaluate(reference, reference)
    assert report.mean_error_pct == 0.0
    assert report.final_error_pct == 0.0
    assert len(report.frame_error_pct) == len(reference)


def test_evaluate_rejects_mismatched_grids():
    scene = small_scene()
    traj = sc.simulate(scene)
    other = sc.simulate(sc.load_scene("scenes/falling_desk.json"))
    with pytest.raises(ValueError):
        sc.evaluate(traj, other)


def test_train_smoke_and_checkpoint_round_trip(tmp_path):
    scene = small_scene()
    traj = sc.simulate(scene)
    params, history = sc.train(
        scene,
        traj,
        alpha=0.5,
        batch_size=8,
        epochs=5,
        seed=11,
        de_population=6,
        de_generations=2,
        de_probe=4,
    )
    assert len(history) == 5
    steps = [row[0] for row in history]
    assert steps == [0, 1, 2, 3, 4]
    assert all(math.isfinite(row[4]) for row in history)

    ckp = sc.Checkpoint()
    ckp.params = params
    ckp.step = 5
    ckp.config_echo = "alpha=0.5 batch=8"
    path = str(tmp_path / "mini.ckpt")
    sc.save_checkpoint(path, ckp)
    back = sc.load_checkpoint(path)
    assert back.step == 5
    assert back.config_echo == "alpha=0.5 batch=8"
    assert sc.params_fingerprint(back.params) == sc.params_fingerprint(params)


def test_gradient_check():
    assert sc.gradient_check(nx=6, ny=6, seed=3, eps=1e-6) <= 1e-5


def test_io_errors_surface_as_python_exceptions(tmp_path):
    with pytest.raises(OSError):
        sc.load_trajectory(str(tmp_path / "missing.clt1"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValueError):
        sc.load_scene(str(bad))


def test_channel_order_hash_stable():
    h = sc.channel_order_hash()
    assert h != 0
    assert h == sc.channel_order_hash()
