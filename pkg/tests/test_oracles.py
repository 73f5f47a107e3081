import numpy as np

from kinorrt.lti import build_double_integrator_2d
from kinorrt.oracles import (
    OracleCheck,
    brute_force_pff,
    format_report,
    validate_system,
    velocity_grid,
)
from kinorrt.steering import solve_pff_fixed_time


def test_oracle_check_threshold():
    assert OracleCheck("a", 1e-7, 1e-6).passed
    assert not OracleCheck("a", 2e-6, 1e-6).passed
    assert not OracleCheck("a", float("nan"), 1e-6).passed


def test_velocity_grid_contains_pff_optimum(rng):
    di = build_double_integrator_2d()
    for _ in range(20):
        x_a = np.r_[rng.uniform(0, 20, 2), rng.uniform(-2, 2, 2)]
        x_c = x_a[:2] + rng.uniform(-5, 5, 2)
        tf = rng.uniform(0.5, 5.0)
        grid, step = velocity_grid(x_a, x_c, tf)
        v = solve_pff_fixed_time(di, x_a, x_c, tf).x_end[2:]
        assert np.all(v >= grid.min(axis=0)) and np.all(v <= grid.max(axis=0))
        assert grid.shape == (41 * 41, 2) and step > 0


def test_brute_force_pff_picks_cheapest_row():
    di = build_double_integrator_2d()
    x_a, x_c = np.zeros(4), np.array([2.0, 0.0])
    grid = np.array([[5.0, 5.0], [1.0, 0.0], [-3.0, 0.0]])
    best, arg = brute_force_pff(di, x_a, x_c, 2.0, grid)
    assert np.array_equal(arg, [1.0, 0.0])
    assert best >= solve_pff_fixed_time(di, x_a, x_c, 2.0).cost


def test_validate_quadrotor_passes():
    checks = validate_system("quadrotor", brute_force=0, transversality=20)
    assert checks and all(c.passed for c in checks)
    report = format_report("quadrotor", checks)
    assert report.endswith(f"{len(checks)}/{len(checks)} checks passed")
