import numpy as np
import pytest
from hypothesis import given, strategies as st

from kinorrt.errors import EnvironmentSaturatedError, InvalidInputError
from kinorrt.lti import build_double_integrator_2d
from kinorrt.scenario import builtin_scenario
from kinorrt.steering import Trajectory, solve_fixed_state_fixed_time, solve_pff_free_time
from kinorrt.world import (
    Box,
    Environment,
    collision_free_trajectory,
    collision_point,
    in_goal,
    sample_full,
    sample_pff,
)

DI = build_double_integrator_2d()


def env_with(*obstacles, goal=([17, 17], [19, 19])):
    return Environment([[0, 20], [0, 20]], [[-2, 2], [-2, 2]], obstacles=obstacles, goal=goal)


# -- construction --------------------------------------------------------------

def test_environment_validation():
    with pytest.raises(InvalidInputError):
        Environment([[0, 0], [0, 1]], [])
    with pytest.raises(InvalidInputError):
        Environment([[0, 1]], [], goal=([0.5], [2.0]))  # goal outside bounds
    with pytest.raises(InvalidInputError):
        Environment([[0, 1], [0, 1]], [], obstacles=[([0.2], [0.4])])
    with pytest.raises(InvalidInputError):
        Box([1, 1], [1, 2])  # zero volume


def test_environment_dimensions():
    env = env_with()
    assert env.dim == 2 and env.state_dim == 4


def test_obstacle_volume_fraction():
    env = env_with(Box([0, 0], [10, 20]))
    assert env.obstacle_volume_fraction() == pytest.approx(0.5, abs=0.005)


# -- sampling ------------------------------------------------------------------

def test_sample_pff_in_bounds(open_env, rng):
    Z = np.array([sample_pff(open_env, rng) for _ in range(10_000)])
    assert Z.shape == (10_000, 2)
    assert np.all((Z >= 0) & (Z <= 20))


def test_sample_pff_avoids_obstacle(rng):
    env = env_with(Box([0, 0], [10, 20]))
    Z = np.array([sample_pff(env, rng) for _ in range(10_000)])
    assert np.all(Z[:, 0] > 10)


def test_sampling_is_deterministic(open_env):
    for sampler in (sample_pff, sample_full):
        a = [sampler(open_env, np.random.default_rng(7)) for _ in range(3)]
        b = [sampler(open_env, np.random.default_rng(7)) for _ in range(3)]
        np.testing.assert_array_equal(a, b)


def test_sample_full_double_integrator(rng):
    env = builtin_scenario("double_integrator").environment
    X = np.array([sample_full(env, rng) for _ in range(2000)])
    assert X.shape == (2000, 4)
    assert np.all(np.abs(X[:, 2:]) <= 2)
    assert env.points_free(X).all()


def test_sample_full_quadrotor(rng):
    env = builtin_scenario("quadrotor").environment
    X = np.array([sample_full(env, rng) for _ in range(2000)])
    assert X.shape == (2000, 10)
    assert np.all(np.abs(X[:, 3:6]) <= 2)
    assert np.all(np.abs(X[:, 6:8]) <= 1)
    assert np.all(np.abs(X[:, 8:10]) <= 4)


def test_sampling_marginals(open_env):
    rng = np.random.default_rng(3)
    X = np.array([sample_full(open_env, rng) for _ in range(100_000)])
    lo = np.r_[open_env.position_bounds[:, 0], open_env.full_sample_bounds[:, 0]]
    hi = np.r_[open_env.position_bounds[:, 1], open_env.full_sample_bounds[:, 1]]
    stderr = (hi - lo) / np.sqrt(12) / np.sqrt(len(X))
    assert np.all(np.abs(X.mean(axis=0) - 0.5 * (lo + hi)) <= 3 * stderr)


def test_saturated_environment_raises(rng):
    env = env_with(Box([-1, -1], [21, 21]), goal=None)
    with pytest.raises(EnvironmentSaturatedError):
        sample_pff(env, rng)


# -- point checks ----------------------------------------------------------------

def test_collision_point_cases():
    env = env_with(Box([4, 4], [6, 6]))
    assert not collision_point(env, [5, 5])
    assert not collision_point(env, [4, 5])  # face belongs to the obstacle
    assert not collision_point(env, [6, 6])  # so does the corner
    assert collision_point(env, [3.999, 5])
    assert not collision_point(env, [-0.1, 5])  # out of bounds
    assert collision_point(env, [1, 1, 100.0, -50.0])  # full state: only position counts


@given(st.floats(-5, 25), st.floats(-5, 25))
def test_points_free_matches_scalar_check(x, y):
    env = env_with(Box([4, 4], [6, 6]), Box([10, 0], [12, 8]))
    expected = (0 <= x <= 20 and 0 <= y <= 20 and not (4 <= x <= 6 and 4 <= y <= 6)
                and not (10 <= x <= 12 and 0 <= y <= 8))
    assert collision_point(env, [x, y]) == expected


# -- trajectory checks ----------------------------------------------------------------

def test_drift_path_in_open_space(open_env):
    sol = solve_fixed_state_fixed_time(DI, [1, 1, 1, 1], [4, 4, 1, 1], 3.0)
    assert collision_free_trajectory(open_env, Trajectory(sol))


def test_edge_through_box_detected():
    # straight rest-to-rest move whose midpoint (10, 5) sits in a thin wall
    env = env_with(Box([9.9, 4], [10.1, 6]))
    sol = solve_fixed_state_fixed_time(DI, [5, 5, 0, 0], [15, 5, 0, 0], 4.0)
    np.testing.assert_allclose(Trajectory(sol).states(2)[1][:2], [10, 5], atol=1e-9)
    assert not collision_free_trajectory(env, Trajectory(sol))


def test_thin_wall_needs_fine_resolution():
    env = env_with(Box([9.99, 0], [10.01, 20]))
    sol = solve_fixed_state_fixed_time(DI, [5, 5, 0, 0], [15, 5, 0, 0], 4.0)
    assert not collision_free_trajectory(env, Trajectory(sol), delta=0.01)


def test_halving_delta_never_clears_an_edge(rng):
    env = builtin_scenario("double_integrator").environment
    flips = 0
    for _ in range(100):
        xa = np.r_[rng.uniform(0, 20, 2), rng.uniform(-2, 2, 2)]
        sol = solve_pff_free_time(DI, xa, rng.uniform(0, 20, 2))
        traj = Trajectory(sol)
        coarse = collision_free_trajectory(env, traj, delta=0.1)
        fine = collision_free_trajectory(env, traj, delta=0.05)
        flips += (not coarse) and fine
        if fine:
            assert collision_point(env, xa) and collision_point(env, sol.x_end)
    assert flips == 0


def test_delta_must_be_positive(open_env):
    sol = solve_fixed_state_fixed_time(DI, [1, 1, 0, 0], [2, 2, 0, 0], 1.0)
    with pytest.raises(InvalidInputError):
        collision_free_trajectory(open_env, Trajectory(sol), delta=0.0)


# -- goal ---------------------------------------------------------------------

def test_in_goal(open_env):
    assert in_goal(open_env, [18, 18, 0, 0])
    assert in_goal(open_env, [18, 18, 40.0, -7.0])  # velocity is unconstrained
    assert not in_goal(open_env, [16.999, 18, 0, 0])
    assert not in_goal(env_with(goal=None), [18, 18, 0, 0])
