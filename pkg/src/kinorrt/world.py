"""Planning environment: bounds, box obstacles, goal region, sampling."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import EnvironmentSaturatedError, InvalidInputError

__all__ = [
    "Box",
    "Environment",
    "sample_pff",
    "sample_full",
    "collision_point",
    "collision_free_trajectory",
    "in_goal",
]

MAX_SAMPLE_ATTEMPTS = 10_000
DEFAULT_DELTA = 0.05
_MAX_STEPS = 1 << 18
_INITIAL_STEPS = 16


def _bounds(value, name):
    arr = np.array(value, dtype=float).reshape(-1, 2) if np.size(value) else np.zeros((0, 2))
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.any(arr[:, 0] >= arr[:, 1]):
        raise InvalidInputError(f"{name}: every axis needs lo < hi")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    """Closed axis-aligned box ``lo <= p <= hi``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise InvalidInputError("box corners must have the same dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidInputError("box corners must be finite")
        if np.any(lo >= hi):
            raise InvalidInputError("box must have positive volume")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, p):
        p = np.asarray(p, dtype=float)[: self.lo.size]
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def __eq__(self, other):
        return (isinstance(other, Box) and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))


@dataclass(frozen=True, eq=False)
class Environment:
    """Position bounds, obstacles and goal in the sampled (position) block.

    ``full_sample_bounds`` covers the remaining state components and is only
    used when sampling full states.
    """

    position_bounds: np.ndarray
    full_sample_bounds: np.ndarray
    obstacles: tuple = ()
    goal: Box = None
    _lo: np.ndarray = field(init=False, repr=False)
    _hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pb = _bounds(self.position_bounds, "position_bounds")
        fb = _bounds(self.full_sample_bounds, "full_sample_bounds")
        k = pb.shape[0]
        if k == 0:
            raise InvalidInputError("position_bounds must have at least one axis")
        obstacles = tuple(o if isinstance(o, Box) else Box(*o) for o in self.obstacles)
        for i, box in enumerate(obstacles):
            if box.lo.size != k:
                raise InvalidInputError(f"obstacle {i} has dimension {box.lo.size}, expected {k}")
        goal = self.goal
        if goal is not None:
            goal = goal if isinstance(goal, Box) else Box(*goal)
            if goal.lo.size != k:
                raise InvalidInputError(f"goal has dimension {goal.lo.size}, expected {k}")
            if np.any(goal.lo < pb[:, 0]) or np.any(goal.hi > pb[:, 1]):
                raise InvalidInputError("goal box must lie inside position_bounds")
        object.__setattr__(self, "position_bounds", pb)
        object.__setattr__(self, "full_sample_bounds", fb)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "goal", goal)
        lo = np.array([b.lo for b in obstacles]).reshape(-1, k)
        hi = np.array([b.hi for b in obstacles]).reshape(-1, k)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def dim(self):
        return self.position_bounds.shape[0]

    @property
    def state_dim(self):
        return self.dim + self.full_sample_bounds.shape[0]

    def points_free(self, P):
        """Vectorised collision test over rows of ``P`` (position block first)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))[:, : self.dim]
        pb = self.position_bounds
        ok = np.all((P >= pb[:, 0]) & (P <= pb[:, 1]), axis=1)
        if self._lo.shape[0]:
            inside = np.all((P[:, None, :] >= self._lo) & (P[:, None, :] <= self._hi), axis=2)
            ok &= ~inside.any(axis=1)
        return ok

    def obstacle_volume_fraction(self):
        """Fraction of the bounds covered by obstacles (overlaps counted once, by sampling)."""
        rng = np.random.default_rng(0)
        pb = self.position_bounds
        P = rng.uniform(pb[:, 0], pb[:, 1], size=(200_000, self.dim))
        return 1.0 - float(self.points_free(P).mean())

    def __eq__(self, other):
        return (isinstance(other, Environment)
                and np.array_equal(self.position_bounds, other.position_bounds)
                and np.array_equal(self.full_sample_bounds, other.full_sample_bounds)
                and self.obstacles == other.obstacles and self.goal == other.goal)


def collision_point(env, position):
    """True iff the position block lies in bounds and outside every (closed) obstacle."""
    return bool(env.points_free(position)[0])


def sample_pff(env, rng):
    """Uniform collision-free draw from the position block."""
    pb = env.position_bounds
    for _ in range(MAX_SAMPLE_ATTEMPTS):
        z = rng.uniform(pb[:, 0], pb[:, 1])
        if collision_point(env, z):
            return z
    raise EnvironmentSaturatedError(
        f"no collision-free sample in {MAX_SAMPLE_ATTEMPTS} attempts")


def sample_full(env, rng):
    """Uniform draw over the whole state box with collision-free position."""
    z = sample_pff(env, rng)
    fb = env.full_sample_bounds
    if fb.shape[0] == 0:
        return z
    return np.concatenate([z, rng.uniform(fb[:, 0], fb[:, 1])])


def collision_free_trajectory(env, traj, delta=DEFAULT_DELTA):
    """Dense-sampling collision check of an edge.

    Samples at ``2^k`` uniform times, ``k`` grown until consecutive positions
    are at most ``delta`` apart. Sample sets for different ``delta`` are
    nested, so refining never turns a detected collision into a pass.
    """
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    nsteps = _INITIAL_STEPS
    k = env.dim
    while True:
        X = traj.states(nsteps)
        P = X[:, :k]
        if not env.points_free(P).all():
            return False
        spacing = float(np.sqrt((np.diff(P, axis=0) ** 2).sum(axis=1)).max())
        if spacing <= delta:
            return True
        grow = max(2, 1 << int(math.ceil(math.log2(spacing / delta))))
        nsteps *= grow
        if nsteps > _MAX_STEPS:
            return False


def in_goal(env, state):
    """Position-only goal membership (the free block is unconstrained)."""
    if env.goal is None:
        return False
    return env.goal.contains(state)
