"""Optimal steering between states of a linear system.

Three boundary-value problems are solved in closed form from the terminal
costate ``lambda(tf)``:

* partial-final-state-free (PFF): only the leading ``n1`` final components
  are prescribed, the rest are chosen optimally;
* PFF with a quadratic penalty ``0.5 x2^T S x2`` on the free block;
* fixed final state.

Each can be solved at a given arrival time or with the arrival time picked
by the transversality condition ``H(tf) = 0``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from ._backend import core as _core
from .errors import DegenerateHorizonError, InvalidInputError, NoConnectionError

__all__ = [
    "SteeringSolution",
    "Trajectory",
    "solve_pff_fixed_time",
    "solve_pff_free_time",
    "solve_pff_penalty",
    "solve_fixed_state_fixed_time",
    "solve_fixed_state_free_time",
    "eval_trajectory",
    "hamiltonian_residual",
    "heuristic_arrival_time",
    "default_time_bounds",
    "steer_batch",
    "steer_batch_raw",
    "SteerBatch",
]

PFF = "pff"
PFF_PENALTY = "pff_penalty"
FIXED_STATE = "fixed_state"

_VARIANT_CODE = {
    PFF: _core.VARIANT_PFF,
    PFF_PENALTY: _core.VARIANT_PENALTY,
    FIXED_STATE: _core.VARIANT_FIXED,
}

GRID_POINTS = 64
ROOT_RTOL = 1e-9
MIN_ARRIVAL_TIME = 1e-3
DEFAULT_T_MIN = 0.05
V_REF = 1.0


@dataclass(frozen=True, eq=False)
class SteeringSolution:
    """One solved edge, fully determined by its terminal costate.

    ``cost`` is the optimal objective: ``tf + int u^T R u`` plus the terminal
    penalty for the ``pff_penalty`` variant. ``boundary`` marks a free-time
    solve that found no stationary arrival time and returned the cheapest grid
    point instead.
    """

    variant: str
    tf: float
    lambda_tf: np.ndarray
    x_start: np.ndarray
    x_end: np.ndarray
    cost: float
    system: object = field(repr=False)
    penalty: object = field(default=None, repr=False)
    free_time: bool = False
    boundary: bool = False
    H_tf: float = math.nan

    @cached_property
    def lambda_0(self):
        """Costate at t = 0, ``exp(A^T tf) lambda(tf)``."""
        Phi = self.system.core().kernel(self.tf)[0]
        return Phi.T @ self.lambda_tf

    @property
    def terminal_penalty(self):
        if self.variant != PFF_PENALTY:
            return 0.0
        x2 = self.x_end[self.system.n1:]
        return 0.5 * float(x2 @ self.penalty.S @ x2)

    @property
    def running_cost(self):
        """``int_0^tf (1 + u^T R u) dt`` without any terminal penalty."""
        return self.cost - self.terminal_penalty


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-parameterised edge; thin view over a :class:`SteeringSolution`."""

    solution: SteeringSolution
    sample_dt: float = 0.05

    def __call__(self, t):
        return eval_trajectory(self.solution, t)

    def states(self, nsteps=None):
        """States at uniform times on [0, tf] (``nsteps + 1`` rows)."""
        sol = self.solution
        if nsteps is None:
            nsteps = max(1, int(math.ceil(sol.tf / self.sample_dt)))
        return sol.system.core().flow(sol.x_start, sol.lambda_0, sol.tf, int(nsteps))


def _vec(x, size, name):
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise InvalidInputError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _target_size(sys, variant):
    return sys.n if variant == FIXED_STATE else sys.n1


def _make(sys, penalty, variant, tf, lam, x_a, x_end, cost, H, free_time, boundary):
    lam = np.array(lam, dtype=float)
    x_end = np.array(x_end, dtype=float)
    for arr in (lam, x_end, x_a):
        arr.setflags(write=False)
    return SteeringSolution(variant=variant, tf=float(tf), lambda_tf=lam,
                            x_start=x_a, x_end=x_end, cost=float(cost), system=sys,
                            penalty=penalty, free_time=free_time,
                            boundary=bool(boundary), H_tf=float(H))


def _fixed(sys, penalty, variant, x_a, target, tf):
    if not (np.isfinite(tf) and tf > 0):
        raise InvalidInputError(f"tf must be positive, got {tf}")
    x_a = _vec(x_a, sys.n, "x_a")
    target = _vec(target, _target_size(sys, variant), "target")
    status, cost, H, lam, x_end = sys.core(penalty).solve_fixed_time(
        _VARIANT_CODE[variant], x_a, target, float(tf))
    if status == _core.STATUS_DEGENERATE:
        raise DegenerateHorizonError(f"steering system singular at tf={tf:g}")
    return _make(sys, penalty, variant, tf, lam, x_a, x_end, cost, H, False, False)


def default_time_bounds(x_a, target, n1, v_ref=V_REF):
    """Search interval ``[0.05, 4 d / v_ref + 1]`` with ``d`` the position distance."""
    d = float(np.linalg.norm(np.asarray(target, float)[:n1] - np.asarray(x_a, float)[:n1]))
    return DEFAULT_T_MIN, 4.0 * d / v_ref + 1.0


def _check_bounds(t_bounds):
    tmin, tmax = (float(v) for v in t_bounds)
    if not (0 < tmin < tmax and np.isfinite(tmax)):
        raise InvalidInputError(f"t_bounds must satisfy 0 < t_min < t_max, got {t_bounds}")
    return tmin, tmax


def _free(sys, penalty, variant, x_a, target, t_bounds):
    x_a = _vec(x_a, sys.n, "x_a")
    target = _vec(target, _target_size(sys, variant), "target")
    if t_bounds is None:
        t_bounds = default_time_bounds(x_a, target, sys.n1)
    tmin, tmax = _check_bounds(t_bounds)
    status, tf, cost, H, lam, x_end = sys.core(penalty).solve_free_time(
        _VARIANT_CODE[variant], x_a, target, tmin, tmax, GRID_POINTS, ROOT_RTOL)
    if status == _core.STATUS_DEGENERATE:
        raise NoConnectionError("every candidate arrival time is degenerate")
    return _make(sys, penalty, variant, tf, lam, x_a, x_end, cost, H, True,
                 status == _core.STATUS_BOUNDARY)


def solve_pff_fixed_time(sys, x_a, x_c, tf):
    """PFF steering from ``x_a`` to leading block ``x_c`` arriving at ``tf``.

    The free final block is the optimiser's choice and is returned in
    ``x_end``; its costate is zero.
    """
    return _fixed(sys, None, PFF, x_a, x_c, tf)


def solve_pff_free_time(sys, x_a, x_c, t_bounds=None):
    """PFF steering with the cheapest stationary arrival time in ``t_bounds``.

    Sign changes of ``H(tf)`` are bracketed on a 64-point log grid and
    refined to ``|dt| <= 1e-9 tf``. Without a stationary point the cheapest
    grid time is returned with ``boundary=True``.
    """
    return _free(sys, None, PFF, x_a, x_c, t_bounds)


def solve_pff_penalty(sys, penalty, x_a, x_c, tf=None, t_bounds=None):
    """PFF steering with terminal penalty; fixed ``tf`` or free in ``t_bounds``."""
    n2 = sys.n2
    if penalty.S.shape != (n2, n2):
        raise InvalidInputError(f"S must have shape {(n2, n2)}, got {penalty.S.shape}")
    if tf is not None:
        return _fixed(sys, penalty, PFF_PENALTY, x_a, x_c, tf)
    return _free(sys, penalty, PFF_PENALTY, x_a, x_c, t_bounds)


def solve_fixed_state_fixed_time(sys, x_a, x_b, tf):
    """Minimum-cost connection of two full states in time ``tf``."""
    return _fixed(sys, None, FIXED_STATE, x_a, x_b, tf)


def solve_fixed_state_free_time(sys, x_a, x_b, t_bounds=None):
    """Minimum-cost connection of two full states, arrival time free."""
    return _free(sys, None, FIXED_STATE, x_a, x_b, t_bounds)


class SteerBatch:
    """Raw results of a batched solve; solutions are built on demand.

    ``cost`` is NaN for rows that could not be connected.
    """

    def __init__(self, sys, penalty, variant, XA, status, tf, cost, H, lam, x_end, free_time):
        self.system = sys
        self.penalty = penalty
        self.variant = variant
        self.XA = XA
        self.status = status
        self.tf = tf
        self.cost = cost
        self.H = H
        self.lam = lam
        self.x_end = x_end
        self.free_time = free_time

    def __len__(self):
        return self.status.shape[0]

    def solution(self, i):
        """Row ``i`` as a :class:`SteeringSolution`, or None if degenerate."""
        if self.status[i] == _core.STATUS_DEGENERATE:
            return None
        return _make(self.system, self.penalty, self.variant, self.tf[i], self.lam[i],
                     np.array(self.XA[i]), self.x_end[i], self.cost[i], self.H[i],
                     self.free_time, self.status[i] == _core.STATUS_BOUNDARY)


def steer_batch_raw(sys, penalty, variant, XA, TARGETS, t_bounds=None, tf=None):
    """Like :func:`steer_batch` but returns a lazy :class:`SteerBatch`."""
    code = _VARIANT_CODE[variant]
    pen = penalty if variant == PFF_PENALTY else None
    kern = sys.core(pen)
    XA = np.atleast_2d(np.asarray(XA, dtype=float))
    TARGETS = np.atleast_2d(np.asarray(TARGETS, dtype=float))
    if tf is None:
        tmin, tmax = _check_bounds(t_bounds)
        status, tfs, cost, H, lam, x_end = kern.solve_free_time_batch(
            code, XA, TARGETS, tmin, tmax, GRID_POINTS, ROOT_RTOL)
        free_time = True
    else:
        status, cost, H, lam, x_end = kern.solve_fixed_time_batch(code, XA, TARGETS, tf)
        tfs = np.broadcast_to(np.asarray(tf, dtype=float), status.shape)
        free_time = False
    XA = np.broadcast_to(XA, (status.shape[0], XA.shape[1]))
    return SteerBatch(sys, pen, variant, XA, status, tfs, cost, H, lam, x_end, free_time)


def steer_batch(sys, penalty, variant, XA, TARGETS, t_bounds=None, tf=None):
    """Solve many problems of one variant at once.

    Exactly one of ``t_bounds`` (free arrival time) or ``tf`` (scalar or one
    per row) must be given. Rows that cannot be connected come back as None.
    """
    batch = steer_batch_raw(sys, penalty, variant, XA, TARGETS, t_bounds=t_bounds, tf=tf)
    return [batch.solution(i) for i in range(len(batch))]


def _state_costate(sol, t):
    if not 0.0 <= t <= sol.tf:
        raise InvalidInputError(f"t={t} outside [0, {sol.tf}]")
    Phi, G, d, Emt = sol.system.core().kernel(float(t))
    lam = Emt @ sol.lambda_0
    x = Phi @ sol.x_start - 0.5 * (G @ lam) + d
    return x, lam


def eval_trajectory(sol, t):
    """State and open-loop control ``u = -R^-1 B^T lambda(t) / 2`` at time ``t``."""
    x, lam = _state_costate(sol, t)
    sys = sol.system
    u = -0.5 * np.linalg.solve(sys.R, sys.B.T @ lam)
    return x, u


def hamiltonian_residual(sys, sol, t):
    """``H = 1 + u^T R u + lambda^T (A x + B u + c)`` along the solution."""
    x, lam = _state_costate(sol, t)
    u = -0.5 * np.linalg.solve(sys.R, sys.B.T @ lam)
    return float(1.0 + u @ sys.R @ u + lam @ (sys.A @ x + sys.B @ u + sys.c))


def heuristic_arrival_time(x_a, x_b, v_des, n1=None):
    """Arrival time from a desired average speed, floored at 1 ms.

    Distances use the leading ``n1`` components (the position block);
    by default the length of the shorter vector.
    """
    if not v_des > 0:
        raise InvalidInputError(f"v_des must be positive, got {v_des}")
    a = np.asarray(x_a, dtype=float).reshape(-1)
    b = np.asarray(x_b, dtype=float).reshape(-1)
    k = min(a.size, b.size) if n1 is None else n1
    return max(float(np.linalg.norm(b[:k] - a[:k])) / v_des, MIN_ARRIVAL_TIME)
