"""Linear time-invariant systems and the matrix-exponential kernels.

Every integral the steering controllers need (drift response, weighted
controllability Gramian) is obtained from a single exponential of a block
upper-triangular matrix, so nilpotent and non-nilpotent ``A`` are handled
the same way.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from ._backend import core as _core
from .errors import IllConditionedWarning, InvalidInputError

__all__ = [
    "LinearSystem",
    "TerminalPenalty",
    "QuadrotorParams",
    "matrix_exponential",
    "drift_state",
    "weighted_gramian",
    "build_double_integrator_2d",
    "build_quadrotor_10d",
]

# smallest admissible sigma_min / sigma_max of the probe Gramian
CONTROLLABILITY_TOL = 1e-10
# condition number above which a Gramian is reported as ill-conditioned
GRAMIAN_COND_WARN = 1e13


def _matrix(value, name, shape=None):
    arr = np.array(value, dtype=float)
    if arr.ndim == 1 and shape is not None and len(shape) == 2 and shape[1] == 1:
        arr = arr.reshape(-1, 1)
    if shape is not None and arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Dynamics ``xdot = A x + B u + c`` with running cost ``1 + u^T R u``.

    The state is split as ``x = (x1, x2)`` with ``x1`` the leading ``n1``
    components (the sampled block) and ``x2`` the trailing free block.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    R: np.ndarray
    n1: int
    _cores: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        A = _matrix(A, "A", (n, n))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[0] != n:
            raise InvalidInputError(f"B must have {n} rows, got shape {B.shape}")
        m = B.shape[1]
        B = _matrix(B, "B", (n, m))
        c = _matrix(self.c, "c", (n,))
        R = _matrix(self.R, "R", (m, m))
        n1 = int(self.n1)
        if not 1 <= n1 <= n:
            raise InvalidInputError(f"n1 must lie in [1, {n}], got {n1}")
        if not np.allclose(R, R.T, rtol=0, atol=1e-12 * max(1.0, np.abs(R).max())):
            raise InvalidInputError("R must be symmetric")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise InvalidInputError("R must be positive definite") from None
        for name, value in (("A", A), ("B", B), ("c", c), ("R", R), ("n1", n1)):
            object.__setattr__(self, name, value)
        G = _gramian(A, B @ np.linalg.solve(R, B.T), 1.0)
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] < CONTROLLABILITY_TOL * sv[0]:
            raise InvalidInputError(
                f"(A, B) is not controllable: probe Gramian singular value ratio "
                f"{sv[-1] / sv[0]:.3e}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def n2(self):
        return self.n - self.n1

    def core(self, penalty=None):
        """Steering kernel object for this system (and optional penalty), cached."""
        S = None if penalty is None else penalty.S
        key = None if S is None else S.tobytes()
        kern = self._cores.get(key)
        if kern is None:
            kern = _core.SteeringCore(self.A, self.B, self.c, self.R, self.n1, S)
            self._cores[key] = kern
        return kern

    def with_partition(self, n1):
        """Same dynamics with a different sampled/free split."""
        return LinearSystem(self.A, self.B, self.c, self.R, n1)


@dataclass(frozen=True, eq=False)
class TerminalPenalty:
    """Quadratic penalty ``0.5 x2^T S x2`` on the free final block."""

    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise InvalidInputError(f"S must be square, got shape {S.shape}")
        S = _matrix(S, "S", S.shape)
        if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max(initial=0.0))):
            raise InvalidInputError("S must be symmetric")
        if S.size and np.linalg.eigvalsh(S).min() < -1e-12 * max(1.0, np.abs(S).max()):
            raise InvalidInputError("S must be positive semidefinite")
        object.__setattr__(self, "S", S)


@dataclass(frozen=True)
class QuadrotorParams:
    """Physical parameters of the hover-linearised quadrotor (SI units)."""

    g: float = 9.8
    mass: float = 0.5
    arm: float = 0.17
    inertia: float = 0.0023

    def __post_init__(self):
        for name in ("g", "mass", "arm", "inertia"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be strictly positive, got {value}")


def matrix_exponential(M, t=1.0):
    """Return ``exp(M t)`` (scaling and squaring with a Pade core)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"M must be square, got shape {M.shape}")
    if not (np.all(np.isfinite(M)) and np.isfinite(t)):
        raise InvalidInputError("matrix_exponential needs finite inputs")
    return _core.expm(M * t)


def drift_state(sys, x0, t):
    """Zero-control response ``exp(A t) x0 + int_0^t exp(A (t - s)) c ds``."""
    if not t >= 0:
        raise InvalidInputError(f"t must be non-negative, got {t}")
    n = sys.n
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = sys.A
    aug[:n, n] = sys.c
    E = _core.expm(aug * t)
    return E[:n, :n] @ np.asarray(x0, dtype=float) + E[:n, n]


def _gramian(A, Q, tf):
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = Q
    aug[n:, n:] = -A.T
    E = _core.expm(aug * tf)
    G = E[:n, n:] @ E[:n, :n].T
    return 0.5 * (G + G.T)


def weighted_gramian(sys, tf):
    """Weighted controllability Gramian ``int_0^tf e^{As} B R^-1 B^T e^{A^T s} ds``.

    Emits :class:`IllConditionedWarning` when the result is close to singular.
    """
    if not tf > 0:
        raise InvalidInputError(f"tf must be positive, got {tf}")
    G = _gramian(sys.A, sys.B @ np.linalg.solve(sys.R, sys.B.T), tf)
    cond = np.linalg.cond(G)
    if not cond < GRAMIAN_COND_WARN:
        warnings.warn(f"weighted Gramian at tf={tf:g} has condition number {cond:.3e}",
                      IllConditionedWarning, stacklevel=2)
    return G


def build_double_integrator_2d():
    """Planar double integrator: state (px, py, vx, vy), acceleration input."""
    Z = np.zeros((2, 2))
    I2 = np.eye(2)
    A = np.block([[Z, I2], [Z, Z]])
    B = np.vstack([Z, I2])
    return LinearSystem(A, B, np.zeros(4), np.eye(2), n1=2)


def build_quadrotor_10d(params=None):
    """Quadrotor linearised about hover.

    State (p[3], v[3], r[2], w[2]); input (thrust, roll torque, pitch torque).
    Returns the system with position sampled (``n1 = 3``) and the default
    terminal penalty on roll and pitch.
    """
    p = QuadrotorParams() if params is None else params
    A = np.zeros((10, 10))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 6:8] = [[0.0, p.g], [-p.g, 0.0], [0.0, 0.0]]
    A[6:8, 8:10] = np.eye(2)
    B = np.zeros((10, 3))
    B[5, 0] = 1.0 / p.mass
    B[8:10, 1:3] = p.arm / p.inertia * np.eye(2)
    system = LinearSystem(A, B, np.zeros(10), np.diag([15.0, 30.0, 30.0]), n1=3)
    penalty = TerminalPenalty(np.diag([0.0, 0.0, 0.0, 20.0, 20.0, 0.0, 0.0]))
    return system, penalty
