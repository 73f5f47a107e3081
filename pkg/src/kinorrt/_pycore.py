"""Pure-Python (numpy) implementation of the numeric steering core.

Mirrors the compiled ``_core`` extension function for function. It is used
when the extension is not built, or when ``KINORRT_PURE_PYTHON=1``.
"""

import math

import numpy as np
from scipy.linalg import lu_factor, lu_solve

VARIANT_PFF = 0
VARIANT_PENALTY = 1
VARIANT_FIXED = 2

STATUS_OK = 0
STATUS_BOUNDARY = 1
STATUS_DEGENERATE = 2

# smallest admissible |pivot| of the equilibrated LU factor
PIVOT_TOL = 1e-13

_EPS = np.finfo(float).eps
_GRID_CACHE_SIZE = 8

_THETA = (1.495585217958292e-2, 2.539398330063230e-1,
          9.504178996162932e-1, 2.097847961257068e0)
_THETA13 = 5.371920351148152e0
_PADE = {
    3: (120., 60., 12., 1.),
    5: (30240., 15120., 3360., 420., 30., 1.),
    7: (17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.),
    9: (17643225600., 8821612800., 2075673600., 302702400., 30270240.,
        2162160., 110880., 3960., 90., 1.),
}
_PADE13 = (64764752532480000., 32382376266240000., 7771770303897600.,
           1187353796428800., 129060195264000., 10559470521600.,
           670442572800., 33522128640., 1323241920., 40840800., 960960.,
           16380., 182., 1.)


def expm(M):
    """Matrix exponential by scaling and squaring with a diagonal Pade core.

    Degree selection follows Higham (2005): the lowest Pade degree whose
    backward-error bound covers the 1-norm of ``M`` is used, otherwise degree
    13 after scaling by a power of two.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    ident = np.eye(n)
    norm1 = np.abs(M).sum(axis=0).max() if n else 0.0
    if norm1 == 0.0:
        return ident
    M2 = M @ M
    for degree, theta in zip((3, 5, 7, 9), _THETA):
        if norm1 <= theta:
            b = _PADE[degree]
            power = ident
            U = b[1] * ident
            V = b[0] * ident
            for k in range(1, degree // 2 + 1):
                power = power @ M2
                U = U + b[2 * k + 1] * power
                V = V + b[2 * k] * power
            U = M @ U
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA13))))
    A = M / 2.0 ** s
    b = _PADE13
    A2 = M2 / 4.0 ** s
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def _factor(K):
    """Equilibrated LU factorisation; ``None`` when numerically singular."""
    colscale = np.abs(K).max(axis=0)
    if np.any(colscale == 0.0) or not np.all(np.isfinite(colscale)):
        return None
    colscale = 1.0 / colscale
    Kc = K * colscale
    rowscale = 1.0 / np.abs(Kc).max(axis=1)
    Ks = Kc * rowscale[:, None]
    lu, piv = lu_factor(Ks, check_finite=False)
    if np.abs(np.diag(lu)).min() < PIVOT_TOL:
        return None
    return lu, piv, rowscale, colscale


def _solve(fac, rhs):
    lu, piv, rowscale, colscale = fac
    return colscale * lu_solve((lu, piv), rowscale * rhs, check_finite=False)


def _brent(f, a, b, fa, fb, rtol, maxiter=100):
    """Bracketed root of ``f`` on [a, b] (Brent's zeroin); returns (x, f(x))."""
    c, fc = a, fa
    d = e = b - a
    for _ in range(maxiter):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * _EPS * abs(b) + 0.5 * rtol * abs(b)
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            return b, fb
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        if abs(d) > tol:
            b = b + d
        else:
            b = b + (tol if m > 0 else -tol)
        fb = f(b)
        if fb != fb:
            return b, fb
    return b, fb


class SteeringCore:
    """Closed-form steering kernels for one linear system.

    Parameters
    ----------
    A, B, c, R : array_like
        Dynamics ``xdot = A x + B u + c`` and control weight ``R``.
    n1 : int
        Size of the leading (fixed) block of the final state.
    S : array_like, optional
        Terminal penalty on the trailing block, used by the penalty variant.
    """

    def __init__(self, A, B, c, R, n1, S=None):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.B = np.ascontiguousarray(B, dtype=float)
        self.c = np.ascontiguousarray(c, dtype=float)
        n = self.A.shape[0]
        self.n = n
        self.m = self.B.shape[1]
        self.n1 = int(n1)
        n2 = n - self.n1
        self.Rinv = np.linalg.inv(np.asarray(R, dtype=float))
        self.Q = self.B @ self.Rinv @ self.B.T
        self.S = (np.zeros((n2, n2)) if S is None
                  else np.ascontiguousarray(S, dtype=float))
        aug = np.zeros((2 * n + 1, 2 * n + 1))
        aug[:n, :n] = self.A
        aug[:n, n:2 * n] = self.Q
        aug[:n, 2 * n] = self.c
        aug[n:2 * n, n:2 * n] = -self.A.T
        self._aug = aug
        flow = np.zeros((2 * n + 1, 2 * n + 1))
        flow[:n, :n] = self.A
        flow[:n, n:2 * n] = -0.5 * self.Q
        flow[:n, 2 * n] = self.c
        flow[n:2 * n, n:2 * n] = -self.A.T
        self._flow = flow
        self._grids = {}

    # -- kernels -----------------------------------------------------------
    def kernel(self, t):
        """Return ``(Phi, G, d, Emt)`` at time ``t``.

        ``Phi = exp(A t)``, ``G`` the weighted Gramian, ``d`` the drift
        integral and ``Emt = exp(-A^T t)``, all from one exponential.
        """
        n = self.n
        E = expm(self._aug * t)
        Phi = E[:n, :n].copy()
        G = E[:n, n:2 * n] @ Phi.T
        G = 0.5 * (G + G.T)
        return Phi, G, E[:n, 2 * n].copy(), E[n:2 * n, n:2 * n].copy()

    def _system(self, variant, G):
        n1 = self.n1
        if variant == VARIANT_PFF:
            return _factor(G[:n1, :n1])
        if variant == VARIANT_FIXED:
            return _factor(G)
        n = self.n
        M = np.zeros((n, n))
        M[:, :n1] = 0.5 * G[:, :n1]
        M[:, n1:] = 0.5 * G[:, n1:] @ self.S
        M[n1:, n1:] += np.eye(n - n1)
        return _factor(M)

    def _finish(self, variant, t, Phi, G, d, fac, xa, target):
        n1 = self.n1
        xbar = Phi @ xa + d
        if variant == VARIANT_PFF:
            lam1 = _solve(fac, 2.0 * (xbar[:n1] - target))
            lam = np.zeros(self.n)
            lam[:n1] = lam1
            x_end = xbar - 0.5 * (G[:, :n1] @ lam1)
            x_end[:n1] = target
            cost = t + 0.25 * lam1 @ (G[:n1, :n1] @ lam1)
        elif variant == VARIANT_FIXED:
            lam = _solve(fac, 2.0 * (xbar - target))
            x_end = np.array(target, dtype=float)
            cost = t + 0.25 * lam @ (G @ lam)
        else:
            rhs = xbar.copy()
            rhs[:n1] -= target
            sol = _solve(fac, rhs)
            x2 = sol[n1:]
            lam = np.empty(self.n)
            lam[:n1] = sol[:n1]
            lam[n1:] = self.S @ x2
            x_end = np.empty(self.n)
            x_end[:n1] = target
            x_end[n1:] = x2
            cost = t + 0.25 * lam @ (G @ lam) + 0.5 * x2 @ (self.S @ x2)
        H = 1.0 + lam @ (self.A @ x_end + self.c) - 0.25 * lam @ (self.Q @ lam)
        return float(cost), float(H), lam, x_end

    def solve_fixed_time(self, variant, xa, target, t):
        """Steer with a given arrival time.

        Returns ``(status, cost, H, lam_tf, x_end)``; on a degenerate horizon
        the status is ``STATUS_DEGENERATE`` and the other entries are NaN.
        """
        xa = np.asarray(xa, dtype=float)
        target = np.asarray(target, dtype=float)
        Phi, G, d, _ = self.kernel(t)
        fac = self._system(variant, G)
        if fac is None:
            nan = np.full(self.n, np.nan)
            return STATUS_DEGENERATE, math.nan, math.nan, nan, nan.copy()
        cost, H, lam, x_end = self._finish(variant, t, Phi, G, d, fac, xa, target)
        return STATUS_OK, cost, H, lam, x_end

    def _grid(self, variant, tmin, tmax, ngrid):
        key = (variant, tmin, tmax, ngrid)
        grid = self._grids.get(key)
        if grid is None:
            ts = np.exp(np.linspace(math.log(tmin), math.log(tmax), ngrid))
            entries = []
            for t in ts:
                Phi, G, d, _ = self.kernel(t)
                entries.append((float(t), Phi, G, d, self._system(variant, G)))
            if len(self._grids) >= _GRID_CACHE_SIZE:
                self._grids.pop(next(iter(self._grids)))
            self._grids[key] = grid = entries
        return grid

    def solve_free_time(self, variant, xa, target, tmin, tmax, ngrid=64,
                        rtol=1e-9):
        """Steer with the arrival time chosen by the transversality condition.

        Returns ``(status, tf, cost, H, lam_tf, x_end)``.
        """
        xa = np.asarray(xa, dtype=float)
        target = np.asarray(target, dtype=float)
        grid = self._grid(variant, tmin, tmax, ngrid)
        evals = []
        for t, Phi, G, d, fac in grid:
            if fac is None:
                evals.append(None)
            else:
                evals.append(self._finish(variant, t, Phi, G, d, fac, xa, target))
        best = None
        for k in range(ngrid):
            ek = evals[k]
            if ek is None:
                continue
            if ek[1] == 0.0:
                cand = (grid[k][0],) + ek
            elif k + 1 < ngrid and evals[k + 1] is not None and ek[1] < 0.0 < evals[k + 1][1]:
                cand = self._refine(variant, xa, target, grid[k][0], grid[k + 1][0],
                                    ek[1], evals[k + 1][1], rtol)
                if cand is None:
                    continue
            else:
                continue
            if best is None or cand[1] < best[1]:
                best = cand
        if best is not None:
            return (STATUS_OK,) + best
        valid = [k for k in range(ngrid) if evals[k] is not None]
        if not valid:
            nan = np.full(self.n, np.nan)
            return STATUS_DEGENERATE, math.nan, math.nan, math.nan, nan, nan.copy()
        k = min(valid, key=lambda i: evals[i][0])
        return (STATUS_BOUNDARY, grid[k][0]) + evals[k]

    def _refine(self, variant, xa, target, a, b, fa, fb, rtol):
        last = {}

        def h(t):
            Phi, G, d, _ = self.kernel(t)
            fac = self._system(variant, G)
            if fac is None:
                return math.nan
            last[t] = self._finish(variant, t, Phi, G, d, fac, xa, target)
            return last[t][1]

        t, ht = _brent(h, a, b, fa, fb, rtol)
        if ht != ht:
            return None
        if t not in last:
            h(t)
        return (t,) + last[t]

    # -- batches -------------------------------------------------------------
    def solve_free_time_batch(self, variant, XA, TARGETS, tmin, tmax, ngrid=64,
                              rtol=1e-9):
        XA = np.atleast_2d(np.asarray(XA, dtype=float))
        TARGETS = np.atleast_2d(np.asarray(TARGETS, dtype=float))
        k = max(XA.shape[0], TARGETS.shape[0])
        XA = np.broadcast_to(XA, (k, XA.shape[1]))
        TARGETS = np.broadcast_to(TARGETS, (k, TARGETS.shape[1]))
        status = np.empty(k, dtype=np.int64)
        tf = np.empty(k)
        cost = np.empty(k)
        H = np.empty(k)
        lam = np.empty((k, self.n))
        x_end = np.empty((k, self.n))
        for i in range(k):
            status[i], tf[i], cost[i], H[i], lam[i], x_end[i] = self.solve_free_time(
                variant, XA[i], TARGETS[i], tmin, tmax, ngrid, rtol)
        return status, tf, cost, H, lam, x_end

    def solve_fixed_time_batch(self, variant, XA, TARGETS, TF):
        XA = np.atleast_2d(np.asarray(XA, dtype=float))
        TARGETS = np.atleast_2d(np.asarray(TARGETS, dtype=float))
        TF = np.atleast_1d(np.asarray(TF, dtype=float))
        k = max(XA.shape[0], TARGETS.shape[0], TF.shape[0])
        XA = np.broadcast_to(XA, (k, XA.shape[1]))
        TARGETS = np.broadcast_to(TARGETS, (k, TARGETS.shape[1]))
        TF = np.broadcast_to(TF, (k,))
        status = np.empty(k, dtype=np.int64)
        cost = np.empty(k)
        H = np.empty(k)
        lam = np.empty((k, self.n))
        x_end = np.empty((k, self.n))
        for i in range(k):
            status[i], cost[i], H[i], lam[i], x_end[i] = self.solve_fixed_time(
                variant, XA[i], TARGETS[i], TF[i])
        return status, cost, H, lam, x_end

    # -- trajectories ----------------------------------------------------------
    def flow(self, x0, lam0, tf, nsteps):
        """States at ``nsteps + 1`` uniform times on [0, tf].

        Propagates the joint state/costate flow with one exponential of the
        step; ``lam0`` is the costate at t = 0.
        """
        n = self.n
        E = expm(self._flow * (tf / nsteps))
        w = np.empty(2 * n + 1)
        w[:n] = x0
        w[n:2 * n] = lam0
        w[2 * n] = 1.0
        out = np.empty((nsteps + 1, n))
        out[0] = x0
        for k in range(1, nsteps + 1):
            w = E @ w
            out[k] = w[:n]
        return out
