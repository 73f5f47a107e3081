"""Independent numerical checks of the steering kernels.

Each check compares a library result against something computed another
way (closed-form algebra, adaptive quadrature, brute-force search) and
records the residual next to its tolerance. ``validate`` in the CLI prints
these reports.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .lti import LinearSystem, TerminalPenalty, build_double_integrator_2d, build_quadrotor_10d, weighted_gramian
from .steering import (
    hamiltonian_residual,
    solve_fixed_state_fixed_time,
    solve_fixed_state_free_time,
    solve_pff_fixed_time,
    solve_pff_free_time,
    solve_pff_penalty,
)

__all__ = [
    "OracleCheck",
    "double_integrator_1d",
    "quadrature_gramian",
    "gramian_error",
    "brute_force_pff",
    "velocity_grid",
    "transversality_residuals",
    "validate_system",
    "format_report",
]


@dataclass(frozen=True)
class OracleCheck:
    name: str
    residual: float
    tol: float

    @property
    def passed(self):
        return bool(self.residual <= self.tol)


def double_integrator_1d(R=1.0):
    """Scalar double integrator, position sampled, velocity free."""
    return LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [0.0, 0.0], [[R]], n1=1)


def quadrature_gramian(sys, tf):
    """Weighted Gramian by adaptive quadrature of ``e^{As} Q e^{A^T s}``."""
    Q = sys.B @ np.linalg.solve(sys.R, sys.B.T)

    def integrand(s):
        E = linalg.expm(sys.A * s)
        return E @ Q @ E.T

    G, _ = integrate.quad_vec(integrand, 0.0, tf, epsabs=0.0, epsrel=1e-13, limit=200)
    return 0.5 * (G + G.T)


def gramian_error(sys, tf):
    """Relative Frobenius distance between library and quadrature Gramians."""
    Gq = quadrature_gramian(sys, tf)
    return float(np.linalg.norm(weighted_gramian(sys, tf) - Gq) / np.linalg.norm(Gq))


def brute_force_pff(sys, x_a, x_c, tf, free_grid):
    """Cheapest fixed-state solve over candidate free blocks (rows of ``free_grid``).

    Returns ``(best cost, best free block)``.
    """
    best, arg = np.inf, None
    for x2 in free_grid:
        sol = solve_fixed_state_fixed_time(sys, x_a, np.concatenate([x_c, x2]), tf)
        if sol.cost < best:
            best, arg = sol.cost, np.array(x2)
    return best, arg


def transversality_residuals(sys, x_a, target, variant="pff", penalty=None, samples=50):
    """``(|H(tf)|, max |H(t) - H(tf)|, boundary)`` for one free-time solve."""
    if variant == "pff":
        sol = solve_pff_free_time(sys, x_a, target)
    elif variant == "pff_penalty":
        sol = solve_pff_penalty(sys, penalty, x_a, target)
    else:
        sol = solve_fixed_state_free_time(sys, x_a, target)
    h_end = hamiltonian_residual(sys, sol, sol.tf)
    drift = max(abs(hamiltonian_residual(sys, sol, t) - h_end)
                for t in np.linspace(0.0, sol.tf, samples))
    return abs(h_end), drift, sol.boundary


def _analytic_checks():
    sys1 = double_integrator_1d()
    sol = solve_pff_free_time(sys1, [0.0, 0.0], [3.0])
    # J(T) = T + 3 p^2 / T^3 is minimised at T = (9 p^2)^(1/4) = 3 for p = 3
    lam1 = sol.lambda_tf[0]
    G = weighted_gramian(sys1, sol.tf)
    closed_cost = sol.tf + 0.25 * lam1 * G[0, 0] * lam1
    return [
        OracleCheck("1-D double integrator: tf = 3", abs(sol.tf - 3.0), 1e-6),
        OracleCheck("1-D double integrator: cost = 4", abs(sol.cost - 4.0), 1e-6),
        OracleCheck("1-D double integrator: free velocity = 1.5", abs(sol.x_end[1] - 1.5), 1e-6),
        OracleCheck("1-D double integrator: lambda1 = -2/3", abs(lam1 + 2.0 / 3.0), 1e-6),
        OracleCheck("1-D double integrator: cost = tf + lam1 G11 lam1 / 4",
                    abs(sol.cost - closed_cost), 1e-6),
        OracleCheck("1-D double integrator: G(3) = [[9, 4.5], [4.5, 3]]",
                    float(np.abs(weighted_gramian(sys1, 3.0) - [[9, 4.5], [4.5, 3]]).max()), 1e-9),
    ]


def _penalty_limit_checks():
    sys1 = double_integrator_1d()
    x0, target = [0.0, 0.0], [3.0]
    checks = []
    for label, kwargs in (("fixed tf=3", {"tf": 3.0}), ("free tf", {})):
        if kwargs:
            base = solve_pff_fixed_time(sys1, x0, target, 3.0)
        else:
            base = solve_pff_free_time(sys1, x0, target)
        zero = solve_pff_penalty(sys1, TerminalPenalty([[0.0]]), x0, target, **kwargs)
        checks.append(OracleCheck(f"penalty S=0 reproduces PFF, {label}",
                                  max(abs(zero.cost - base.cost),
                                      float(np.abs(zero.x_end - base.x_end).max())), 1e-10))
    # a stiff penalty pins the final velocity to zero; rest-to-rest over p = 3 in
    # T = 3 costs T + 12 p^2 / T^3 = 7
    stiff = solve_pff_penalty(sys1, TerminalPenalty([[1e8]]), x0, target, tf=3.0)
    checks.append(OracleCheck("penalty S=1e8: free velocity -> 0", abs(stiff.x_end[1]), 1e-3))
    checks.append(OracleCheck("penalty S=1e8: cost -> 7", abs(stiff.cost - 7.0), 1e-3))
    return checks


def velocity_grid(x_a, x_c, tf, points=41):
    """Square grid of final velocities around the drift velocity.

    The half-width scales with the average speed needed to cover the
    position offset, which keeps the minimiser well inside the grid.
    """
    v0 = np.asarray(x_a[2:], dtype=float)
    offset = np.asarray(x_c, dtype=float) - (np.asarray(x_a[:2]) + v0 * tf)
    half = 2.0 * float(np.abs(offset).max()) / tf + 0.5
    axis = np.linspace(-half, half, points)
    grid = np.array([(a, b) for a in axis for b in axis]) + v0
    return grid, axis[1] - axis[0]


def _random_instances(sys, rng, count, scale=3.0):
    for _ in range(count):
        yield rng.normal(0.0, scale, sys.n) * 0.5, rng.normal(0.0, scale, sys.n1)


def validate_system(name, seed=0, brute_force=10, transversality=100):
    """Run the oracle suite for a built-in system; returns a list of checks."""
    rng = np.random.default_rng(seed)
    checks = []
    if name == "double_integrator":
        sys = build_double_integrator_2d()
        checks += _analytic_checks()
        for tf in (0.1, 1.0, 3.0, 10.0):
            checks.append(OracleCheck(f"Gramian vs quadrature, tf={tf:g}", gramian_error(sys, tf), 1e-8))
        worst_gap, worst_dist = -np.inf, 0.0
        for x_a, x_c in _random_instances(sys, rng, brute_force):
            tf = rng.uniform(1.0, 4.0)
            sol = solve_pff_fixed_time(sys, x_a, x_c, tf)
            grid, step = velocity_grid(x_a, x_c, tf)
            best, arg = brute_force_pff(sys, x_a, x_c, tf, grid)
            worst_gap = max(worst_gap, sol.cost - best)
            worst_dist = max(worst_dist, float(np.abs(sol.x_end[2:] - arg).max()) / step)
        checks.append(OracleCheck("PFF cost <= brute-force grid minimum", max(worst_gap, 0.0), 1e-6))
        checks.append(OracleCheck("PFF free block within one grid cell of argmin", worst_dist, 1.0))
        checks += _penalty_limit_checks()
        variants = (("pff", None), ("fixed_state", None))
    elif name == "quadrotor":
        sys, penalty = build_quadrotor_10d()
        for tf in (0.1, 1.0, 3.0):
            checks.append(OracleCheck(f"Gramian vs quadrature, tf={tf:g}", gramian_error(sys, tf), 1e-8))
        worst = 0.0
        zero = TerminalPenalty(np.zeros((sys.n2, sys.n2)))
        for x_a, x_c in _random_instances(sys, rng, 10):
            a = solve_pff_free_time(sys, x_a, x_c)
            b = solve_pff_penalty(sys, zero, x_a, x_c)
            worst = max(worst, abs(a.cost - b.cost) / max(1.0, abs(a.cost)),
                        float(np.abs(a.x_end - b.x_end).max()) / max(1.0, float(np.abs(a.x_end).max())))
        checks.append(OracleCheck("penalty S=0 reproduces PFF", worst, 1e-10))
        variants = (("pff_penalty", penalty), ("pff", None), ("fixed_state", None))
    else:
        raise ValueError(f"unknown system {name!r}")
    for variant, pen in variants:
        h_worst, drift_worst = 0.0, 0.0
        for x_a, x_c in _random_instances(sys, rng, transversality):
            target = x_c if variant != "fixed_state" else np.concatenate(
                [x_c, rng.normal(0.0, 1.0, sys.n2)])
            h, drift, boundary = transversality_residuals(sys, x_a, target, variant, pen)
            drift_worst = max(drift_worst, drift)
            if not boundary:
                h_worst = max(h_worst, h)
        checks.append(OracleCheck(f"{variant}: |H(tf)| at stationary arrival times", h_worst, 1e-6))
        checks.append(OracleCheck(f"{variant}: H constant along trajectory", drift_worst, 1e-6))
    return checks


def format_report(name, checks):
    lines = [f"oracle report: {name}"]
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.name}: residual={c.residual:.3e} tol={c.tol:.1e}")
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines)
