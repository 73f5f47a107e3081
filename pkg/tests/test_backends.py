import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import linalg

from kinorrt import BACKEND, _pycore
from kinorrt.lti import TerminalPenalty, build_double_integrator_2d, build_quadrotor_10d

_core = pytest.importorskip("kinorrt._core", reason="compiled core not built")


def cores(system, penalty):
    S = None if penalty is None else penalty.S
    args = (system.A, system.B, system.c, system.R, system.n1, S)
    return _core.SteeringCore(*args), _pycore.SteeringCore(*args)


SYSTEMS = {
    "di": lambda: (build_double_integrator_2d(), None),
    "quad": build_quadrotor_10d,
}


def close(a, b, rtol=1e-10):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(1.0, np.nanmax(np.abs(b)) if b.size else 1.0)
    return np.allclose(a, b, rtol=0, atol=rtol * scale, equal_nan=True)


def test_compiled_backend_selected_by_default():
    assert BACKEND == "compiled"


def test_pure_python_switch():
    env = dict(os.environ, KINORRT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import kinorrt; print(kinorrt.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_constants_agree():
    for name in ("VARIANT_PFF", "VARIANT_PENALTY", "VARIANT_FIXED",
                 "STATUS_OK", "STATUS_BOUNDARY", "STATUS_DEGENERATE"):
        assert getattr(_core, name) == getattr(_pycore, name)


@pytest.mark.parametrize("scale", [1e-6, 0.3, 2.0, 30.0, 400.0])
def test_expm_against_scipy(scale, rng):
    for n in (3, 9, 21):
        M = rng.normal(size=(n, n)) * scale / np.sqrt(n)
        ref = linalg.expm(M)
        for mod in (_core, _pycore):
            assert close(mod.expm(M), ref, 1e-11)


@pytest.mark.parametrize("which", SYSTEMS)
def test_kernel_parity(which):
    c, p = cores(*SYSTEMS[which]())
    for t in (0.01, 0.7, 5.0, 40.0):
        for a, b in zip(c.kernel(t), p.kernel(t)):
            assert close(a, b, 1e-12)


@pytest.mark.parametrize("which", SYSTEMS)
def test_fixed_time_parity(which, rng):
    system, pen = SYSTEMS[which]()
    c, p = cores(system, pen)
    variants = [(_pycore.VARIANT_PFF, system.n1), (_pycore.VARIANT_FIXED, system.n)]
    if pen is not None:
        variants.append((_pycore.VARIANT_PENALTY, system.n1))
    for variant, k in variants:
        for _ in range(20):
            xa = rng.normal(size=system.n)
            target = rng.normal(size=k) * 3
            t = rng.uniform(0.1, 6)
            rc = c.solve_fixed_time(variant, xa, target, t)
            rp = p.solve_fixed_time(variant, xa, target, t)
            assert rc[0] == rp[0]
            for a, b in zip(rc[1:], rp[1:]):
                assert close(a, b, 1e-8)


@pytest.mark.parametrize("which", SYSTEMS)
def test_free_time_parity(which, rng):
    system, pen = SYSTEMS[which]()
    c, p = cores(system, pen)
    variant = _pycore.VARIANT_PFF if pen is None else _pycore.VARIANT_PENALTY
    XA = rng.normal(size=(15, system.n))
    XC = rng.normal(size=(15, system.n1)) * 3
    rc = c.solve_free_time_batch(variant, XA, XC, 0.05, 25.0, 64, 1e-9)
    rp = p.solve_free_time_batch(variant, XA, XC, 0.05, 25.0, 64, 1e-9)
    np.testing.assert_array_equal(rc[0], rp[0])
    for a, b in zip(rc[1:], rp[1:]):
        assert close(a, b, 1e-7)


def test_fixed_time_batch_broadcasts(rng):
    c, p = cores(*SYSTEMS["di"]())
    xa = rng.normal(size=4)
    XB = rng.normal(size=(6, 4))
    for mod in (c, p):
        out = mod.solve_fixed_time_batch(_pycore.VARIANT_FIXED, xa, XB, 2.0)
        assert out[1].shape == (6,) and out[4].shape == (6, 4)
        np.testing.assert_allclose(out[4], XB, atol=1e-9)


def test_degenerate_rows_flagged(rng):
    for mod in cores(*SYSTEMS["di"]()):
        st, cost, H, lam, x = mod.solve_fixed_time(_pycore.VARIANT_PFF, np.zeros(4), [1.0, 1.0], 1e-200)
        assert st == _pycore.STATUS_DEGENERATE and np.isnan(cost) and np.isnan(x).all()
        out = mod.solve_free_time(_pycore.VARIANT_PFF, np.zeros(4), [1.0, 1.0], 1e-200, 1e-199)
        assert out[0] == _pycore.STATUS_DEGENERATE


@pytest.mark.parametrize("which", SYSTEMS)
def test_flow_parity(which, rng):
    system, pen = SYSTEMS[which]()
    c, p = cores(system, pen)
    x0 = rng.normal(size=system.n)
    lam0 = rng.normal(size=system.n)
    assert close(c.flow(x0, lam0, 2.0, 64), p.flow(x0, lam0, 2.0, 64), 1e-10)


def test_penalty_zero_core_matches_pff(rng):
    system = build_double_integrator_2d()
    c, _ = cores(system, TerminalPenalty(np.zeros((2, 2))))
    xa, xc = rng.normal(size=4), rng.normal(size=2)
    a = c.solve_fixed_time(_pycore.VARIANT_PFF, xa, xc, 1.5)
    b = c.solve_fixed_time(_pycore.VARIANT_PENALTY, xa, xc, 1.5)
    for u, v in zip(a[1:], b[1:]):
        assert close(u, v, 1e-10)


def test_cores_accept_read_only_inputs(rng):
    system, pen = SYSTEMS["quad"]()
    c, _ = cores(system, pen)
    xa = rng.normal(size=10)
    xa.setflags(write=False)
    XC = np.broadcast_to(rng.normal(size=3), (4, 3))
    assert c.solve_free_time_batch(_pycore.VARIANT_PENALTY, xa, XC, 0.05, 25.0, 64, 1e-9)[0].shape == (4,)
