import math

import numpy as np
import pytest
from scipy.integrate import RK45, quad

from oracles import pseudospectral_trajectory
from wanewave import _dopri
from wanewave.dynamics import (
    OrbitSummary,
    bistability_scan,
    classify_orbit,
    default_history_grid,
    find_peaks_dense,
    integrate,
    same_attractor,
)
from wanewave.errors import WindowTooShort
from wanewave.model import HistoryFunction, ModelParams, endemic_equilibrium


def test_tableau_matches_scipy():
    assert np.array_equal(_dopri.C[:6], RK45.C) and _dopri.C[6] == 1.0
    assert np.array_equal(_dopri.A[:6, :5], RK45.A)
    assert np.array_equal(_dopri.A[6, :6], RK45.B)
    assert np.array_equal(_dopri.B[:6], RK45.B)
    assert np.array_equal(_dopri.E, RK45.E)
    assert np.array_equal(_dopri.P, RK45.P)


def test_equilibrium_history_is_stationary(profiles):
    assert profiles[4.8].is_stable(3.0)
    p = ModelParams(nu=4.8, tau=3.0)
    eq = endemic_equilibrium(p)
    tr = integrate(p, HistoryFunction.constant(eq.s, eq.i, p.tau), 100.0)
    states = tr.states
    assert np.max(np.abs(states[:, 0] - eq.s)) < 1e-6
    assert np.max(np.abs(states[:, 1] - eq.i)) < 1e-6
    assert np.max(np.abs(states[:, 2] - p.tau * eq.i)) < 1e-6


def test_small_delay_converges_to_equilibrium(profiles):
    assert profiles[0.0].is_stable(0.3)
    p = ModelParams(nu=0.0, tau=0.3)
    tr = integrate(p, HistoryFunction.constant(0.1, 0.01, p.tau), 400.0)
    o = classify_orbit(tr, 300, 100)
    assert o.kind == "equilibrium"
    # slow real eigenvalue: still 0.2% away after 400 years, and closing
    assert o.i_max == pytest.approx(endemic_equilibrium(p).i, rel=5e-3)


def test_order_of_accuracy():
    # DOPRI5 with a mixed error test: global error ~ tol, steps ~ tol^(-1/5)
    p = ModelParams(nu=3.2, tau=4.0)
    eq = endemic_equilibrium(p)
    h = HistoryFunction.constant(eq.s * 1.05, eq.i * 1.2, p.tau)
    ref = integrate(p, h, 10.0, rtol=1e-12, atol=1e-15).states[-1]
    tols = [1e-5 / 2**k for k in range(5)]
    errs, steps = [], []
    for tol in tols:
        tr = integrate(p, h, 10.0, rtol=tol, atol=tol * 1e-3)
        errs.append(np.max(np.abs(tr.states[-1] - ref)))
        steps.append(len(tr.times) - 1)
    err_ratio = (errs[0] / errs[-1]) ** (1 / 4)
    step_ratio = (steps[-1] / steps[0]) ** (1 / 4)
    assert 1.5 < err_ratio < 2.7
    assert 2 ** (1 / 5) * 0.9 < step_ratio < 2 ** (1 / 5) * 1.15


def test_y_consistency_and_positivity():
    p = ModelParams(nu=3.2, tau=4.0)
    tr = integrate(p, HistoryFunction.constant(0.07, 0.003, p.tau), 100.0)
    rng = np.random.default_rng(3)
    for t in rng.uniform(p.tau, 100.0, 100):
        q = quad(lambda u: tr(u)[0, 1], t - p.tau, t, limit=400, epsabs=1e-13)[0]
        assert abs(q - tr(t)[0, 2]) < 1e-6
    assert tr.states.min() > -1e-9
    assert np.all(tr.states[:, 0] + tr.states[:, 1] <= 1 + 1e-9)


def test_positivity_through_deep_troughs():
    p = ModelParams(nu=2.0, tau=1.6)
    tr = integrate(p, HistoryFunction.constant(0.3, 0.01, p.tau), 200.0)
    assert tr.states.min() > -1e-9
    assert tr.states[:, 1].min() < 1e-8


def test_cross_oracle_pseudospectral_ode():
    p = ModelParams(nu=3.2, tau=4.0)
    eq = endemic_equilibrium(p)
    s0, i0 = eq.s * 1.05, eq.i * 1.2
    ts = np.linspace(0, 50, 2001)
    _, i_ref = pseudospectral_trajectory(p.beta, p.gamma, p.d, p.nu, p.tau, s0, i0, 50.0, ts, m=30)
    tr = integrate(p, HistoryFunction.constant(s0, i0, p.tau), 50.0)
    assert np.max(np.abs(tr(ts)[:, 1] - i_ref)) < 1e-4


def test_history_is_used_before_zero():
    p = ModelParams(nu=1.0, tau=2.0)
    h = HistoryFunction.from_callable(lambda t: (0.1 + 0 * t, 0.001 * (2 + np.sin(t))), 2.0)
    tr = integrate(p, h, 5.0)
    vals = tr(np.array([-1.0, 0.0]))
    assert vals[0, 1] == pytest.approx(0.001 * (2 + math.sin(-1.0)), rel=1e-6)
    assert vals[1, 2] == pytest.approx(h.y0, rel=1e-12)
    with pytest.raises(ValueError):
        integrate(ModelParams(nu=1.0, tau=3.0), h, 5.0)


def test_tail_history_warm_start():
    p = ModelParams(nu=4.8, tau=4.0)
    tr = integrate(p, HistoryFunction.constant(0.07, 0.002, p.tau), 50.0)
    h = tr.tail_history(p.tau)
    assert h.tau == pytest.approx(p.tau)
    s, i = h(0.0)
    assert s == pytest.approx(tr.states[-1, 0], abs=1e-12) and i == pytest.approx(tr.states[-1, 1], rel=1e-9)


def test_find_peaks_dense_refines():
    ts = np.arange(0, 10, 0.01)
    pt, ph = find_peaks_dense(ts, np.sin(2 * math.pi * ts / 2.5 + 0.1234))
    assert np.allclose(np.diff(pt), 2.5, atol=1e-5)
    assert np.allclose(ph, 1.0, atol=1e-5)


def test_cycle_nu48():
    p = ModelParams(nu=4.8, tau=4.0)
    tr = integrate(p, HistoryFunction.constant(0.07, 0.002, p.tau), 600.0)
    o = classify_orbit(tr)
    assert o.kind == "cycle" and 2.2 <= o.period <= 2.8
    assert o.peak_dispersion < 1e-3


def test_window_too_short():
    p = ModelParams(nu=4.8, tau=4.0)
    tr = integrate(p, HistoryFunction.constant(0.07, 0.002, p.tau), 50.0)
    with pytest.raises(WindowTooShort):
        classify_orbit(tr, 40, 20)


def test_same_attractor():
    a = OrbitSummary("cycle", 0.01, 0.001, 2.67)
    assert same_attractor(a, OrbitSummary("cycle", 0.0101, 0.001, 2.68))
    assert not same_attractor(a, OrbitSummary("cycle", 0.01, 0.001, 3.89))
    assert not same_attractor(a, OrbitSummary("torus", 0.01, 0.001))
    assert same_attractor(OrbitSummary("equilibrium", 0.001, 0.001), OrbitSummary("equilibrium", 0.001, 0.001))


def test_history_grid_and_scan_errors():
    p = ModelParams(nu=4.8, tau=4.0)
    hist = default_history_grid(p, n=2, seed=1)
    assert len(hist) == 6
    with pytest.raises(ValueError):
        bistability_scan(p, hist[:1])
    res = bistability_scan(p, hist[:2], transient=100, window=30)
    assert len(res.runs) == 2 and not res.errors


def test_parallel_scan_is_deterministic():
    p = ModelParams(nu=4.8, tau=4.0)
    hist = default_history_grid(p, n=2, seed=0)[:3]
    a = bistability_scan(p, hist, transient=100, window=30, jobs=1)
    b = bistability_scan(p, hist, transient=100, window=30, jobs=2)
    assert a.runs == b.runs
