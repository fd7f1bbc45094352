import cmath
import math

import numpy as np
import pytest

from wanewave.characteristic import char_functions, feasibility_intervals
from wanewave.errors import OutsideFeasibleInterval
from wanewave.model import ModelParams
from wanewave.switching import (
    SwitchPoint,
    _theta,
    angle_theta,
    assemble_profile,
    branch_arrays,
    find_switch_points,
    instability_mask,
    stability_region_2d,
    stability_region_d_nu,
    switch_function,
)


def test_nu48_profile(profiles):
    prof = profiles[4.8]
    taus = [sp.tau_star for sp in prof.switch_points]
    assert taus == pytest.approx([0.05, 2.86, 3.15, 4.59], abs=0.01)
    assert [sp.delta for sp in prof.switch_points] == [1, -1, 1, -1]
    assert prof.is_stable(0.01) and not prof.is_stable(1.0) and prof.is_stable(3.0) and not prof.is_stable(4.0)
    assert prof.is_stable(6.0)


def test_nu32_hopf_points(profiles):
    taus = [sp.tau_star for sp in profiles[3.2].switch_points]
    assert 2.11 == pytest.approx(taus[1], abs=0.01)
    assert 5.37 == pytest.approx(taus[-1], abs=0.01)


def test_nu1_and_nu0_counts(profiles):
    assert len(profiles[1.0].switch_points) == 10
    assert profiles[1.0].switch_points[-1].tau_star == pytest.approx(13.39, abs=0.02)
    last = profiles[0.0].switch_points[-1]
    assert len(profiles[0.0].switch_points) == 72
    assert (last.branch, last.n) == ("minus", 35)
    assert last.tau_star == pytest.approx(95.80, abs=0.01)


@pytest.mark.parametrize("nu", [4.8, 3.2, 2.0, 1.0, 0.0])
def test_profile_invariants(profiles, nu):
    prof = profiles[nu]
    assert prof.consistent
    assert len(prof.switch_points) % 2 == 0
    assert prof.switch_points[0].delta == 1 and prof.switch_points[-1].delta == -1
    assert prof.intervals[0][3] == 0 and prof.intervals[-1][3] == 0
    assert all(count >= 0 for *_, count in prof.intervals)
    assert not prof.tangential


@pytest.mark.parametrize("nu", [4.8, 3.2, 2.0, 1.0, 0.0])
def test_switch_points_solve_characteristic_equation(profiles, nu):
    for sp in profiles[nu].switch_points:
        p = ModelParams(nu=nu, tau=sp.tau_star)
        P, Q, W = char_functions(1j * sp.omega, p)
        assert abs(cmath.exp(-1j * sp.omega * sp.tau_star) + P / Q) < 1e-8
        assert abs(W) / max(1.0, sp.omega**3) < 1e-8
        theta = angle_theta(sp.omega, p)
        ratio = P / Q
        assert math.sin(theta) == pytest.approx(ratio.imag, abs=1e-9)
        assert math.cos(theta) == pytest.approx(-ratio.real, abs=1e-9)


def test_theta_quadrant_anchor():
    assert float(_theta(1.0, np.array(-1.0 + 0j), np.array(1.0 + 0j))) == 0.0
    assert float(_theta(1.0, np.array(0.0 - 1j), np.array(1.0 + 0j))) == pytest.approx(1.5 * math.pi)


def test_second_switch_is_zero_of_s0_minus(profiles):
    # the 2.86 crossing lies on the minus branch (S_0^+ is about 2 there)
    p = ModelParams(nu=4.8)
    sp = profiles[4.8].switch_points[1]
    assert (sp.branch, sp.n) == ("minus", 0)
    assert abs(switch_function(0, "minus", 2.86, p)) < 1e-2


@pytest.mark.parametrize("nu", [4.8, 3.2, 2.0, 1.0, 0.0])
def test_monotonicity(nu):
    p = ModelParams(nu=nu)
    ivs = {iv.branch: iv for iv in feasibility_intervals(p)}
    both = ivs["minus"]
    taus = np.linspace(both.lo, both.hi, 1002)[1:-1]
    wp, thp = branch_arrays(p, "plus", taus)
    wm, thm = branch_arrays(p, "minus", taus)
    for n in range(6):
        sp_n = taus - (thp + 2 * math.pi * n) / wp
        sm_n = taus - (thm + 2 * math.pi * n) / wm
        assert np.all(sp_n > sm_n)
        assert np.all(sp_n > taus - (thp + 2 * math.pi * (n + 1)) / wp)
        assert np.all(sm_n > taus - (thm + 2 * math.pi * (n + 1)) / wm)


def test_branches_collide_at_nu48_endpoint():
    p = ModelParams(nu=4.8)
    hi = {iv.branch: iv for iv in feasibility_intervals(p)}["minus"].hi
    tau = hi - 1e-9
    for n in (0, 1):
        assert switch_function(n, "plus", tau, p) == pytest.approx(switch_function(n, "minus", tau, p), abs=1e-3)
    assert switch_function(0, "plus", tau, p) > 0


def test_outside_feasible_interval():
    with pytest.raises(OutsideFeasibleInterval):
        switch_function(0, "minus", 0.5, ModelParams(nu=4.8))
    with pytest.raises(OutsideFeasibleInterval):
        switch_function(0, "plus", 10.0, ModelParams(nu=4.8))


def test_tau_limit_prefix(profiles):
    prof = find_switch_points(ModelParams(nu=1.0), tau_limit=6.0)
    full = [sp.tau_star for sp in profiles[1.0].switch_points if sp.tau_star < 6.0]
    assert [sp.tau_star for sp in prof.switch_points] == pytest.approx(full, abs=1e-9)


def test_assemble_and_merge():
    pts = [SwitchPoint(1.0, 2.0, "plus", 0, 1), SwitchPoint(2.0, 2.0, "plus", 1, 1), SwitchPoint(3.0, 1.0, "minus", 0, -1), SwitchPoint(4.0, 1.0, "minus", 1, -1)]
    prof = assemble_profile(pts)
    assert [iv[3] for iv in prof.intervals] == [0, 1, 2, 1, 0]
    assert prof.merged_unstable_intervals() == [(1.0, 4.0)]
    assert prof.pair_count(2.5) == 2


def test_region_and_tau_zero_column():
    nus = np.linspace(0.5, 5.0, 6)
    slices = stability_region_2d(nus, ModelParams(), tau_limit=15.0)
    assert all(sl.error is None for sl in slices)
    mask = instability_mask(slices, np.array([0.0, 1.0, 14.9]))
    assert not mask[:, 0].any()
    assert mask[:, 1].all()


def test_region_parallel_matches_serial():
    nus = [1.0, 4.8]
    a = stability_region_2d(nus, ModelParams(), jobs=1, tau_limit=8.0)
    b = stability_region_2d(nus, ModelParams(), jobs=2, tau_limit=8.0)
    assert [[sp.tau_star for sp in s.profile.switch_points] for s in a] == [[sp.tau_star for sp in s.profile.switch_points] for s in b]


def test_d_nu_verdicts():
    cells = stability_region_d_nu([0.005, 0.02], [2.0], tau_fixed=7.0)
    assert [c.unstable for c in cells] == [True, True]
    bad = stability_region_d_nu([20.0], [2.0], tau_fixed=7.0, p_base=ModelParams(beta=30.0, gamma=17.0))
    assert bad[0].unstable is None and "NoEndemicEquilibrium" in bad[0].error
