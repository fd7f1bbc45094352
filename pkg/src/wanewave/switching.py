"""Stability switches of the endemic equilibrium as the immunity duration tau grows.

For a feasible frequency branch omega(tau) the crossing angle theta(tau) in
[0, 2 pi) is fixed by

    sin(theta) = Im(P/Q)(i omega),   cos(theta) = -Re(P/Q)(i omega),

and a pair of roots sits on the imaginary axis exactly where

    S_n(tau) = tau - (theta(tau) + 2 pi n) / omega(tau)

vanishes. The crossing direction is sign(dF/domega) * sign(dS_n/dtau).
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .characteristic import (
    Branch,
    FeasibilityInterval,
    _pq,
    coefficient_arrays,
    f_omega_derivative,
    feasibility_intervals,
    omega_arrays,
)
from .errors import DegenerateQ, NoEndemicEquilibrium, OutsideFeasibleInterval, TangentialZero, WanewaveError
from .model import ModelParams

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SwitchPoint:
    tau_star: float
    omega: float
    branch: Branch
    n: int
    delta: int
    slope: float = 0.0


@dataclass
class StabilityProfile:
    """Switch points in increasing tau and the resulting piecewise stability verdict.

    ``intervals`` holds (tau_lo, tau_hi, verdict, pair_count) with the last
    interval open to infinity. ``tangential`` keeps zeros whose slope was too
    small to classify.
    """

    switch_points: List[SwitchPoint]
    intervals: List[Tuple[float, float, str, int]]
    tangential: List[SwitchPoint] = field(default_factory=list)
    nu: Optional[float] = None

    def pair_count(self, tau: float) -> int:
        for lo, hi, _, count in self.intervals:
            if lo <= tau < hi:
                return count
        return self.intervals[-1][3]

    def is_stable(self, tau: float) -> bool:
        return self.pair_count(tau) == 0

    @property
    def unstable_intervals(self) -> List[Tuple[float, float]]:
        return [(lo, hi) for lo, hi, verdict, _ in self.intervals if verdict == "unstable"]

    def merged_unstable_intervals(self) -> List[Tuple[float, float]]:
        """Unstable intervals with touching neighbours joined."""
        out: List[Tuple[float, float]] = []
        for lo, hi in self.unstable_intervals:
            if out and abs(out[-1][1] - lo) <= 1e-12:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((lo, hi))
        return out

    @property
    def consistent(self) -> bool:
        counts = [iv[3] for iv in self.intervals]
        return min(counts) >= 0 and counts[-1] == 0 and len(self.switch_points) % 2 == 0


def assemble_profile(points: Iterable[SwitchPoint], nu: Optional[float] = None, tangential=()) -> StabilityProfile:
    points = sorted(points, key=lambda sp: sp.tau_star)
    intervals = []
    lo, count = 0.0, 0
    for sp in points:
        intervals.append((lo, sp.tau_star, "unstable" if count > 0 else "stable", count))
        count += sp.delta
        lo = sp.tau_star
    intervals.append((lo, math.inf, "unstable" if count > 0 else "stable", count))
    if min(iv[3] for iv in intervals) < 0:
        log.warning("negative unstable-pair count in profile for nu=%s", nu)
    return StabilityProfile(points, intervals, list(tangential), nu)


def _theta(omega, P, Q):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = P / Q
    return np.mod(np.arctan2(ratio.imag, -ratio.real), TWO_PI)


def angle_theta(omega: float, p: ModelParams) -> float:
    """Crossing angle theta in [0, 2 pi) for frequency ``omega`` at delay ``p.tau``."""
    c = coefficient_arrays(p, p.tau)
    P, Q = _pq(1j * omega, p, float(c["i"]), float(c["mu"]), float(c["sigma"]))
    if abs(Q) < 1e-300:
        raise DegenerateQ(f"|Q(i omega)| vanishes at omega={omega}, tau={p.tau}")
    return float(_theta(omega, P, Q))


def branch_arrays(p: ModelParams, branch: Branch, taus) -> Tuple[np.ndarray, np.ndarray]:
    """omega and theta of one branch on a delay grid (NaN where infeasible)."""
    taus = np.asarray(taus, dtype=float)
    c = coefficient_arrays(p, taus)
    wp, wm = omega_arrays(c["a0"], c["a1"])
    w = wp if branch == "plus" else wm
    P, Q = _pq(1j * w, p, c["i"], c["mu"], c["sigma"])
    return w, _theta(w, P, Q)


def switch_function(n: int, branch: Branch, tau: float, p: ModelParams) -> float:
    """S_n on ``branch`` at delay ``tau`` (``p.tau`` is ignored)."""
    w, th = branch_arrays(p, branch, np.array([tau]))
    if not np.isfinite(w[0]) or w[0] <= 0:
        raise OutsideFeasibleInterval(f"{branch} branch infeasible at tau={tau}")
    return float(tau - (th[0] + TWO_PI * n) / w[0])


def _scan_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(int(math.ceil((hi - lo) / step)), 2)
    span = hi - lo
    edge = np.geomspace(1e-7 * max(span, 1.0), min(step, span / 2), 30)
    return np.unique(np.clip(np.concatenate([np.linspace(lo, hi, n + 1), lo + edge, hi - edge]), lo, hi))


def _zeros_on_interval(
    p: ModelParams,
    iv: FeasibilityInterval,
    tau_limit: Optional[float],
    step: float,
    xtol: float,
    guard: float,
    fd_step: float,
) -> Tuple[List[SwitchPoint], List[SwitchPoint]]:
    branch = iv.branch
    lo = iv.lo if iv.lo_reason == "start" else iv.lo + guard
    hi = iv.hi - guard
    if tau_limit is not None:
        hi = min(hi, tau_limit)
    if hi <= lo:
        return [], []
    grid = _scan_grid(lo, hi, step)
    w, th = branch_arrays(p, branch, grid)
    ok = np.isfinite(w) & (w > 0)
    found, flat = [], []
    n = 0
    while True:
        s = np.where(ok, grid - (th + TWO_PI * n) / w, np.nan)
        if not np.any(s[ok] >= 0):
            break
        sign = np.sign(s)
        cross = np.flatnonzero((sign[:-1] * sign[1:] < 0) & ok[:-1] & ok[1:])
        for k in cross:
            # a jump of theta across 0 / 2 pi is a discontinuity, not a zero
            if abs(th[k + 1] - th[k]) > math.pi:
                continue
            f = lambda t: switch_function(n, branch, t, p)  # noqa: E731
            try:
                tau_star = brentq(f, grid[k], grid[k + 1], xtol=xtol, rtol=1e-15)
            except (ValueError, OutsideFeasibleInterval):
                continue
            if abs(f(tau_star)) > 1e-6:
                continue
            h = min(fd_step, tau_star - lo, hi - tau_star) or fd_step
            slope = (f(min(tau_star + h, hi)) - f(max(tau_star - h, lo))) / (min(tau_star + h, hi) - max(tau_star - h, lo))
            omega = float(branch_arrays(p, branch, np.array([tau_star]))[0][0])
            c = coefficient_arrays(p, np.array([tau_star]))
            f_sign = np.sign(f_omega_derivative(omega, float(c["a0"][0]), float(c["a1"][0])))
            sp = SwitchPoint(float(tau_star), omega, branch, n, int(f_sign * np.sign(slope)), float(slope))
            if abs(slope) < 1e-10 or sp.delta == 0:
                flat.append(sp)
            else:
                found.append(sp)
        n += 1
    return found, flat


def find_switch_points(
    p: ModelParams,
    intervals: Optional[Sequence[FeasibilityInterval]] = None,
    tau_limit: Optional[float] = None,
    step: float = 1e-3,
    xtol: float = 1e-12,
    guard: float = 1e-6,
    fd_step: float = 1e-5,
    tau_max_search: float = 200.0,
) -> StabilityProfile:
    """Locate every zero of every S_n on both branches and build the stability profile.

    ``p.tau`` is ignored. With ``tau_limit`` only zeros below that delay are
    sought, which is enough to decide stability up to ``tau_limit``.
    """
    if intervals is None:
        if tau_limit is not None:
            intervals = feasibility_intervals(p, tau_max_search=tau_limit + 0.5, truncate=True)
        else:
            intervals = feasibility_intervals(p, tau_max_search=tau_max_search)
    points, flat = [], []
    for iv in intervals:
        f, t = _zeros_on_interval(p, iv, tau_limit, step, xtol, guard, fd_step)
        points += f
        flat += t
    for sp in flat:
        warnings.warn(TangentialZero(f"tangential zero of S_{sp.n} ({sp.branch}) at tau={sp.tau_star:.6f} not classified"), stacklevel=2)
    return assemble_profile(points, nu=p.nu, tangential=flat)


@dataclass
class RegionSlice:
    nu: float
    profile: Optional[StabilityProfile]
    error: Optional[str] = None


def _slice(args) -> RegionSlice:
    p, tau_limit = args
    try:
        return RegionSlice(p.nu, find_switch_points(p, tau_limit=tau_limit))
    except WanewaveError as exc:
        return RegionSlice(p.nu, None, f"{type(exc).__name__}: {exc}")


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def stability_region_2d(nu_grid, p_base: ModelParams, jobs: int = 1, tau_limit: Optional[float] = None) -> List[RegionSlice]:
    """Independent per-nu switch computations; their union outlines the instability region."""
    tasks = [(p_base.with_(nu=float(nu)), tau_limit) for nu in nu_grid]
    return _map(_slice, tasks, jobs)


def instability_mask(slices: Sequence[RegionSlice], tau_grid) -> np.ndarray:
    """Boolean array [nu, tau]: True where the equilibrium is unstable."""
    mask = np.zeros((len(slices), len(tau_grid)), dtype=bool)
    for a, sl in enumerate(slices):
        if sl.profile is None:
            continue
        for b, tau in enumerate(tau_grid):
            mask[a, b] = not sl.profile.is_stable(float(tau))
    return mask


@dataclass
class DNuVerdict:
    d: float
    nu: float
    unstable: Optional[bool]
    pair_count: Optional[int]
    error: Optional[str] = None


def _dnu_cell(args) -> DNuVerdict:
    p, tau_fixed = args
    try:
        prof = find_switch_points(p, tau_limit=tau_fixed)
    except NoEndemicEquilibrium as exc:
        return DNuVerdict(p.d, p.nu, None, None, f"NoEndemicEquilibrium: {exc}")
    except WanewaveError as exc:
        return DNuVerdict(p.d, p.nu, None, None, f"{type(exc).__name__}: {exc}")
    count = prof.pair_count(tau_fixed)
    return DNuVerdict(p.d, p.nu, count > 0, count)


def stability_region_d_nu(d_grid, nu_grid, tau_fixed: float = 7.0, p_base: Optional[ModelParams] = None, jobs: int = 1) -> List[DNuVerdict]:
    """Stability verdict at fixed tau over a (d, nu) grid, beta held fixed so R0 moves with d."""
    p_base = p_base or ModelParams()
    tasks = [(p_base.with_(d=float(d), nu=float(nu), tau=tau_fixed), tau_fixed) for d in d_grid for nu in nu_grid]
    return _map(_dnu_cell, tasks, jobs)
