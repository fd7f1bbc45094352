"""Long-time integration of the nonlinear delay system and classification of attractors."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Literal, Optional, Sequence

import numpy as np

from . import _dopri
from .errors import DomainEscape, StepSizeUnderflow, WanewaveError, WindowTooShort
from .model import HistoryFunction, ModelParams, endemic_equilibrium

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
ESCAPE_TOL = 1e-6
# floor for I(0) so that log I is finite; I = 0 is invariant anyway
MIN_I = 1e-300


@dataclass
class Trajectory:
    """Accepted steps of one integration with their continuous extension.

    ``states`` has one row per entry of ``times``; columns are S, I and Y.
    The integrator works with log I internally (``_raw``).
    """

    params: ModelParams
    times: np.ndarray
    _raw: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    stages: np.ndarray = field(repr=False)
    history: HistoryFunction = field(repr=False)

    @property
    def states(self) -> np.ndarray:
        out = self._raw.copy()
        out[:, 1] = np.exp(out[:, 1])
        return out

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, t) -> np.ndarray:
        """Dense output at times ``t`` (t <= 0 falls back to the history)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 3))
        past = t < 0
        if np.any(past):
            s, i = self.history(t[past])
            out[past, 0], out[past, 1] = s, i
            out[past, 2] = np.nan
        if np.any(~past):
            ts = t[~past]
            order = np.argsort(ts, kind="stable")
            vals = _dopri.dense_many(self.times[:-1], self.steps, self._raw, self.stages, ts[order])
            vals[:, 1] = np.exp(vals[:, 1])
            res = np.empty_like(vals)
            res[order] = vals
            out[~past] = res
        return out

    def sample(self, t0: float, t1: float, dt: float):
        ts = np.arange(t0, t1 + 0.5 * dt, dt)
        ts = ts[ts <= t1]
        return ts, self(ts)

    def tail_history(self, tau: float, dt: float = 1e-3, label: str = "warm") -> HistoryFunction:
        """The last ``tau`` years as initial data for a new run (warm start)."""
        t1 = self.t_end
        n = max(int(math.ceil(tau / dt)), 1) + 1
        ts = np.linspace(t1 - tau, t1, n)
        vals = np.clip(self(ts), 0.0, None)
        s = np.minimum(vals[:, 0], 1.0)
        i = np.minimum(vals[:, 1], 1.0 - s)
        return HistoryFunction(ts - t1, s, i, label=label)


def integrate(
    p: ModelParams,
    history: HistoryFunction,
    t_end: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_steps: int = 50_000_000,
) -> Trajectory:
    """Integrate from t = 0 to ``t_end`` with the exposure integral carried as a third state."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if p.tau > 0 and history.tau + 1e-9 < p.tau:
        raise ValueError(f"history covers [{-history.tau}, 0] but tau = {p.tau}")
    s0, i0 = history(0.0)
    y0 = np.array([float(s0), math.log(max(float(i0), MIN_I)), float(history.y0) if p.tau > 0 else 0.0])
    T, H, Y, K, n, status = _dopri.integrate_core(
        p.beta, p.gamma, p.d, p.nu, p.tau,
        history.times, history.s, history.i,
        y0, float(t_end), float(rtol), float(atol), int(max_steps), 3, ESCAPE_TOL,
    )
    if status == _dopri.STEP_UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow near t={T[-1] + H[-1] if n else 0.0:.6g}")
    if status == _dopri.DOMAIN_ESCAPE:
        raise DomainEscape(f"state (S, log I, Y) = {Y[-1]} left the simplex at t={T[-1] + H[-1]:.6g}")
    if status == _dopri.MAX_STEPS:
        raise StepSizeUnderflow(f"step budget of {max_steps} exhausted")
    times = np.append(T, T[-1] + H[-1])
    return Trajectory(p, times, Y, H, K, history)


@dataclass(frozen=True)
class OrbitSummary:
    kind: Literal["equilibrium", "cycle", "torus", "undetermined"]
    i_max: float
    i_min: float
    period: Optional[float] = None
    peak_dispersion: float = 0.0
    n_peaks: int = 0
    label: str = ""

    @property
    def amplitude(self) -> float:
        return self.i_max - self.i_min


def find_peaks_dense(ts: np.ndarray, values: np.ndarray):
    """Strict local maxima of a finely sampled signal, refined by a parabola through 3 samples."""
    v = values
    idx = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    y0, y1, y2 = v[idx - 1], v[idx], v[idx + 1]
    denom = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(denom != 0, 0.5 * (y0 - y2) / denom, 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    dt = ts[1] - ts[0]
    return ts[idx] + shift * dt, y1 - 0.25 * (y0 - y2) * shift


def _repeat_lag(heights: np.ndarray, tol: float, max_lag: int) -> Optional[int]:
    """Smallest lag at which the peak-height sequence repeats within absolute ``tol``."""
    for lag in range(1, min(max_lag, heights.size // 3) + 1):
        if np.max(np.abs(heights[lag:] - heights[:-lag])) <= tol:
            return lag
    return None


def classify_orbit(
    traj: Trajectory,
    transient: float = 500.0,
    window: float = 100.0,
    amp_tol: float = 1e-7,
    cycle_tol: float = 1e-3,
    torus_tol: float = 1e-2,
    dt: float = 1e-3,
    max_lag: int = 8,
    label: str = "",
) -> OrbitSummary:
    """Classify the attractor seen on [transient, transient + window].

    - equilibrium: I varies by less than ``amp_tol``, the I-peaks decay
      steadily towards the equilibrium value, or I approaches it monotonically
      without peaks at a decreasing rate
    - cycle: the peak-height sequence repeats (possibly with several peaks per
      period) within ``cycle_tol`` times the oscillation amplitude; period =
      mean spacing of repeats
    - torus: bounded, non-repeating peaks whose spread exceeds ``torus_tol``
      times the amplitude without a monotone trend

    Tolerances are relative to the amplitude i_max - i_min rather than to the
    peak height, so slowly decaying small oscillations about the equilibrium
    are not mistaken for cycles.
    - undetermined: anything else (e.g. still growing or decaying oscillations)
    """
    if traj.t_end < transient + window - 1e-9:
        raise WindowTooShort(f"trajectory ends at {traj.t_end}, need {transient + window}")
    ts, vals = traj.sample(transient, transient + window, dt)
    i = vals[:, 1]
    i_max, i_min = float(i.max()), float(i.min())
    if i_max - i_min < amp_tol:
        return OrbitSummary("equilibrium", i_max, i_min, label=label)
    pt, ph = find_peaks_dense(ts, i)
    # ignore bumps that are far below the main outbreaks
    if ph.size:
        keep = ph - i_min >= 1e-3 * (i_max - i_min)
        pt, ph = pt[keep], ph[keep]
    n = ph.size
    if n < 4:
        # no oscillation left: a monotone, slowing approach is a stable node
        step = np.diff(i)
        monotone = np.all(step >= 0) or np.all(step <= 0)
        quarter = max(len(step) // 4, 1)
        slowing = np.mean(np.abs(step[-quarter:])) < np.mean(np.abs(step[:quarter]))
        kind = "equilibrium" if monotone and slowing else "undetermined"
        return OrbitSummary(kind, i_max, i_min, n_peaks=n, label=label)
    amplitude = i_max - i_min
    spread = (ph.max() - ph.min()) / amplitude
    lag = _repeat_lag(ph, cycle_tol * amplitude, max_lag)
    if lag is not None:
        period = float((pt[-1] - pt[(n - 1) % lag]) / ((n - 1) // lag)) if n > lag else math.nan
        return OrbitSummary("cycle", i_max, i_min, period, float(spread), n, label)
    # steady trend in the peak heights: still converging or diverging
    half = n // 2
    first, second = ph[:half], ph[half:]
    drift = abs(np.mean(second) - np.mean(first)) / max(np.std(ph), 1e-300)
    monotone = np.all(np.diff(ph) < 0) or np.all(np.diff(ph) > 0)
    if monotone:
        try:
            eq_i = endemic_equilibrium(traj.params).i
        except WanewaveError:
            eq_i = None
        excess = ph - eq_i if eq_i is not None else None
        if excess is not None and np.all(np.diff(ph) < 0) and excess[-1] < 0.5 * excess[0]:
            return OrbitSummary("equilibrium", i_max, i_min, None, float(spread), n, label)
        return OrbitSummary("undetermined", i_max, i_min, None, float(spread), n, label)
    if spread > torus_tol and drift < 1.0:
        return OrbitSummary("torus", i_max, i_min, None, float(spread), n, label)
    return OrbitSummary("undetermined", i_max, i_min, None, float(spread), n, label)


def same_attractor(a: OrbitSummary, b: OrbitSummary, rel: float = 0.02) -> bool:
    if a.kind != b.kind:
        return False
    close = lambda x, y: abs(x - y) <= rel * max(abs(x), abs(y), 1e-300)  # noqa: E731
    if a.kind == "equilibrium":
        return True
    if not close(a.i_max, b.i_max):
        return False
    if a.period is not None and b.period is not None:
        return close(a.period, b.period)
    return a.period is None and b.period is None


def default_history_grid(p: ModelParams, n: int = 3, seed: int = 0, perturb: Sequence[float] = (1e-3, 0.1)) -> List[HistoryFunction]:
    """Constant histories on a coarse lattice of the simplex plus perturbed-equilibrium histories.

    The lattice covers S in (0, 0.3] and log-spaced I; ``seed`` drives the
    phase of the oscillatory equilibrium perturbations.
    """
    rng = np.random.default_rng(seed)
    tau = p.tau
    out: List[HistoryFunction] = []
    eq = endemic_equilibrium(p)
    for s0 in np.linspace(eq.s, 0.3, n):
        for i0 in np.geomspace(1e-5, 1e-2, n):
            if s0 + i0 <= 1:
                out.append(HistoryFunction.constant(float(s0), float(i0), tau, label=f"const S={s0:.4g} I={i0:.3g}"))
    for eps in perturb:
        phase = rng.uniform(0, 2 * math.pi)
        period = rng.uniform(1.0, 3.0)

        def fn(t, eps=eps, phase=phase, period=period):
            wave = np.sin(2 * math.pi * t / period + phase)
            return eq.s * (1 + 0.2 * eps * wave), eq.i * (1 + eps * wave)

        out.append(HistoryFunction.from_callable(fn, tau, samples=max(2001, int(tau * 500)), label=f"eq-perturb {eps:g}"))
    return out


@dataclass
class ScanResult:
    attractors: List[OrbitSummary]
    runs: List[OrbitSummary]
    errors: List[str]


def _scan_one(args):
    p, h, transient, window, rtol, atol = args
    try:
        traj = integrate(p, h, transient + window, rtol, atol)
        return classify_orbit(traj, transient, window, label=h.label), None
    except WanewaveError as exc:
        return None, f"{h.label}: {type(exc).__name__}: {exc}"


def bistability_scan(
    p: ModelParams,
    histories: Iterable[HistoryFunction],
    transient: float = 500.0,
    window: float = 100.0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    rel: float = 0.02,
    jobs: int = 1,
) -> ScanResult:
    """Integrate each history, classify, and keep the distinct attractors.

    With ``jobs > 1`` the runs are spread over worker processes; results keep
    the order of ``histories`` either way.
    """
    histories = list(histories)
    if len(histories) < 2:
        raise ValueError("need at least two histories")
    tasks = [(p, h, transient, window, rtol, atol) for h in histories]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_one, tasks))
    else:
        results = [_scan_one(t) for t in tasks]
    runs = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    distinct: List[OrbitSummary] = []
    for r in runs:
        if r.kind == "undetermined":
            continue
        if not any(same_attractor(r, q, rel) for q in distinct):
            distinct.append(r)
    return ScanResult(distinct, runs, errors)
