"""Brute-force bifurcation diagrams in tau built from warm-started simulations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, OrbitSummary, classify_orbit, integrate
from .errors import WanewaveError
from .model import HistoryFunction, ModelParams, endemic_equilibrium

log = logging.getLogger(__name__)

Direction = Literal["up", "down"]


@dataclass(frozen=True)
class DiagramRow:
    tau: float
    sweep: Direction
    summary: OrbitSummary


def _seed_history(p: ModelParams, eps: float = 1e-3) -> HistoryFunction:
    """Small oscillatory perturbation of the endemic equilibrium."""
    eq = endemic_equilibrium(p)

    def fn(t):
        wave = np.sin(2 * math.pi * t / 2.5)
        return eq.s * (1 + 0.2 * eps * wave), eq.i * (1 + eps * wave)

    return HistoryFunction.from_callable(fn, p.tau, samples=max(2001, int(p.tau * 200)), label="seed")


def sweep_diagram(
    p_base: ModelParams,
    tau_lo: float,
    tau_hi: float,
    steps: int,
    direction: Direction = "up",
    transient: float = 300.0,
    window: float = 60.0,
    history: Optional[HistoryFunction] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    extensions: int = 3,
) -> List[DiagramRow]:
    """Classify the attractor at ``steps`` equally spaced delays, each run starting
    from the final ``tau`` years of the previous one.

    The first run starts from ``history`` or, by default, from a small
    perturbation of the endemic equilibrium. A failed row is reported as
    undetermined and the next row reuses the last good history. Near a Hopf
    point oscillations grow or decay very slowly, so a row that is still
    undetermined is continued for up to ``extensions`` further budgets of
    ``transient + window`` years before the verdict is accepted.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', not {direction!r}")
    taus = np.linspace(tau_lo, tau_hi, steps)
    if direction == "down":
        taus = taus[::-1]
    rows: List[DiagramRow] = []
    last_traj = None
    for tau in taus:
        p = p_base.with_(tau=float(tau))
        try:
            if last_traj is not None:
                h = last_traj.tail_history(p.tau, label="warm")
            elif history is not None and history.tau + 1e-9 >= p.tau:
                h = history
            else:
                h = _seed_history(p)
            traj = integrate(p, h, transient + window, rtol, atol)
            summary = classify_orbit(traj, transient, window, label=f"tau={tau:.6g}")
            for _ in range(extensions):
                if summary.kind != "undetermined":
                    break
                traj = integrate(p, traj.tail_history(p.tau, label="extended"), transient + window, rtol, atol)
                summary = classify_orbit(traj, transient, window, label=f"tau={tau:.6g}")
            last_traj = traj
        except WanewaveError as exc:
            log.warning("sweep row tau=%s failed: %s", tau, exc)
            summary = OrbitSummary("undetermined", math.nan, math.nan, label=f"{type(exc).__name__}: {exc}")
        rows.append(DiagramRow(float(tau), direction, summary))
    return rows


def period_profile(rows: Sequence[DiagramRow]) -> List[Tuple[float, float]]:
    """(tau, period) for the rows classified as cycles, in row order."""
    return [(r.tau, r.summary.period) for r in rows if r.summary.kind == "cycle" and r.summary.period is not None]


def kind_disagreements(up: Sequence[DiagramRow], down: Sequence[DiagramRow], tol: float = 1e-9) -> List[float]:
    """Delays present in both sweeps where they report different attractor kinds."""
    by_tau = {round(r.tau / tol): r for r in down}
    out = []
    for r in up:
        other = by_tau.get(round(r.tau / tol))
        if other is not None and other.summary.kind != r.summary.kind:
            out.append(r.tau)
    return sorted(out)


def kind_runs(rows: Sequence[DiagramRow], kind: str) -> List[Tuple[float, float]]:
    """Maximal runs of consecutive delays (sorted ascending) whose rows have ``kind``."""
    ordered = sorted(rows, key=lambda r: r.tau)
    runs, start, prev = [], None, None
    for r in ordered:
        if r.summary.kind == kind:
            if start is None:
                start = r.tau
            prev = r.tau
        elif start is not None:
            runs.append((start, prev))
            start = None
    if start is not None:
        runs.append((start, prev))
    return runs
