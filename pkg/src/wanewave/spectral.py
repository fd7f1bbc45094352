"""Rightmost characteristic roots via pseudospectral collocation plus Newton refinement.

The linearised delay system is approximated by an ODE on the values of the
history segment at Chebyshev extremal nodes in [-tau, 0]. Row 0 of each block
is the linearised vector field, the remaining rows differentiate the
interpolating polynomial. The integral over the delay interval uses
Clenshaw-Curtis weights on the same nodes. Matrix eigenvalues are then polished
as roots of W(lambda) = P + Q exp(-lambda tau).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .characteristic import char_coeffs, char_derivative, char_functions
from .errors import DegenerateDelay, NewtonDivergence
from .model import Equilibrium, ModelParams, endemic_equilibrium

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralDiscretization:
    m: int
    tau: float
    nodes: np.ndarray
    diff: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class CharRoot:
    lam: complex
    residual: float
    source: Literal["matrix-estimate", "newton-refined"]
    converged: bool = True


def chebyshev_extrema(m: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(m + 1) / m)


def chebyshev_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Differentiation matrix on Chebyshev extrema (negative-sum trick on the diagonal)."""
    m = len(x) - 1
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    D -= np.diag(D.sum(axis=1))
    return D


def clenshaw_curtis_weights(m: int) -> np.ndarray:
    """Weights on [-1, 1] at the Chebyshev extrema, exact for polynomials of degree m."""
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    v = np.ones(m - 1)
    inner = theta[1:-1]
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(m * inner) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / m
    return w


def build_discretization(m: int, tau: float) -> SpectralDiscretization:
    """Collocation data on [-tau, 0]; node 0 is s = 0 and node m is s = -tau."""
    if m < 2:
        raise ValueError("collocation degree must be at least 2")
    if tau < 1e-8:
        raise DegenerateDelay(f"tau={tau} too small; use the tau = 0 ODE limit")
    x = chebyshev_extrema(m)
    nodes = tau * (x - 1.0) / 2.0
    diff = chebyshev_diff_matrix(x) * (2.0 / tau)
    weights = clenshaw_curtis_weights(m) * (tau / 2.0)
    return SpectralDiscretization(m, tau, nodes, diff, weights)


def linearized_matrix(p: ModelParams, eq: Equilibrium, disc: SpectralDiscretization) -> np.ndarray:
    """Matrix of size 2(m+1) whose spectrum approximates the roots of W.

    Unknowns are the S-perturbation at the nodes followed by the I-perturbation.
    """
    if abs(disc.tau - p.tau) > 1e-12 * max(1.0, p.tau):
        raise ValueError("discretization built for a different delay")
    beta, gamma, d, nu, tau = p.beta, p.gamma, p.d, p.nu, p.tau
    i = eq.i
    lag_factor = math.exp(-d * tau - nu * beta * tau * i)
    sigma = gamma + nu * beta * (1 - eq.s - i)
    mu = beta * i * lag_factor
    m = disc.m
    n = m + 1
    A = np.zeros((2 * n, 2 * n))
    A[0, 0] = -(d + beta * i)
    A[0, n] = -beta * eq.s
    A[0, m] -= nu * mu
    A[0, n + m] += sigma * lag_factor - nu * mu
    A[0, n:] -= nu * mu * sigma * disc.weights
    A[n, 0] = beta * i
    A[n, n] = beta * eq.s - gamma - d
    A[1:n, :n] = disc.diff[1:]
    A[n + 1 :, n:] = disc.diff[1:]
    return A


def newton_refine(lam0: complex, p: ModelParams, tol: float = 1e-13, max_iter: int = 50, coeffs=None) -> CharRoot:
    """Polish a root of W starting from ``lam0``; falls back to the estimate on divergence."""
    c = coeffs or char_coeffs(p)
    lam = complex(lam0)
    scale = lambda z: max(1.0, abs(z) ** 3)  # noqa: E731
    for _ in range(max_iter):
        W = char_functions(lam, p, c)[2]
        dW = char_derivative(lam, p, c)
        if dW == 0:
            break
        step = W / dW
        lam -= step
        if abs(step) <= tol * max(1.0, abs(lam)):
            break
    residual = abs(char_functions(lam, p, c)[2]) / scale(lam)
    # W(0) = 0 identically, a root the delay system does not have: do not let
    # refinement slide onto it, nor wander off to another root
    drift = abs(lam - lam0)
    wandered = drift > 1e-2 * max(1.0, abs(lam0)) or (abs(lam) < 1e-8 and abs(lam0) > 1e-6)
    if not np.isfinite(residual) or residual > 1e-10 or wandered:
        est = abs(char_functions(complex(lam0), p, c)[2]) / scale(complex(lam0))
        return CharRoot(complex(lam0), float(est), "matrix-estimate", converged=False)
    return CharRoot(lam, float(residual), "newton-refined")


def matrix_eigenvalues(p: ModelParams, m: int, eq: Optional[Equilibrium] = None) -> np.ndarray:
    """Eigenvalues of the collocation matrix sorted by decreasing real part."""
    eq = eq or endemic_equilibrium(p)
    ev = np.linalg.eigvals(linearized_matrix(p, eq, build_discretization(m, p.tau)))
    return ev[np.argsort(-ev.real, kind="stable")]


def rightmost_roots(p: ModelParams, k: int = 6, m: int = 40) -> List[CharRoot]:
    """The ``k`` rightmost roots, Newton-refined on W, duplicates within 1e-8 merged."""
    ev = matrix_eigenvalues(p, m)
    c = char_coeffs(p)
    roots: List[CharRoot] = []
    for lam0 in ev:
        if len(roots) >= k:
            break
        r = newton_refine(lam0, p, coeffs=c)
        if not r.converged:
            warnings.warn(NewtonDivergence(f"Newton refinement failed from {lam0} at tau={p.tau}"), stacklevel=2)
        if any(abs(r.lam - q.lam) < 1e-8 for q in roots):
            continue
        roots.append(r)
    roots.sort(key=lambda r: (-r.lam.real, r.lam.imag))
    return roots


def rightmost_real_part(p: ModelParams, m: int = 40, refine: bool = True) -> float:
    if refine:
        return rightmost_roots(p, k=2, m=m)[0].lam.real
    return float(matrix_eigenvalues(p, m)[0].real)


@dataclass(frozen=True)
class ConvergenceRow:
    m: int
    tau_star: float
    error: float


def matrix_hopf_location(p: ModelParams, m: int, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Delay in [lo, hi] where the rightmost collocation eigenvalue crosses the imaginary axis.

    Uses the unrefined matrix spectrum, so the result carries the discretisation
    error of degree ``m``. Returns NaN when there is no sign change in the bracket.
    """
    f = lambda t: float(matrix_eigenvalues(p.with_(tau=t), m)[0].real)  # noqa: E731
    f_lo, f_hi = f(lo), f(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        return math.nan
    return brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def hopf_convergence_study(
    p: ModelParams,
    m_list: Sequence[int],
    reference: Optional[float] = None,
    half_width: float = 0.3,
) -> List[ConvergenceRow]:
    """Error of the collocation Hopf location against the analytic switch point, per degree.

    ``reference`` defaults to the largest switch point from the switch functions.
    A degree that shows no crossing near the reference gets error = inf.
    """
    if reference is None:
        from .switching import find_switch_points

        reference = find_switch_points(p).switch_points[-1].tau_star
    rows = []
    for m in m_list:
        tau_m = matrix_hopf_location(p, int(m), reference - half_width, reference + half_width)
        err = abs(tau_m - reference) if np.isfinite(tau_m) else math.inf
        rows.append(ConvergenceRow(int(m), tau_m, err))
    return rows
