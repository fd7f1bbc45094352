"""Characteristic equation of the endemic equilibrium and its imaginary-axis frequencies.

W(lambda, tau) = P(lambda, tau) + Q(lambda, tau) exp(-lambda tau). Purely imaginary
roots lambda = i omega require omega to be a positive zero of

    F(omega, tau) = |P(i omega)|^2 - |Q(i omega)|^2 = omega^2 (omega^4 + a1 omega^2 + a0).

Everything here is vectorised over tau where that is cheap, because the switch
function scans evaluate these quantities on fine delay grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np

from .errors import SearchRangeExceeded
from .model import ModelParams, basic_reproduction_number, endemic_infected

Branch = Literal["plus", "minus"]


@dataclass(frozen=True)
class CharCoeffs:
    mu: float
    sigma: float
    a0: float
    a1: float
    discriminant: float
    i_star: float
    tau: float


@dataclass(frozen=True)
class OmegaRoots:
    omega_plus: Optional[float]
    omega_minus: Optional[float]
    region: Literal["I", "II", "III"]
    degenerate: bool = False


@dataclass(frozen=True)
class FeasibilityInterval:
    """Maximal delay interval on which one frequency branch is a positive simple root of F.

    ``lo_reason``/``hi_reason`` name the condition that ends the interval
    ("start" for tau = 0, "a0", "D" or "a1" for a sign change of that
    coefficient). Whether an endpoint is open or closed is not resolved
    numerically.
    """

    branch: Branch
    lo: float
    hi: float
    lo_reason: str
    hi_reason: str

    def __contains__(self, tau) -> bool:
        return self.lo <= tau <= self.hi

    @property
    def degenerate_hi(self) -> bool:
        return self.hi_reason == "D"

    @property
    def degenerate_lo(self) -> bool:
        return self.lo_reason == "D"


def coefficient_arrays(p: ModelParams, tau) -> dict:
    """mu, sigma, a0, a1, D and I* for every delay in ``tau`` (other parameters from ``p``)."""
    tau = np.asarray(tau, dtype=float)
    beta, gamma, d, nu = p.beta, p.gamma, p.d, p.nu
    i = endemic_infected(beta, gamma, d, nu, tau)
    bi = beta * i
    mu = bi * np.exp(-tau * (d + nu * bi))
    sigma = gamma + nu * beta * (1 - 1 / basic_reproduction_number(p) - i)
    a1 = d**2 + bi**2 - 2 * gamma * bi - nu**2 * mu**2
    a0 = (bi * (gamma + d)) ** 2 - 2 * nu * bi * (d + bi) * mu * sigma - (sigma - nu * bi) ** 2 * mu**2 - 2 * nu**2 * mu**2 * bi * sigma
    return {"tau": tau, "i": i, "mu": mu, "sigma": sigma, "a0": a0, "a1": a1, "D": a1**2 - 4 * a0}


def char_coeffs(p: ModelParams) -> CharCoeffs:
    c = coefficient_arrays(p, p.tau)
    return CharCoeffs(
        mu=float(c["mu"]),
        sigma=float(c["sigma"]),
        a0=float(c["a0"]),
        a1=float(c["a1"]),
        discriminant=float(c["D"]),
        i_star=float(c["i"]),
        tau=p.tau,
    )


def _pq(lam, p: ModelParams, i_star, mu, sigma):
    beta, gamma, d, nu = p.beta, p.gamma, p.d, p.nu
    bi = beta * i_star
    P = lam**3 + lam**2 * (d + bi) + lam * beta * (gamma + d) * i_star + nu * bi * mu * sigma
    Q = (lam**2 * nu - lam * (sigma - nu * bi) - nu * bi * sigma) * mu
    return P, Q


def char_functions(lam, p: ModelParams, coeffs: Optional[CharCoeffs] = None):
    """Return (P, Q, W) at ``lam`` (scalar or array) for the delay ``p.tau``."""
    c = coeffs or char_coeffs(p)
    lam = np.asarray(lam, dtype=complex)
    P, Q = _pq(lam, p, c.i_star, c.mu, c.sigma)
    W = P + Q * np.exp(-lam * p.tau)
    if lam.ndim == 0:
        return complex(P), complex(Q), complex(W)
    return P, Q, W


def char_derivative(lam, p: ModelParams, coeffs: Optional[CharCoeffs] = None):
    """dW/dlambda = P' + (Q' - tau Q) exp(-lambda tau)."""
    c = coeffs or char_coeffs(p)
    beta, gamma, d, nu = p.beta, p.gamma, p.d, p.nu
    bi = beta * c.i_star
    lam = np.asarray(lam, dtype=complex)
    _, Q = _pq(lam, p, c.i_star, c.mu, c.sigma)
    dP = 3 * lam**2 + 2 * lam * (d + bi) + beta * (gamma + d) * c.i_star
    dQ = (2 * lam * nu - (c.sigma - nu * bi)) * c.mu
    out = dP + (dQ - p.tau * Q) * np.exp(-lam * p.tau)
    return complex(out) if lam.ndim == 0 else out


def f_polynomial(omega, a0, a1):
    """F(omega) through its coefficient form omega^2 (omega^4 + a1 omega^2 + a0)."""
    w2 = np.asarray(omega) ** 2
    return w2 * (w2**2 + a1 * w2 + a0)


def f_direct(omega, p: ModelParams, coeffs: Optional[CharCoeffs] = None):
    """F(omega) as |P(i omega)|^2 - |Q(i omega)|^2."""
    P, Q, _ = char_functions(1j * np.asarray(omega, dtype=float), p, coeffs)
    return np.abs(P) ** 2 - np.abs(Q) ** 2


def f_omega_derivative(omega, a0, a1):
    """dF/domega. At a root of F its sign equals the sign of 2 omega^2 + a1."""
    w = np.asarray(omega)
    return 2 * w * (3 * w**4 + 2 * a1 * w**2 + a0)


def omega_arrays(a0, a1):
    """Vectorised omega_plus, omega_minus with NaN where the branch is not feasible."""
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    D = a1**2 - 4 * a0
    has_plus, has_minus = feasible_masks(a0, a1, D)
    with np.errstate(invalid="ignore"):
        root_d = np.sqrt(np.where(D >= 0, D, np.nan))
        wp = np.sqrt((-a1 + root_d) / 2)
        wm = np.sqrt((-a1 - root_d) / 2)
    return np.where(has_plus, wp, np.nan), np.where(has_minus, wm, np.nan)


def feasible_masks(a0, a1, D):
    """Membership of J+ and J- following the (a0, a1)-plane partition."""
    both = (a0 > 0) & (D > 0) & (a1 < 0)
    plus = both | (a0 < 0) | ((a0 == 0) & (a1 < 0))
    return plus, both


def omega_roots(c: CharCoeffs) -> OmegaRoots:
    a0, a1, D = c.a0, c.a1, c.discriminant
    if a0 < 0:
        return OmegaRoots(float(np.sqrt((-a1 + np.sqrt(D)) / 2)), None, "II")
    if a0 == 0 and a1 < 0:
        return OmegaRoots(float(np.sqrt(-a1)), None, "II")
    if a0 > 0 and a1 < 0 and D >= 0:
        wp = float(np.sqrt((-a1 + np.sqrt(D)) / 2))
        wm = float(np.sqrt((-a1 - np.sqrt(D)) / 2))
        # a double root is not simple; it is reported on both branches and flagged
        return OmegaRoots(wp, wm, "III", degenerate=(D == 0))
    return OmegaRoots(None, None, "I")


def _search_grid(tau_max: float, step: float) -> np.ndarray:
    head = np.geomspace(1e-6, step, 25)
    body = np.arange(step, tau_max, step)
    return np.unique(np.concatenate([[0.0], head, body, [tau_max]]))


def _boundary_reason(c_left: dict, c_right: dict) -> str:
    for key in ("a0", "D", "a1"):
        if np.sign(c_left[key]) != np.sign(c_right[key]):
            return key
    return "a0"


def feasibility_intervals(
    p: ModelParams,
    tau_max_search: float = 200.0,
    step: float = 0.01,
    tol: float = 1e-10,
    truncate: bool = False,
) -> List[FeasibilityInterval]:
    """Maximal delay intervals J+ and J- on which omega_plus / omega_minus exist.

    Membership is sign-tracked on a grid (geometric near 0, then uniform with
    ``step``) and every transition is bisected to ``tol``. With ``truncate`` the
    scan simply stops at ``tau_max_search``; otherwise a branch still feasible
    there raises SearchRangeExceeded.
    """
    grid = _search_grid(tau_max_search, step)
    c = coefficient_arrays(p, grid)
    masks = dict(zip(("plus", "minus"), feasible_masks(c["a0"], c["a1"], c["D"])))

    def member(branch: str, tau: float) -> bool:
        cc = coefficient_arrays(p, np.array([tau]))
        plus, minus = feasible_masks(cc["a0"], cc["a1"], cc["D"])
        return bool((plus if branch == "plus" else minus)[0])

    def refine(branch: str, lo: float, hi: float):
        inside_lo = member(branch, lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if member(branch, mid) == inside_lo:
                lo = mid
            else:
                hi = mid
        reason = _boundary_reason(coefficient_arrays(p, np.array([lo])), coefficient_arrays(p, np.array([hi])))
        return float(0.5 * (lo + hi)), reason

    out: List[FeasibilityInterval] = []
    for branch in ("plus", "minus"):
        mask = masks[branch]
        if mask[-1] and not truncate:
            raise SearchRangeExceeded(f"{branch} branch still feasible at tau = {tau_max_search}")
        edges = np.flatnonzero(mask[1:] != mask[:-1])
        if mask[0]:
            start, start_reason = 0.0, "start"
        else:
            start = None
        for k in edges:
            tau_edge, reason = refine(branch, grid[k], grid[k + 1])
            if mask[k]:
                out.append(FeasibilityInterval(branch, start, tau_edge, start_reason, reason))
                start = None
            else:
                start, start_reason = tau_edge, reason
        if start is not None:
            out.append(FeasibilityInterval(branch, start, float(grid[-1]), start_reason, "search-limit"))
    out.sort(key=lambda iv: (iv.lo, iv.branch))
    return out


def scan_table(p: ModelParams, taus) -> list:
    """Rows (tau, a0, a1, D, omega_plus, omega_minus, region) for CSV export."""
    taus = np.asarray(taus, dtype=float)
    c = coefficient_arrays(p, taus)
    wp, wm = omega_arrays(c["a0"], c["a1"])
    rows = []
    for k, tau in enumerate(taus):
        region = "III" if np.isfinite(wm[k]) else ("II" if np.isfinite(wp[k]) else "I")
        rows.append((float(tau), float(c["a0"][k]), float(c["a1"][k]), float(c["D"][k]), float(wp[k]), float(wm[k]), region))
    return rows
