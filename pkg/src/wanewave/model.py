"""SIRS model with waning and boosting of immunity: parameters, vector field and steady states.

The delay system is

    S' = d(1 - S) - beta I S
         + I(t-tau) (gamma + nu beta (1 - S(t-tau) - I(t-tau))) exp(-d tau - nu beta Y(t))
    I' = beta I S - (gamma + d) I

where Y(t) is the integral of I over [t - tau, t].
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal, Mapping, Optional

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConvergenceFailure, DomainError, NoEndemicEquilibrium, ParameterError

SIMPLEX_TOL = 1e-9

# pertussis-like parameter set: R0 = 15, 21-day infectious period, 50-year lifespan
PERTUSSIS = {"beta": 255.3, "gamma": 17.0, "d": 0.02}


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological constants. Rates are per year, ``tau`` is in years."""

    beta: float = PERTUSSIS["beta"]
    gamma: float = PERTUSSIS["gamma"]
    d: float = PERTUSSIS["d"]
    nu: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("beta", "gamma", "d", "nu", "tau"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.beta <= 0 or self.gamma <= 0 or self.d <= 0:
            raise ParameterError("beta, gamma and d must be positive")
        if self.nu < 0:
            raise ParameterError("nu must be non-negative")
        if self.tau < 0:
            raise ParameterError("tau must be non-negative")

    @property
    def r0(self) -> float:
        return basic_reproduction_number(self)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ModelParams":
        """Build parameters from a mapping with keys beta, gamma, d, nu, tau.

        ``beta`` may be replaced by ``r0``, in which case beta = r0 (gamma + d).
        Missing keys fall back to the pertussis defaults.
        """
        known = {"beta", "gamma", "d", "nu", "tau", "r0"}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        values = {k: data[k] for k in ("beta", "gamma", "d", "nu", "tau") if k in data}
        if "r0" in data:
            if "beta" in data:
                raise ParameterError("give either beta or r0, not both")
            gamma = float(values.get("gamma", PERTUSSIS["gamma"]))
            d = float(values.get("d", PERTUSSIS["d"]))
            values["beta"] = float(data["r0"]) * (gamma + d)
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> "ModelParams":
        with open(Path(path)) as fh:
            return cls.from_mapping(json.load(fh))


@dataclass(frozen=True)
class Equilibrium:
    s: float
    i: float
    kind: Literal["disease-free", "endemic"]
    stable: Optional[bool] = None

    def __post_init__(self):
        if self.s < -SIMPLEX_TOL or self.i < -SIMPLEX_TOL or self.s + self.i > 1 + SIMPLEX_TOL:
            raise DomainError(f"equilibrium ({self.s}, {self.i}) outside the simplex")


@dataclass
class HistoryFunction:
    """Initial data on [-tau, 0], sampled on an increasing time grid.

    Values between samples are linearly interpolated. ``y0`` is the integral of I
    over [-tau, 0]; when not given it is computed by the trapezoidal rule.
    """

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    y0: Optional[float] = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        if not (self.times.shape == self.s.shape == self.i.shape) or self.times.ndim != 1:
            raise ValueError("history arrays must be 1-D and of equal length")
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("history times must be strictly increasing with at least 2 samples")
        if abs(self.times[-1]) > 1e-12:
            raise ValueError("history must end at t = 0")
        check_simplex(self.s, self.i, SIMPLEX_TOL)
        if self.y0 is None:
            self.y0 = float(trapezoid(self.i, self.times))
        if self.y0 < -SIMPLEX_TOL or self.y0 > self.tau + SIMPLEX_TOL:
            raise DomainError(f"history integral {self.y0} outside [0, tau]")

    @property
    def tau(self) -> float:
        return -float(self.times[0])

    def __call__(self, t):
        return np.interp(t, self.times, self.s), np.interp(t, self.times, self.i)

    @classmethod
    def constant(cls, s0: float, i0: float, tau: float, label: str = "") -> "HistoryFunction":
        tau = max(float(tau), 0.0)
        times = np.array([-tau, 0.0]) if tau > 0 else np.array([-1e-12, 0.0])
        return cls(times, np.full(2, s0), np.full(2, i0), y0=tau * i0, label=label)

    @classmethod
    def from_callable(cls, fn: Callable, tau: float, samples: int = 2001, label: str = "") -> "HistoryFunction":
        times = np.linspace(-tau, 0.0, samples)
        s, i = fn(times)
        return cls(times, np.broadcast_to(s, times.shape), np.broadcast_to(i, times.shape), label=label)


def check_simplex(s, i, tol: float = SIMPLEX_TOL) -> None:
    s = np.asarray(s)
    i = np.asarray(i)
    if np.any(s < -tol) or np.any(i < -tol) or np.any(s + i > 1 + tol):
        raise DomainError("state outside the simplex {S, I >= 0, S + I <= 1}")


def basic_reproduction_number(p: ModelParams) -> float:
    return p.beta / (p.gamma + p.d)


def disease_free_equilibrium(p: ModelParams) -> Equilibrium:
    return Equilibrium(1.0, 0.0, "disease-free", stable=basic_reproduction_number(p) < 1)


def equilibrium_condition(i, beta, gamma, d, nu, tau):
    """Scalar condition whose positive root is the endemic I*, with S* = 1/R0 substituted."""
    s = (gamma + d) / beta
    return d * (1 - s) - beta * i * s + (gamma + nu * beta * (1 - s - i)) * i * np.exp(-d * tau - nu * beta * tau * i)


def _condition_derivative(i, beta, gamma, d, nu, tau):
    s = (gamma + d) / beta
    e = np.exp(-d * tau - nu * beta * tau * i)
    sigma = gamma + nu * beta * (1 - s - i)
    return -beta * s + (-nu * beta * i + sigma * (1 - nu * beta * tau * i)) * e


def endemic_infected(beta, gamma, d, nu, tau, width: float = 1e-12, max_iter: int = 200):
    """Vectorised I* for broadcastable parameter arrays (all with R0 > 1).

    Bisection on (1e-14, 1 - 1/R0] down to ``width``, then a few bracketed Newton
    steps. Returns an array of the broadcast shape.
    """
    beta, gamma, d, nu, tau = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (beta, gamma, d, nu, tau)))
    lo = np.full(beta.shape, 1e-14)
    hi = 1.0 - (gamma + d) / beta
    if np.any(hi <= 0):
        raise NoEndemicEquilibrium("R0 <= 1: no endemic equilibrium")
    g_hi = equilibrium_condition(hi, beta, gamma, d, nu, tau)
    # at tau = 0 the root sits exactly on the upper bracket end
    at_hi = g_hi >= 0
    for _ in range(max_iter):
        if np.all(hi - lo <= width):
            break
        mid = 0.5 * (lo + hi)
        pos = equilibrium_condition(mid, beta, gamma, d, nu, tau) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    else:
        raise ConvergenceFailure("bisection for I* did not reach the requested width")
    lo_b, hi_b = lo, hi
    x = 0.5 * (lo + hi)
    for _ in range(4):
        g = equilibrium_condition(x, beta, gamma, d, nu, tau)
        dg = _condition_derivative(x, beta, gamma, d, nu, tau)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - g / dg
        ok = np.isfinite(x_new) & (x_new >= lo_b - width) & (x_new <= hi_b + width)
        x = np.where(ok, x_new, x)
    x = np.where(at_hi, 1.0 - (gamma + d) / beta, x)
    return x


def count_condition_roots(p: ModelParams, points: int = 10_000) -> int:
    """Number of sign changes of the equilibrium condition on a uniform grid of (0, 1 - 1/R0]."""
    top = 1.0 - 1.0 / basic_reproduction_number(p)
    grid = np.linspace(1e-14, top, points)
    g = equilibrium_condition(grid, p.beta, p.gamma, p.d, p.nu, p.tau)
    # for tau -> 0 the root merges with the bracket end, where g vanishes to rounding
    at_end = abs(g[-1]) <= 1e-12 * p.beta
    if at_end:
        g = g[:-1]
    sign = np.sign(g)
    sign = sign[sign != 0]
    return int(np.count_nonzero(sign[1:] != sign[:-1])) + int(at_end)


def endemic_equilibrium(p: ModelParams, tol: float = 1e-10) -> Equilibrium:
    r0 = basic_reproduction_number(p)
    if r0 <= 1:
        raise NoEndemicEquilibrium(f"R0 = {r0:.6g} <= 1")
    i = float(endemic_infected(p.beta, p.gamma, p.d, p.nu, p.tau))
    residual = abs(float(equilibrium_condition(i, p.beta, p.gamma, p.d, p.nu, p.tau)))
    if residual > tol:
        raise ConvergenceFailure(f"endemic equilibrium residual {residual:.3e} above {tol:.1e}")
    roots = count_condition_roots(p)
    if roots != 1:
        warnings.warn(f"equilibrium condition has {roots} sign changes for {p}", RuntimeWarning, stacklevel=2)
    return Equilibrium(1.0 / r0, i, "endemic")


def sir_limit_equilibrium(p: ModelParams) -> Equilibrium:
    """Endemic state of the lifelong-immunity (tau -> infinity) SIR limit."""
    r0 = basic_reproduction_number(p)
    if r0 <= 1:
        raise NoEndemicEquilibrium(f"R0 = {r0:.6g} <= 1")
    return Equilibrium(1.0 / r0, p.d / p.beta * (r0 - 1.0), "endemic")


def rhs_delay_system(state_now, state_lag, exposure_integral: float, p: ModelParams, tol: float = SIMPLEX_TOL):
    """Time derivatives (dS/dt, dI/dt).

    ``state_now`` and ``state_lag`` are (S, I) at t and t - tau;
    ``exposure_integral`` is the integral of I over [t - tau, t].
    """
    s, i = (float(v) for v in state_now)
    s_lag, i_lag = (float(v) for v in state_lag)
    check_simplex([s, s_lag], [i, i_lag], tol)
    if exposure_integral < -tol:
        raise DomainError("exposure integral must be non-negative")
    inflow = i_lag * (p.gamma + p.nu * p.beta * (1 - s_lag - i_lag)) * math.exp(-p.d * p.tau - p.nu * p.beta * exposure_integral)
    ds = p.d * (1 - s) - p.beta * i * s + inflow
    di = p.beta * i * s - (p.gamma + p.d) * i
    return ds, di
