"""Reference computer experiment: viscous flow through a rough pipe.

The dependent variable is the pressure loss per unit length, driven by
the friction factor: Poiseuille's 64/Re below a critical Reynolds number
and the implicit Colebrook correlation above it. Independent variables,
in order: fluid density rho [kg/m^3], viscosity mu [kg/(m s)],
pipe diameter D [m], wall roughness eps [m], bulk velocity V [m/s].

Two conventions are exposed because both appear in practice and they
matter for reproducing the shipped result tables:

* ``friction_factor``/``pressure_loss`` follow the textbook piecewise
  model with the Darcy pressure-gradient formula lambda rho V^2 / (2 D);
* ``PipeFlowExperiment`` defaults to the reference configuration that the
  bundled regime tables were produced with: the Colebrook correlation
  applied across the full Reynolds range and the Fanning pressure-gradient
  formula 2 lambda rho V^2 / D (a factor 4 on the Darcy form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dimension import Quantity, QuantitySystem, DimensionVector
from .errors import InvalidArgument, NoConvergence, ToolkitError, UnknownRegime
from .quadrature import RegimeBox

RE_CRITICAL = 3000.0
SYMBOLS = ("rho", "mu", "D", "eps", "V")

_LN10 = math.log(10.0)

# regime bounds keyed by symbol, in the independent-variable order above
_REGIMES = {
    "laminar": {
        "rho": (1.0e-1, 1.4e-1),
        "mu": (1.0e-6, 1.0e-5),
        "D": (5.0e-1, 8.0e-1),
        "eps": (3.0e-5, 8.0e-5),
        "V": (2.5e-2, 3.0e-2),
    },
    "turbulent": {
        "rho": (1.0e-1, 1.4e-1),
        "mu": (1.0e-6, 1.0e-5),
        "D": (5.0e-1, 1.0e0),
        "eps": (5.0e-4, 2.0e-3),
        "V": (2.0e0, 4.0e0),
    },
    "high_re": {
        "rho": (1.0e-1, 1.4e-1),
        "mu": (1.0e-6, 1.0e-5),
        "D": (5.0e-1, 1.0e0),
        "eps": (1.0e-2, 4.0e-2),
        "V": (5.0e2, 7.0e2),
    },
}


@dataclass(frozen=True)
class PipeState:
    """One operating point; everything strictly positive, eps < D."""

    V: float
    rho: float
    mu: float
    D: float
    eps: float

    def __post_init__(self):
        for name in ("V", "rho", "mu", "D", "eps"):
            if not getattr(self, name) > 0.0:
                raise ToolkitError(f"{name} must be strictly positive")
        if not self.eps < self.D:
            raise ToolkitError("relative roughness eps/D must be below 1")

    def as_q_vec(self) -> np.ndarray:
        return np.array([self.rho, self.mu, self.D, self.eps, self.V])


def reynolds(state: PipeState) -> float:
    return state.rho * state.V * state.D / state.mu


def poiseuille(Re):
    """Laminar friction factor 64/Re."""
    return 64.0 / np.asarray(Re, dtype=float)


def colebrook(Re, rel_rough, tol: float = 1e-12, max_iter: int = 100):
    """Friction factor from the implicit Colebrook correlation.

    Solves 1/sqrt(lambda) = -2 log10(rel_rough/3.7 + 2.51/(Re sqrt(lambda)))
    by Newton iteration on t = 1/sqrt(lambda), seeded with the explicit
    Haaland-style estimate. Scalar in, scalar out; arrays broadcast.
    """
    Re_a = np.asarray(Re, dtype=float)
    rr_a = np.asarray(rel_rough, dtype=float)
    scalar = Re_a.ndim == 0 and rr_a.ndim == 0
    Re_a, rr_a = np.broadcast_arrays(np.atleast_1d(Re_a), np.atleast_1d(rr_a))
    if np.any(Re_a <= 0.0):
        raise InvalidArgument("Reynolds number must be positive")
    if np.any(rr_a < 0.0) or np.any(rr_a >= 1.0):
        raise InvalidArgument("relative roughness must lie in [0, 1)")
    a = rr_a / 3.7
    b = 2.51 / Re_a
    t = -1.8 * np.log10((rr_a / 3.7) ** 1.11 + 6.9 / Re_a)
    residual = np.inf
    for _ in range(max_iter):
        arg = a + b * t
        if np.any(arg <= 0.0):
            raise InvalidArgument("logarithm argument became nonpositive")
        F = t + 2.0 * np.log10(arg)
        residual = float(np.max(np.abs(F)))
        if residual < tol:
            break
        t = t - F / (1.0 + (2.0 / _LN10) * b / arg)
    else:
        raise NoConvergence(f"Newton stalled at residual {residual:.3e} > {tol:.0e}")
    lam = 1.0 / (t * t)
    return float(lam[0]) if scalar else lam.reshape(np.shape(Re))


def friction_factor(Re, rel_rough, re_crit: float = RE_CRITICAL):
    """Piecewise friction factor: Poiseuille below re_crit, Colebrook above.

    The branch switch is a genuine discontinuity of the model.
    """
    Re_a = np.asarray(Re, dtype=float)
    rr_a = np.asarray(rel_rough, dtype=float)
    scalar = Re_a.ndim == 0 and rr_a.ndim == 0
    shape = np.broadcast_shapes(Re_a.shape, rr_a.shape)
    Re_a = np.broadcast_to(Re_a, shape).reshape(-1)
    rr_a = np.broadcast_to(rr_a, shape).reshape(-1)
    lam = np.empty_like(Re_a)
    low = Re_a < re_crit
    if np.any(low):
        lam[low] = poiseuille(Re_a[low])
    if np.any(~low):
        lam[~low] = colebrook(Re_a[~low], rr_a[~low])
    return float(lam[0]) if scalar else lam.reshape(shape)


def pressure_loss(state: PipeState, re_crit: float = RE_CRITICAL) -> float:
    """Pressure loss per unit length, lambda rho V^2 / (2 D) [kg m^-2 s^-2]."""
    lam = friction_factor(reynolds(state), state.eps / state.D, re_crit=re_crit)
    return lam * state.rho * state.V**2 / (2.0 * state.D)


def regime_box(name: str) -> RegimeBox:
    """Bounds table for one of the named flow regimes."""
    try:
        bounds = _REGIMES[name]
    except KeyError:
        known = ", ".join(sorted(_REGIMES))
        raise UnknownRegime(f"no regime named {name!r}; known: {known}") from None
    return RegimeBox.from_pairs([bounds[s] for s in SYMBOLS])


def regime_names() -> tuple[str, ...]:
    return tuple(_REGIMES)


def pipe_quantity_system() -> QuantitySystem:
    """The pipe system over (kg, m, s), with the output exponents pinned."""
    base = ("kg", "m", "s")
    mk = DimensionVector.of
    independents = (
        Quantity("fluid density", "rho", mk([1, -3, 0])),
        Quantity("fluid viscosity", "mu", mk([1, -1, -1])),
        Quantity("pipe diameter", "D", mk([0, 1, 0])),
        Quantity("pipe roughness", "eps", mk([0, 1, 0])),
        Quantity("fluid velocity", "V", mk([0, 1, -1])),
    )
    dependent = Quantity("pressure loss", "dpdx", mk([1, -2, -2]))
    return QuantitySystem(base, independents, dependent, pinned_w=(1.0, 0.0, -1.0, 0.0, 2.0))


@dataclass(frozen=True)
class PipeFlowExperiment:
    """Pressure-loss experiment over q = (rho, mu, D, eps, V).

    ``re_crit=None`` applies the Colebrook correlation at every Reynolds
    number; a float switches to Poiseuille below that value.
    ``pressure_formula`` selects ``fanning`` (2 lambda rho V^2 / D) or
    ``darcy`` (lambda rho V^2 / (2 D)). The defaults reproduce the shipped
    regime tables. Pure function of its inputs; safe to evaluate
    concurrently.
    """

    re_crit: float | None = None
    pressure_formula: str = "fanning"
    domain: str = "positive"

    def __post_init__(self):
        if self.pressure_formula not in ("fanning", "darcy"):
            raise ToolkitError(
                f"pressure_formula must be 'fanning' or 'darcy', got {self.pressure_formula!r}"
            )

    def evaluate_batch(self, points) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(points, dtype=float))
        if Q.shape[1] != 5:
            raise ToolkitError(f"pipe experiment expects 5 columns, got {Q.shape[1]}")
        rho, mu, D, eps, V = Q.T
        Re = rho * V * D / mu
        rr = eps / D
        lam = colebrook(Re, rr)
        if self.re_crit is not None:
            low = Re < self.re_crit
            if np.any(low):
                lam = np.where(low, 64.0 / Re, lam)
        if self.pressure_formula == "fanning":
            return 2.0 * lam * rho * V**2 / D
        return lam * rho * V**2 / (2.0 * D)

    def __call__(self, q_vec) -> float:
        return float(self.evaluate_batch(np.asarray(q_vec, dtype=float)[None, :])[0])

    @classmethod
    def textbook(cls) -> "PipeFlowExperiment":
        """Piecewise Poiseuille/Colebrook model with the Darcy formula."""
        return cls(re_crit=RE_CRITICAL, pressure_formula="darcy")


def corner_reynolds(box: RegimeBox) -> tuple[float, float]:
    """Reynolds range over the corners of a box in (rho, mu, D, eps, V) order."""
    lo, hi = box.lower, box.upper
    re_min = lo[0] * lo[4] * lo[2] / hi[1]
    re_max = hi[0] * hi[4] * hi[2] / lo[1]
    return float(re_min), float(re_max)


def moody_grid(n_re: int = 120, n_rough: int = 12,
               re_range=(6e2, 1e8), rough_range=(1e-6, 5e-2),
               re_crit: float = RE_CRITICAL) -> np.ndarray:
    """Rows of (log10 Re, log10 rel_rough, lambda) for plotting the chart."""
    res = np.logspace(np.log10(re_range[0]), np.log10(re_range[1]), n_re)
    roughs = np.logspace(np.log10(rough_range[0]), np.log10(rough_range[1]), n_rough)
    rows = []
    for rr in roughs:
        lam = friction_factor(res, rr, re_crit=re_crit)
        rows.append(np.column_stack([np.log10(res), np.full_like(res, np.log10(rr)), lam]))
    return np.vstack(rows)
