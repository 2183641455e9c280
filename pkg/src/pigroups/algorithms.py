"""End-to-end drivers for estimating the unique, relevance-ranked groups.

Two routes to the gradient second-moment matrix of the dimensionless
relationship g(gamma):

* the surface route fits a polynomial to (gamma, pi) pairs from a
  space-filling design and integrates its analytic gradient;
* the finite-difference route perturbs each group coordinate of every
  quadrature point and differences the experiment itself.

Both integrate in the original variables, where the uniform product
density is exactly what the tensor rule integrates; the induced density
on gamma is never materialized. A full-space variant differences all m
log-variables to expose the ridge structure of the raw input-output map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .dimension import (
    PiBasis,
    QuantitySystem,
    build_dimension_matrix,
    check_dimensionless,
)
from .errors import (
    DesignTooSmall,
    ExperimentFailure,
    NonFinite,
    NonPositiveInput,
    ShapeMismatch,
    ToolkitError,
)
from .quadrature import (
    QuadratureRule,
    RegimeBox,
    latin_hypercube,
    monte_carlo_rule,
    tensor_rule,
)
from .subspace import (
    DEGENERATE_FLAG,
    SubspaceResult,
    assemble_C,
    eigen_gap,
    eigendecompose,
    unique_groups,
)
from .surrogate import (
    ResponseSurface,
    eval_surface,
    fit_polynomial,
    grad_surface,
    n_coefficients,
)

DIMENSIONLESS_TOL = 1e-10


@dataclass(frozen=True)
class AlgorithmConfig:
    """Knobs shared by both algorithms.

    ``quad`` is either ``tensor:<points per dimension>`` or ``mc:<points>``;
    ``design`` and ``holdout`` only matter for the surface route, ``h``
    only for finite differences.
    """

    h: float = 1e-6
    degree: int = 2
    quad: str = "tensor:11"
    seed: int = 0
    design: int = 1000
    holdout: int = 200

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("finite-difference step h must be positive")
        if self.degree < 1:
            raise ValueError("surrogate degree must be at least 1")
        self.parse_quad()

    def parse_quad(self):
        kind, _, arg = self.quad.partition(":")
        if kind not in ("tensor", "mc") or not arg.isdigit():
            raise ValueError(
                f"quadrature spec {self.quad!r} is not 'tensor:<p>' or 'mc:<N>'"
            )
        return kind, int(arg)


def build_rule(box: RegimeBox, config: AlgorithmConfig) -> QuadratureRule:
    kind, count = config.parse_quad()
    if kind == "tensor":
        return tensor_rule(box, count)
    return monte_carlo_rule(box, count, config.seed)


def evaluate_experiment(experiment, points: np.ndarray) -> np.ndarray:
    """Run the experiment at every row, preferring its batch entry point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    batch = getattr(experiment, "evaluate_batch", None)
    try:
        if batch is not None:
            values = np.asarray(batch(points), dtype=float).reshape(-1)
        else:
            values = np.array([float(experiment(row)) for row in points])
    except ToolkitError:
        raise
    except Exception as exc:
        raise ExperimentFailure(f"experiment raised {exc!r}") from exc
    if values.shape[0] != points.shape[0]:
        raise ShapeMismatch(
            f"experiment returned {values.shape[0]} values for {points.shape[0]} points"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NonFinite(f"experiment returned {values[bad]!r} at point index {bad}")
    return values


class CountingExperiment:
    """Wrapper that counts scalar evaluations, for budgets and manifests."""

    def __init__(self, experiment):
        self.experiment = experiment
        self.count = 0

    def __call__(self, q_vec):
        self.count += 1
        return self.experiment(q_vec)

    def evaluate_batch(self, points):
        self.count += len(points)
        return evaluate_experiment(self.experiment, points)


def fd_shift_point(q_vec, W, k: int, h: float) -> np.ndarray:
    """Point whose k-th log-group coordinate is shifted by h.

    Minimum-change solution of W^T log q' = gamma + h e_k: shift log q
    along column k of W (valid because the columns are orthonormal).
    """
    q_vec = np.asarray(q_vec, dtype=float)
    W = np.asarray(W, dtype=float)
    if not 0 <= k < W.shape[1]:
        raise ShapeMismatch(f"group index {k} outside [0, {W.shape[1] - 1}]")
    if np.any(q_vec <= 0.0):
        raise NonPositiveInput("q_vec must be strictly positive")
    logq = np.log(q_vec)
    shifted = np.exp(logq + h * W[:, k])
    target = W.T @ logq
    target[k] += h
    if np.max(np.abs(W.T @ np.log(shifted) - target)) > 1e-12:
        raise ToolkitError("shifted point violates its defining system")
    return shifted


def fd_gradient(experiment, q_vec, pi_base: float, w, W, h: float) -> np.ndarray:
    """Forward-difference gradient of g at one point; n extra evaluations."""
    q_vec = np.asarray(q_vec, dtype=float)
    w = np.asarray(w, dtype=float)
    W = np.asarray(W, dtype=float)
    n = W.shape[1]
    grad = np.empty(n)
    logq = np.log(q_vec)
    for k in range(n):
        shifted = np.exp(logq + h * W[:, k])
        try:
            q_shift = float(experiment(shifted))
        except Exception as exc:
            raise ExperimentFailure(
                f"experiment failed at shifted point {shifted.tolist()}: {exc!r}"
            ) from exc
        pi_shift = q_shift * np.exp(-np.dot(w, np.log(shifted)))
        grad[k] = (pi_shift - pi_base) / h
    return grad


def _finalize(system, W, C, config, extra) -> SubspaceResult:
    lam, U = eigendecompose(C)
    Z, descriptors = unique_groups(W, U, system.symbols)
    D = build_dimension_matrix(system)
    worst = max(check_dimensionless(D, Z[:, j]) for j in range(Z.shape[1]))
    if worst > DIMENSIONLESS_TOL:
        raise ToolkitError(f"group exponents are not dimensionless: |Dz| = {worst:.3e}")
    gap = eigen_gap(lam)
    metadata = {
        "groups": descriptors,
        "eigen_gap": gap,
        "unique": bool(gap >= 1e-3),
        **extra,
    }
    if not metadata["unique"]:
        metadata["flag"] = DEGENERATE_FLAG
    return SubspaceResult(C=C, eigenvalues=lam, U=U, Z=Z, metadata=metadata)


def algorithm1(
    experiment,
    system: QuantitySystem,
    basis: PiBasis,
    box: RegimeBox,
    config: AlgorithmConfig,
    return_surface: bool = False,
    trace: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], None]] = None,
):
    """Surface route: design, fit, integrate the surrogate gradient.

    Experiment calls: ``config.design`` for the fit plus ``config.holdout``
    for the reported hold-out error; the integration phase evaluates only
    the surrogate.
    """
    w, W = basis.w, basis.W
    n = W.shape[1]
    needed = n_coefficients(n, config.degree)
    if config.design < needed:
        raise DesignTooSmall(
            f"design of {config.design} cannot fit {needed} surrogate coefficients"
        )
    points = latin_hypercube(box, config.design, config.seed)
    values = evaluate_experiment(experiment, points)
    logq = np.log(points)
    pi = values * np.exp(-logq @ w)
    gamma = logq @ W
    surface = fit_polynomial(gamma, pi, config.degree)

    holdout_rmse = None
    if config.holdout > 0:
        fresh = latin_hypercube(box, config.holdout, config.seed + 1)
        fresh_vals = evaluate_experiment(experiment, fresh)
        fresh_log = np.log(fresh)
        fresh_pi = fresh_vals * np.exp(-fresh_log @ w)
        pred = eval_surface(surface, fresh_log @ W)
        holdout_rmse = float(np.sqrt(np.mean((pred - fresh_pi) ** 2)))

    rule = build_rule(box, config)
    grads = grad_surface(surface, np.log(rule.points) @ W)
    C = assemble_C(grads, rule.weights)
    if trace is not None:
        trace(points, pi, grad_surface(surface, gamma))
    result = _finalize(system, W, C, config, {
        "algorithm": "surface",
        "degree": config.degree,
        "quadrature": _describe_rule(config, len(rule)),
        "w": w,
        "evaluations": int(config.design),
        "holdout_evaluations": int(config.holdout),
        "train_rmse": surface.train_rmse,
        "holdout_rmse": holdout_rmse,
        "seed": config.seed,
    })
    return (result, surface) if return_surface else result


def algorithm2(
    experiment,
    system: QuantitySystem,
    basis: PiBasis,
    box: RegimeBox,
    config: AlgorithmConfig,
    trace: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], None]] = None,
) -> SubspaceResult:
    """Finite-difference route: N base runs plus N shifted runs per group.

    Exactly N (n + 1) experiment evaluations for an N-point rule.
    """
    w, W = basis.w, basis.W
    n = W.shape[1]
    h = config.h
    rule = build_rule(box, config)
    X = np.log(rule.points)
    base_vals = evaluate_experiment(experiment, rule.points)
    pi0 = base_vals * np.exp(-X @ w)
    grads = np.empty((len(rule), n))
    for k in range(n):
        Xs = X + h * W[:, k]
        vals = evaluate_experiment(experiment, np.exp(Xs))
        pik = vals * np.exp(-Xs @ w)
        grads[:, k] = (pik - pi0) / h
    C = assemble_C(grads, rule.weights)
    if trace is not None:
        trace(rule.points, pi0, grads)
    return _finalize(system, W, C, config, {
        "algorithm": "finite_difference",
        "h": h,
        "quadrature": _describe_rule(config, len(rule)),
        "w": w,
        "evaluations": int(len(rule) * (n + 1)),
        "seed": config.seed,
    })


def full_space_C(experiment, box: RegimeBox, p: int, h: float) -> SubspaceResult:
    """Gradient second moments of the raw map in all m log-variables.

    Forward-differences each coordinate of x = log q on a tensor rule.
    When the map factors through n groups, at most n + 1 eigenvalues
    survive as h shrinks; the rest are pure differencing error.
    """
    rule = tensor_rule(box, p)
    X = np.log(rule.points)
    m = X.shape[1]
    f0 = evaluate_experiment(experiment, rule.points)
    grads = np.empty((len(rule), m))
    for i in range(m):
        Xs = X.copy()
        Xs[:, i] += h
        grads[:, i] = (evaluate_experiment(experiment, np.exp(Xs)) - f0) / h
    C = assemble_C(grads, rule.weights)
    lam, U = eigendecompose(C)
    return SubspaceResult(C=C, eigenvalues=lam, U=U, Z=U, metadata={
        "algorithm": "full_space",
        "h": h,
        "quadrature": f"tensor:{p} (N={len(rule)})",
        "evaluations": int(len(rule) * (m + 1)),
    })


def predict_dependent(surface: ResponseSurface, w, W, q_vec) -> float:
    """Semi-empirical prediction exp(w^T log q) * g_hat(W^T log q).

    The exponential factor restores the dependent variable's units, so the
    prediction is dimensionally homogeneous by construction.
    """
    q_vec = np.asarray(q_vec, dtype=float)
    if np.any(q_vec <= 0.0):
        raise NonPositiveInput("prediction requires strictly positive inputs")
    logq = np.log(q_vec)
    w = np.asarray(w, dtype=float)
    W = np.asarray(W, dtype=float)
    return float(np.exp(logq @ w) * eval_surface(surface, W.T @ logq))


def _describe_rule(config: AlgorithmConfig, size: int) -> str:
    return f"{config.quad} (N={size})"
