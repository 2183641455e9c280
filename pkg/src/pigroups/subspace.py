"""Active-subspace assembly and the unique dimensionless groups.

The matrix C is the weighted second moment of gradient samples of the
dimensionless relationship. Its eigenvectors, applied to the null-space
basis, give group exponents Z = W U that no longer depend on which null
basis was chosen (up to sign, when the eigenvalues are separated); the
eigenvalues rank the groups by how much the output responds to each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .dimension import normalize_column_signs
from .errors import (
    NonFinite,
    NotPositiveSemidefinite,
    NotSymmetric,
    ShapeMismatch,
    SpanMismatch,
    ToolkitError,
    WrongDimension,
)

DEFAULT_CHUNK = 4096
EIGEN_GAP_RTOL = 1e-3   # below this gap the relevance ordering is ambiguous
DEGENERATE_FLAG = "degenerate eigenspace - groups not unique"


def assemble_C(gradients, weights, chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """C = sum_j w_j g_j g_j^T, accumulated chunk by chunk in index order.

    The reduction order is fixed by the chunk size, so concurrent gradient
    producers cannot change the result; the lower triangle is mirrored at
    the end to make C exactly symmetric.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if G.shape[0] != w.shape[0]:
        raise ShapeMismatch(f"{G.shape[0]} gradient rows vs {w.shape[0]} weights")
    if abs(w.sum() - 1.0) > 1e-10:
        raise ToolkitError(f"weights sum to {w.sum()!r}, expected 1 +/- 1e-10")
    if not np.all(np.isfinite(G)):
        bad = int(np.argwhere(~np.isfinite(G))[0, 0])
        raise NonFinite(f"gradient row {bad} contains a non-finite entry")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    n = G.shape[1]
    C = np.zeros((n, n))
    for start in range(0, G.shape[0], chunk_size):
        Gc = G[start:start + chunk_size]
        wc = w[start:start + chunk_size]
        C += Gc.T @ (wc[:, None] * Gc)
    return np.tril(C) + np.tril(C, -1).T


def _check_symmetric(C) -> np.ndarray:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ShapeMismatch(f"matrix is {C.shape[0]} x {C.shape[1]}, expected square")
    scale = max(1.0, float(np.max(np.abs(C))) if C.size else 1.0)
    if float(np.max(np.abs(C - C.T))) > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric to 1e-10")
    return C


def eigendecompose(C):
    """Eigenpairs of a symmetric PSD matrix, eigenvalues descending.

    Each eigenvector is unit length with its largest-magnitude component
    positive (ties broken by lowest index). Eigenvalues negative within
    round-off are clamped to zero; anything more negative raises.
    """
    C = _check_symmetric(C)
    lam, U = np.linalg.eigh(0.5 * (C + C.T))
    lam = lam[::-1].copy()
    U = U[:, ::-1]
    clamp = max(1e-12, 1e-12 * max(lam[0], 0.0))
    if lam[-1] < -clamp:
        raise NotPositiveSemidefinite(
            f"eigenvalue {lam[-1]:.6e} below -{clamp:.1e}; matrix is not PSD"
        )
    np.clip(lam, 0.0, None, out=lam)
    return lam, normalize_column_signs(U)


def sensitivity_metrics(C) -> np.ndarray:
    """Mean squared partial derivatives per coordinate: the diagonal of C."""
    return np.diag(_check_symmetric(C)).copy()


def unique_groups(W, U, symbols=None):
    """Exponents Z = W U of the relevance-ordered groups, with descriptors.

    Column i of Z defines the group exp(z_i^T log q); the descriptor
    renders it as a product of powers with 3-decimal exponents.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if W.shape[1] != U.shape[0] or U.shape[0] != U.shape[1]:
        raise ShapeMismatch(f"W is {W.shape}, U is {U.shape}")
    n = W.shape[1]
    if float(np.max(np.abs(W.T @ W - np.eye(n)))) > 1e-8:
        raise ValueError("W must have orthonormal columns")
    if float(np.max(np.abs(U.T @ U - np.eye(n)))) > 1e-8:
        raise ValueError("U must be orthogonal")
    Z = W @ U
    if symbols is None:
        symbols = [f"q{i + 1}" for i in range(W.shape[0])]
    descriptors = [group_descriptor(Z[:, j], symbols) for j in range(n)]
    return Z, descriptors


def group_descriptor(z, symbols) -> str:
    terms = [
        f"{sym}^{e:.3f}" for sym, e in zip(symbols, z) if abs(e) >= 5e-4
    ]
    return " * ".join(terms) if terms else "1"


def express_in_classical(Z, W_classical):
    """Solve Z = W_classical E by least squares; returns (E, residual).

    The classical columns must span the same null space: a max-abs
    residual above 1e-6 raises SpanMismatch.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Wc = np.atleast_2d(np.asarray(W_classical, dtype=float))
    if Z.shape[0] != Wc.shape[0]:
        raise ShapeMismatch(f"Z has {Z.shape[0]} rows, classical basis has {Wc.shape[0]}")
    E, *_ = np.linalg.lstsq(Wc, Z, rcond=None)
    residual = float(np.max(np.abs(Wc @ E - Z)))
    if residual > 1e-6:
        raise SpanMismatch(
            f"groups leave the classical span: residual {residual:.3e} > 1e-6"
        )
    return E, residual


def rotation_angle(U) -> float:
    """Rotation, in degrees, read off a 2x2 eigenvector matrix.

    Defined as the arccosine of the (1,1) entry.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape != (2, 2):
        raise WrongDimension(f"rotation angle needs a 2x2 matrix, got {U.shape}")
    if float(np.max(np.abs(U.T @ U - np.eye(2)))) > 1e-8:
        raise ValueError("U must be orthogonal")
    return float(np.degrees(np.arccos(np.clip(U[0, 0], -1.0, 1.0))))


def subspace_distance(U1, U2, k: int) -> float:
    """Spectral norm of the difference of the two rank-k projectors; in [0, 1]."""
    U1 = np.atleast_2d(np.asarray(U1, dtype=float))
    U2 = np.atleast_2d(np.asarray(U2, dtype=float))
    if U1.shape != U2.shape:
        raise ShapeMismatch(f"bases differ in shape: {U1.shape} vs {U2.shape}")
    if not 1 <= k <= U1.shape[1]:
        raise ShapeMismatch(f"k = {k} outside [1, {U1.shape[1]}]")
    P1 = U1[:, :k] @ U1[:, :k].T
    P2 = U2[:, :k] @ U2[:, :k].T
    return float(np.linalg.norm(P1 - P2, 2))


def eigen_gap(eigenvalues) -> float:
    """Smallest consecutive gap, relative to the leading eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < 2 or lam[0] <= 0.0:
        return np.inf if lam.size < 2 else 0.0
    return float(np.min(lam[:-1] - lam[1:]) / lam[0])


@dataclass(frozen=True)
class SubspaceResult:
    """Eigen-structure of C plus the unique-group exponents Z = W U."""

    C: np.ndarray
    eigenvalues: np.ndarray
    U: np.ndarray
    Z: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return eigen_gap(self.eigenvalues) < EIGEN_GAP_RTOL

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "eigenvalues": self.eigenvalues,
            "U": self.U,
            "Z": self.Z,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return jsonio.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SubspaceResult":
        return cls(
            C=np.asarray(doc["C"], dtype=float),
            eigenvalues=np.asarray(doc["eigenvalues"], dtype=float),
            U=np.asarray(doc["U"], dtype=float),
            Z=np.asarray(doc["Z"], dtype=float),
            metadata=dict(doc.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "SubspaceResult":
        return cls.from_dict(json.loads(text))


def result_to_csv(result: SubspaceResult, symbols, path) -> None:
    """Exponent table: one row per variable, one column per group, then
    an eigenvalue row; exponents carry 3 decimals."""
    Z = result.Z
    if len(symbols) != Z.shape[0]:
        raise ShapeMismatch(f"{len(symbols)} symbols for {Z.shape[0]} exponent rows")
    cols = ",".join(f"z_{j + 1}" for j in range(Z.shape[1]))
    lines = [f"variable,{cols}"]
    for sym, row in zip(symbols, Z):
        lines.append(sym + "," + ",".join(f"{v:.3f}" for v in row))
    lines.append("eigenvalue," + ",".join(f"{v:.2e}" for v in result.eigenvalues))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
