"""Direct and iterative solvers for the SPD systems of the time stepper.

Cholesky (factor once per grid, reuse for every right-hand side) is the
default route; hand-written preconditioned conjugate gradients is the
independent second route used for cross-checks and for large systems.
Dense eigendecomposition and the A^{-1} dual norm back the stability
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import cho_solve

__all__ = [
    "NotSpdError",
    "SolverError",
    "SpdFactorization",
    "SpectralDecomposition",
    "cholesky",
    "cg_solve",
    "eigendecompose",
    "dual_norm",
    "energy_norm",
]


class NotSpdError(ValueError):
    """The matrix handed to a solver is not symmetric positive definite."""


class SolverError(RuntimeError):
    """Iterative solve failed; ``residual`` holds the relative residual reached."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpdFactorization:
    """Lower-triangular Cholesky factor G with M = G G^T."""

    lower: np.ndarray

    @property
    def size(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.lower, True), np.asarray(b, dtype=float))


def cholesky(mat: np.ndarray) -> SpdFactorization:
    """Factor a dense SPD matrix; a non-positive pivot signals an assembly bug."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = np.max(np.abs(mat))
    if scale > 0 and np.max(np.abs(mat - mat.T)) > 1e-12 * scale:
        raise NotSpdError("matrix is not symmetric")
    try:
        lower = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"matrix is not positive definite: {exc}") from exc
    return SpdFactorization(lower=lower)


def cg_solve(
    apply_op: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-12,
    maxit: Optional[int] = None,
    precond: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Conjugate gradients on an SPD operator given as a matvec closure.

    Converges when the relative residual ||b - Mx|| / ||b|| drops below
    ``tol``; ``precond`` is an optional diagonal (Jacobi) preconditioner.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    if maxit is None:
        maxit = 10 * b.size
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b)

    x = np.zeros_like(b)
    r = b.copy()
    z = r / precond if precond is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxit):
        ap = apply_op(p)
        alpha = rz / float(p @ ap)
        if not np.isfinite(alpha):
            raise SolverError("cg diverged: non-finite step", residual=float("nan"))
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r)) / norm_b
        if not np.isfinite(res):
            raise SolverError("cg diverged: non-finite residual", residual=res)
        if res <= tol:
            return x
        z = r / precond if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - apply_op(x))) / norm_b
    raise SolverError(f"cg: tolerance {tol:.1e} not reached in {maxit} iterations "
                      f"(residual {res:.3e})", residual=res)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues ascending and orthonormal eigenvectors (columns of q)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def eigendecompose(mat: np.ndarray, tol: float = 1e-10) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition, validated against its residuals.

    Desk-scale diagnostic path: refuses matrices larger than 1024.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n > 1024:
        raise ValueError(f"eigendecompose is a desk-scale diagnostic, got size {n}")
    lam, q = np.linalg.eigh(mat)
    resid = np.linalg.norm(mat @ q - q * lam, axis=0)
    if np.any(resid > tol * np.maximum(np.abs(lam), 1e-300)):
        worst = float(np.max(resid / np.maximum(np.abs(lam), 1e-300)))
        raise SolverError(f"eigendecomposition residual {worst:.3e} exceeds {tol:.1e}")
    ortho = np.max(np.abs(q.T @ q - np.eye(n)))
    if ortho > 1e-12:
        raise SolverError(f"eigenvectors not orthonormal to 1e-12 (got {ortho:.3e})")
    return SpectralDecomposition(eigenvalues=lam, eigenvectors=q)


def dual_norm(a: Union[np.ndarray, SpdFactorization], v: np.ndarray) -> float:
    """Dual norm ||v||_{A^{-1}} = sqrt(<A^{-1} v, v>) via one SPD solve.

    Accepts the dense matrix or a prebuilt factorization (cheaper in loops).
    """
    factor = a if isinstance(a, SpdFactorization) else cholesky(a)
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(factor.solve(v) @ v, 0.0)))


def energy_norm(apply_a: Callable[[np.ndarray], np.ndarray], v: np.ndarray) -> float:
    """Energy norm ||v||_A = sqrt(<A v, v>) for an SPD operator action."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(apply_a(v) @ v, 0.0)))
