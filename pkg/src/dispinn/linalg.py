"""Dense linear algebra kernels: products, pivoted LU solves, one-sided
Jacobi SVD, and CSV matrix interchange.

Matrices are plain 2-D float64 numpy arrays in C (row-major) order; that
layout is assumed everywhere in this package. The SVD is a one-sided Jacobi
iteration, which is accurate and fully deterministic at the problem sizes
used here (up to a few hundred columns).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, ShapeError, SingularMatrixError

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
PIVOT_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array with finite entries."""
    out = np.ascontiguousarray(a, dtype=float)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


class SvdResult(NamedTuple):
    """Factorization a = left @ diag(singulars) @ right.T.

    ``left`` and ``right`` have orthonormal columns and ``singulars`` is
    sorted in nonincreasing order.
    """

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray


def matmul(a, b) -> np.ndarray:
    """Matrix product with shape validation.

    Summation order is fixed by the backend for given shapes, so repeated
    calls on identical inputs are bit-identical.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


class LuFactor:
    """LU factorization with partial pivoting, reusable across solves.

    Accepts real or complex square input. Raises SingularMatrixError when a
    pivot falls below ``PIVOT_RTOL * max|a|``.
    """

    def __init__(self, a):
        a = np.array(a, order="C")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"LU requires a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix contains non-finite entries")
        n = a.shape[0]
        lu = a.astype(complex if np.iscomplexobj(a) else float)
        perm = np.arange(n)
        threshold = PIVOT_RTOL * np.abs(lu).max() if n else 0.0
        for k in range(n):
            p = k + int(np.argmax(np.abs(lu[k:, k])))
            if np.abs(lu[p, k]) <= threshold:
                raise SingularMatrixError(
                    f"pivot {abs(lu[p, k]):.3e} below threshold {threshold:.3e} "
                    f"at column {k}"
                )
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                perm[[k, p]] = perm[[p, k]]
            lu[k + 1 :, k] /= lu[k, k]
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
        self.lu = lu
        self.perm = perm
        self.n = n

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.n:
            raise ShapeError(f"rhs length {b.shape[0]} != system size {self.n}")
        x = b[self.perm].astype(self.lu.dtype)
        for k in range(1, self.n):  # forward: L y = P b
            x[k] -= self.lu[k, :k] @ x[:k]
        for k in range(self.n - 1, -1, -1):  # backward: U x = y
            x[k] -= self.lu[k, k + 1 :] @ x[k + 1 :]
            x[k] /= self.lu[k, k]
        return x


def lu_solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` for square nonsingular ``a`` via pivoted LU."""
    return LuFactor(a).solve(np.asarray(b, dtype=float))


def _complete_orthonormal(u: np.ndarray, start: int) -> None:
    """Fill columns ``start:`` of ``u`` with unit vectors orthogonal to the
    earlier columns (deterministic: sweeps canonical basis vectors)."""
    m, n = u.shape
    col = start
    for k in range(m):
        if col == n:
            return
        cand = np.zeros(m)
        cand[k] = 1.0
        cand -= u[:, :col] @ (u[:, :col].T @ cand)
        cand -= u[:, :col] @ (u[:, :col].T @ cand)  # second pass for stability
        norm = np.linalg.norm(cand)
        if norm > 0.5:
            u[:, col] = cand / norm
            col += 1
    if col < n:
        raise ConvergenceError("could not complete an orthonormal basis")


def svd(a) -> SvdResult:
    """One-sided Jacobi SVD.

    Rotates column pairs of ``a`` (or of its transpose when cols > rows)
    until all pairs are mutually orthogonal to relative tolerance
    ``JACOBI_TOL``, then reads off singular values as column norms. Raises
    ConvergenceError after ``JACOBI_MAX_SWEEPS`` sweeps.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    if m < n:
        flipped = svd(a.T)
        return SvdResult(flipped.right, flipped.singulars, flipped.left)

    scale = np.abs(a).max()  # prescale so column dot products cannot underflow
    b = a / scale if scale > 0.0 else a.copy()
    v = np.eye(n)
    for sweep in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = b[:, p] @ b[:, p]
                beta = b[:, q] @ b[:, q]
                gamma = b[:, p] @ b[:, q]
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= JACOBI_TOL * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                bp = b[:, p].copy()
                b[:, p] = c * bp - s * b[:, q]
                b[:, q] = s * bp + c * b[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )

    bnorms = np.linalg.norm(b, axis=0)
    order = np.argsort(-bnorms, kind="stable")
    bnorms = bnorms[order]
    b = b[:, order]
    v = v[:, order]
    u = np.zeros_like(b)
    # Columns whose norm is at roundoff level relative to the largest one
    # carry no usable direction; zero them and complete the basis instead.
    rank_tol = bnorms[0] * np.finfo(float).eps * max(m, n) if n else 0.0
    rank = 0
    for j in range(n):
        if bnorms[j] > rank_tol:
            u[:, j] = b[:, j] / bnorms[j]
            rank = j + 1
        else:
            bnorms[j] = 0.0
    _complete_orthonormal(u, rank)
    singulars = bnorms * (scale if scale > 0.0 else 1.0)
    return SvdResult(u, singulars, v)


def save_matrix_csv(path, a) -> None:
    """Write a matrix as CSV: one row per line, '.' decimal, no header."""
    a = as_matrix(a, "matrix")
    np.savetxt(path, a, fmt="%.17g", delimiter=",")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_csv`."""
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2), "matrix")
