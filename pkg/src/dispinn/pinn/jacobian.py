"""Sparse residual Jacobians probed by central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import JacobianError


@dataclass
class JacobianMatrix:
    """Sparse d(residual)/d(outputs) in coordinate form.

    ``shape`` is (residual entries, flattened output entries);
    ``epoch_stamp`` records the epoch of the last refresh in detached
    training.
    """

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple[int, int]
    epoch_stamp: int = field(default=-1)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def vjp(self, residual_weights: np.ndarray) -> np.ndarray:
        """J^T r as a flat vector over the outputs."""
        r = np.asarray(residual_weights, dtype=float).ravel()
        return np.bincount(
            self.cols, weights=self.vals * r[self.rows], minlength=self.shape[1]
        )

    def matvec(self, delta: np.ndarray) -> np.ndarray:
        """J d for a flat output perturbation d."""
        d = np.asarray(delta, dtype=float).ravel()
        return np.bincount(
            self.rows, weights=self.vals * d[self.cols], minlength=self.shape[0]
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out


def fd_jacobian(
    residual_fn,
    y: np.ndarray,
    rel_step: float = 1e-6,
    epoch_stamp: int = -1,
) -> JacobianMatrix:
    """Probe a residual callable column by column with central differences.

    Step size is ``rel_step * max(1, |y_j|)`` per column. Entries that come
    out exactly zero (outputs the residual never touches produce bitwise
    identical evaluations) are dropped, which recovers the stencil sparsity
    pattern without it being declared up front.
    """
    y = np.asarray(y, dtype=float)
    base_shape = y.shape
    flat = y.ravel().copy()
    n_out = flat.size
    r0 = np.asarray(residual_fn(flat.reshape(base_shape)), dtype=float).ravel()
    n_res = r0.size
    rows_acc, cols_acc, vals_acc = [], [], []
    for j in range(n_out):
        h = rel_step * max(1.0, abs(flat[j]))
        orig = flat[j]
        flat[j] = orig + h
        up = np.asarray(residual_fn(flat.reshape(base_shape)), dtype=float).ravel()
        flat[j] = orig - h
        down = np.asarray(residual_fn(flat.reshape(base_shape)), dtype=float).ravel()
        flat[j] = orig
        col = (up - down) / (2.0 * h)
        if not np.all(np.isfinite(col)):
            raise JacobianError(f"non-finite residual while probing column {j}")
        nz = np.nonzero(col)[0]
        if nz.size:
            rows_acc.append(nz)
            cols_acc.append(np.full(nz.size, j))
            vals_acc.append(col[nz])
    if rows_acc:
        rows = np.concatenate(rows_acc)
        cols = np.concatenate(cols_acc)
        vals = np.concatenate(vals_acc)
    else:
        rows = np.zeros(0, dtype=int)
        cols = np.zeros(0, dtype=int)
        vals = np.zeros(0)
    return JacobianMatrix(
        rows=rows, cols=cols, vals=vals, shape=(n_res, n_out), epoch_stamp=epoch_stamp
    )
