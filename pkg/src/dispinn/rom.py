"""POD basis construction, projection error reporting, and DEIM
hyper-reduction (greedy index selection plus operator assembly)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .errors import ConfigError, ShapeError, SingularMatrixError


@dataclass(frozen=True)
class SnapshotSet:
    """Solution snapshots, one column per time instant.

    ``data`` is N x (m * n_t) with contiguous column blocks per parameter
    label; ``grid`` holds spatial coordinates when the state is a field.
    """

    data: np.ndarray
    dt: float
    grid: np.ndarray | None = None
    labels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "data", linalg.as_matrix(self.data, "snapshots"))

    @property
    def n_dof(self) -> int:
        return self.data.shape[0]

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PodBasis:
    """Truncated orthonormal spatial basis with its retained spectrum."""

    modes: np.ndarray  # N x n, orthonormal columns
    singulars: np.ndarray  # retained sigma_1..sigma_n
    discarded_energy: float  # sum of discarded sigma_i^2

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def project(self, full: np.ndarray) -> np.ndarray:
        """Reduced coordinates of full-order columns (N x k -> n x k)."""
        return self.modes.T @ full

    def lift(self, reduced: np.ndarray) -> np.ndarray:
        """Full-order reconstruction of reduced columns (n x k -> N x k)."""
        return self.modes @ reduced


@dataclass(frozen=True)
class DeimOperator:
    """Precomputed interpolation operator for a nonlinear term.

    ``projector`` is (basis modes)^T Phi_h (P^T Phi_h)^{-1}, applied to the
    nonlinear term sampled at ``indices``. ``sample_stencil`` lists every
    grid index needed to evaluate the term at the sampled rows.
    """

    indices: np.ndarray  # m_h distinct grid indices
    modes: np.ndarray  # N x m_h nonlinear-term basis
    projector: np.ndarray  # n x m_h
    sample_stencil: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    @property
    def n_samples(self) -> int:
        return len(self.indices)


def compute_pod(
    snapshots: SnapshotSet,
    n_modes: int | None = None,
    energy_fraction: float | None = None,
) -> PodBasis:
    """Extract the leading left singular vectors of the snapshot matrix.

    Exactly one of ``n_modes`` and ``energy_fraction`` selects the
    truncation; with ``energy_fraction`` e the smallest k is chosen such
    that the retained squared singular values cover a fraction e of the
    total.
    """
    if (n_modes is None) == (energy_fraction is None):
        raise ConfigError("select the basis size with n_modes or energy_fraction, not both")
    u = snapshots.data
    if not np.any(u):
        raise ConfigError("snapshot matrix is identically zero; POD is undefined")
    res = linalg.svd(u)
    energies = res.singulars**2
    total = float(energies.sum())
    if n_modes is not None:
        if not 1 <= n_modes <= len(res.singulars):
            raise ConfigError(
                f"n_modes={n_modes} outside 1..{len(res.singulars)} for these snapshots"
            )
        n = int(n_modes)
    else:
        if not 0.0 < energy_fraction <= 1.0:
            raise ConfigError(f"energy_fraction={energy_fraction} outside (0, 1]")
        cumulative = np.cumsum(energies) / total
        n = int(np.searchsorted(cumulative, energy_fraction - 1e-15) + 1)
        n = min(n, len(res.singulars))
    return PodBasis(
        modes=res.left[:, :n].copy(),
        singulars=res.singulars[:n].copy(),
        discarded_energy=float(energies[n:].sum()),
    )


def reconstruction_error(basis: PodBasis, snapshots: SnapshotSet) -> tuple[float, float]:
    """Errors of the rank-n projection of the snapshots onto the basis.

    Returns ``(max_abs, frobenius_rel)``: the largest entrywise deviation
    and the Frobenius norm of the deviation relative to the snapshot norm.
    """
    u = snapshots.data
    if basis.modes.shape[0] != u.shape[0]:
        raise ShapeError(
            f"basis has {basis.modes.shape[0]} dofs, snapshots have {u.shape[0]}"
        )
    recon = basis.lift(basis.project(u))
    diff = u - recon
    norm = np.linalg.norm(u, "fro")
    if norm == 0.0:
        raise ConfigError("snapshot matrix is identically zero")
    return float(np.abs(diff).max()), float(np.linalg.norm(diff, "fro") / norm)


def deim_select(nonlinear_modes: np.ndarray) -> np.ndarray:
    """Greedy interpolation-index selection.

    The first index maximizes |first mode|; each later index maximizes the
    magnitude of the residual between the next mode and its interpolation
    on the indices chosen so far. Ties break toward the lowest index.
    """
    phi = linalg.as_matrix(nonlinear_modes, "nonlinear_modes")
    n_rows, m = phi.shape
    if m == 0 or m > n_rows:
        raise ShapeError(f"cannot pick {m} interpolation indices from {n_rows} rows")
    indices = np.empty(m, dtype=int)
    indices[0] = int(np.argmax(np.abs(phi[:, 0])))
    for k in range(1, m):
        sub = phi[indices[:k], :k]
        try:
            coeff = linalg.lu_solve(sub, phi[indices[:k], k])
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"interpolation matrix became singular after {k} indices"
            ) from exc
        resid = phi[:, k] - phi[:, :k] @ coeff
        indices[k] = int(np.argmax(np.abs(resid)))
        if indices[k] in indices[:k]:
            raise SingularMatrixError(
                f"greedy selection repeated index {indices[k]} at step {k}"
            )
    return indices


def build_deim_operator(
    basis: PodBasis,
    nonlinear_snapshots: SnapshotSet,
    m_h: int,
    stencil_halo: int = 1,
) -> DeimOperator:
    """Assemble the hyper-reduction operator from nonlinear-term snapshots.

    The nonlinear-term basis is the ``m_h``-mode POD of the snapshots; the
    projector maps term samples at the selected indices into reduced space.
    ``stencil_halo`` widens the sampled index set so a local stencil can be
    evaluated at every sampled row.
    """
    res = linalg.svd(nonlinear_snapshots.data)
    rank = int(np.sum(res.singulars > res.singulars[0] * 1e-12)) if len(res.singulars) else 0
    if m_h > rank:
        raise ConfigError(
            f"m_h={m_h} exceeds nonlinear snapshot rank {rank}"
        )
    phi_h = res.left[:, :m_h].copy()
    indices = deim_select(phi_h)
    interp = linalg.lu_solve(
        phi_h[indices],
        np.eye(m_h),
    )
    projector = basis.modes.T @ phi_h @ interp
    n_rows = phi_h.shape[0]
    halo = np.concatenate(
        [indices + off for off in range(-stencil_halo, stencil_halo + 1)]
    )
    stencil = np.unique(np.clip(halo, 0, n_rows - 1))
    return DeimOperator(
        indices=indices, modes=phi_h, projector=projector, sample_stencil=stencil
    )


def deim_reconstruct(op: DeimOperator, values: np.ndarray) -> np.ndarray:
    """Interpolate a full-order vector from its entries at ``op.indices``
    back onto the nonlinear-term basis (used by exactness checks)."""
    coeff = linalg.lu_solve(op.modes[op.indices], values[op.indices])
    return op.modes @ coeff


def save_basis(directory, basis: PodBasis, name: str = "basis") -> None:
    """Persist a basis as a CSV matrix plus a small metadata file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    linalg.save_matrix_csv(directory / f"{name}_modes.csv", basis.modes)
    linalg.save_matrix_csv(directory / f"{name}_singulars.csv", basis.singulars[None, :])
    meta = configparser.ConfigParser()
    meta["basis"] = {
        "n_modes": str(basis.n_modes),
        "discarded_energy": repr(basis.discarded_energy),
    }
    with open(directory / f"{name}.ini", "w") as fh:
        meta.write(fh)


def load_basis(directory, name: str = "basis") -> PodBasis:
    directory = Path(directory)
    meta = configparser.ConfigParser()
    if not meta.read(directory / f"{name}.ini"):
        raise ConfigError(f"missing basis metadata {directory / (name + '.ini')}")
    modes = linalg.load_matrix_csv(directory / f"{name}_modes.csv")
    singulars = linalg.load_matrix_csv(directory / f"{name}_singulars.csv")[0]
    return PodBasis(
        modes=modes,
        singulars=singulars,
        discarded_energy=float(meta["basis"]["discarded_energy"]),
    )


def save_deim(directory, op: DeimOperator, name: str = "deim") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    linalg.save_matrix_csv(directory / f"{name}_modes.csv", op.modes)
    linalg.save_matrix_csv(directory / f"{name}_projector.csv", op.projector)
    meta = configparser.ConfigParser()
    meta["deim"] = {
        "indices": ",".join(map(str, op.indices)),
        "sample_stencil": ",".join(map(str, op.sample_stencil)),
    }
    with open(directory / f"{name}.ini", "w") as fh:
        meta.write(fh)


def load_deim(directory, name: str = "deim") -> DeimOperator:
    directory = Path(directory)
    meta = configparser.ConfigParser()
    if not meta.read(directory / f"{name}.ini"):
        raise ConfigError(f"missing DEIM metadata {directory / (name + '.ini')}")
    indices = np.array([int(s) for s in meta["deim"]["indices"].split(",")])
    stencil = np.array([int(s) for s in meta["deim"]["sample_stencil"].split(",")])
    return DeimOperator(
        indices=indices,
        modes=linalg.load_matrix_csv(directory / f"{name}_modes.csv"),
        projector=linalg.load_matrix_csv(directory / f"{name}_projector.csv"),
        sample_stencil=stencil,
    )
