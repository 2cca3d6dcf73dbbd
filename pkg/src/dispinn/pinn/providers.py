"""Residual providers: the boundary between networks and forward solvers.

A provider evaluates the stacked discretized residual of the network
outputs over its configured evaluation points and can produce the sparse
Jacobian of that residual. Graph-attached providers additionally implement
an analytic vector-Jacobian product so the physics loss can be
backpropagated exactly; detached providers exchange plain values only,
which is the contract an out-of-process solver would satisfy.
"""

from __future__ import annotations

import numpy as np

from .. import dynamics, linalg
from ..dynamics import BurgersConfig, ForcingSeries, ReducedBurgers, RigidBodyParams
from ..errors import ConfigError, ShapeError
from .jacobian import JacobianMatrix, fd_jacobian


class ResidualProvider:
    """Base class fixing the provider interface.

    Subclasses set ``n_rows`` (expected output rows), ``out_dim``,
    ``row_offset`` (global time step of output row 0), ``n_eqn``
    (number of evaluation points) and implement ``residual``.
    """

    graph_attached = True
    n_rows: int
    out_dim: int
    row_offset: int
    n_eqn: int

    def residual(self, outputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def residual_vjp(self, outputs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, outputs: np.ndarray, epoch_stamp: int = -1) -> JacobianMatrix:
        return fd_jacobian(self.residual, outputs, epoch_stamp=epoch_stamp)

    def _check(self, outputs: np.ndarray) -> np.ndarray:
        outputs = np.asarray(outputs, dtype=float)
        if outputs.shape != (self.n_rows, self.out_dim):
            raise ShapeError(
                f"outputs {outputs.shape} != expected {(self.n_rows, self.out_dim)}"
            )
        return outputs

    def _rows(self, steps: np.ndarray) -> np.ndarray:
        rows = steps - self.row_offset
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise ConfigError(
                "evaluation points reach outside the rows covered by the network"
            )
        return rows


class DetachedProvider:
    """Value-only facade over a provider: residuals and Jacobians pass
    through, the analytic gradient path is hidden."""

    graph_attached = False

    def __init__(self, inner: ResidualProvider):
        self._inner = inner
        self.n_rows = inner.n_rows
        self.out_dim = inner.out_dim
        self.row_offset = inner.row_offset
        self.n_eqn = inner.n_eqn

    def residual(self, outputs: np.ndarray) -> np.ndarray:
        return np.array(self._inner.residual(outputs))

    def jacobian(self, outputs: np.ndarray, epoch_stamp: int = -1) -> JacobianMatrix:
        return fd_jacobian(self.residual, outputs, epoch_stamp=epoch_stamp)


def detach(provider: ResidualProvider) -> DetachedProvider:
    return DetachedProvider(provider)


def assemble_residuals(outputs: np.ndarray, provider) -> np.ndarray:
    """Stacked residual of the network outputs over the provider's
    evaluation points."""
    return provider.residual(outputs)


# ---------------------------------------------------------------------------
# Burgers, full order
# ---------------------------------------------------------------------------

def _conv_vjp_full(cfg: BurgersConfig, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(d convective / d u)^T w, rowwise over stacked states."""
    out = np.zeros_like(u)
    ui = u[:, 1:-1]
    wi = w[:, 1:-1]
    if cfg.stencil == "standard_upwind":
        out[:, 1:-1] += -(2.0 * ui - u[:, :-2]) / cfg.dx * wi
        out[:, :-2] += ui / cfg.dx * wi
    else:
        out[:, 1:-1] += (u[:, 2:] - 2.0 * ui) / cfg.dx * wi
        out[:, 2:] += ui / cfg.dx * wi
    return out


class BurgersProvider(ResidualProvider):
    """Full-order Burgers residual over chosen step pairs.

    ``pairs`` lists the older step n of each (n, n+1) evaluation pair in
    global time indices; outputs must cover both members of every pair.
    """

    def __init__(self, cfg: BurgersConfig, pairs, n_rows: int, row_offset: int = 0):
        self.cfg = cfg
        self.out_dim = cfg.n_x
        self.n_rows = int(n_rows)
        self.row_offset = int(row_offset)
        pairs = np.asarray(pairs, dtype=int)
        if len(np.unique(pairs)) != len(pairs):
            raise ConfigError("evaluation pairs must be distinct")
        self.pairs = pairs
        self.n_eqn = len(pairs)
        self._rows_n = self._rows(pairs)
        self._rows_np1 = self._rows(pairs + 1)
        self._diffusion = dynamics.diffusion_matrix(cfg)

    def residual(self, outputs: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        u_n = y[self._rows_n]
        u_np1 = y[self._rows_np1]
        r = (u_np1 - u_n) / self.cfg.dt - dynamics.stencil_rhs(self.cfg, u_n)
        r[:, 0] = r[:, -1] = 0.0
        return r.ravel()

    def residual_vjp(self, outputs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        g = np.asarray(upstream, dtype=float).reshape(self.n_eqn, self.cfg.n_x).copy()
        g[:, 0] = g[:, -1] = 0.0
        u_n = y[self._rows_n]
        dy = np.zeros_like(y)
        dy[self._rows_np1] += g / self.cfg.dt
        dy[self._rows_n] += (
            -g / self.cfg.dt - _conv_vjp_full(self.cfg, u_n, g) - g @ self._diffusion
        )
        return dy


# ---------------------------------------------------------------------------
# Burgers, reduced order (Galerkin or hyper-reduced)
# ---------------------------------------------------------------------------

class ReducedBurgersProvider(ResidualProvider):
    """Reduced Burgers residual; outputs are reduced coordinates."""

    def __init__(self, reduced: ReducedBurgers, pairs, n_rows: int, row_offset: int = 0):
        self.reduced = reduced
        self.cfg = reduced.cfg
        self.out_dim = reduced.n_modes
        self.n_rows = int(n_rows)
        self.row_offset = int(row_offset)
        pairs = np.asarray(pairs, dtype=int)
        if len(np.unique(pairs)) != len(pairs):
            raise ConfigError("evaluation pairs must be distinct")
        self.pairs = pairs
        self.n_eqn = len(pairs)
        self._rows_n = self._rows(pairs)
        self._rows_np1 = self._rows(pairs + 1)

    def residual(self, outputs: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        u_n = y[self._rows_n]
        u_np1 = y[self._rows_np1]
        r = (u_np1 - u_n) / self.cfg.dt - dynamics.reduced_rhs(self.reduced, u_n)
        return r.ravel()

    def residual_vjp(self, outputs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        red = self.reduced
        g = np.asarray(upstream, dtype=float).reshape(self.n_eqn, self.out_dim)
        u_hat = y[self._rows_n]
        dy = np.zeros_like(y)
        dy[self._rows_np1] += g / self.cfg.dt
        d_n = -g / self.cfg.dt - g @ red.a_r
        if red.hyper is None:
            u_full = u_hat @ red.basis.modes.T
            d_n -= _conv_vjp_full(self.cfg, u_full, g @ red.basis.modes.T) @ red.basis.modes
        else:
            d_n -= self._sampled_conv_vjp(u_hat, g)
        dy[self._rows_n] += d_n
        return dy

    def _sampled_conv_vjp(self, u_hat: np.ndarray, g: np.ndarray) -> np.ndarray:
        red = self.reduced
        cfg = self.cfg
        modes_c, modes_m, modes_p = red.modes_center, red.modes_left, red.modes_right
        u_c = u_hat @ modes_c.T
        w = (g @ red.hyper.projector) * red.interior
        if cfg.stencil == "standard_upwind":
            u_m = u_hat @ modes_m.T
            d_c = -(2.0 * u_c - u_m) / cfg.dx * w
            return d_c @ modes_c + (u_c / cfg.dx * w) @ modes_m
        u_p = u_hat @ modes_p.T
        d_c = (u_p - 2.0 * u_c) / cfg.dx * w
        return d_c @ modes_c + (u_c / cfg.dx * w) @ modes_p


# ---------------------------------------------------------------------------
# rigid body
# ---------------------------------------------------------------------------

class RigidBodyProvider(ResidualProvider):
    """Pitch-plunge residual evaluated on (h, alpha) network outputs.

    The network predicts the displacement pair only; the velocities the
    first-order residual needs are reconstructed with the same two-step
    backward difference the residual itself uses, under which the velocity
    identity rows vanish exactly. What remains per evaluation point are
    the two force-balance rows, which touch the five newest displacement
    states. ``newest`` lists the newest global step of each evaluation
    point; a marched trajectory satisfies these rows exactly once every
    state in the stencil was produced by the two-step scheme (newest step
    at least 4).
    """

    STENCIL_DEPTH = 5

    def __init__(
        self,
        params: RigidBodyParams,
        forcing: ForcingSeries,
        newest,
        n_rows: int,
        row_offset: int = 0,
    ):
        self.params = params
        self.out_dim = 2
        self.n_rows = int(n_rows)
        self.row_offset = int(row_offset)
        newest = np.asarray(newest, dtype=int)
        if len(np.unique(newest)) != len(newest):
            raise ConfigError("evaluation points must be distinct")
        if newest.size and newest.min() < self.STENCIL_DEPTH - 1:
            raise ConfigError(
                "rigid-body residual needs four earlier states; the newest "
                f"step must be at least {self.STENCIL_DEPTH - 1}"
            )
        self.newest = newest
        self.n_eqn = len(newest)
        dtau = params.dtau
        self._gamma = np.array([9.0, -24.0, 22.0, -8.0, 1.0]) / (4.0 * dtau**2)
        m, k, _ = dynamics.rigid_body_assemble(params)
        self._minv_k = linalg.lu_solve(m, k)
        m_fac = linalg.LuFactor(m)
        forces = params.force_coeff * np.stack([-forcing.cl, -2.0 * forcing.cm])
        self._b = m_fac.solve(forces).T  # step x 2
        if newest.size and newest.max() >= self._b.shape[0]:
            raise ConfigError("forcing series shorter than the evaluation points")
        self._row_sets = [self._rows(newest - k) for k in range(self.STENCIL_DEPTH)]

    def residual(self, outputs: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        r = -self._b[self.newest]
        for k in range(self.STENCIL_DEPTH):
            r = r + self._gamma[k] * y[self._row_sets[k]]
        r = r + y[self._row_sets[0]] @ self._minv_k.T
        return r.ravel()

    def residual_vjp(self, outputs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        y = self._check(outputs)
        g = np.asarray(upstream, dtype=float).reshape(self.n_eqn, 2)
        dy = np.zeros_like(y)
        for k in range(self.STENCIL_DEPTH):
            dy[self._row_sets[k]] += self._gamma[k] * g
        dy[self._row_sets[0]] += g @ self._minv_k
        return dy
