"""Forward finite-difference solvers and residual operators.

Two benchmark problems: a 2-dof pitch-plunge rigid body marched with an
implicit second-order backward scheme, and a 1-D viscous Burgers equation
marched explicitly. Residuals are available in full order and, for
Burgers, in Galerkin-reduced and DEIM hyper-reduced form. Each residual
operator shares its stencil with the matching time stepper, so marched
trajectories have zero residual by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConfigError, InstabilityError, ShapeError, StabilityWarning
from .rom import DeimOperator, PodBasis, SnapshotSet

STENCILS = ("standard_upwind", "paper_exact")
IC_PROFILES = ("zero", "sine")


# ---------------------------------------------------------------------------
# rigid body
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidBodyParams:
    """Dimensionless structural parameters of the pitch-plunge oscillator.

    The mass matrix [[1, x_alpha], [x_alpha, r_alpha_sq]] must be positive
    definite, which requires r_alpha_sq > x_alpha**2. ``v_star`` is the
    reduced velocity; the force carries a factor v_star**2 / pi.
    """

    x_alpha: float = 0.25
    r_alpha_sq: float = 0.5
    omega_ratio: float = 0.5
    v_star: float = math.sqrt(math.pi)  # force coefficient v_star^2/pi = 1
    dtau: float = math.pi / 18
    n_steps: int = 1000

    def __post_init__(self):
        if self.r_alpha_sq <= self.x_alpha**2:
            raise ConfigError(
                f"mass matrix is singular or indefinite: r_alpha_sq={self.r_alpha_sq} "
                f"must exceed x_alpha^2={self.x_alpha ** 2}"
            )
        if self.dtau <= 0:
            raise ConfigError(f"dtau={self.dtau} must be positive")
        if self.n_steps < 3:
            raise ConfigError(f"n_steps={self.n_steps} too short for a two-step scheme")

    @property
    def force_coeff(self) -> float:
        return self.v_star**2 / math.pi


@dataclass(frozen=True)
class ForcingSeries:
    """Per-step lift and moment coefficient series of equal length."""

    cl: np.ndarray
    cm: np.ndarray

    def __post_init__(self):
        cl = np.asarray(self.cl, dtype=float)
        cm = np.asarray(self.cm, dtype=float)
        if cl.ndim != 1 or cl.shape != cm.shape:
            raise ShapeError(f"cl and cm must be equal-length 1-D, got {cl.shape} {cm.shape}")
        if not (np.all(np.isfinite(cl)) and np.all(np.isfinite(cm))):
            raise ValueError("forcing contains non-finite entries")
        object.__setattr__(self, "cl", cl)
        object.__setattr__(self, "cm", cm)

    def __len__(self) -> int:
        return len(self.cl)

    @classmethod
    def sinusoidal(
        cls,
        n_steps: int,
        dtau: float,
        cl_freq: float = 10.0,
        cm_freq: float = 20.0,
        omega_alpha: float = 100.0,
    ) -> "ForcingSeries":
        """sin(cl_freq * t) and sin(cm_freq * t) sampled on the tau grid,
        with dimensional time t = tau / omega_alpha."""
        t = np.arange(n_steps) * dtau / omega_alpha
        return cls(cl=np.sin(cl_freq * t), cm=np.sin(cm_freq * t))


@dataclass(frozen=True)
class Trajectory:
    """States stacked as columns, one per time instant."""

    states: np.ndarray  # dof x n_t
    times: np.ndarray  # n_t

    def __post_init__(self):
        if self.states.shape[1] != len(self.times):
            raise ShapeError(
                f"{self.states.shape[1]} state columns vs {len(self.times)} times"
            )

    @property
    def n_steps(self) -> int:
        return self.states.shape[1]


def rigid_body_assemble(params: RigidBodyParams):
    """Mass and stiffness matrices plus the 4x4 first-order companion
    operator [[0, -I], [M^-1 K, 0]] acting on [h, alpha, h', alpha']."""
    m = np.array([[1.0, params.x_alpha], [params.x_alpha, params.r_alpha_sq]])
    k = np.array([[params.omega_ratio**2, 0.0], [0.0, params.r_alpha_sq]])
    minv_k = linalg.lu_solve(m, k)
    a_aug = np.zeros((4, 4))
    a_aug[0:2, 2:4] = -np.eye(2)
    a_aug[2:4, 0:2] = minv_k
    return m, k, a_aug


def _force_vector(params: RigidBodyParams, forcing: ForcingSeries, idx: int) -> np.ndarray:
    return params.force_coeff * np.array([-forcing.cl[idx], -2.0 * forcing.cm[idx]])


def rigid_body_rhs(params: RigidBodyParams, forcing: ForcingSeries, idx: int) -> np.ndarray:
    """Inhomogeneous term [0, 0, M^-1 F] at time index ``idx``."""
    m, _, _ = rigid_body_assemble(params)
    b = np.zeros(4)
    b[2:4] = linalg.lu_solve(m, _force_vector(params, forcing, idx))
    return b


def rigid_body_march(
    params: RigidBodyParams, forcing: ForcingSeries, z0: np.ndarray
) -> Trajectory:
    """March the first-order system with the two-step backward scheme.

    Each step solves (3/(2 dtau) I + A) z_next = (4 z_n - z_{n-1})/(2 dtau)
    + b_next; the first step is bootstrapped with backward Euler because no
    earlier state exists.
    """
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (4,):
        raise ShapeError(f"initial state must be a 4-vector, got shape {z0.shape}")
    if len(forcing) < params.n_steps:
        raise ConfigError(
            f"forcing length {len(forcing)} shorter than n_steps {params.n_steps}"
        )
    m, _, a_aug = rigid_body_assemble(params)
    m_fac = linalg.LuFactor(m)
    dtau = params.dtau
    n_t = params.n_steps
    states = np.zeros((4, n_t))
    states[:, 0] = z0

    def rhs_vec(idx):
        b = np.zeros(4)
        b[2:4] = m_fac.solve(_force_vector(params, forcing, idx))
        return b

    euler = linalg.LuFactor(np.eye(4) / dtau + a_aug)
    states[:, 1] = euler.solve(states[:, 0] / dtau + rhs_vec(1))
    bdf2 = linalg.LuFactor(1.5 / dtau * np.eye(4) + a_aug)
    for n in range(1, n_t - 1):
        rhs = (4.0 * states[:, n] - states[:, n - 1]) / (2.0 * dtau) + rhs_vec(n + 1)
        states[:, n + 1] = bdf2.solve(rhs)
    if not np.all(np.isfinite(states)):
        raise InstabilityError("rigid body march produced non-finite states")
    return Trajectory(states=states, times=np.arange(n_t) * dtau)


def rigid_body_residual(
    params: RigidBodyParams,
    forcing: ForcingSeries,
    z_nm1: np.ndarray,
    z_n: np.ndarray,
    z_np1: np.ndarray,
    step_index: int,
) -> np.ndarray:
    """Two-step backward residual of the first-order system.

    ``step_index`` is the time index of the newest state ``z_np1`` and
    selects the forcing sample. Zero on trajectories produced by
    :func:`rigid_body_march` away from the bootstrap step.
    """
    z_nm1 = np.asarray(z_nm1, dtype=float)
    z_n = np.asarray(z_n, dtype=float)
    z_np1 = np.asarray(z_np1, dtype=float)
    for name, z in (("z_nm1", z_nm1), ("z_n", z_n), ("z_np1", z_np1)):
        if z.shape != (4,):
            raise ShapeError(f"{name} must be a 4-vector, got shape {z.shape}")
    _, _, a_aug = rigid_body_assemble(params)
    b = rigid_body_rhs(params, forcing, step_index)
    return (3.0 * z_np1 - 4.0 * z_n + z_nm1) / (2.0 * params.dtau) + a_aug @ z_np1 - b


def rigid_body_periodic_state(
    params: RigidBodyParams,
    cl_freq: float = 10.0,
    cm_freq: float = 20.0,
    omega_alpha: float = 100.0,
    tau: float = 0.0,
) -> np.ndarray:
    """State of the discrete steady (particular) response at time ``tau``.

    For each sinusoidal forcing component the complex amplitude Z of the
    discrete two-step recurrence satisfies
    ((3 - 4 e^{-i theta} + e^{-2 i theta}) / (2 dtau) I + A) Z = b_hat with
    theta = omega dtau. Starting the march from this state suppresses the
    slowly decaying free oscillations of the homogeneous system, so the
    trajectory is a function of the instantaneous forcing phase.
    """
    m, _, a_aug = rigid_body_assemble(params)
    z = np.zeros(4)
    for freq, amp in ((cl_freq, np.array([-1.0, 0.0])), (cm_freq, np.array([0.0, -2.0]))):
        omega = freq / omega_alpha  # per unit tau
        theta = omega * params.dtau
        shift = (3.0 - 4.0 * np.exp(-1j * theta) + np.exp(-2j * theta)) / (2.0 * params.dtau)
        b_hat = np.zeros(4, dtype=complex)
        b_hat[2:4] = linalg.lu_solve(m, params.force_coeff * amp)
        amp_c = linalg.LuFactor(shift * np.eye(4) + a_aug.astype(complex)).solve(b_hat)
        z += np.imag(amp_c * np.exp(1j * omega * tau))
    return z


@dataclass(frozen=True)
class MassSpringSetup:
    """Complete forced pitch-plunge scenario: parameters, sinusoidal
    forcing frequencies, and the named initial state."""

    params: RigidBodyParams = field(default_factory=RigidBodyParams)
    cl_freq: float = 10.0
    cm_freq: float = 20.0
    omega_alpha: float = 100.0
    initial_state: str = "periodic"  # or "zero"

    def __post_init__(self):
        if self.initial_state not in ("periodic", "zero"):
            raise ConfigError(f"initial_state={self.initial_state!r} not in (periodic, zero)")
        if self.omega_alpha <= 0:
            raise ConfigError(f"omega_alpha={self.omega_alpha} must be positive")

    def forcing(self) -> ForcingSeries:
        return ForcingSeries.sinusoidal(
            self.params.n_steps, self.params.dtau, self.cl_freq, self.cm_freq, self.omega_alpha
        )

    def initial(self) -> np.ndarray:
        if self.initial_state == "zero":
            return np.zeros(4)
        return rigid_body_periodic_state(
            self.params, self.cl_freq, self.cm_freq, self.omega_alpha
        )


# ---------------------------------------------------------------------------
# Burgers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BurgersConfig:
    """Grid, time step, viscosity, stencil choice, and IC/BC selection."""

    n_x: int = 20
    n_t: int = 100
    length: float = 1.0
    nu: float = 0.01
    dt: float = 0.01
    stencil: str = "standard_upwind"
    ic: str = "sine"
    ic_amplitude: float = 1.0
    bc: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n_x < 3:
            raise ConfigError(f"n_x={self.n_x} needs at least 3 grid points")
        if self.n_t < 2:
            raise ConfigError(f"n_t={self.n_t} needs at least 2 time instants")
        if self.length <= 0:
            raise ConfigError(f"length={self.length} must be positive")
        if self.dt <= 0:
            raise ConfigError(f"dt={self.dt} must be positive")
        if self.nu < 0:
            raise ConfigError(f"nu={self.nu} must be nonnegative")
        if self.stencil not in STENCILS:
            raise ConfigError(f"stencil={self.stencil!r} not in {STENCILS}")
        if self.ic not in IC_PROFILES:
            raise ConfigError(f"ic={self.ic!r} not in {IC_PROFILES}")
        u0 = self.initial_profile()
        number = self.dt * (np.abs(u0).max() / self.dx + 2.0 * self.nu / self.dx**2)
        if number > 1.0:
            warnings.warn(
                f"stability number {number:.3f} exceeds 1 on the initial condition",
                StabilityWarning,
                stacklevel=2,
            )

    @property
    def dx(self) -> float:
        return self.length / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_x)

    def initial_profile(self) -> np.ndarray:
        if self.ic == "zero":
            u0 = np.zeros(self.n_x)
        else:
            u0 = self.ic_amplitude * np.sin(np.pi * self.x / self.length)
        u0[0], u0[-1] = self.bc
        return u0


def convective_term(cfg: BurgersConfig, u: np.ndarray) -> np.ndarray:
    """Convection contribution to du/dt at interior points, zero at the
    boundaries. ``u`` may be a vector or a matrix of row-stacked states."""
    out = np.zeros_like(u)
    ui = u[..., 1:-1]
    if cfg.stencil == "standard_upwind":
        out[..., 1:-1] = -ui * (ui - u[..., :-2]) / cfg.dx
    else:  # verbatim printed form: forward difference, opposite sign
        out[..., 1:-1] = ui * (u[..., 2:] - ui) / cfg.dx
    return out


def diffusion_matrix(cfg: BurgersConfig) -> np.ndarray:
    """Linear diffusion operator with zeroed boundary rows, signed per the
    stencil convention."""
    n = cfg.n_x
    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx - 1] = 1.0
    d[idx, idx] = -2.0
    d[idx, idx + 1] = 1.0
    sign = 1.0 if cfg.stencil == "standard_upwind" else -1.0
    return sign * cfg.nu / cfg.dx**2 * d


def _diffusion_term(cfg: BurgersConfig, u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    lap = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / cfg.dx**2
    sign = 1.0 if cfg.stencil == "standard_upwind" else -1.0
    out[..., 1:-1] = sign * cfg.nu * lap
    return out


def stencil_rhs(cfg: BurgersConfig, u: np.ndarray) -> np.ndarray:
    """Discrete right-hand side so that the update is u + dt * rhs and the
    residual is (u_next - u)/dt - rhs; both sides share this function."""
    return convective_term(cfg, u) + _diffusion_term(cfg, u)


def burgers_step(cfg: BurgersConfig, u_n: np.ndarray) -> np.ndarray:
    """One explicit step; boundary values are reimposed afterwards."""
    u_n = np.asarray(u_n, dtype=float)
    if u_n.shape != (cfg.n_x,):
        raise ShapeError(f"state length {u_n.shape} != grid size {cfg.n_x}")
    if not (u_n[0] == cfg.bc[0] and u_n[-1] == cfg.bc[1]):
        raise ValueError("state boundary entries do not match the configured bc")
    with np.errstate(over="ignore", invalid="ignore"):
        u_next = u_n + cfg.dt * stencil_rhs(cfg, u_n)
    u_next[0], u_next[-1] = cfg.bc
    if not np.all(np.isfinite(u_next)):
        raise InstabilityError("explicit update produced non-finite values")
    return u_next


def burgers_residual(cfg: BurgersConfig, u_n: np.ndarray, u_np1: np.ndarray) -> np.ndarray:
    """Residual of one step pair; identically zero at boundary indices."""
    u_n = np.asarray(u_n, dtype=float)
    u_np1 = np.asarray(u_np1, dtype=float)
    if u_n.shape != (cfg.n_x,) or u_np1.shape != (cfg.n_x,):
        raise ShapeError("both states must have the grid size")
    r = (u_np1 - u_n) / cfg.dt - stencil_rhs(cfg, u_n)
    r[0] = r[-1] = 0.0
    return r


def burgers_march(cfg: BurgersConfig) -> Trajectory:
    """March the configured IC over n_t instants (column 0 is the IC)."""
    states = np.zeros((cfg.n_x, cfg.n_t))
    states[:, 0] = cfg.initial_profile()
    for n in range(cfg.n_t - 1):
        try:
            states[:, n + 1] = burgers_step(cfg, states[:, n])
        except InstabilityError as exc:
            raise InstabilityError(f"march went unstable at step {n + 1}") from exc
    return Trajectory(states=states, times=np.arange(cfg.n_t) * cfg.dt)


# ---------------------------------------------------------------------------
# reduced-order Burgers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedBurgers:
    """Precomputed Galerkin operators for the reduced Burgers system.

    Holds the projected diffusion operator and, when hyper-reduction is
    active, the interpolation projector plus basis rows gathered at the
    sampled indices and their stencil neighbours, so the online convective
    evaluation never touches the full grid.
    """

    cfg: BurgersConfig
    basis: PodBasis
    a_r: np.ndarray  # n x n projected diffusion
    hyper: DeimOperator | None = None
    modes_center: np.ndarray | None = None  # basis rows at sampled indices
    modes_left: np.ndarray | None = None
    modes_right: np.ndarray | None = None
    interior: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes


def build_reduced(cfg: BurgersConfig, basis: PodBasis, hyper: DeimOperator | None = None) -> ReducedBurgers:
    if basis.modes.shape[0] != cfg.n_x:
        raise ShapeError(
            f"basis has {basis.modes.shape[0]} dofs, grid has {cfg.n_x}"
        )
    if hyper is not None and hyper.projector.shape[0] != basis.n_modes:
        raise ShapeError(
            f"hyper-reduction projector maps to {hyper.projector.shape[0]} modes, "
            f"basis has {basis.n_modes}"
        )
    a_r = basis.modes.T @ diffusion_matrix(cfg) @ basis.modes
    gathered = {}
    if hyper is not None:
        rows = hyper.indices
        gathered = dict(
            modes_center=basis.modes[rows].copy(),
            modes_left=basis.modes[np.maximum(rows - 1, 0)].copy(),
            modes_right=basis.modes[np.minimum(rows + 1, cfg.n_x - 1)].copy(),
            interior=(rows > 0) & (rows < cfg.n_x - 1),
        )
    return ReducedBurgers(cfg=cfg, basis=basis, a_r=a_r, hyper=hyper, **gathered)


def _sampled_convective(red: ReducedBurgers, u_hat: np.ndarray) -> np.ndarray:
    """Convective term at the sampled rows only, lifted locally.

    ``u_hat`` has reduced coordinates along the last axis; the lift touches
    just the sampled rows and their stencil neighbours, precomputed at
    operator-assembly time.
    """
    cfg = red.cfg
    u_c = u_hat @ red.modes_center.T
    if cfg.stencil == "standard_upwind":
        u_m = u_hat @ red.modes_left.T
        return np.where(red.interior, -u_c * (u_c - u_m) / cfg.dx, 0.0)
    u_p = u_hat @ red.modes_right.T
    return np.where(red.interior, u_c * (u_p - u_c) / cfg.dx, 0.0)


def reduced_rhs(red: ReducedBurgers, u_hat: np.ndarray) -> np.ndarray:
    """Reduced discrete right-hand side (last axis = reduced coords)."""
    linear = u_hat @ red.a_r.T
    if red.hyper is None:
        conv = convective_term(red.cfg, u_hat @ red.basis.modes.T) @ red.basis.modes
    else:
        conv = _sampled_convective(red, u_hat) @ red.hyper.projector.T
    return linear + conv


def burgers_residual_reduced(
    cfg: BurgersConfig,
    basis: PodBasis,
    u_hat_n: np.ndarray,
    u_hat_np1: np.ndarray,
    hyper: DeimOperator | None = None,
) -> np.ndarray:
    """Residual of one reduced step pair (length = number of modes)."""
    u_hat_n = np.asarray(u_hat_n, dtype=float)
    u_hat_np1 = np.asarray(u_hat_np1, dtype=float)
    n = basis.n_modes
    if u_hat_n.shape != (n,) or u_hat_np1.shape != (n,):
        raise ShapeError(f"reduced coordinates must have length {n}")
    red = build_reduced(cfg, basis, hyper)
    return (u_hat_np1 - u_hat_n) / cfg.dt - reduced_rhs(red, u_hat_n)


def reduced_march(
    cfg: BurgersConfig,
    basis: PodBasis,
    hyper: DeimOperator | None = None,
    u_hat0: np.ndarray | None = None,
) -> Trajectory:
    """March in reduced coordinates by zeroing the reduced residual.

    Defaults to the projected initial profile when ``u_hat0`` is omitted.
    """
    red = build_reduced(cfg, basis, hyper)
    if u_hat0 is None:
        u_hat0 = basis.modes.T @ cfg.initial_profile()
    u_hat0 = np.asarray(u_hat0, dtype=float)
    if u_hat0.shape != (basis.n_modes,):
        raise ShapeError(f"u_hat0 must have length {basis.n_modes}")
    states = np.zeros((basis.n_modes, cfg.n_t))
    states[:, 0] = u_hat0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(cfg.n_t - 1):
            states[:, n + 1] = states[:, n] + cfg.dt * reduced_rhs(red, states[:, n])
            if not np.all(np.isfinite(states[:, n + 1])):
                raise InstabilityError(f"reduced march went unstable at step {n + 1}")
    return Trajectory(states=states, times=np.arange(cfg.n_t) * cfg.dt)


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def generate_snapshots(problem) -> SnapshotSet:
    """Run the forward solver for a problem description and collect the
    state columns. Accepts a BurgersConfig or a MassSpringSetup."""
    if isinstance(problem, BurgersConfig):
        traj = burgers_march(problem)
        return SnapshotSet(data=traj.states, dt=problem.dt, grid=problem.x)
    if isinstance(problem, MassSpringSetup):
        traj = rigid_body_march(problem.params, problem.forcing(), problem.initial())
        return SnapshotSet(data=traj.states, dt=problem.params.dtau)
    raise ConfigError(f"unsupported problem type {type(problem).__name__}")


def convective_snapshots(cfg: BurgersConfig, snapshots: SnapshotSet) -> SnapshotSet:
    """Convective-term evaluations at the snapshot instants, used as the
    nonlinear-term snapshots for hyper-reduction."""
    values = convective_term(cfg, snapshots.data.T).T
    return SnapshotSet(data=values, dt=snapshots.dt, grid=snapshots.grid)
