"""Training loops over the combined data and discretized-physics losses.

Two modes share one loop body. In-graph training backpropagates the
physics loss analytically through the residual stencils. Detached training
treats residual and Jacobian as plain values fetched from the provider,
rebuilds the physics gradient as 2 R^T J / n_eqn, and refreshes J only
every ``jacobian_interval`` epochs.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, StaleJacobianWarning, TrainingError
from ..neural import (
    AdamState,
    Lstm,
    MinMaxScaler,
    Mlp,
    adam_step,
    init_lstm,
    init_mlp,
    make_sequences,
)
from .losses import masked_mse, physics_loss, relative_error

RISE_STREAK_LIMIT = 200


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture reference: dense stack or recurrent network."""

    kind: str = "mlp"  # "mlp" | "lstm"
    hidden_layers: tuple = (124, 64, 24, 8)
    activation: str = "tanh"
    hidden_size: int = 10
    sequence_length: int = 10
    n_layers: int = 1

    def __post_init__(self):
        if self.kind not in ("mlp", "lstm"):
            raise ConfigError(f"network kind {self.kind!r} not in (mlp, lstm)")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters and supervision layout."""

    epochs: int
    learning_rate: float
    network: NetworkSpec
    data_point_indices: tuple = ()
    eqn_points: object = "full"  # "full" | int prefix | explicit tuple
    loss_weights: tuple = (1.0, 1.0)
    jacobian_interval: int = 1
    mode: str = "in_graph"  # "in_graph" | "detached"
    physics_update: str = "every_epoch"  # or "refresh_only"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs={self.epochs} must be nonnegative")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate={self.learning_rate} must be positive")
        if self.jacobian_interval < 1:
            raise ConfigError(f"jacobian_interval={self.jacobian_interval} must be >= 1")
        if self.mode not in ("in_graph", "detached"):
            raise ConfigError(f"mode={self.mode!r} not in (in_graph, detached)")
        if self.physics_update not in ("every_epoch", "refresh_only"):
            raise ConfigError(
                f"physics_update={self.physics_update!r} not in (every_epoch, refresh_only)"
            )

    @property
    def w_data(self) -> float:
        return self.loss_weights[0]

    @property
    def w_phys(self) -> float:
        return self.loss_weights[1]


@dataclass
class TrainingProblem:
    """Everything a training run needs besides the hyperparameters.

    ``inputs`` is the full input series (steps x features); ``targets`` are
    the reference outputs aligned to the network's output rows, in physical
    units. ``anchors`` are global steps that are always supervised (initial
    conditions); ``bc_columns`` are output columns supervised at every row
    (spatial boundary values). ``row_offset`` maps output row 0 to its
    global step.
    """

    inputs: np.ndarray
    targets: np.ndarray
    provider: object = None
    row_offset: int = 0
    anchors: tuple = ()
    bc_columns: tuple = ()
    name: str = "problem"

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]

    @property
    def out_dim(self) -> int:
        return self.targets.shape[1]

    def supervised_rows(self, cfg: TrainConfig) -> np.ndarray:
        steps = np.array(sorted(set(self.anchors) | set(cfg.data_point_indices)), dtype=int)
        rows = steps - self.row_offset
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise ConfigError(
                "supervision steps fall outside the rows covered by the network"
            )
        return rows

    def condition_masks(self, cfg: TrainConfig) -> list:
        """Supervision groups, each normalized by its own entry count:
        the supervised time rows, and (when present) the boundary columns.
        Separate means keep a sparse anchor from being drowned out by the
        many trivially-satisfied boundary entries."""
        masks = []
        rows = self.supervised_rows(cfg)
        if rows.size:
            row_mask = np.zeros_like(self.targets, dtype=bool)
            row_mask[rows] = True
            masks.append(row_mask)
        if self.bc_columns:
            bc_mask = np.zeros_like(self.targets, dtype=bool)
            bc_mask[:, list(self.bc_columns)] = True
            masks.append(bc_mask)
        return masks

    def supervision_mask(self, cfg: TrainConfig) -> np.ndarray:
        mask = np.zeros_like(self.targets, dtype=bool)
        for m in self.condition_masks(cfg):
            mask |= m
        return mask


@dataclass
class LossReport:
    """Per-epoch traces; ``l_dis`` is NaN outside detached mode."""

    mse_data: np.ndarray
    mse_physics: np.ndarray
    l_dis: np.ndarray
    wall_ms: np.ndarray

    def __len__(self) -> int:
        return len(self.mse_data)

    def to_csv(self, path) -> None:
        header = "epoch,mse_data,mse_physics,l_dis,wall_ms"
        epochs = np.arange(len(self))
        table = np.column_stack(
            [epochs, self.mse_data, self.mse_physics, self.l_dis, self.wall_ms]
        )
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "LossReport":
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(
            mse_data=table[:, 1],
            mse_physics=table[:, 2],
            l_dis=table[:, 3],
            wall_ms=table[:, 4],
        )


def build_network(spec: NetworkSpec, in_dim: int, out_dim: int, rng: np.random.Generator):
    if spec.kind == "mlp":
        dims = [in_dim, *spec.hidden_layers, out_dim]
        return Mlp(init_mlp(dims, rng, activation=spec.activation))
    return Lstm(
        init_lstm(
            in_dim, spec.hidden_size, out_dim, spec.sequence_length, rng,
            n_layers=spec.n_layers,
        )
    )


def _network_inputs(spec: NetworkSpec, problem: TrainingProblem):
    """Scaled network input: row matrix for the MLP, window batch for the
    LSTM. Row r of the output corresponds to global step r + row_offset."""
    scaler = MinMaxScaler.fit(problem.inputs)
    scaled = scaler.transform(problem.inputs)
    if spec.kind == "mlp":
        if problem.row_offset != 0 or problem.n_rows != scaled.shape[0]:
            raise ConfigError("dense network must cover the whole horizon")
        return scaled
    s = spec.sequence_length
    if problem.row_offset != s - 1:
        raise ConfigError(f"recurrent outputs start at step {s - 1}, got row_offset "
                          f"{problem.row_offset}")
    batch = make_sequences(scaled, np.zeros((scaled.shape[0], 1)), s)
    if batch.n_windows != problem.n_rows:
        raise ConfigError(
            f"{batch.n_windows} windows vs {problem.n_rows} target rows"
        )
    return batch.windows


def _output_scaler(problem: TrainingProblem, cfg: TrainConfig) -> MinMaxScaler:
    """Fit the inverse output map on the supervised rows.

    Degenerate feature ranges (including the one-row case) keep unit scale,
    so a single anchor row still centers the raw network output on
    physically scaled values.
    """
    rows = problem.supervised_rows(cfg)
    if rows.size >= 1:
        return MinMaxScaler.fit(problem.targets[rows])
    return MinMaxScaler.identity(problem.out_dim)


class _RiseMonitor:
    """Warns once when a series rises for RISE_STREAK_LIMIT epochs."""

    def __init__(self, interval: int):
        self.interval = interval
        self.prev = np.inf
        self.streak = 0
        self.warned = False

    def update(self, value: float) -> None:
        self.streak = self.streak + 1 if value > self.prev else 0
        self.prev = value
        if self.streak >= RISE_STREAK_LIMIT and not self.warned:
            self.warned = True
            warnings.warn(
                f"physics loss rising for {RISE_STREAK_LIMIT} consecutive epochs; "
                f"jacobian refresh interval k={self.interval} may be stale",
                StaleJacobianWarning,
                stacklevel=3,
            )


def _train(cfg: TrainConfig, problem: TrainingProblem, detached: bool):
    provider = problem.provider
    use_physics = cfg.w_phys > 0.0 and provider is not None and provider.n_eqn > 0
    if not detached and use_physics and not getattr(provider, "graph_attached", False):
        raise ConfigError("in-graph training needs a graph-attached provider")
    masks = problem.condition_masks(cfg)
    counts = [int(m.sum()) for m in masks]
    if cfg.w_data > 0.0 and not counts:
        raise ConfigError("data weight is positive but no supervision is configured")

    rng = np.random.default_rng(cfg.seed)
    x = _network_inputs(cfg.network, problem)
    in_dim = problem.inputs.shape[1]
    net = build_network(cfg.network, in_dim, problem.out_dim, rng)
    out_scaler = _output_scaler(problem, cfg)
    state = AdamState(learning_rate=cfg.learning_rate)

    # physics loss is the mean over all residual entries
    n_eqn = provider.n_eqn * provider.out_dim if use_physics else 0
    jac = None
    monitor = _RiseMonitor(cfg.jacobian_interval)
    mse_data = np.zeros(cfg.epochs)
    mse_phys = np.full(cfg.epochs, np.nan)
    l_dis_trace = np.full(cfg.epochs, np.nan)
    wall = np.zeros(cfg.epochs)

    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        y_hat = net.forward(x)
        y = out_scaler.inverse(y_hat)

        data_mse = 0.0
        grad_y = np.zeros_like(y)
        for m, count in zip(masks, counts):
            data_mse += masked_mse(y, problem.targets, m)
            if cfg.w_data > 0.0:
                grad_y += cfg.w_data * (2.0 / count) * (y - problem.targets) * m

        if use_physics:
            resid = provider.residual(y)
            phys_mse = physics_loss(resid, n_eqn)
            mse_phys[epoch] = phys_mse
            if detached:
                if epoch % cfg.jacobian_interval == 0:
                    jac = provider.jacobian(y, epoch_stamp=epoch)
                if cfg.physics_update == "every_epoch" or jac.epoch_stamp == epoch:
                    phys_grad_flat = (2.0 / n_eqn) * jac.vjp(resid)
                    l_dis_trace[epoch] = float(phys_grad_flat @ y.ravel())
                    grad_y += cfg.w_phys * phys_grad_flat.reshape(y.shape)
                monitor.update(phys_mse)
            else:
                grad_y += cfg.w_phys * provider.residual_vjp(y, (2.0 / n_eqn) * resid)
        elif provider is not None and provider.n_eqn > 0:
            mse_phys[epoch] = physics_loss(provider.residual(y), provider.n_eqn)

        total = cfg.w_data * data_mse + (
            cfg.w_phys * mse_phys[epoch] if use_physics else 0.0
        )
        if not np.isfinite(total):
            raise TrainingError("training loss became non-finite", epoch)

        grads = net.backward(grad_y * out_scaler.scale)
        net.params = net.params.with_tree(adam_step(state, net.params.tree(), grads))
        mse_data[epoch] = data_mse
        wall[epoch] = (time.perf_counter() - tic) * 1e3

    report = LossReport(
        mse_data=mse_data, mse_physics=mse_phys, l_dis=l_dis_trace, wall_ms=wall
    )
    return net, report


def train_in_graph(cfg: TrainConfig, problem: TrainingProblem):
    """Minimize w_data L_data + w_phys L_eqn with the physics gradient
    backpropagated analytically through the residual stencils."""
    if cfg.mode == "detached":
        raise ConfigError("config requests detached mode; call train_detached")
    return _train(cfg, problem, detached=False)


def train_detached(cfg: TrainConfig, problem: TrainingProblem):
    """Alg-style detached coupling: fetch residual values each epoch,
    refresh the finite-difference Jacobian every ``jacobian_interval``
    epochs, and backpropagate the reconstructed physics gradient."""
    return _train(cfg, problem, detached=True)


def train(cfg: TrainConfig, problem: TrainingProblem):
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "detached":
        return train_detached(cfg, problem)
    return train_in_graph(cfg, problem)


def predict(net, cfg: TrainConfig, problem: TrainingProblem) -> np.ndarray:
    """Physical-unit network outputs over the problem's output rows."""
    x = _network_inputs(cfg.network, problem)
    out_scaler = _output_scaler(problem, cfg)
    return out_scaler.inverse(net.forward(x))


@dataclass(frozen=True)
class TrialStats:
    """Relative-error aggregate over repeated trainings."""

    e_mean: float
    e_max: float
    e_min: float
    errors: tuple

    @classmethod
    def from_errors(cls, errors) -> "TrialStats":
        errors = tuple(float(e) for e in errors)
        return cls(
            e_mean=float(np.mean(errors)),
            e_max=float(np.max(errors)),
            e_min=float(np.min(errors)),
            errors=errors,
        )


def run_trials(
    cfg: TrainConfig,
    problem: TrainingProblem,
    n_trials: int = 5,
    data_point_count: int = 1,
    channel: int = 0,
) -> TrialStats:
    """Repeat training with resampled supervision-point locations.

    Each trial draws ``data_point_count`` supervision steps (outside the
    anchors) with its own seeded generator, trains per ``cfg.mode``, and
    scores the relative error of output ``channel`` over all covered rows.
    """
    if n_trials < 1:
        raise ConfigError(f"n_trials={n_trials} must be at least 1")
    all_steps = np.arange(problem.row_offset, problem.row_offset + problem.n_rows)
    candidates = np.array(sorted(set(all_steps) - set(problem.anchors)))
    if data_point_count > candidates.size:
        raise ConfigError(
            f"cannot place {data_point_count} supervision points among "
            f"{candidates.size} candidate steps"
        )
    errors = []
    for trial in range(n_trials):
        trial_seed = cfg.seed + trial
        rng = np.random.default_rng(trial_seed)
        picked = rng.choice(candidates, size=data_point_count, replace=False)
        trial_cfg = replace(
            cfg, data_point_indices=tuple(int(p) for p in picked), seed=trial_seed
        )
        net, _ = train(trial_cfg, problem)
        pred = predict(net, trial_cfg, problem)
        errors.append(relative_error(pred[:, channel], problem.targets[:, channel]))
    return TrialStats.from_errors(errors)
