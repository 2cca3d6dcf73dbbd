"""End-to-end experiment execution: reference data, provider assembly,
training, metrics, and artifact IO."""

from __future__ import annotations

import configparser
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import dynamics, linalg, rom
from ..dynamics import BurgersConfig, MassSpringSetup
from ..errors import ConfigError
from ..pinn import (
    BurgersProvider,
    ReducedBurgersProvider,
    RigidBodyProvider,
    TrainConfig,
    TrainingProblem,
    detach,
    predict,
    relative_error,
    run_trials,
    train,
)
from .specs import ExperimentSpec

METRICS = ("relative_error", "max_abs_error", "E_mean", "E_max", "E_min", "wall_ms")


@dataclass
class ResultTable:
    """Rows of (experiment, network, data_points, eqn_points, metric,
    value, seed)."""

    rows: list = field(default_factory=list)

    def add(self, experiment, network, data_points, eqn_points, metric, value, seed):
        if metric not in METRICS:
            raise ConfigError(f"metric {metric!r} not in {METRICS}")
        self.rows.append(
            {
                "experiment": experiment,
                "network": network,
                "data_points": data_points,
                "eqn_points": eqn_points,
                "metric": metric,
                "value": float(value),
                "seed": seed,
            }
        )

    def extend(self, other: "ResultTable"):
        self.rows.extend(other.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "experiment", "network", "data_points", "eqn_points",
                    "metric", "value", "seed",
                ],
            )
            writer.writeheader()
            for row in self.rows:
                writer.writerow({**row, "value": repr(row["value"])})

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        table = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                row["value"] = float(row["value"])
                table.rows.append(row)
        return table

    def lookup(self, **filters) -> list:
        out = []
        for row in self.rows:
            if all(str(row[k]) == str(v) for k, v in filters.items()):
                out.append(row)
        return out


@dataclass
class PreparedExperiment:
    """A training problem plus the context needed for metrics and export."""

    spec: ExperimentSpec
    problem: TrainingProblem
    reference: np.ndarray  # full-order reference aligned to output rows
    basis: rom.PodBasis | None = None
    channels: tuple = ()

    def lift(self, outputs: np.ndarray) -> np.ndarray:
        """Full-order field for possibly reduced network outputs."""
        if self.basis is None:
            return outputs
        return outputs @ self.basis.modes.T


def _coverage(spec: ExperimentSpec, n_t: int):
    """Output row window for the chosen network: (row_offset, n_rows)."""
    if spec.network_kind == "ann":
        return 0, n_t
    s = spec.lstm.sequence_length
    return s - 1, n_t - s


def _burgers_pairs(spec: ExperimentSpec, cfg: BurgersConfig, offset: int, n_rows: int):
    last_covered = offset + n_rows - 1
    if spec.train.eqn_points == "full":
        return np.arange(offset, last_covered)
    count = int(spec.train.eqn_points)
    if count == 0:
        return np.arange(0)
    start = offset if spec.network_kind == "ann" else offset + 1
    pairs = np.arange(start, start + count)
    if pairs[-1] + 1 > last_covered:
        raise ConfigError("eqn_points prefix reaches past the covered horizon")
    return pairs


def _mass_spring_newest(spec: ExperimentSpec, offset: int, n_rows: int):
    depth = RigidBodyProvider.STENCIL_DEPTH  # newest step needs four predecessors
    first = max(offset + depth - 1, depth - 1)
    last_covered = offset + n_rows - 1
    if spec.train.eqn_points == "full":
        return np.arange(first, last_covered + 1)
    bound = int(spec.train.eqn_points)  # residuals within the first `bound` steps
    return np.arange(first, min(bound, last_covered + 1))


def prepare(spec: ExperimentSpec) -> PreparedExperiment:
    """Generate reference data and assemble the training problem."""
    problem = spec.problem
    if isinstance(problem, BurgersConfig):
        cfg = problem
        snaps = dynamics.generate_snapshots(cfg)
        offset, n_rows = _coverage(spec, cfg.n_t)
        pairs = _burgers_pairs(spec, cfg, offset, n_rows)
        reference = snaps.data.T[offset : offset + n_rows].copy()
        inputs = (np.arange(cfg.n_t) * cfg.dt)[:, None]
        basis = None
        if spec.rom is not None:
            basis = rom.compute_pod(snaps, n_modes=spec.rom.n_modes)
            hyper = None
            if spec.rom.deim_points:
                nl = dynamics.convective_snapshots(cfg, snaps)
                hyper = rom.build_deim_operator(basis, nl, m_h=spec.rom.deim_points)
            reduced = dynamics.build_reduced(cfg, basis, hyper)
            provider = ReducedBurgersProvider(reduced, pairs, n_rows=n_rows, row_offset=offset)
            targets = (basis.modes.T @ snaps.data).T[offset : offset + n_rows].copy()
            bc_columns = ()
        else:
            provider = BurgersProvider(cfg, pairs, n_rows=n_rows, row_offset=offset)
            targets = reference.copy()
            bc_columns = (0, cfg.n_x - 1)
        if spec.train.mode == "detached":
            provider = detach(provider)
        training_problem = TrainingProblem(
            inputs=inputs,
            targets=targets,
            provider=provider,
            row_offset=offset,
            anchors=(offset,),
            bc_columns=bc_columns,
            name=spec.experiment_id,
        )
        return PreparedExperiment(
            spec=spec,
            problem=training_problem,
            reference=reference,
            basis=basis,
            channels=(),
        )

    setup: MassSpringSetup = problem
    forcing = setup.forcing()
    traj = dynamics.rigid_body_march(setup.params, forcing, setup.initial())
    n_t = setup.params.n_steps
    offset, n_rows = _coverage(spec, n_t)
    newest = _mass_spring_newest(spec, offset, n_rows)
    provider = RigidBodyProvider(
        setup.params, forcing, newest=newest, n_rows=n_rows, row_offset=offset
    )
    if spec.train.mode == "detached":
        provider = detach(provider)
    displacements = traj.states[0:2].T  # (h, alpha) are the network outputs
    inputs = np.column_stack([forcing.cl, forcing.cm])
    training_problem = TrainingProblem(
        inputs=inputs,
        targets=displacements[offset : offset + n_rows].copy(),
        provider=provider,
        row_offset=offset,
        anchors=(offset,),
        bc_columns=(),
        name=spec.experiment_id,
    )
    return PreparedExperiment(
        spec=spec,
        problem=training_problem,
        reference=displacements[offset : offset + n_rows].copy(),
        channels=("h", "alpha"),
    )


def _train_config(spec: ExperimentSpec, prepared: PreparedExperiment, data_point_indices=None):
    problem = prepared.problem
    if data_point_indices is None:
        count = spec.train.data_points
        all_steps = np.arange(problem.row_offset, problem.row_offset + problem.n_rows)
        candidates = np.array(sorted(set(all_steps) - set(problem.anchors)))
        if count == "full":
            data_point_indices = tuple(int(s) for s in candidates)
        elif int(count) > 0:
            rng = np.random.default_rng(spec.train.seed)
            picked = rng.choice(candidates, size=int(count), replace=False)
            data_point_indices = tuple(int(p) for p in sorted(picked))
        else:
            data_point_indices = ()
    return TrainConfig(
        epochs=spec.train.epochs,
        learning_rate=spec.learning_rate,
        network=spec.network,
        data_point_indices=tuple(data_point_indices),
        eqn_points=spec.train.eqn_points,
        loss_weights=(spec.train.w_data, spec.train.w_phys),
        jacobian_interval=spec.train.jacobian_interval,
        mode=spec.train.mode,
        physics_update=spec.train.physics_update,
        seed=spec.train.seed,
    )


def save_checkpoint(directory, net) -> None:
    """Flat CSV per tensor plus a manifest with shapes and order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = configparser.ConfigParser()
    manifest["tensors"] = {}
    for i, (key, arr) in enumerate(net.params.tree().items()):
        fname = f"t{i:03d}.csv"
        manifest["tensors"][fname] = f"{key}|{'x'.join(map(str, arr.shape))}"
        linalg.save_matrix_csv(directory / fname, arr.reshape(1, -1))
    with open(directory / "manifest.ini", "w") as fh:
        manifest.write(fh)


def load_checkpoint(directory, net) -> None:
    """Restore a parameter tree written by :func:`save_checkpoint`."""
    directory = Path(directory)
    manifest = configparser.ConfigParser()
    if not manifest.read(directory / "manifest.ini"):
        raise ConfigError(f"missing checkpoint manifest in {directory}")
    tree = {}
    for fname, meta in manifest["tensors"].items():
        key, shape_txt = meta.split("|")
        shape = tuple(int(v) for v in shape_txt.split("x"))
        flat = linalg.load_matrix_csv(directory / fname)
        tree[key] = flat.reshape(shape)
    net.params = net.params.with_tree(tree)


def _metric_rows(spec, prepared, cfg, prediction_full) -> ResultTable:
    table = ResultTable()
    base = dict(
        experiment=spec.experiment_id,
        network=spec.network_kind,
        data_points=len(cfg.data_point_indices),
        eqn_points=spec.train.eqn_points,
        seed=cfg.seed,
    )
    reference = prepared.reference
    if prepared.channels:
        for i, channel in enumerate(prepared.channels):
            table.add(
                **{**base, "experiment": f"{spec.experiment_id}.{channel}"},
                metric="relative_error",
                value=relative_error(prediction_full[:, i], reference[:, i]),
            )
    else:
        table.add(**base, metric="max_abs_error",
                  value=float(np.abs(prediction_full - reference).max()))
        table.add(**base, metric="relative_error",
                  value=relative_error(prediction_full, reference))
    return table


def run_experiment(spec: ExperimentSpec, out_dir=None, data_point_indices=None):
    """Train one experiment and write its artifacts.

    Returns (net, report, result_table, prediction_full).
    """
    prepared = prepare(spec)
    cfg = _train_config(spec, prepared, data_point_indices)
    tic = time.perf_counter()
    net, report = train(cfg, prepared.problem)
    wall_ms = (time.perf_counter() - tic) * 1e3
    prediction = predict(net, cfg, prepared.problem)
    prediction_full = prepared.lift(prediction)
    table = _metric_rows(spec, prepared, cfg, prediction_full)
    table.add(
        experiment=spec.experiment_id,
        network=spec.network_kind,
        data_points=len(cfg.data_point_indices),
        eqn_points=spec.train.eqn_points,
        metric="wall_ms",
        value=wall_ms,
        seed=cfg.seed,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out_dir / "checkpoint", net)
        report.to_csv(out_dir / "loss.csv")
        linalg.save_matrix_csv(out_dir / "predictions.csv", prediction_full)
        linalg.save_matrix_csv(out_dir / "reference.csv", prepared.reference)
        table.to_csv(out_dir / "metrics.csv")
        _write_run_config(out_dir / "run.ini", spec, cfg)
    return net, report, table, prediction_full


def _write_run_config(path, spec: ExperimentSpec, cfg) -> None:
    parser = configparser.ConfigParser()
    parser["run"] = {
        "experiment": spec.experiment_id,
        "network": spec.network_kind,
        "epochs": str(cfg.epochs),
        "learning_rate": repr(cfg.learning_rate),
        "mode": cfg.mode,
        "jacobian_interval": str(cfg.jacobian_interval),
        "seed": str(cfg.seed),
        "data_point_indices": ",".join(map(str, cfg.data_point_indices)),
        "eqn_points": str(cfg.eqn_points),
    }
    with open(path, "w") as fh:
        parser.write(fh)


def run_error_study(
    spec: ExperimentSpec,
    n_trials: int = 5,
    data_point_count: int = 1,
    channel: int = 0,
):
    """Five-trial relative-error protocol with resampled supervision
    points; returns TrialStats for the requested output channel."""
    prepared = prepare(spec)
    cfg = _train_config(spec, prepared, data_point_indices=())
    return run_trials(
        cfg,
        prepared.problem,
        n_trials=n_trials,
        data_point_count=data_point_count,
        channel=channel,
    )
