"""Experiment descriptions parsed from structured config files.

Every tunable the studies depend on lives in the shipped ``configs/*.ini``
files (grid sizes, structural constants, learning rates, seeds) so the
under-specified choices stay visible and editable rather than hard-coded.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..dynamics import BurgersConfig, MassSpringSetup, RigidBodyParams
from ..errors import ConfigError
from ..pinn import NetworkSpec

EXPERIMENT_IDS = (
    "mass_spring_reconstruction",
    "mass_spring_prediction",
    "burgers_full",
    "burgers_reduced",
    "burgers_detached",
)


@dataclass(frozen=True)
class RomSpec:
    """Reduced-space sizes; ``deim_points`` of 0 disables hyper-reduction."""

    n_modes: int = 10
    deim_points: int = 10


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 6000
    data_points: object = 1  # int count or "full"
    eqn_points: object = "full"  # "full" or int prefix
    w_data: float = 1.0
    w_phys: float = 1.0
    mode: str = "in_graph"
    jacobian_interval: int = 1
    physics_update: str = "every_epoch"
    seed: int = 7


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str
    problem: object  # BurgersConfig | MassSpringSetup
    network_kind: str = "ann"  # "ann" | "lstm"
    ann: NetworkSpec = field(default_factory=lambda: NetworkSpec(kind="mlp"))
    lstm: NetworkSpec = field(default_factory=lambda: NetworkSpec(kind="lstm"))
    ann_learning_rate: float = 0.006
    lstm_learning_rate: float = 0.1
    rom: RomSpec | None = None
    train: TrainSection = field(default_factory=TrainSection)

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigError(
                f"experiment id {self.experiment_id!r} not in {EXPERIMENT_IDS}"
            )
        if self.network_kind not in ("ann", "lstm"):
            raise ConfigError(f"network {self.network_kind!r} not in (ann, lstm)")

    @property
    def network(self) -> NetworkSpec:
        return self.ann if self.network_kind == "ann" else self.lstm

    @property
    def learning_rate(self) -> float:
        return self.ann_learning_rate if self.network_kind == "ann" else self.lstm_learning_rate

    def with_overrides(self, **kw) -> "ExperimentSpec":
        """Copy with train-section or top-level fields replaced."""
        train_keys = {k: kw.pop(k) for k in list(kw) if hasattr(self.train, k)}
        spec = replace(self, **kw) if kw else self
        if train_keys:
            spec = replace(spec, train=replace(spec.train, **train_keys))
        return spec


def config_path(experiment_id: str) -> Path:
    """Path of a shipped experiment config."""
    if experiment_id not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment id {experiment_id!r}")
    return Path(resources.files("dispinn.experiments") / "configs" / f"{experiment_id}.ini")


def _get(section, key, cast, default=None, name=""):
    if key not in section:
        if default is not None:
            return default
        raise ConfigError(f"missing config field {name}.{key}")
    raw = section[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field {name}.{key}={raw!r} is invalid") from exc


def _count_or_full(raw: str):
    raw = raw.strip()
    if raw == "full":
        return "full"
    return int(raw)


def load_experiment(path) -> ExperimentSpec:
    """Parse an experiment config file into a validated spec."""
    path = Path(path)
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if "experiment" not in parser:
        raise ConfigError("config is missing the [experiment] section")
    exp = parser["experiment"]
    experiment_id = _get(exp, "id", str, name="experiment")
    network_kind = _get(exp, "network", str, default="ann", name="experiment")

    if experiment_id.startswith("burgers"):
        if "burgers" not in parser:
            raise ConfigError("config is missing the [burgers] section")
        sec = parser["burgers"]
        problem = BurgersConfig(
            n_x=_get(sec, "n_x", int, 20, "burgers"),
            n_t=_get(sec, "n_t", int, 100, "burgers"),
            length=_get(sec, "length", float, 1.0, "burgers"),
            nu=_get(sec, "nu", float, 0.01, "burgers"),
            dt=_get(sec, "dt", float, 0.01, "burgers"),
            stencil=_get(sec, "stencil", str, "standard_upwind", "burgers"),
            ic=_get(sec, "ic", str, "sine", "burgers"),
            ic_amplitude=_get(sec, "ic_amplitude", float, 1.0, "burgers"),
            bc=(
                _get(sec, "bc_left", float, 0.0, "burgers"),
                _get(sec, "bc_right", float, 0.0, "burgers"),
            ),
        )
    else:
        if "mass_spring" not in parser:
            raise ConfigError("config is missing the [mass_spring] section")
        sec = parser["mass_spring"]
        params = RigidBodyParams(
            x_alpha=_get(sec, "x_alpha", float, 0.25, "mass_spring"),
            r_alpha_sq=_get(sec, "r_alpha_sq", float, 0.5, "mass_spring"),
            omega_ratio=_get(sec, "omega_ratio", float, 0.5, "mass_spring"),
            v_star=_get(sec, "v_star", float, RigidBodyParams().v_star, "mass_spring"),
            dtau=_get(sec, "dtau", float, RigidBodyParams().dtau, "mass_spring"),
            n_steps=_get(sec, "n_steps", int, 1000, "mass_spring"),
        )
        problem = MassSpringSetup(
            params=params,
            cl_freq=_get(sec, "cl_freq", float, 10.0, "mass_spring"),
            cm_freq=_get(sec, "cm_freq", float, 20.0, "mass_spring"),
            omega_alpha=_get(sec, "omega_alpha", float, 100.0, "mass_spring"),
            initial_state=_get(sec, "initial_state", str, "periodic", "mass_spring"),
        )

    rom_spec = None
    if "rom" in parser:
        sec = parser["rom"]
        rom_spec = RomSpec(
            n_modes=_get(sec, "n_modes", int, 10, "rom"),
            deim_points=_get(sec, "deim_points", int, 10, "rom"),
        )

    ann_sec = parser["ann"] if "ann" in parser else {}
    hidden = _get(ann_sec, "hidden_layers", str, "124,64,24,8", "ann") if ann_sec else "124,64,24,8"
    ann_spec = NetworkSpec(
        kind="mlp",
        hidden_layers=tuple(int(v) for v in hidden.split(",")),
        activation=_get(ann_sec, "activation", str, "tanh", "ann") if ann_sec else "tanh",
    )
    lstm_sec = parser["lstm"] if "lstm" in parser else {}
    lstm_spec = NetworkSpec(
        kind="lstm",
        hidden_size=_get(lstm_sec, "hidden_size", int, 10, "lstm") if lstm_sec else 10,
        sequence_length=_get(lstm_sec, "sequence_length", int, 10, "lstm") if lstm_sec else 10,
    )

    train_sec = parser["train"] if "train" in parser else {}
    train = TrainSection(
        epochs=_get(train_sec, "epochs", int, 6000, "train") if train_sec else 6000,
        data_points=_get(train_sec, "data_points", _count_or_full, 1, "train")
        if train_sec
        else 1,
        eqn_points=_get(train_sec, "eqn_points", _count_or_full, "full", "train")
        if train_sec
        else "full",
        w_data=_get(train_sec, "w_data", float, 1.0, "train") if train_sec else 1.0,
        w_phys=_get(train_sec, "w_phys", float, 1.0, "train") if train_sec else 1.0,
        mode=_get(train_sec, "mode", str, "in_graph", "train") if train_sec else "in_graph",
        jacobian_interval=_get(train_sec, "jacobian_interval", int, 1, "train")
        if train_sec
        else 1,
        physics_update=_get(train_sec, "physics_update", str, "every_epoch", "train")
        if train_sec
        else "every_epoch",
        seed=_get(train_sec, "seed", int, 7, "train") if train_sec else 7,
    )

    return ExperimentSpec(
        experiment_id=experiment_id,
        problem=problem,
        network_kind=network_kind,
        ann=ann_spec,
        lstm=lstm_spec,
        ann_learning_rate=_get(ann_sec, "learning_rate", float, 0.006, "ann")
        if ann_sec
        else 0.006,
        lstm_learning_rate=_get(lstm_sec, "learning_rate", float, 0.1, "lstm")
        if lstm_sec
        else 0.1,
        rom=rom_spec,
        train=train,
    )
