"""Command-line experiment runner.

Verbs: snapshots, rom, train, reproduce, export-plots. Exit codes:
0 success, 2 configuration error, 3 numeric or training error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import dynamics, linalg, rom
from ..dynamics import BurgersConfig
from ..errors import ConfigError
from ..pinn import LossReport
from .runner import run_experiment
from .specs import EXPERIMENT_IDS, config_path, load_experiment
from .tables import TABLE_IDS, reproduce_table

CONFIG_EXIT = 2
NUMERIC_EXIT = 3


def _load_spec(args):
    path = Path(args.config)
    if not path.exists() and str(path) in EXPERIMENT_IDS:
        path = config_path(str(path))
    spec = load_experiment(path)
    overrides = {}
    for key in ("seed", "mode", "jacobian_interval", "epochs", "eqn_points"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "data_points", None) is not None:
        overrides["data_points"] = (
            "full" if args.data_points == "full" else int(args.data_points)
        )
    if getattr(args, "network", None) is not None:
        spec = spec.with_overrides(network_kind=args.network)
    if overrides:
        spec = spec.with_overrides(**overrides)
    return spec


def cmd_snapshots(args) -> int:
    spec = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snaps = dynamics.generate_snapshots(spec.problem)
    linalg.save_matrix_csv(out / "snapshots.csv", snaps.data)
    meta = ["[snapshots]", f"dt = {snaps.dt!r}", f"n_dof = {snaps.n_dof}",
            f"n_columns = {snaps.n_columns}"]
    if snaps.grid is not None:
        meta.append("grid = " + ",".join(f"{v:.17g}" for v in snaps.grid))
    (out / "snapshots.ini").write_text("\n".join(meta) + "\n")
    print(f"wrote {snaps.n_dof}x{snaps.n_columns} snapshot matrix to {out}")
    return 0


def cmd_rom(args) -> int:
    spec = _load_spec(args)
    if not isinstance(spec.problem, BurgersConfig):
        raise ConfigError("basis construction is defined for the Burgers problem")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snaps = dynamics.generate_snapshots(spec.problem)
    mode_counts = [int(v) for v in args.n_modes.split(",")]
    report_lines = ["n_modes,max_abs_error,frobenius_rel"]
    for n in mode_counts:
        basis = rom.compute_pod(snaps, n_modes=n)
        max_abs, rel = rom.reconstruction_error(basis, snaps)
        report_lines.append(f"{n},{max_abs!r},{rel!r}")
    (out / "reconstruction_report.csv").write_text("\n".join(report_lines) + "\n")
    basis = rom.compute_pod(snaps, n_modes=mode_counts[-1])
    rom.save_basis(out, basis)
    if args.deim_points:
        nl = dynamics.convective_snapshots(spec.problem, snaps)
        op = rom.build_deim_operator(basis, nl, m_h=args.deim_points)
        rom.save_deim(out, op)
    print(f"wrote basis (n={mode_counts[-1]}) and reconstruction report to {out}")
    return 0


def cmd_train(args) -> int:
    spec = _load_spec(args)
    out = Path(args.out)
    _, report, table, _ = run_experiment(spec, out)
    for row in table.rows:
        if row["metric"] != "wall_ms":
            print(f"{row['experiment']} {row['network']} "
                  f"{row['metric']}={row['value']:.6g}")
    print(f"artifacts in {out}")
    return 0


def cmd_reproduce(args) -> int:
    table, out_dir = reproduce_table(args.table, args.out, epochs=args.epochs,
                                     seed=args.seed)
    print((out_dir / "summary.md").read_text())
    print(f"result table: {out_dir / 'result_table.csv'}")
    return 0


def cmd_export_plots(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory {run_dir} does not exist")
    out = Path(args.out) if args.out else run_dir / "plotdata"
    out.mkdir(parents=True, exist_ok=True)
    loss_path = run_dir / "loss.csv"
    if loss_path.exists():
        report = LossReport.from_csv(loss_path)
        epochs = np.arange(len(report))
        table = np.column_stack([epochs, report.mse_data, report.mse_physics])
        np.savetxt(out / "loss_curves.csv", table, fmt="%.17g", delimiter=",",
                   header="epoch,mse_data,mse_physics", comments="")
    pred_path = run_dir / "predictions.csv"
    ref_path = run_dir / "reference.csv"
    if pred_path.exists() and ref_path.exists():
        pred = linalg.load_matrix_csv(pred_path)
        ref = linalg.load_matrix_csv(ref_path)
        rows = []
        for t in range(pred.shape[0]):
            for i in range(pred.shape[1]):
                rows.append(
                    f"{t},{i},{pred[t, i]:.17g},{ref[t, i]:.17g},"
                    f"{abs(pred[t, i] - ref[t, i]):.17g}"
                )
        (out / "error_field.csv").write_text(
            "step,component,predicted,reference,abs_error\n" + "\n".join(rows) + "\n"
        )
    print(f"plot-ready CSVs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispinn",
        description="Discretized-physics-informed neural network experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--config", required=True,
                       help="experiment config file or shipped experiment id")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)

    p_snap = sub.add_parser("snapshots", help="generate and store solver snapshots")
    add_common(p_snap)
    p_snap.set_defaults(fn=cmd_snapshots)

    p_rom = sub.add_parser("rom", help="build basis and hyper-reduction operator")
    add_common(p_rom)
    p_rom.add_argument("--n-modes", default="2,5,10",
                       help="comma list; the last entry is persisted")
    p_rom.add_argument("--deim-points", type=int, default=10)
    p_rom.set_defaults(fn=cmd_rom)

    p_train = sub.add_parser("train", help="train one experiment")
    add_common(p_train)
    p_train.add_argument("--network", choices=("ann", "lstm"), default=None)
    p_train.add_argument("--mode", choices=("in_graph", "detached"), default=None)
    p_train.add_argument("--jacobian-interval", type=int, default=None)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--data-points", default=None)
    p_train.add_argument("--eqn-points", default=None)
    p_train.set_defaults(fn=cmd_train)

    p_rep = sub.add_parser("reproduce", help="rebuild a published result table")
    p_rep.add_argument("table", choices=TABLE_IDS)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--epochs", type=int, default=None)
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.set_defaults(fn=cmd_reproduce)

    p_exp = sub.add_parser("export-plots", help="emit plot-ready CSVs for a run")
    p_exp.add_argument("run_dir")
    p_exp.add_argument("--out", default=None)
    p_exp.set_defaults(fn=cmd_export_plots)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "eqn_points", None) is not None and args.eqn_points != "full":
        args.eqn_points = int(args.eqn_points)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
