"""Command-line driver for the synthesize / invert / report workflow.

Every command reads one flat JSON configuration (keys mirror the
ExperimentConfig fields) plus a few overriding flags, writes its
artifacts under the configured output directory, and prints the written
paths. Failures exit nonzero with a single "error: ..." line on stderr.

File formats (all JSON unless noted):
  data_*.json      measured blocks, see data_pipeline.blocks_to_dict
  truth.json       {"format": "romscat-truth-v1", nx, ny, phantom,
                    phantom_params, values}   (nodal q, x fastest)
  estimate_*.json  {"format": "romscat-estimate-v1", kind, nx, ny,
                    basis_grid, basis_width, gamma, n_iter, alpha_max,
                    objective, y, values}
  iterations_*.jsonl   one {"iter", "objective", "mu", "alpha",
                    "step_norm"} record per line
  report.json      {"format": "romscat-report-v1", slices,
                    errors: [{file, kind, rel_l2_error}]}
  slice_x1_*.csv   columns x2, q_true, q_est_<kind>...
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import (ExperimentConfig, load_config, relative_l2_error,
                     run_inversion, synthesize_data, vertical_slice)
from .data_pipeline import blocks_from_dict, blocks_to_dict
from .discretization import (assemble_operators, build_grid,
                             eval_basis_potential, grid_to_dict,
                             operators_to_dict, GaussianBasis)
from .forward import ForwardSolveError
from .serialization import dump_json, load_json
from .spectral import SpectralError

__all__ = ["cmd_synthesize", "cmd_invert", "cmd_report", "main"]


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ValueError(f"{where} is missing field {key!r}")
    return obj[key]


def _check_format(obj: dict, expected: str, where: str) -> None:
    got = _require(obj, "format", where)
    if got != expected:
        raise ValueError(f"{where} has format {got!r}, expected {expected!r}")


def cmd_synthesize(config: ExperimentConfig,
                   debug: bool = False) -> list[Path]:
    """Write noiseless and noisy data blocks plus the truth grid."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    noiseless, noisy, truth = synthesize_data(config)
    paths = [out / "data_noiseless.json", out / "data_noisy.json",
             out / "truth.json"]
    dump_json(paths[0], blocks_to_dict(noiseless))
    dump_json(paths[1], blocks_to_dict(noisy))
    dump_json(paths[2], {"format": "romscat-truth-v1",
                         "nx": config.nx, "ny": config.ny,
                         "phantom": config.phantom,
                         "phantom_params": config.phantom_params,
                         "values": [float(v) for v in truth.values]})
    if debug:
        ops = assemble_operators(truth.grid, truth, config.sources())
        paths.append(out / "grid.json")
        dump_json(paths[-1], grid_to_dict(truth.grid))
        paths.append(out / "operators.json")
        dump_json(paths[-1], operators_to_dict(ops))
    return paths


def cmd_invert(config: ExperimentConfig, data_path: str | Path) -> list[Path]:
    """Estimate the potential behind a data file; write estimate and log."""
    measured = blocks_from_dict(load_json(data_path))
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / f"iterations_{config.kind}.jsonl"
    result = run_inversion(config, measured, log_path=log_path)
    grid = config.grid()
    q_est = eval_basis_potential(config.basis(), result.y, grid)
    est_path = out / f"estimate_{config.kind}.json"
    dump_json(est_path, {
        "format": "romscat-estimate-v1",
        "kind": config.kind,
        "nx": config.nx, "ny": config.ny,
        "basis_grid": config.basis_grid,
        "basis_width": config.basis_width,
        "gamma": config.gamma,
        "n_iter": config.n_iter,
        "alpha_max": config.alpha_max,
        "objective": result.objective,
        "y": [float(v) for v in result.y],
        "values": [float(v) for v in q_est.values],
    })
    return [est_path, log_path]


def _slice_columns(labels: list[str]) -> list[str]:
    cols = []
    for i, label in enumerate(labels):
        name = f"q_est_{label}"
        if labels.count(label) > 1:
            name = f"{name}_{i}"
        cols.append(name)
    return cols


def cmd_report(truth_path: str | Path, estimate_paths: list,
               slices: list[float], out_dir: str | Path | None = None
               ) -> list[Path]:
    """Score estimates against the truth grid; write errors and slices."""
    truth_path = Path(truth_path)
    truth = load_json(truth_path)
    _check_format(truth, "romscat-truth-v1", str(truth_path))
    nx, ny = int(truth["nx"]), int(truth["ny"])
    grid = build_grid(nx, ny)
    q_true = np.asarray(_require(truth, "values", str(truth_path)),
                        dtype=float)

    kinds: list[str] = []
    q_ests: list[np.ndarray] = []
    errors = []
    for path in estimate_paths:
        est = load_json(path)
        _check_format(est, "romscat-estimate-v1", str(path))
        if (int(est["nx"]), int(est["ny"])) != (nx, ny):
            raise ValueError(
                f"grid mismatch: {path} is {est['nx']}x{est['ny']}, "
                f"truth is {nx}x{ny}")
        q_est = np.asarray(_require(est, "values", str(path)), dtype=float)
        kinds.append(str(_require(est, "kind", str(path))))
        q_ests.append(q_est)
        errors.append({"file": str(path), "kind": kinds[-1],
                       "rel_l2_error": relative_l2_error(q_est, q_true,
                                                         grid)})

    out = Path(out_dir) if out_dir is not None else truth_path.parent
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json"]
    dump_json(paths[0], {"format": "romscat-report-v1",
                         "slices": [float(x) for x in slices],
                         "errors": errors})
    x2 = np.linspace(0.0, 1.0, ny)
    est_cols = _slice_columns(kinds)
    for x1 in slices:
        rows = np.column_stack(
            [x2, vertical_slice(q_true, grid, x1)]
            + [vertical_slice(q, grid, x1) for q in q_ests])
        path = out / f"slice_x1_{x1:g}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x2", "q_true"] + est_cols)
            for row in rows:
                writer.writerow([repr(float(v)) for v in row])
        paths.append(path)
    return paths


def _apply_overrides(config: ExperimentConfig,
                     args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "noise", None) is not None:
        overrides["epsilon_noise"] = args.noise
    if getattr(args, "kind", None) is not None:
        overrides["kind"] = args.kind
    return dataclasses.replace(config, **overrides) if overrides else config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romscat",
        description="Boundary-data reduced-model workbench: synthesize "
                    "scattering data, invert for the potential, report "
                    "errors.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synthesize",
                        help="forward-model a phantom and write data files")
    ps.add_argument("--config", required=True, help="experiment JSON")
    ps.add_argument("--out", help="output directory override")
    ps.add_argument("--seed", type=int, help="noise seed override")
    ps.add_argument("--noise", type=float, help="noise level override")
    ps.add_argument("--debug", action="store_true",
                    help="also dump grid and operator matrices")

    pi = sub.add_parser("invert", help="estimate the potential from a "
                                       "data file")
    pi.add_argument("--config", required=True, help="experiment JSON")
    pi.add_argument("--data", required=True, help="measured blocks JSON")
    pi.add_argument("--out", help="output directory override")
    pi.add_argument("--kind", choices=["S", "T", "FWI"],
                    help="misfit kind override")

    pr = sub.add_parser("report", help="score estimates against the truth")
    pr.add_argument("--truth", required=True, help="truth grid JSON")
    pr.add_argument("--estimate", action="append", required=True,
                    help="estimate JSON (repeatable)")
    pr.add_argument("--slices", type=float, nargs="+",
                    default=[0.35, 0.55, 0.75],
                    help="vertical slice positions x1")
    pr.add_argument("--out", help="output directory (default: truth's)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synthesize":
            config = _apply_overrides(load_config(args.config), args)
            paths = cmd_synthesize(config, debug=args.debug)
        elif args.command == "invert":
            config = _apply_overrides(load_config(args.config), args)
            paths = cmd_invert(config, args.data)
        else:
            paths = cmd_report(args.truth, args.estimate, args.slices,
                               out_dir=args.out)
    except (ValueError, OSError, KeyError,
            ForwardSolveError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
