"""Command-line front end: configure runs, emit results, re-derive tables.

Subcommands
-----------
run        execute a grid (synthetic data by default, CSVs via config)
synth      write synthetic CSV datasets for the three tasks
summarize  re-derive summary tables from a written report.json

Reports are emitted as ``cells.csv`` (one row per cell and model),
``iterations.csv`` (raw per-iteration scores), and ``report.json`` (the
full payload, byte-stable and round-trippable).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import bench
from .data import DEFAULT_TASKS, generate_synthetic, load_csv, write_csv
from .errors import AmTransferError, ConfigError

_GRID_KINDS = ("paper", "similarity", "preprocessing", "custom")

_DATA_KEYS = {"target", "source1", "source2", "synthetic", "response", "data_seed"}
_GRID_KEYS = {"kind", "source", "setting", "preprocess", "cells"}
_RUN_KEYS = {"iterations", "seed", "workers", "out"}


@dataclass
class RunConfig:
    """Resolved run options; file values overridden by CLI flags."""

    grid: str = "paper"
    source: str = "source1"
    setting: str = "setting1"
    preprocess: str = "raw"
    iterations: int = 30
    seed: int = 42
    workers: int = 1
    out: str = "results"
    synthetic: bool = True
    response: str = "affine"
    data_seed: int = 7
    csv_paths: dict = field(default_factory=dict)
    custom_cells: list = field(default_factory=list)

    def build_plan(self) -> list[bench.GridCell]:
        if self.grid == "custom":
            if not self.custom_cells:
                raise ConfigError("grid 'custom' needs a cells list in the config file")
            return [
                bench.GridCell(
                    source_task=self.source, n_s=n_s, n_train_t=n_train,
                    setting=self.setting, preprocess=self.preprocess,
                    iterations=self.iterations,
                    base_seed=bench.derive_seed(self.seed, self.source, n_s,
                                                n_train, self.setting,
                                                self.preprocess))
                for n_s, n_train in self.custom_cells
            ]
        if self.custom_cells:
            raise ConfigError(f"cells list given but grid is {self.grid!r}")
        return bench.build_grid(self.grid, self.source, self.setting,
                                self.preprocess, self.iterations, self.seed)

    def load_datasets(self) -> dict:
        if self.synthetic:
            return {
                name: generate_synthetic(task, task.nominal_size,
                                         seed=bench.derive_seed(self.data_seed, name),
                                         response=self.response)
                for name, task in DEFAULT_TASKS.items()
            }
        datasets = {}
        for name in ("target", self.source):
            if name not in self.csv_paths:
                raise ConfigError(f"config gives no CSV path for task {name!r}")
            datasets[name] = load_csv(self.csv_paths[name], DEFAULT_TASKS[name])
        return datasets


def _parse_cells(text: str) -> list[tuple[int, int]]:
    """Parse 'n_s x n_train' pairs like ``33x8, 25x12``."""
    cells = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n_s, n_train = item.split("x")
            cells.append((int(n_s), int(n_train)))
        except ValueError:
            raise ConfigError(f"bad cell spec {item!r}; expected like 33x8") from None
    return cells


def parse_config(path=None, overrides=None) -> RunConfig:
    """Read the [data]/[grid]/[run] config file and apply flag overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in ("data", "grid", "run"):
                raise ConfigError(f"unknown config section [{section}]")
        if parser.has_section("data"):
            for key, value in parser.items("data"):
                if key not in _DATA_KEYS:
                    raise ConfigError(f"unknown key {key!r} in [data]")
                if key == "synthetic":
                    cfg.synthetic = parser.getboolean("data", "synthetic")
                elif key == "response":
                    cfg.response = value
                elif key == "data_seed":
                    cfg.data_seed = int(value)
                else:
                    cfg.csv_paths[key] = value
                    cfg.synthetic = False
        if parser.has_section("grid"):
            for key, value in parser.items("grid"):
                if key not in _GRID_KEYS:
                    raise ConfigError(f"unknown key {key!r} in [grid]")
                if key == "kind":
                    cfg.grid = value
                elif key == "cells":
                    cfg.custom_cells = _parse_cells(value)
                else:
                    setattr(cfg, key, value)
        if parser.has_section("run"):
            for key, value in parser.items("run"):
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown key {key!r} in [run]")
                if key == "out":
                    cfg.out = value
                else:
                    setattr(cfg, key, int(value))
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    if cfg.grid not in _GRID_KINDS:
        raise ConfigError(f"unknown grid {cfg.grid!r}; pick from {_GRID_KINDS}")
    if cfg.source not in ("source1", "source2"):
        raise ConfigError(f"unknown source task {cfg.source!r}")
    if cfg.preprocess not in ("raw", "minmax", "zscore"):
        raise ConfigError(f"unknown preprocessing mode {cfg.preprocess!r}")
    if cfg.setting not in bench.SETTINGS:
        raise ConfigError(f"unknown setting {cfg.setting!r}")
    if cfg.iterations < 1 or cfg.workers < 1:
        raise ConfigError("iterations and workers must be >= 1")
    return cfg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


_CELL_COLUMNS = ("source_task", "n_s", "n_train_t", "ratio", "setting",
                 "preprocess", "model", "median_imp", "positive_ratio", "failures")
_ITER_COLUMNS = ("source_task", "n_s", "n_train_t", "setting", "preprocess",
                 "iter", "model", "mse", "imp")


def emit_report(report: bench.RunReport, out_dir) -> dict:
    """Write cells.csv, iterations.csv, and report.json under out_dir.

    Emission is deterministic: re-emitting an equal report produces
    byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name
             for name in ("cells.csv", "iterations.csv", "report.json")}

    with open(paths["cells.csv"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CELL_COLUMNS)
        for res in report.cells:
            c = res.cell
            for m in res.models:
                writer.writerow([
                    c.source_task, c.n_s, c.n_train_t, _fmt(c.ratio()), c.setting,
                    c.preprocess, m, _fmt(res.median_imp.get(m)),
                    _fmt(res.positive_ratio.get(m)), res.failures[m],
                ])

    with open(paths["iterations.csv"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ITER_COLUMNS)
        for res in report.cells:
            c = res.cell
            for m in res.models:
                for i in range(c.iterations):
                    imp = res.imp[m][i] if m in res.imp else None
                    writer.writerow([
                        c.source_task, c.n_s, c.n_train_t, c.setting, c.preprocess,
                        i + 1, m, _fmt(res.mse[m][i]), _fmt(imp),
                    ])

    with open(paths["report.json"], "w", encoding="utf-8") as fh:
        json.dump(_report_payload(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def _report_payload(report: bench.RunReport) -> dict:
    return {
        "schema": 1,
        "cells": [
            {
                "cell": {
                    "source_task": r.cell.source_task,
                    "n_s": r.cell.n_s,
                    "n_train_t": r.cell.n_train_t,
                    "n_val_t": r.cell.n_val_t,
                    "setting": r.cell.setting,
                    "preprocess": r.cell.preprocess,
                    "iterations": r.cell.iterations,
                    "base_seed": r.cell.base_seed,
                },
                "models": list(r.models),
                "mse": r.mse,
                "imp": r.imp,
                "median_mse": r.median_mse,
                "median_imp": r.median_imp,
                "positive_ratio": r.positive_ratio,
                "failures": r.failures,
            }
            for r in report.cells
        ],
    }


def load_report(path) -> bench.RunReport:
    """Reconstruct a RunReport equal to the one emit_report serialized."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cells = []
    for entry in payload["cells"]:
        c = entry["cell"]
        cell = bench.GridCell(
            source_task=c["source_task"], n_s=c["n_s"], n_train_t=c["n_train_t"],
            setting=c["setting"], preprocess=c["preprocess"],
            iterations=c["iterations"], base_seed=c["base_seed"],
            n_val_t=c["n_val_t"])
        cells.append(bench.CellResult(
            cell=cell,
            models=tuple(entry["models"]),
            mse=entry["mse"],
            imp=entry["imp"],
            median_mse=entry["median_mse"],
            median_imp=entry["median_imp"],
            positive_ratio=entry["positive_ratio"],
            failures=entry["failures"],
        ))
    return bench.RunReport(cells=tuple(cells))


def _cmd_run(args) -> int:
    overrides = {
        "grid": args.grid, "source": args.source, "setting": args.setting,
        "preprocess": args.preprocess, "iterations": args.iters,
        "seed": args.seed, "workers": args.workers, "out": args.out,
    }
    cfg = parse_config(args.config, overrides)
    plan = cfg.build_plan()
    datasets = cfg.load_datasets()
    print(f"running {len(plan)} cells x {cfg.iterations} iterations "
          f"({cfg.setting}, {cfg.preprocess}, workers={cfg.workers})")
    report = bench.run_grid(plan, datasets, workers=cfg.workers)
    paths = emit_report(report, cfg.out)
    for p in paths.values():
        print(f"wrote {p}")
    return 0


def _cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, task in DEFAULT_TASKS.items():
        ds = generate_synthetic(task, task.nominal_size,
                                seed=bench.derive_seed(args.seed, name),
                                response=args.response)
        path = out / f"{name}.csv"
        write_csv(ds, path)
        print(f"wrote {path} ({len(ds)} rows)")
    return 0


def _cmd_summarize(args) -> int:
    report = load_report(args.report)
    rows = bench.summarize(report, axis=args.axis)
    columns = sorted({k for row in rows for k in row},
                     key=lambda k: (k != "x", k))

    def write_rows(fh):
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])

    if args.out is None:
        write_rows(sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_rows(fh)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amtransfer",
        description="Transfer-learning benchmark for small-data tabular regression")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a benchmark grid")
    run.add_argument("--config", default=None, help="key=value config file")
    run.add_argument("--grid", choices=_GRID_KINDS, default=None)
    run.add_argument("--source", choices=("source1", "source2"), default=None)
    run.add_argument("--setting", choices=tuple(bench.SETTINGS), default=None)
    run.add_argument("--preprocess", choices=("raw", "minmax", "zscore"), default=None)
    run.add_argument("--iters", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out", default=None)
    run.set_defaults(fn=_cmd_run)

    synth = sub.add_parser("synth", help="write synthetic CSV datasets")
    synth.add_argument("--out", default="synth")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--response", choices=("affine", "quadratic"), default="affine")
    synth.set_defaults(fn=_cmd_synth)

    summ = sub.add_parser("summarize", help="tables from a written report.json")
    summ.add_argument("--report", required=True)
    summ.add_argument("--axis", choices=bench.SUMMARY_AXES,
                      default="ratio_ntrain_over_ns")
    summ.add_argument("--out", default=None)
    summ.set_defaults(fn=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except AmTransferError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
