"""Configuration-driven experiment runner.

``blockmg run <config>`` reproduces the iteration-count experiments and
certification reports from a flat key=value config file, ``blockmg
table`` renders result CSVs as an aligned text table, and ``blockmg
certify`` checks a (problem, projector) symbol pair from exchange files.

Exit codes: 0 success, 2 when any solve failed to converge, 3 on
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .conditions import full_report
from .errors import BlockmgError, ConfigurationError
from .femgen import (COEFFICIENTS, GEOMETRIC, LINEAR, assemble_stiffness,
                     build_fem_hierarchy, build_geometric_symbol,
                     build_linear_interp_symbol, mass_symbol,
                     stiffness_symbol)
from .mgsolve import (DEFAULT_SEED, GAUSS_SEIDEL, RICHARDSON, TGM, VCYCLE,
                      SmootherSpec, richardson_omega_default, solve)
from .multilevel import (assemble_2d_problem, build_2d_hierarchy,
                         check_multilevel_conditions, tensor_sum_symbol)
from .symbol import read_symbol

CSV_HEADER = ["t", "N", "cycle", "iterations", "final_residual", "flag"]

MODES = ("solve", "certify", "both")
PROJECTORS = (LINEAR, GEOMETRIC)
CYCLES = (TGM, VCYCLE)
SMOOTHERS = (GAUSS_SEIDEL, RICHARDSON)


@dataclass
class ExperimentConfig:
    """Validated experiment description; defaults reproduce the 1D
    degree-2 constant-coefficient V-cycle column."""

    mode: str = "solve"
    dim: int = 1
    r: int = 2
    t_range: tuple = (4, 5, 6, 7, 8, 9, 10)
    coefficient: str = "one"
    projector: str = LINEAR
    cycle: str = VCYCLE
    smoother: str = GAUSS_SEIDEL
    omega: float | None = None
    sweeps_pre: int = 1
    sweeps_post: int = 1
    tol: float = 1e-6
    max_iter: int = 100
    seed: int = DEFAULT_SEED
    jobs: int = 1
    output: str = "."

    def validate(self) -> None:
        checks = [
            (self.mode in MODES, f"mode must be one of {MODES}"),
            (self.dim in (1, 2), "dim must be 1 or 2"),
            (self.r >= 1, "r must be >= 1"),
            (len(self.t_range) > 0, "t_range must be nonempty"),
            (all(t >= 2 for t in self.t_range), "every t must be >= 2"),
            (self.coefficient in COEFFICIENTS,
             f"coefficient must be one of {sorted(COEFFICIENTS)}"),
            (self.projector in PROJECTORS, f"projector must be one of {PROJECTORS}"),
            (self.cycle in CYCLES, f"cycle must be one of {CYCLES}"),
            (self.smoother in SMOOTHERS, f"smoother must be one of {SMOOTHERS}"),
            (self.tol > 0, "tol must be positive"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        if self.dim == 2 and self.coefficient != "one":
            raise ConfigurationError(
                "2D experiments support only the constant coefficient")


def _parse_t_range(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(","))


def parse_config(path) -> ExperimentConfig:
    """Parse a flat key=value config file ('#' starts a comment)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    config = ExperimentConfig()
    valid = {f.name for f in fields(ExperimentConfig)}
    parsers = {
        "dim": int, "r": int, "sweeps_pre": int, "sweeps_post": int,
        "max_iter": int, "seed": int, "jobs": int,
        "tol": float, "omega": float, "t_range": _parse_t_range,
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            parsed = parsers.get(key, str)(value)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {exc}") from exc
        config = replace(config, **{key: parsed})
    config.validate()
    return config


def _smoother_spec(config: ExperimentConfig, matrix) -> SmootherSpec:
    omega = config.omega
    if config.smoother == RICHARDSON and omega is None:
        omega = richardson_omega_default(matrix)
    return SmootherSpec(kind=config.smoother, omega=omega,
                        sweeps_pre=config.sweeps_pre,
                        sweeps_post=config.sweeps_post)


def _solve_one(config: ExperimentConfig, t: int) -> dict:
    two_level = config.cycle == TGM
    if config.dim == 1:
        problem = assemble_stiffness(config.r, 2 ** t, config.coefficient)
        matrix = problem.matrix
        hierarchy = build_fem_hierarchy(problem, config.projector,
                                        _smoother_spec(config, matrix),
                                        two_level=two_level)
    else:
        problem = assemble_2d_problem(config.r, t)
        matrix = problem.matrix
        hierarchy = build_2d_hierarchy(problem, config.projector,
                                       _smoother_spec(config, matrix),
                                       two_level=two_level)
    rng = np.random.default_rng([config.seed, t])
    x_exact = rng.uniform(size=matrix.size)
    b = matrix.matrix @ x_exact
    result = solve(hierarchy, b, tol=config.tol, max_iter=config.max_iter,
                   cycle=config.cycle)
    final = result.residuals[-1] if result.residuals else 0.0
    return {"t": t, "N": matrix.size, "cycle": config.cycle,
            "iterations": result.iterations, "final_residual": final,
            "flag": result.flag}


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="ascii")
    os.replace(tmp, path)


def _solve_stem(config: ExperimentConfig) -> str:
    return (f"solve_dim{config.dim}_r{config.r}_{config.coefficient}"
            f"_{config.projector}_{config.cycle}")


def run(config: ExperimentConfig) -> int:
    """Execute the configured experiments; returns the process exit code."""
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    code = 0
    if config.mode in ("solve", "both"):
        ts = list(config.t_range)
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                rows = list(pool.map(lambda t: _solve_one(config, t), ts))
        else:
            rows = [_solve_one(config, t) for t in ts]
        lines = [",".join(CSV_HEADER)]
        for row in rows:
            lines.append(f"{row['t']},{row['N']},{row['cycle']},"
                         f"{row['iterations']},{float(row['final_residual'])!r},"
                         f"{row['flag']}")
        csv_path = out_dir / (_solve_stem(config) + ".csv")
        _atomic_write(csv_path, "\n".join(lines) + "\n")
        print(f"wrote {csv_path}")
        if any(row["flag"] for row in rows):
            code = 2
    if config.mode in ("certify", "both"):
        f = stiffness_symbol(config.r)
        builder = (build_linear_interp_symbol if config.projector == LINEAR
                   else build_geometric_symbol)
        p = builder(config.r)
        if config.dim == 1:
            report = full_report(p, f)
        else:
            f2d = tensor_sum_symbol(f, mass_symbol(config.r))
            report = check_multilevel_conditions([p, p], f2d, fs=[f, f])
        json_path = out_dir / f"certify_dim{config.dim}_r{config.r}_{config.projector}.json"
        _atomic_write(json_path, report.to_json() + "\n")
        print(f"wrote {json_path}")
    return code


def _read_rows(path) -> list:
    try:
        with open(path, newline="", encoding="ascii") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != CSV_HEADER:
        raise ConfigurationError(
            f"{path}: header {rows[0] if rows else '(empty)'} does not match "
            f"the schema {CSV_HEADER}")
    return rows[1:]


def print_table(paths) -> int:
    """Render one or more result CSVs as an aligned text table, one
    column group per file, one subcolumn per cycle."""
    groups = []
    for path in paths:
        rows = _read_rows(path)
        label = Path(path).stem
        cycles = []
        values = {}
        for row in rows:
            t, cycle, iters, flag = int(row[0]), row[2], row[3], row[5]
            if cycle not in cycles:
                cycles.append(cycle)
            values[(t, cycle)] = iters + ("*" if flag else "")
        groups.append({"label": label, "cycles": cycles, "values": values})
    all_t = sorted({t for g in groups for (t, _) in g["values"]})
    if not all_t:
        print("no data")
        return 0
    header1 = ["t"]
    header2 = [""]
    for g in groups:
        for k, cyc in enumerate(g["cycles"]):
            header1.append(g["label"] if k == 0 else "")
            header2.append(cyc)
    table = [header1, header2]
    for t in all_t:
        row = [str(t)]
        for g in groups:
            for cyc in g["cycles"]:
                row.append(g["values"].get((t, cyc), "-"))
        table.append(row)
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return 0


def certify_files(f_path, p_path, output=None) -> int:
    """Full condition report for symbols read from exchange files."""
    f = read_symbol(f_path)
    p = read_symbol(p_path)
    report = full_report(p, f)
    text = report.to_json()
    if output:
        _atomic_write(Path(output), text + "\n")
        print(f"wrote {output}")
    else:
        print(text)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blockmg",
        description="symbol-based multigrid experiments and certification")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run experiments from a config file")
    p_run.add_argument("config", help="path to a key=value config file")
    p_table = sub.add_parser("table", help="format result CSVs as a text table")
    p_table.add_argument("csv", nargs="+", help="result CSV paths")
    p_cert = sub.add_parser("certify", help="certify a symbol pair from files")
    p_cert.add_argument("f_symbol", help="problem symbol exchange file")
    p_cert.add_argument("p_symbol", help="projector symbol exchange file")
    p_cert.add_argument("--output", default=None, help="write the JSON report here")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(parse_config(args.config))
        if args.command == "table":
            return print_table(args.csv)
        return certify_files(args.f_symbol, args.p_symbol, args.output)
    except BlockmgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
