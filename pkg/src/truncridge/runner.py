"""Experiment configuration and the gen / rates / sweep pipelines."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datagen import ProblemSpec, make_spline_problem, write_dataset, zero_noise_problem_spec
from .evaluation import (
    DEFAULT_GRID_SIZE,
    RISK_MODES,
    CellResult,
    split_seed,
    default_lambda_grid,
    derive_seed,
    evaluate_cell,
    fit_rate,
    predicted_rate,
)
from . import plotting

log = logging.getLogger(__name__)

RESULT_FIELDS = ["n", "lambda", "rep", "seed", "excess_risk", "std_error", "mode", "elapsed_ms"]
SUMMARY_FIELDS = ["n", "best_lambda", "excess_risk", "std_error", "repetitions"]


class ConfigError(ValueError):
    pass


class CellError(RuntimeError):
    def __init__(self, message: str, seed: int | None = None):
        super().__init__(message)
        self.seed = seed

    def __reduce__(self):
        return (CellError, (str(self), self.seed))


def default_n_grid(points: int = 8, lo: int = 100, hi: int = 1000) -> list[int]:
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, points)})


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    n_grid: list[int] = field(default_factory=default_n_grid)
    lambda_grid: list[float] = field(default_factory=default_lambda_grid)
    repetitions: int = 5
    master_seed: int = 0
    risk_mode: str = "k_average"
    tail_fraction: float = 1.0
    output_dir: Path = Path("out")
    t_grid_size: int = DEFAULT_GRID_SIZE
    jobs: int = 1
    timing: bool = False
    label: str = ""

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        self.validate()

    def validate(self):
        if not self.n_grid:
            raise ConfigError("n_grid is empty")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be sorted ascending")
        if min(self.n_grid) < 2:
            raise ConfigError("every n must be >= 2")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.lambda_grid or min(self.lambda_grid) < 0:
            raise ConfigError("lambda_grid must be nonempty and nonnegative")
        if self.risk_mode not in RISK_MODES:
            raise ConfigError(f"risk_mode must be one of {RISK_MODES}")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def predicted_slope(self) -> float:
        return -predicted_rate(self.problem)


# --- config files ------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _number(text: str) -> float:
    # allow simple fractions like 7/16
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read an INI file with optional ``[problem]`` and ``[experiment]`` sections.

    Every key has a default; ``overrides`` (non-None values) win over the file.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
    try:
        p = cp["problem"] if cp.has_section("problem") else {}
        e = cp["experiment"] if cp.has_section("experiment") else {}
        kind = p.get("kind", "spline")
        n_test = int(p["n_test"]) if "n_test" in p else None
        if kind == "spline":
            problem = ProblemSpec(
                b=_number(p.get("b", "1/8")),
                beta=_number(p.get("beta", "7/16")),
                epsilon=_number(p.get("epsilon", "0.1")),
                n_test=n_test,
            )
        elif kind == "zero_noise":
            problem = zero_noise_problem_spec(int(p.get("q", "2")), 100, n_test)
        else:
            raise ConfigError(f"unknown problem kind {kind!r}")

        if "n_grid" in e:
            n_grid = _ints(e["n_grid"])
        else:
            n_grid = default_n_grid(int(e.get("n_points", "8")), int(e.get("n_min", "100")),
                                    int(e.get("n_max", "1000")))
        if "lambda_grid" in e:
            lambda_grid = _floats(e["lambda_grid"])
        else:
            lambda_grid = default_lambda_grid(
                int(e.get("lambda_points", "25")),
                float(e.get("lambda_min", "1e-6")),
                float(e.get("lambda_max", "1")),
                e.get("include_zero", "true").lower() in ("1", "true", "yes", "on"),
            )
        values = dict(
            problem=problem,
            n_grid=n_grid,
            lambda_grid=lambda_grid,
            repetitions=int(e.get("repetitions", "5")),
            master_seed=int(e.get("seed", "0")),
            risk_mode=e.get("risk_mode", "k_average"),
            tail_fraction=_number(e.get("tail_fraction", "1")),
            output_dir=Path(e.get("output_dir", "out")),
            t_grid_size=int(e.get("t_grid_size", str(DEFAULT_GRID_SIZE))),
            jobs=int(e.get("jobs", "1")),
            timing=e.get("timing", "false").lower() in ("1", "true", "yes", "on"),
            label=e.get("label", ""),
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --- cells -------------------------------------------------------------

def _run_cell(args):
    problem, n, lams, rep, seed, mode, tail, grid_size = args
    try:
        return evaluate_cell(problem, n, lams, rep, seed, mode, tail, grid_size)
    except Exception as exc:  # re-raised with the seed attached
        raise CellError(f"cell n={n} rep={rep} seed={seed} failed: {exc!r}", seed) from exc


def run_cells(cfg: ExperimentConfig, n_grid=None) -> list[list[CellResult]]:
    """All ``(n, rep)`` cells, ordered by ``n`` then ``rep``."""
    jobs = [
        (cfg.problem, n, list(cfg.lambda_grid), rep, derive_seed(cfg.master_seed, n, rep),
         cfg.risk_mode, cfg.tail_fraction, cfg.t_grid_size)
        for n in (n_grid or cfg.n_grid)
        for rep in range(cfg.repetitions)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_cell, jobs))
    out = []
    for job in jobs:
        out.append(_run_cell(job))
        log.info("n=%d rep=%d done", job[1], job[3])
    return out


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def results_csv(cells, timing: bool = False) -> str:
    """Result rows ordered by ``n``, grid position of ``lambda``, ``rep``."""
    by_n: dict[int, list] = {}
    for cell in cells:
        by_n.setdefault(cell[0].n, []).append(cell)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for n in sorted(by_n):
        reps = by_n[n]
        for j in range(len(reps[0])):
            for cell in reps:
                r = cell[j]
                w.writerow([r.n, _fmt(r.lam), r.rep, r.seed, _fmt(r.risk.excess_risk),
                            _fmt(r.risk.std_error), r.risk.mode,
                            f"{r.elapsed_ms:.3f}" if timing else "0"])
    return buf.getvalue()


def summarize(cells) -> list[dict]:
    """Best ``lambda`` per ``n`` by mean excess risk over repetitions."""
    by_n: dict[int, list] = {}
    for cell in cells:
        by_n.setdefault(cell[0].n, []).append(cell)
    rows = []
    for n in sorted(by_n):
        table = np.array([[r.risk.excess_risk for r in cell] for cell in by_n[n]])
        means = table.mean(axis=0)
        j = int(np.argmin(means))
        reps = table.shape[0]
        se = float(table[:, j].std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
        rows.append({"n": n, "best_lambda": by_n[n][0][j].lam, "excess_risk": float(means[j]),
                     "std_error": se, "repetitions": reps})
    return rows


def _write_rows(path: Path, fields, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in row.items()})
    path.write_text(buf.getvalue())


def run_rates(cfg: ExperimentConfig) -> dict:
    """Sweep every ``(n, lambda, rep)``, pick the best lambda per ``n``, fit the rate.

    Writes ``results.csv``, ``rates_summary.csv``, ``rate_fit.json`` and
    ``rates.svg`` into ``cfg.output_dir``.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cells = run_cells(cfg)
    (out / "results.csv").write_text(results_csv(cells, cfg.timing))
    summary = summarize(cells)
    _write_rows(out / "rates_summary.csv", SUMMARY_FIELDS, summary)
    fit = None
    if len(summary) >= 3:
        fit = fit_rate([(r["n"], r["excess_risk"]) for r in summary])
    report = {
        "label": cfg.label,
        "slope": None if fit is None else fit.slope,
        "intercept": None if fit is None else fit.intercept,
        "r_squared": None if fit is None else fit.r_squared,
        "predicted_slope": cfg.predicted_slope(),
        "risk_mode": cfg.risk_mode,
        "tail_fraction": cfg.tail_fraction,
        "repetitions": cfg.repetitions,
        "master_seed": cfg.master_seed,
        "points": [[r["n"], r["best_lambda"], r["excess_risk"], r["std_error"]] for r in summary],
    }
    (out / "rate_fit.json").write_text(json.dumps(report, indent=2) + "\n")
    plotting.rate_figure([(r["n"], r["excess_risk"], r["std_error"]) for r in summary], fit,
                         cfg.predicted_slope(), out / "rates.svg", cfg.label)
    return report


def run_sweep(cfg: ExperimentConfig, n: int) -> dict:
    """Lambda sweep at one ``n``; writes ``sweep_n{n}.csv`` and ``sweep_n{n}.svg``."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cells = run_cells(cfg, [int(n)])
    (out / f"sweep_n{n}.csv").write_text(results_csv(cells, cfg.timing))
    lams = list(cfg.lambda_grid)
    means = np.array([[r.risk.excess_risk for r in cell] for cell in cells]).mean(axis=0)
    plotting.sweep_figure(lams, means, int(n), out / f"sweep_n{n}.svg")
    j = int(np.argmin(means))
    return {"n": int(n), "best_lambda": lams[j], "excess_risk": float(means[j]),
            "lambdas": lams, "mean_excess": [float(v) for v in means]}


def run_gen(cfg: ExperimentConfig) -> list[Path]:
    """Write train/test CSVs for every ``(n, rep)``; file names carry the cell seed."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in cfg.n_grid:
        for rep in range(cfg.repetitions):
            seed = derive_seed(cfg.master_seed, n, rep)
            data_seed, _ = split_seed(seed)
            train, test, _ = make_spline_problem(cfg.problem.with_(n_train=n, seed=data_seed))
            stem = f"n{n}_rep{rep}_seed{seed}"
            paths.append(write_dataset(train, out / f"{stem}_train.csv"))
            paths.append(write_dataset(test, out / f"{stem}_test.csv"))
    return paths


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    try:
        return replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
