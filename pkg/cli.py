#!/usr/bin/env python3
"""
cli.py — Command-line entry point.

Usage:
  python3 cli.py train --data synthetic:phi1 --loss uniform --activation relu --pairs 1 --engine dca --seed 7
  python3 cli.py eval runs/dca_phi1_uniform_relu_1_s7.weights --data synthetic:phi1 --loss uniform
  python3 cli.py table1 --out runs/table1 --time-budget 30 --ecg-train TwoLeadECG_TRAIN.tsv

Exit codes: 0 success, 2 when a DCA run used up its time budget, 1 on errors
(including bad flags).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import settings
from baseline import OptimizerKind, default_optimizer, train_baseline
from dataset import GridSpec, load_source
from dca import DcaStatus, run_dca
from model import Activation, ActivationKind, Norm, load_weights, loss, save_weights

logger = logging.getLogger("cli")

ENGINES = ("dca", "adam", "adamax")
SUMMARY_HEADER = ("engine", "loss", "activation", "pairs", "final_objective", "status", "wall_ms")
TABLE_HEADER = ("dataset", "activation", "loss", "nodes", "nn", "dca")
FAILED = "F"
ERRORED = "ERR"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this CLI reserves 2 for time-outs."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_activation(text: str) -> Activation:
    """`relu`, `leaky` (alpha 0.01) or `leaky:<alpha>` with 0 < alpha < 1."""
    raw = text.strip().lower()
    if raw == "relu":
        return Activation.relu()
    if raw == "leaky":
        return Activation.leaky()
    if raw.startswith("leaky:"):
        try:
            alpha = float(raw.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse leaky alpha in {text!r}") from None
        if not 0.0 < alpha < 1.0:
            raise argparse.ArgumentTypeError(f"leaky alpha must lie in (0, 1), got {alpha}")
        return Activation.leaky(alpha)
    raise argparse.ArgumentTypeError(f"unknown activation {text!r} (relu, leaky or leaky:<alpha>)")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


@dataclass
class RunSpec:
    data: str
    loss: Norm = Norm.UNIFORM
    activation: Activation = field(default_factory=Activation.relu)
    pairs: int = 1
    engine: str = "dca"
    seed: int = 0
    max_iters: int | None = None
    eps: float | None = None
    time_budget: float | None = None
    trust_radius: float | None = None
    out: Path = Path("runs")
    augment_bias: bool = False
    jobs: int | None = None

    def __post_init__(self) -> None:
        self.loss = Norm(self.loss)
        self.out = Path(self.out)
        if self.pairs < 1:
            raise ValueError(f"pairs must be >= 1, got {self.pairs}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {', '.join(ENGINES)}, got {self.engine!r}")

    @property
    def stem(self) -> str:
        source = self.data.split(":", 1)[1] if self.data.startswith("synthetic:") else Path(self.data).stem
        act = self.activation.label.replace(":", "")
        return f"{self.engine}_{source}_{self.loss.value}_{act}_{self.pairs}_s{self.seed}"


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    final_objective: float
    status: str
    wall_ms: float
    weights_path: Path
    detail: str = ""

    def summary_line(self, spec: RunSpec) -> str:
        return ",".join([
            spec.engine, spec.loss.value, spec.activation.label, str(spec.pairs),
            repr(self.final_objective), self.status, f"{self.wall_ms:.0f}",
        ])


def execute_run(spec: RunSpec, grid: GridSpec | None = None) -> RunOutcome:
    """Train one model and write its weights plus trace or loss curve under spec.out."""
    data = load_source(spec.data, grid=grid or settings.grid_spec(), augment_bias=spec.augment_bias)
    spec.out.mkdir(parents=True, exist_ok=True)
    weights_path = spec.out / f"{spec.stem}.weights"
    started = time.monotonic()

    if spec.engine == "dca":
        cfg = settings.dca_config(
            max_iters=spec.max_iters, eps_objective=spec.eps, time_budget_secs=spec.time_budget,
            trust_radius=spec.trust_radius, seed=spec.seed,
        )
        trace = run_dca(data, spec.pairs, spec.activation, spec.loss, cfg, settings.solver_config())
        trace.write_csv(spec.out / f"{spec.stem}.trace.csv")
        save_weights(weights_path, trace.best_weights, spec.activation)
        value, status, detail = trace.best_p, trace.status.value, trace.reason
    else:
        cfg = settings.baseline_config(OptimizerKind(spec.engine), max_epochs=spec.max_iters, seed=spec.seed)
        result = train_baseline(data, spec.pairs, spec.activation, spec.loss, cfg)
        result.write_curve_csv(spec.out / f"{spec.stem}.curve.csv")
        save_weights(weights_path, result.final_weights, spec.activation)
        value, status, detail = result.final_loss, "Completed", f"best epoch {result.best_epoch}"

    wall_ms = (time.monotonic() - started) * 1000.0
    return RunOutcome(value, status, wall_ms, weights_path, detail)


def _append_summary(out: Path, line: str) -> None:
    path = out / "summary.csv"
    fresh = not path.exists()
    with path.open("a", encoding="utf-8") as fh:
        if fresh:
            fh.write(",".join(SUMMARY_HEADER) + "\n")
        fh.write(line + "\n")


def cmd_train(spec: RunSpec) -> int:
    outcome = execute_run(spec)
    line = outcome.summary_line(spec)
    _append_summary(spec.out, line)
    print(line)
    logger.info("%s: %s (%s)", spec.stem, outcome.status, outcome.detail)
    if outcome.status == DcaStatus.TIME_BUDGET.value:
        return 2
    if outcome.status == DcaStatus.LP_FAILURE.value:
        return 1
    return 0


def cmd_eval(weights_file: str | Path, data_source: str, norm: Norm, activation: Activation | None = None, augment_bias: bool = False) -> int:
    w, stored = load_weights(weights_file)
    data = load_source(data_source, grid=settings.grid_spec(), augment_bias=augment_bias)
    value = loss(w, activation or stored, Norm(norm), data)
    print(f"{value:.6f}")
    return 0


# ---------------------------------------------------------------------------
# Table harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellSpec:
    index: int
    dataset: str
    run: RunSpec
    grid: GridSpec


@dataclass(frozen=True)
class CellResult:
    index: int
    display: str
    value: float | None
    status: str
    wall_ms: float
    weights_path: str = ""
    seed: int | None = None


def cell_seed(index: int, seed: int) -> int:
    digest = hashlib.sha256(f"{index}:{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def dca_seed_schedule(seed: int, count: int) -> list[int]:
    """The cell's own seed first, then seeds derived from it."""
    return [seed] + [cell_seed(seed, j) for j in range(1, count)]


def _restart_key(outcome: RunOutcome) -> tuple[int, float]:
    finished = outcome.status in (DcaStatus.CONVERGED.value, DcaStatus.ITER_LIMIT.value, "Completed")
    return (0 if finished else 1, outcome.final_objective)


def _run_cell(cell: CellSpec) -> CellResult:
    """
    Run one table cell. A DCA cell tries up to settings.table_dca_seeds()
    seeds within one shared time budget and keeps the lowest finished
    objective; a failed restart never displaces a finished one.
    """
    run = cell.run
    seeds = [run.seed]
    budget = None
    if run.engine == "dca":
        seeds = dca_seed_schedule(run.seed, settings.table_dca_seeds())
        budget = run.time_budget or settings.dca_config().time_budget_secs

    started = time.monotonic()
    best: tuple[RunSpec, RunOutcome] | None = None
    try:
        for j, seed in enumerate(seeds):
            attempt = replace(run, seed=seed)
            if j > 0:
                remaining = budget - (time.monotonic() - started)
                if remaining <= 0:
                    break
                attempt = replace(attempt, time_budget=remaining)
            outcome = execute_run(attempt, grid=cell.grid)
            if best is None or _restart_key(outcome) < _restart_key(best[1]):
                best = (attempt, outcome)
    except Exception:
        logger.exception("table cell %d (%s) failed", cell.index, run.stem)
        return CellResult(cell.index, ERRORED, None, "Error", 0.0)
    wall_ms = (time.monotonic() - started) * 1000.0
    chosen, outcome = best
    if len(seeds) > 1:
        logger.info(
            "table cell %d: kept seed %d (p=%.10g, %s)", cell.index, chosen.seed, outcome.final_objective, outcome.status
        )

    display = repr(outcome.final_objective)
    if outcome.status == DcaStatus.TIME_BUDGET.value:
        display = FAILED
    elif outcome.status == DcaStatus.LP_FAILURE.value:
        display = FAILED if "IterLimit" in outcome.detail else ERRORED
    return CellResult(
        cell.index, display, outcome.final_objective, outcome.status, wall_ms, str(outcome.weights_path), chosen.seed
    )


def table_cells(base: RunSpec, datasets: list[tuple[str, str]], grid: GridSpec) -> list[CellSpec]:
    """Fixed order: dataset, loss, activation, pairs, then baseline before DCA."""
    leaky = base.activation if base.activation.kind is ActivationKind.LEAKY else Activation.leaky()
    cells: list[CellSpec] = []
    for label, source in datasets:
        for norm in (Norm.UNIFORM, Norm.MANHATTAN):
            for act in (Activation.relu(), leaky):
                for pairs in (1, 2):
                    for engine in (default_optimizer(norm).value, "dca"):
                        index = len(cells)
                        run = replace(
                            base, data=source, loss=norm, activation=act, pairs=pairs, engine=engine,
                            seed=cell_seed(index, base.seed), out=base.out / "cells" / label,
                            max_iters=base.max_iters if engine == "dca" else None,
                        )
                        cells.append(CellSpec(index, label, run, grid))
    return cells


def cmd_table1(base: RunSpec, ecg_train: str | None = None, ecg_test: str | None = None) -> int:
    datasets = []
    if ecg_train:
        datasets.append(("ecg_train", ecg_train))
    if ecg_test:
        datasets.append(("ecg_test", ecg_test))
    datasets += [("phi1", "synthetic:phi1"), ("phi2", "synthetic:phi2")]
    grid = settings.grid_spec()
    cells = table_cells(base, datasets, grid)
    jobs = base.jobs or settings.default_jobs()
    logger.info("table: %d cells over %d dataset(s), %d worker(s)", len(cells), len(datasets), jobs)

    if jobs == 1:
        results = [_run_cell(c) for c in cells]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    by_index = {r.index: r for r in results}

    base.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(0, len(cells), 2):
        nn_cell, dca_cell = cells[k], cells[k + 1]
        run = dca_cell.run
        rows.append([
            dca_cell.dataset, run.activation.label, run.loss.value,
            f"{2 * run.pairs} ({run.pairs} pair{'s' if run.pairs > 1 else ''})",
            by_index[nn_cell.index].display, by_index[dca_cell.index].display,
        ])
    with (base.out / "table1.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADER)
        writer.writerows(rows)
    with (base.out / "table1_runs.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("dataset",) + SUMMARY_HEADER + ("seed", "weights"))
        for cell in cells:
            res, run = by_index[cell.index], cell.run
            writer.writerow([
                cell.dataset, run.engine, run.loss.value, run.activation.label, run.pairs,
                res.display, res.status, f"{res.wall_ms:.0f}", "" if res.seed is None else res.seed, res.weights_path,
            ])

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    writer.writerows(rows)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_run_args(p: argparse.ArgumentParser, data_required: bool = True) -> None:
    p.add_argument("--data", required=data_required, help="Dataset file or synthetic:phi1 / synthetic:phi2")
    p.add_argument("--loss", choices=[n.value for n in Norm], default=Norm.UNIFORM.value)
    p.add_argument("--activation", type=parse_activation, default=Activation.relu(), help="relu | leaky | leaky:<alpha>")
    p.add_argument("--pairs", type=_positive_int, default=1)
    p.add_argument("--engine", choices=ENGINES, default="dca")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=None, help="DCA iterations or baseline epochs")
    p.add_argument("--eps", type=float, default=None, help="DCA stopping threshold on the objective decrease")
    p.add_argument("--time-budget", type=float, default=None, help="Wall-clock seconds per DCA run ('F' beyond it)")
    p.add_argument("--trust-radius", type=float, default=None)
    p.add_argument("--out", default="runs", help="Output directory")
    p.add_argument("--augment-bias", action="store_true", help="Append a constant-1 feature")
    p.add_argument("--jobs", type=_positive_int, default=None, help="Worker processes for table1")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dcnet", description="DCA training of pair-form ReLU networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    train = sub.add_parser("train", help="Train one network")
    _add_run_args(train)

    ev = sub.add_parser("eval", help="Evaluate a saved weight file")
    ev.add_argument("weights", help="Weight file written by train")
    ev.add_argument("--data", required=True)
    ev.add_argument("--loss", choices=[n.value for n in Norm], default=Norm.UNIFORM.value)
    ev.add_argument("--activation", type=parse_activation, default=None, help="Override the stored activation")
    ev.add_argument("--augment-bias", action="store_true")

    table = sub.add_parser("table1", help="Run the loss x activation x pairs comparison grid")
    _add_run_args(table, data_required=False)
    table.add_argument("--ecg-train", default=None, help="TwoLeadECG training file (UCR layout)")
    table.add_argument("--ecg-test", default=None, help="TwoLeadECG test file (UCR layout)")
    return parser


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    return RunSpec(
        data=args.data or "",
        loss=Norm(args.loss),
        activation=args.activation,
        pairs=args.pairs,
        engine=args.engine,
        seed=args.seed,
        max_iters=args.max_iters,
        eps=args.eps,
        time_budget=args.time_budget,
        trust_radius=args.trust_radius,
        out=Path(args.out),
        augment_bias=args.augment_bias,
        jobs=args.jobs,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=settings.log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "eval":
            return cmd_eval(args.weights, args.data, Norm(args.loss), args.activation, args.augment_bias)
        spec = _spec_from_args(args)
        if args.command == "train":
            return cmd_train(spec)
        return cmd_table1(spec, args.ecg_train, args.ecg_test)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
