"""Evaluation campaigns comparing shadow and Bayesian estimates.

Picture 1 keeps the ground truth |0><0| and estimates three fixed rank-1
observables.  Picture 2 draws one Haar-random projector per trial, which
is equivalent to a random ground truth with a fixed observable.  Both
pictures consume the same simulated datasets.

The unit of work is a *cell*: the shadow of one (dim, trial), or one chain
for (estimator, dim, trial, M).  Every cell is seeded from its own labels,
so results do not depend on scheduling or worker count.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bayes import (
    BornLikelihood,
    ChainConfig,
    FrobeniusShadowLikelihood,
    ObservableLikelihood,
    auto_K,
    bme_expectation,
    overlap_with_shadow,
    run_chain,
)
from .errors import ConfigError, ShadowBenchError
from .shadow import Observable, Shadow, shadow_expectation_grid
from .simulate import RngStream, derive_stream_id, load_dataset, sample_haar_unit_vector, simulate_dataset

logger = logging.getLogger(__name__)

ESTIMATORS = ("shadow", "bme_born", "bme_frobenius", "bme_observable", "bme_observable_single")
BME_M_GRID = (1, 50, 100, 200, 400, 600, 800, 1000)

_KIND = {
    "bme_born": "born",
    "bme_frobenius": "frobenius",
    "bme_observable": "observable",
    "bme_observable_single": "observable",
}

RESULT_COLUMNS = (
    "picture", "dim", "trial", "estimator", "observable", "m",
    "estimate", "ground_truth", "stderr", "seed", "wall_time_ms",
)
MSE_COLUMNS = ("picture", "dim", "estimator", "observable", "m", "mse", "n_trials")


def canonical_observables(dim: int) -> list[Observable]:
    """Projectors onto |0>, an equal mix of |0> and the rest, and |1>.

    Their values on |0><0| are 1, 1/2 and 0.
    """
    if dim < 2:
        raise ShadowBenchError(f"canonical observables need dim >= 2, got {dim}")
    e0 = np.zeros(dim, dtype=np.complex128)
    e0[0] = 1.0
    e1 = np.zeros(dim, dtype=np.complex128)
    e1[1] = 1.0
    mid = np.full(dim, 1.0 / math.sqrt(2 * (dim - 1)), dtype=np.complex128)
    mid[0] = 1.0 / math.sqrt(2)
    # summing the tail adds rounding error beyond 1e-12
    mid /= math.sqrt(np.vdot(mid, mid).real)
    return [
        Observable.projector(e0, "canonical:0"),
        Observable.projector(mid, "canonical:1"),
        Observable.projector(e1, "canonical:2"),
    ]


def random_observable(dim: int, rng: RngStream, tag: str = "random") -> Observable:
    """Projector onto a Haar-random unit vector."""
    if dim < 2:
        raise ShadowBenchError(f"random observables need dim >= 2, got {dim}")
    return Observable.projector(sample_haar_unit_vector(dim, rng), tag)


def picture2_observable(root_seed: int, dim: int, trial: int) -> Observable:
    return random_observable(dim, RngStream(root_seed, derive_stream_id("observable", dim, trial)))


@dataclass
class ExperimentPlan:
    picture: int = 1
    dims: list[int] = field(default_factory=lambda: [32])
    trials: int = 10
    m_grid: list[int] = field(default_factory=lambda: list(BME_M_GRID))
    estimators: list[str] = field(default_factory=lambda: ["shadow"])
    shadow_m_grid: list[int] | None = None
    shots: int | None = None
    chain_overrides: dict = field(default_factory=dict)
    K: float | None = None
    root_seed: int = 7
    dataset_dir: str | None = None

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        self.m_grid = [int(m) for m in self.m_grid]
        if self.shadow_m_grid is not None:
            self.shadow_m_grid = [int(m) for m in self.shadow_m_grid]
        self.validate()

    @property
    def shadow_grid(self) -> list[int]:
        return self.m_grid if self.shadow_m_grid is None else self.shadow_m_grid

    @property
    def shots_per_dataset(self) -> int:
        if self.shots is not None:
            return self.shots
        return max(self.m_grid + self.shadow_grid)

    def validate(self) -> None:
        if self.picture not in (1, 2):
            raise ConfigError(f"picture must be 1 or 2, got {self.picture}")
        if not self.dims or min(self.dims) < 2:
            raise ConfigError("dims must be a nonempty list of values >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        for name, grid in (("m_grid", self.m_grid), ("shadow_m_grid", self.shadow_grid)):
            if not grid:
                raise ConfigError(f"{name} is empty")
            if grid != sorted(set(grid)):
                raise ConfigError(f"{name} must be strictly ascending")
            if grid[0] < 1:
                raise ConfigError(f"{name} values must be >= 1")
            if grid[-1] > self.shots_per_dataset:
                raise ConfigError(f"max({name}) = {grid[-1]} exceeds shots {self.shots_per_dataset}")
        known = {f.name for f in fields(ChainConfig)}
        for key, val in self.chain_overrides.items():
            if isinstance(val, dict):
                if key not in ESTIMATORS:
                    raise ConfigError(f"chain_overrides key {key!r} is not an estimator")
                bad = set(val) - known
            else:
                bad = {key} - known
            if bad:
                raise ConfigError(f"unknown ChainConfig fields in chain_overrides: {sorted(bad)}")

    def chain_config(self, estimator: str, dim: int, trial: int, m: int) -> ChainConfig:
        flat = {k: v for k, v in self.chain_overrides.items() if not isinstance(v, dict)}
        flat.update(self.chain_overrides.get(estimator, {}))
        flat.update(seed=self.root_seed, stream_id=derive_stream_id("chain", dim, trial, m, estimator))
        return ChainConfig.default_for(_KIND[estimator], dim, **flat)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentPlan":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown plan fields: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read plan {path}: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def desk_plan(picture: int = 1, estimators=None, **kw) -> ExperimentPlan:
    """Small campaign: D = 32, ten trials."""
    return ExperimentPlan(picture=picture, estimators=list(estimators or ESTIMATORS), **kw)


def full_plan(picture: int = 1, estimators=None, **kw) -> ExperimentPlan:
    """Full campaign: D in {32, 256}, fifty trials, shadow on every M up to 1000.

    Expect days of single-core compute for the D = 256 chains.
    """
    kw.setdefault("shadow_m_grid", list(range(1, 1001)))
    return ExperimentPlan(
        picture=picture, dims=[32, 256], trials=50,
        estimators=list(estimators or ESTIMATORS), **kw,
    )


@dataclass(frozen=True)
class TrialResult:
    picture: int
    dim: int
    trial: int
    estimator: str
    observable: str
    m: int
    estimate: float
    ground_truth: float
    stderr: float | None
    seed: int
    wall_time_ms: float = 0.0

    @property
    def key(self) -> tuple:
        return (self.picture, self.dim, self.trial, self.estimator, self.observable, self.m)

    def to_row(self) -> dict:
        def num(v):
            return "" if v is None else format(float(v), ".17g")

        return {
            "picture": self.picture, "dim": self.dim, "trial": self.trial,
            "estimator": self.estimator, "observable": self.observable, "m": self.m,
            "estimate": num(self.estimate), "ground_truth": num(self.ground_truth),
            "stderr": num(self.stderr), "seed": self.seed,
            "wall_time_ms": format(self.wall_time_ms, ".6g"),
        }

    @classmethod
    def from_row(cls, row: dict) -> "TrialResult":
        return cls(
            picture=int(row["picture"]), dim=int(row["dim"]), trial=int(row["trial"]),
            estimator=row["estimator"], observable=row["observable"], m=int(row["m"]),
            estimate=float(row["estimate"]), ground_truth=float(row["ground_truth"]),
            stderr=float(row["stderr"]) if row["stderr"] not in ("", None) else None,
            seed=int(row["seed"]), wall_time_ms=float(row["wall_time_ms"] or 0.0),
        )


# -- cells -----------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    estimator: str
    dim: int
    trial: int
    m: int | None = None  # None for the shadow cell, which covers the whole grid

    def label(self) -> str:
        return f"{self.estimator} D={self.dim} trial={self.trial}" + ("" if self.m is None else f" M={self.m}")


def plan_cells(plan: ExperimentPlan) -> list[Cell]:
    cells = []
    for dim in plan.dims:
        for trial in range(plan.trials):
            for est in plan.estimators:
                if est == "shadow":
                    cells.append(Cell(est, dim, trial))
                else:
                    cells.extend(Cell(est, dim, trial, m) for m in plan.m_grid)
    return cells


def picture_observables(plan: ExperimentPlan, dim: int, trial: int) -> list[Observable]:
    if plan.picture == 1:
        return canonical_observables(dim)
    return [picture2_observable(plan.root_seed, dim, trial)]


def cell_keys(plan: ExperimentPlan, cell: Cell) -> list[tuple]:
    tags = [o.tag for o in picture_observables(plan, cell.dim, cell.trial)]
    ms = plan.shadow_grid if cell.m is None else [cell.m]
    return [(plan.picture, cell.dim, cell.trial, cell.estimator, t, m) for t in tags for m in ms]


@lru_cache(maxsize=8)
def _dataset(dim: int, shots: int, seed: int, trial: int, dataset_dir: str | None):
    if dataset_dir is None:
        return simulate_dataset(dim, shots, seed, trial)
    root = Path(dataset_dir)
    for ext in ("json", "bin"):
        path = root / f"d{dim}_t{trial}.{ext}"
        if path.exists():
            d = load_dataset(path)
            if d.shots < shots:
                raise ConfigError(f"{path} holds {d.shots} shots, plan needs {shots}")
            return d
    raise ConfigError(f"missing dataset d{dim}_t{trial} in {root}")


def plan_dataset(plan: ExperimentPlan, dim: int, trial: int):
    return _dataset(dim, plan.shots_per_dataset, plan.root_seed, trial, plan.dataset_dir)


def bme_model(plan: ExperimentPlan, estimator: str, dataset, m: int, observables):
    if estimator == "bme_born":
        return BornLikelihood.from_dataset(dataset, m)
    shadow = Shadow(dataset, m)
    K = auto_K(m, dataset.dim) if plan.K is None else plan.K
    if estimator == "bme_frobenius":
        return FrobeniusShadowLikelihood(shadow, K)
    if estimator == "bme_observable_single" and plan.picture == 1:
        observables = [observables[1]]
    return ObservableLikelihood.from_shadow(shadow, observables, K)


def compute_cell(plan: ExperimentPlan, cell: Cell) -> tuple[list[TrialResult], dict | None]:
    """Run one cell and return its result rows plus chain diagnostics."""
    t0 = time.perf_counter()
    dataset = plan_dataset(plan, cell.dim, cell.trial)
    observables = picture_observables(plan, cell.dim, cell.trial)
    base = dict(picture=plan.picture, dim=cell.dim, trial=cell.trial, estimator=cell.estimator, seed=plan.root_seed)

    if cell.m is None:
        grid = plan.shadow_grid
        est = {o.tag: shadow_expectation_grid(dataset, o, grid) for o in observables}
        wall = (time.perf_counter() - t0) * 1e3
        rows = [
            TrialResult(**base, observable=o.tag, m=m, estimate=float(v), ground_truth=o.ground_truth(),
                        stderr=None, wall_time_ms=wall)
            for o in observables
            for m, v in zip(grid, est[o.tag])
        ]
        return rows, None

    model = bme_model(plan, cell.estimator, dataset, cell.m, observables)
    config = plan.chain_config(cell.estimator, cell.dim, cell.trial, cell.m)
    post = run_chain(model, config)
    wall = (time.perf_counter() - t0) * 1e3
    rows = []
    for o in observables:
        mean, se = bme_expectation(post, o)
        rows.append(TrialResult(**base, observable=o.tag, m=cell.m, estimate=mean,
                                ground_truth=o.ground_truth(), stderr=se, wall_time_ms=wall))
    diag = {
        "picture": plan.picture, "dim": cell.dim, "trial": cell.trial,
        "estimator": cell.estimator, "m": cell.m,
        "overlap_with_shadow": overlap_with_shadow(post, dataset, cell.m),
        "K": getattr(model, "K", None),
        **post.diagnostics(),
    }
    return rows, diag


# -- campaign driver -------------------------------------------------------


def sort_results(results) -> list[TrialResult]:
    return sorted(results, key=lambda r: r.key)


def write_results(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        for r in sort_results(results):
            w.writerow(r.to_row())


def read_results(path) -> list[TrialResult]:
    """Read a results CSV, skipping a truncated trailing row from an interrupted run."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                out.append(TrialResult.from_row(row))
            except (KeyError, TypeError, ValueError):
                logger.warning("skipping malformed results row: %r", row)
    return out


def mse(results) -> float:
    """Mean squared error of the estimates against their ground truths."""
    results = list(results)
    if not results:
        raise ShadowBenchError("mse of an empty group")
    return float(np.mean([(r.estimate - r.ground_truth) ** 2 for r in results]))


def aggregate(results) -> list[dict]:
    groups = defaultdict(list)
    for r in results:
        groups[(r.picture, r.dim, r.estimator, r.observable, r.m)].append(r)
    rows = []
    for key in sorted(groups):
        g = groups[key]
        rows.append(dict(zip(MSE_COLUMNS, (*key, mse(g), len(g)))))
    return rows


def write_aggregate(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MSE_COLUMNS)
        w.writeheader()
        for row in aggregate(results):
            w.writerow({**row, "mse": format(row["mse"], ".17g")})


def run_experiment(plan: ExperimentPlan, out_dir=None, workers: int = 1, mode: str = "auto") -> list[TrialResult]:
    """Compute every cell of ``plan``, skipping cells already in ``out_dir``.

    With ``out_dir`` set, rows are appended to ``results.csv`` as cells
    finish, and the file is rewritten in canonical order at the end together
    with ``mse.csv``, ``plan.json`` and ``diagnostics.jsonl``.

    ``mode`` controls an existing output directory whose ``plan.json``
    differs from ``plan``: "auto" refuses, "resume" keeps matching rows and
    fills in the rest, "overwrite" starts over.
    """
    if mode not in ("auto", "resume", "overwrite"):
        raise ConfigError(f"unknown mode {mode!r}")
    cells = plan_cells(plan)
    done: dict[tuple, TrialResult] = {}
    diags: list[dict] = []
    writer = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        results_path = out / "results.csv"
        plan_path = out / "plan.json"
        diag_path = out / "diagnostics.jsonl"
        prior_plan = None
        if plan_path.exists():
            prior_plan = json.loads(plan_path.read_text())
        if mode == "overwrite":
            for p in (results_path, diag_path):
                p.unlink(missing_ok=True)
        elif results_path.exists() and prior_plan is not None and prior_plan != plan.to_dict() and mode != "resume":
            raise ConfigError(
                f"{out} holds results from a different plan; pass resume or overwrite explicitly"
            )
        plan.save(plan_path)
        if results_path.exists():
            done = {r.key: r for r in read_results(results_path)}
        if diag_path.exists():
            diags = [json.loads(line) for line in diag_path.read_text().splitlines() if line.strip()]
        new_file = not results_path.exists()
        fh = open(results_path, "a", newline="")
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        if new_file:
            writer.writeheader()
        dfh = open(diag_path, "a")

    todo = [c for c in cells if not all(k in done for k in cell_keys(plan, c))]
    logger.info("%d of %d cells to compute", len(todo), len(cells))

    def emit(cell, rows, diag):
        for r in rows:
            done[r.key] = r
        if writer is not None:
            for r in rows:
                writer.writerow(r.to_row())
            fh.flush()
            if diag is not None:
                dfh.write(json.dumps(diag, sort_keys=True) + "\n")
                dfh.flush()
        if diag is not None:
            diags.append(diag)
        logger.info("finished %s", cell.label())

    try:
        if workers <= 1:
            for cell in todo:
                emit(cell, *compute_cell(plan, cell))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = {pool.submit(compute_cell, plan, c): c for c in todo}
                for fut in as_completed(futs):
                    emit(futs[fut], *fut.result())
    finally:
        if writer is not None:
            fh.close()
            dfh.close()

    wanted = {k for c in cells for k in cell_keys(plan, c)}
    results = sort_results(r for k, r in done.items() if k in wanted)
    if out_dir is not None:
        write_results(results_path, done.values())
        write_aggregate(out / "mse.csv", results)
        diags.sort(key=lambda d: (d["picture"], d["dim"], d["trial"], d["estimator"], d["m"]))
        diag_path.write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in diags))
    return results
