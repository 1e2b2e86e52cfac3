"""Cell evaluation, delta tables and header correlations."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..capture import Flow, Label
from ..represent import (
    HEADER_NAMES,
    Kind,
    RepresentationSpec,
    build_matrix,
    delta_t_candidates,
    header_block,
    standardize,
    usable_delta_t,
)
from ..exceptions import FlowbenchWarning, MissingCell, SingleClass
from .roc import auc_from_labels, error_bar
from .tuning import CELL_ERRORS, TUNING_MODES, fit_default, hyper_grid, sweep_opt


@dataclass
class DatasetFlows:
    """Truncated train/test flows of one dataset with its dimension anchor."""

    name: str
    train: list[Flow]
    test: list[Flow]
    d0: int
    max_duration: float

    @property
    def n_test(self) -> int:
        return len(self.test)

    @property
    def test_novel(self) -> np.ndarray:
        return np.array([f.label is Label.NOVEL for f in self.test])


@dataclass
class Cell:
    dataset: str
    spec: RepresentationSpec
    detector: str
    tuning: str
    auc: float | None = None
    hyper: object = None
    delta_t: float | None = None
    n_train: int = 0
    n_test: int = 0
    status: str = "ok"
    message: str = ""
    details: dict = field(default_factory=dict)

    @property
    def representation(self) -> str:
        return self.spec.name

    @property
    def key(self) -> tuple:
        return (self.dataset, self.spec.name, self.detector, self.tuning)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def error_bar(self) -> float:
        return error_bar(self.n_test) if self.n_test else math.nan


def _matrices(ds: DatasetFlows, spec: RepresentationSpec):
    tr = standardize(build_matrix(ds.train, spec))
    te = standardize(build_matrix(ds.test, spec), (tr.mean, tr.scale))
    return tr.rows, te.rows


def evaluate_cells(
    ds: DatasetFlows,
    spec: RepresentationSpec,
    family: str,
    tunings: Sequence[str] = TUNING_MODES,
    seed: int = 0,
) -> list[Cell]:
    """AUC cells for one (dataset, representation, detector).

    Sampled representations are evaluated at every window-length candidate
    and the best AUC over candidates is reported. Non-convergence and
    zero-duration warnings raised on the way are kept in ``details``.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FlowbenchWarning)
        cells = _evaluate_cells(ds, spec, family, tunings, seed)
    flagged = sorted({f"{w.category.__name__}: {w.message}" for w in caught
                      if issubclass(w.category, FlowbenchWarning)})
    if flagged:
        for c in cells:
            c.details["warnings"] = flagged
    return cells


def _evaluate_cells(ds, spec, family, tunings, seed) -> list[Cell]:
    spec = spec.base.with_params(d0=None if spec.kind is Kind.STATS else ds.d0)
    if spec.kind.sampled:
        d = ds.d0 - 1
        deltas = usable_delta_t(delta_t_candidates(ds.train, d), ds.train, d)
    else:
        deltas = [None]
    is_novel = ds.test_novel
    best: dict[str, Cell] = {}
    errors: dict[str, str] = {}
    for dt_index, dt in enumerate(deltas):
        full = spec.with_params(delta_t=dt) if dt is not None else spec
        try:
            X_train, X_test = _matrices(ds, full)
            grid = hyper_grid(family, X_train)
        except CELL_ERRORS as exc:
            for t in tunings:
                errors[t] = f"{type(exc).__name__}: {exc}"
            continue

        def evaluate(model, X_test=X_test):
            return auc_from_labels(model.score_samples(X_test), is_novel)

        for tuning in tunings:
            try:
                if tuning == "OPT":
                    res = sweep_opt(family, grid, X_train, evaluate, seed)
                    auc, hyper = res.best_auc, res.best_hyper
                    details = {"grid": list(grid), "grid_auc": res.aucs}
                else:
                    model = fit_default(family, X_train, seed, grid)
                    auc, hyper = evaluate(model), model.hyper_
                    details = {}
            except CELL_ERRORS as exc:
                errors[tuning] = f"{type(exc).__name__}: {exc}"
                continue
            cur = best.get(tuning)
            if cur is None or auc > cur.auc:
                details["delta_t_index"] = dt_index if dt is not None else None
                best[tuning] = Cell(ds.name, spec.base, family, tuning, auc, hyper, dt,
                                    len(ds.train), len(ds.test), details=details)
    out = []
    for tuning in tunings:
        if tuning in best:
            out.append(best[tuning])
        else:
            out.append(Cell(ds.name, spec.base, family, tuning, n_train=len(ds.train),
                            n_test=len(ds.test), status="failed",
                            message=errors.get(tuning, "no result")))
    return out


def _task(args):
    return evaluate_cells(*args)


def run_cells(
    datasets: Sequence[DatasetFlows],
    specs: Sequence[RepresentationSpec],
    families: Sequence[str],
    tunings: Sequence[str] = TUNING_MODES,
    seed: int = 0,
    jobs: int = 1,
) -> list[Cell]:
    """Evaluate every (dataset, representation, detector) combination.

    Output order is fixed by the input order, whatever ``jobs`` is.
    """
    tasks = [(ds, spec, fam, tuple(tunings), seed) for ds in datasets for spec in specs for fam in families]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    return [cell for group in results for cell in group]


# -------------------------------------------------------------- comparisons

FFT_PAIRS = [("IAT-FFT", "IAT"), ("SAMP-NUM-FFT", "SAMP-NUM"), ("SAMP-SIZE-FFT", "SAMP-SIZE")]
SIZE_PAIRS = [("IAT+SIZE", "IAT"), ("SAMP-SIZE", "SAMP-NUM")]
HEADER_PAIRS = [("STATS+header", "STATS"), ("IAT+SIZE+header", "IAT+SIZE"), ("SAMP-SIZE+header", "SAMP-SIZE")]

DELTA_TABLES = {"fft": FFT_PAIRS, "size": SIZE_PAIRS, "header": HEADER_PAIRS}


@dataclass
class DeltaRow:
    table: str
    dataset: str
    detector: str
    tuning: str
    with_feature: str
    without_feature: str
    delta: float
    error_bar: float


def delta_experiments(cells: Sequence[Cell], strict: bool = False) -> dict[str, list[DeltaRow]]:
    """AUC differences for the FFT, packet-size and header comparisons.

    Pairs whose members were not evaluated are skipped, or raise
    :class:`MissingCell` with ``strict=True``. Pairs with a failed member
    are always skipped.
    """
    index = {c.key: c for c in cells}
    combos = []
    for c in cells:
        combo = (c.dataset, c.detector, c.tuning)
        if combo not in combos:
            combos.append(combo)
    tables: dict[str, list[DeltaRow]] = {}
    for table, pairs in DELTA_TABLES.items():
        rows = []
        for dataset, detector, tuning in combos:
            for with_name, without_name in pairs:
                a = index.get((dataset, with_name, detector, tuning))
                b = index.get((dataset, without_name, detector, tuning))
                if a is None or b is None:
                    if strict:
                        missing = with_name if a is None else without_name
                        raise MissingCell(f"{dataset}/{missing}/{detector}/{tuning} not evaluated")
                    continue
                if not (a.ok and b.ok):
                    continue
                rows.append(DeltaRow(table, dataset, detector, tuning, with_name, without_name,
                                     a.auc - b.auc, error_bar(a.n_test)))
        tables[table] = rows
    return tables


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; 0 when either side is constant."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    denom = math.sqrt(float(x @ x) * float(y @ y))
    return float(x @ y) / denom if denom > 0 else 0.0


def header_correlations(X, labels, names: Sequence[str] | None = None, top_k: int = 6) -> list[tuple[str, float]]:
    """Rank header columns by absolute correlation with the novelty label.

    ``X`` may be a full feature matrix; only columns named like header
    features (``flag_*``, ``ttl_*``) are ranked. ``labels`` are 1/True for
    novel.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=float)
    if np.unique(y).size < 2:
        raise SingleClass("header correlations need both normal and novel flows")
    names = list(HEADER_NAMES) if names is None else list(names)
    cols = [i for i, n in enumerate(names) if n in HEADER_NAMES]
    scored = [(names[i], pearson(X[:, i], y)) for i in cols]
    order = sorted(range(len(scored)), key=lambda i: (-abs(scored[i][1]), i))
    return [scored[i] for i in order[:top_k]]


def flow_header_correlations(flows: Sequence[Flow], top_k: int = 6) -> list[tuple[str, float]]:
    X = np.vstack([header_block(f).as_vector() for f in flows])
    y = np.array([f.label is Label.NOVEL for f in flows], dtype=float)
    return header_correlations(X, y, HEADER_NAMES, top_k)
