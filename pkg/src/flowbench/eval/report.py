"""Report assembly and CSV / JSON / SVG emission."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .experiments import Cell, DeltaRow, delta_experiments

REPORT_COLUMNS = ("dataset", "representation", "fft", "header", "detector", "tuning",
                  "hyper", "delta_t", "auc", "error_bar", "status")
DELTA_COLUMNS = ("table", "dataset", "detector", "tuning", "with", "without", "delta", "error_bar")


def _num(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


@dataclass
class EvalReport:
    cells: list[Cell]
    datasets: dict = field(default_factory=dict)
    correlations: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.deltas = delta_experiments(self.cells)

    @property
    def failed(self) -> list[Cell]:
        return [c for c in self.cells if not c.ok]

    def tunings(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.tuning not in seen:
                seen.append(c.tuning)
        return seen

    def get(self, dataset, representation, detector, tuning) -> Cell:
        for c in self.cells:
            if c.key == (dataset, representation, detector, tuning):
                return c
        raise KeyError((dataset, representation, detector, tuning))

    def rows(self, tuning: str | None = None):
        for c in self.cells:
            if tuning is not None and c.tuning != tuning:
                continue
            yield {
                "dataset": c.dataset,
                "representation": c.spec.kind.value,
                "fft": _num(c.spec.fft),
                "header": _num(c.spec.with_header),
                "detector": c.detector,
                "tuning": c.tuning,
                "hyper": _num(c.hyper),
                "delta_t": _num(c.delta_t),
                "auc": _num(c.auc),
                "error_bar": _num(c.error_bar),
                "status": c.status if c.ok else f"failed: {c.message}",
            }

    def write_csv(self, path, tuning: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows(tuning))

    def write_delta_csv(self, path, table: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DELTA_COLUMNS)
            for r in self.deltas[table]:
                w.writerow([r.table, r.dataset, r.detector, r.tuning, r.with_feature,
                            r.without_feature, _num(r.delta), _num(r.error_bar)])

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "datasets": self.datasets,
            "cells": [
                {
                    "dataset": c.dataset, "representation": c.representation,
                    "kind": c.spec.kind.value, "fft": c.spec.fft, "header": c.spec.with_header,
                    "detector": c.detector, "tuning": c.tuning, "auc": c.auc,
                    "chosen_hyper": c.hyper, "chosen_delta_t": c.delta_t,
                    "n_train": c.n_train, "n_test": c.n_test,
                    "error_bar": None if math.isnan(c.error_bar) else c.error_bar,
                    "status": c.status, "message": c.message, "details": c.details,
                }
                for c in self.cells
            ],
            "deltas": {
                name: [vars(r) for r in rows] for name, rows in self.deltas.items()
            },
            "header_correlations": {
                name: [{"feature": f, "r": r} for f, r in pairs]
                for name, pairs in self.correlations.items()
            },
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def write_all(self, out_dir, figures: bool = True) -> list[Path]:
        """Report CSV per tuning mode, JSON, delta CSVs, correlations and figures."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for tuning in self.tunings():
            p = out / f"report_{tuning.lower()}.csv"
            self.write_csv(p, tuning)
            written.append(p)
        p = out / "report.json"
        self.write_json(p)
        written.append(p)
        for table in self.deltas:
            p = out / f"delta_{table}.csv"
            self.write_delta_csv(p, table)
            written.append(p)
        p = out / "header_correlations.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("dataset", "rank", "feature", "r"))
            for name, pairs in self.correlations.items():
                for rank, (feat, r) in enumerate(pairs, 1):
                    w.writerow((name, rank, feat, _num(r)))
        written.append(p)
        if figures:
            written += write_delta_figures(self.deltas, out / "figures")
        return written


_TITLES = {
    "fft": "AUC change from the FFT",
    "size": "AUC change from adding packet sizes",
    "header": "AUC change from adding header fields",
}


def write_delta_figures(deltas: dict[str, Sequence[DeltaRow]], out_dir) -> list[Path]:
    """One bar chart of AUC differences (with 1/sqrt(n) error bars) per
    table and tuning mode."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for table, rows in deltas.items():
        tunings = []
        for r in rows:
            if r.tuning not in tunings:
                tunings.append(r.tuning)
        for tuning in tunings:
            sel = [r for r in rows if r.tuning == tuning]
            groups = []
            for r in sel:
                g = (r.dataset, r.with_feature, r.without_feature)
                if g not in groups:
                    groups.append(g)
            detectors = []
            for r in sel:
                if r.detector not in detectors:
                    detectors.append(r.detector)
            width = 0.8 / max(len(detectors), 1)
            with plt.rc_context({"svg.hashsalt": "flowbench", "svg.fonttype": "none"}):
                fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(groups) + 2), 3.5))
                for j, det in enumerate(detectors):
                    xs, ys, es = [], [], []
                    for gi, g in enumerate(groups):
                        for r in sel:
                            if (r.dataset, r.with_feature, r.without_feature) == g and r.detector == det:
                                xs.append(gi + (j - (len(detectors) - 1) / 2) * width)
                                ys.append(r.delta)
                                es.append(r.error_bar)
                    ax.bar(xs, ys, width, yerr=es, capsize=2, label=det)
                ax.axhline(0.0, color="black", linewidth=0.8)
                ax.set_xticks(range(len(groups)))
                ax.set_xticklabels([f"{d}\n{w} - {wo}" for d, w, wo in groups], fontsize=7)
                ax.set_ylabel("AUC difference")
                ax.set_title(f"{_TITLES[table]} ({tuning})")
                if detectors:
                    ax.legend(fontsize=7, ncol=min(len(detectors), 6))
                fig.tight_layout()
                p = out / f"delta_{table}_{tuning.lower()}.svg"
                fig.savefig(p, format="svg", metadata={"Date": None})
                plt.close(fig)
            written.append(p)
    return written
