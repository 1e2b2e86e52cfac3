"""Fixed-dimension feature vectors for flows.

Every representation maps a flow to a vector whose width depends only on
the representation and the dataset's typical flow length ``d0``:

========== ==============
STATS      10
SIZE       d0
IAT        d0 - 1
IAT+SIZE   2 d0 - 1
SAMP-NUM   d0 - 1
SAMP-SIZE  d0 - 1
========== ==============

The Fourier variant keeps the width (magnitude spectrum) and the header
block appends 10 columns (8 TCP flag counts, TTL mean and std).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .capture import FLAG_NAMES, Flow, Label, flow_length_percentile, percentile
from .exceptions import DimensionMismatch, EmptyInput, ZeroDurationWarning

DURATION_FLOOR = 1e-6
DEGENERATE_STD = 1e-12
DELTA_T_QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

STATS_NAMES = ("duration", "pkts_per_sec", "bytes_per_sec", "size_mean", "size_std",
               "size_q1", "size_q2", "size_q3", "size_min", "size_max")
HEADER_NAMES = tuple(f"flag_{n}" for n in FLAG_NAMES) + ("ttl_mean", "ttl_std")
HEADER_DIM = len(HEADER_NAMES)


class Kind(str, Enum):
    STATS = "STATS"
    SIZE = "SIZE"
    IAT = "IAT"
    IAT_SIZE = "IAT+SIZE"
    SAMP_NUM = "SAMP-NUM"
    SAMP_SIZE = "SAMP-SIZE"

    @property
    def sampled(self) -> bool:
        return self in (Kind.SAMP_NUM, Kind.SAMP_SIZE)


@dataclass(frozen=True)
class RepresentationSpec:
    kind: Kind
    fft: bool = False
    with_header: bool = False
    d0: int | None = None
    delta_t: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.fft and self.kind is Kind.STATS:
            raise ValueError("STATS has no Fourier variant")
        if self.d0 is not None and self.d0 < 2:
            raise ValueError(f"d0 must be >= 2, got {self.d0}")
        if self.delta_t is not None and not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if self.delta_t is not None and not self.kind.sampled:
            raise ValueError(f"delta_t does not apply to {self.kind.value}")

    @property
    def name(self) -> str:
        return self.kind.value + ("-FFT" if self.fft else "") + ("+header" if self.with_header else "")

    @property
    def base(self) -> RepresentationSpec:
        """The selector part only (no d0 / delta_t)."""
        return RepresentationSpec(self.kind, self.fft, self.with_header)

    @classmethod
    def parse(cls, selector: str | dict | RepresentationSpec) -> RepresentationSpec:
        """Accept ``"SAMP-NUM-FFT+header"`` style names or a dict of fields."""
        if isinstance(selector, RepresentationSpec):
            return selector
        if isinstance(selector, dict):
            return cls(Kind(selector["kind"].upper()), bool(selector.get("fft", False)),
                       bool(selector.get("header", selector.get("with_header", False))),
                       selector.get("d0"), selector.get("delta_t"))
        text = selector.strip().upper()
        header = text.endswith("+HEADER")
        if header:
            text = text[: -len("+HEADER")]
        fft = text.endswith("-FFT")
        if fft:
            text = text[: -len("-FFT")]
        return cls(Kind(text), fft, header)

    def with_params(self, d0: int | None = None, delta_t: float | None = None) -> RepresentationSpec:
        return replace(self, d0=self.d0 if d0 is None else d0,
                       delta_t=self.delta_t if delta_t is None else delta_t)


def dimension_of(spec: RepresentationSpec, d0: int | None = None) -> int:
    d0 = spec.d0 if d0 is None else d0
    if spec.kind is Kind.STATS:
        base = len(STATS_NAMES)
    elif d0 is None:
        raise ValueError(f"{spec.kind.value} needs d0")
    elif spec.kind is Kind.SIZE:
        base = d0
    elif spec.kind is Kind.IAT_SIZE:
        base = 2 * d0 - 1
    else:
        base = d0 - 1
    return base + (HEADER_DIM if spec.with_header else 0)


# ------------------------------------------------------------ per-flow maps

def stats(flow: Flow) -> np.ndarray:
    ts, sizes = flow.timestamps, flow.sizes
    duration = ts[-1] - ts[0]
    span = duration if duration > 0 else DURATION_FLOOR
    q1, q2, q3 = np.quantile(sizes, [0.25, 0.5, 0.75])
    return np.array([
        duration, len(sizes) / span, sizes.sum() / span,
        sizes.mean(), sizes.std(), q1, q2, q3, sizes.min(), sizes.max(),
    ])


def _pad(values: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(d)
    m = min(d, len(values))
    out[:m] = values[:m]
    return out


def size_series(flow: Flow, d0: int) -> np.ndarray:
    return _pad(flow.sizes, d0)


def iat_series(flow: Flow, d0: int) -> np.ndarray:
    return _pad(np.diff(flow.timestamps), d0 - 1)


def iat_size_series(flow: Flow, d0: int) -> np.ndarray:
    return np.concatenate([iat_series(flow, d0), size_series(flow, d0)])


def samp_series(flow: Flow, delta_t: float, d0: int, mode: str = "count") -> np.ndarray:
    """Packet counts (``mode="count"``) or byte sums (``"bytes"``) per window.

    Windows are ``[t0 + i*delta_t, t0 + (i+1)*delta_t)`` anchored at the
    flow's first packet; packets past window ``d0 - 2`` are dropped.
    """
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    if mode not in ("count", "bytes"):
        raise ValueError(f"mode must be 'count' or 'bytes', got {mode!r}")
    d = d0 - 1
    ts = flow.timestamps
    idx = np.floor((ts - ts[0]) / delta_t).astype(np.int64)
    keep = idx < d
    weights = flow.sizes[keep] if mode == "bytes" else None
    return np.bincount(idx[keep], weights=weights, minlength=d).astype(float)[:d]


def fft_magnitudes(series: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.fft(np.asarray(series, dtype=float)))


@dataclass(frozen=True)
class HeaderBlock:
    flag_counts: tuple[int, ...]
    ttl_mean: float
    ttl_std: float

    def as_vector(self) -> np.ndarray:
        return np.array([*self.flag_counts, self.ttl_mean, self.ttl_std], dtype=float)


def header_block(flow: Flow) -> HeaderBlock:
    counts = [0] * 8
    for p in flow.packets:
        for i, bit in enumerate(p.tcp_flags):
            counts[i] += bit
    ttl = np.array([p.ttl for p in flow.packets], dtype=float)
    return HeaderBlock(tuple(counts), float(ttl.mean()), float(ttl.std()))


def delta_t_candidates(flows: Sequence[Flow], d: int) -> list[float]:
    """Window lengths from the spread of ``duration / d`` over flows.

    One candidate per quantile in :data:`DELTA_T_QUANTILES` (nearest rank).
    """
    if not flows:
        raise EmptyInput("no flows")
    per_flow = [f.duration / d for f in flows]
    return [percentile(per_flow, q) for q in DELTA_T_QUANTILES]


def usable_delta_t(candidates: Iterable[float], flows: Sequence[Flow], d: int) -> list[float]:
    """Replace non-positive candidates (zero-duration flows) by the smallest
    positive ``duration / d``, or 1.0 when every flow has zero duration."""
    positive = [f.duration / d for f in flows if f.duration > 0]
    floor = min(positive) if positive else 1.0
    return [c if c > 0 else floor for c in candidates]


# ---------------------------------------------------------------- matrices

def _series_blocks(spec: RepresentationSpec) -> list[tuple[str, int]]:
    d0 = spec.d0
    if spec.kind is Kind.STATS:
        return []
    if spec.kind is Kind.SIZE:
        return [("size", d0)]
    if spec.kind is Kind.IAT:
        return [("iat", d0 - 1)]
    if spec.kind is Kind.IAT_SIZE:
        return [("iat", d0 - 1), ("size", d0)]
    if spec.kind is Kind.SAMP_NUM:
        return [("samp_num", d0 - 1)]
    return [("samp_size", d0 - 1)]


def feature_names(spec: RepresentationSpec) -> list[str]:
    if spec.kind is Kind.STATS:
        names = list(STATS_NAMES)
    else:
        prefix = "fft_" if spec.fft else ""
        names = [f"{prefix}{block}_{i}" for block, width in _series_blocks(spec) for i in range(width)]
    if spec.with_header:
        names += HEADER_NAMES
    return names


def vectorize(flow: Flow, spec: RepresentationSpec) -> np.ndarray:
    """One flow to one row under a fully parameterized ``spec``."""
    kind, d0 = spec.kind, spec.d0
    if kind is Kind.STATS:
        parts = [stats(flow)]
    elif kind is Kind.SIZE:
        parts = [size_series(flow, d0)]
    elif kind is Kind.IAT:
        parts = [iat_series(flow, d0)]
    elif kind is Kind.IAT_SIZE:
        parts = [iat_series(flow, d0), size_series(flow, d0)]
    else:
        if spec.delta_t is None:
            raise ValueError(f"{kind.value} needs delta_t")
        mode = "count" if kind is Kind.SAMP_NUM else "bytes"
        parts = [samp_series(flow, spec.delta_t, d0, mode)]
    if spec.fft:
        # each time-series block is transformed on its own
        parts = [fft_magnitudes(p) for p in parts]
    if spec.with_header:
        parts.append(header_block(flow).as_vector())
    return np.concatenate(parts)


@dataclass
class FeatureMatrix:
    """Rows of one representation, optionally standardized.

    ``mean``/``scale`` hold the column standardization that was applied to
    ``rows`` (``None`` while raw). ``zero_duration`` counts flows whose
    rates used the duration floor.
    """

    rows: np.ndarray
    spec: RepresentationSpec
    feature_names: list[str]
    labels: list[Label] = field(default_factory=list)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    zero_duration: int = 0

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]

    @property
    def y_novel(self) -> np.ndarray:
        return np.array([lab is Label.NOVEL for lab in self.labels], dtype=int)

    def to_csv(self, path: str | Path) -> None:
        """One flow per row, feature columns then ``label``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*self.feature_names, "label"])
            labels = self.labels or [Label.UNLABELED] * len(self)
            for row, lab in zip(self.rows, labels):
                w.writerow([*(repr(float(v)) for v in row), Label(lab).value])


def read_feature_csv(path: str | Path) -> tuple[np.ndarray, list[str], list[Label]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows, labels = [], []
        for line in r:
            rows.append([float(v) for v in line[:-1]])
            labels.append(Label(line[-1]))
    names = header[:-1]
    return np.array(rows, dtype=float).reshape(len(rows), len(names)), names, labels


class FlowVectorizer(TransformerMixin, BaseEstimator):
    """Turn a list of flows into a feature array.

    ``d0`` defaults to the 90th-percentile flow length of the flows seen in
    :meth:`fit`; for sampled kinds ``delta_t`` defaults to the median
    ``duration / (d0 - 1)`` candidate.
    """

    def __init__(self, kind="STATS", fft=False, with_header=False, d0=None, delta_t=None):
        self.kind = kind
        self.fft = fft
        self.with_header = with_header
        self.d0 = d0
        self.delta_t = delta_t

    def fit(self, flows, y=None):
        if len(flows) == 0:
            raise EmptyInput("no flows to fit on")
        kind = Kind(self.kind)
        d0 = self.d0 if self.d0 is not None else flow_length_percentile(flows)
        d0 = max(int(d0), 2)
        delta_t = self.delta_t
        if kind.sampled and delta_t is None:
            cands = usable_delta_t(delta_t_candidates(flows, d0 - 1), flows, d0 - 1)
            delta_t = cands[DELTA_T_QUANTILES.index(0.5)]
        self.spec_ = RepresentationSpec(kind, self.fft, self.with_header, d0,
                                        delta_t if kind.sampled else None)
        self.n_features_out_ = dimension_of(self.spec_)
        return self

    def transform(self, flows):
        check_is_fitted(self, "spec_")
        return build_matrix(flows, self.spec_).rows

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "spec_")
        return np.array(feature_names(self.spec_), dtype=object)


def build_matrix(flows: Sequence[Flow], spec: RepresentationSpec) -> FeatureMatrix:
    if not flows:
        raise EmptyInput("no flows")
    if spec.kind is not Kind.STATS and spec.d0 is None:
        raise ValueError(f"{spec.name} needs d0")
    rows = np.vstack([vectorize(f, spec) for f in flows])
    expected = dimension_of(spec)
    if rows.shape[1] != expected:
        raise DimensionMismatch(f"{spec.name}: built {rows.shape[1]} columns, expected {expected}")
    zero = sum(1 for f in flows if f.duration <= 0) if spec.kind is Kind.STATS else 0
    if zero:
        warnings.warn(ZeroDurationWarning(f"{zero} flows with zero duration"), stacklevel=2)
    return FeatureMatrix(rows, spec, feature_names(spec), [f.label for f in flows], zero_duration=zero)


class Standardizer(TransformerMixin, BaseEstimator):
    """Column z-scoring; columns with std below 1e-12 are only centered."""

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std < DEGENERATE_STD, 1.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} columns, got shape {X.shape}")
        return (X - self.mean_) / self.scale_


def standardize(matrix: FeatureMatrix, params: tuple[np.ndarray, np.ndarray] | None = None) -> FeatureMatrix:
    """Z-score ``matrix``; fit the parameters unless ``params=(mean, scale)``
    from a training matrix are given."""
    if params is None:
        scaler = Standardizer().fit(matrix.rows)
        mean, scale = scaler.mean_, scaler.scale_
    else:
        mean, scale = (np.asarray(p, dtype=float) for p in params)
        if mean.shape != (matrix.dim,) or scale.shape != (matrix.dim,):
            raise DimensionMismatch(f"standardization for {mean.shape[0]} columns, matrix has {matrix.dim}")
    return replace(matrix, rows=(matrix.rows - mean) / scale, mean=mean, scale=scale)
