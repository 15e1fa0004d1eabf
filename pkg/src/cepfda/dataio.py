"""File formats and the gait stride-interval preprocessing pipeline.

Corpus files are tab-separated with the header ``epoch_id group t value``;
each epoch's ``t`` runs over ``1..N`` and ``group`` may be empty for
unlabelled data.  Models and experiment reports are versioned JSON.  Floats
are written with ``repr`` so every value survives a round trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import make_smoothing_spline
from scipy.ndimage import median_filter
from scipy.signal import detrend

from .discriminant import CVResult, DiscriminantModel, weight_function
from .errors import (
    InvalidArgumentError,
    ParseError,
    SchemaError,
    UnsupportedVersionError,
)
from .simulation import ExperimentConfig, ExperimentReport
from .spectral import EstimatorConfig, TimeSeriesEpoch

__all__ = [
    "atomic_write",
    "read_corpus",
    "write_corpus",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "save_report",
    "load_report",
    "StrideRecord",
    "read_stride_file",
    "read_gait_directory",
    "gait_preprocess",
    "emit_plot_data",
    "PLOT_KINDS",
]

log = logging.getLogger(__name__)

CORPUS_HEADER = ("epoch_id", "group", "t", "value")
MODEL_FORMAT = "cepfda-model"
MODEL_VERSION = 1
REPORT_FORMAT = "cepfda-experiment-report"
REPORT_VERSION = 1


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- corpus files

def write_corpus(epochs: Iterable[TimeSeriesEpoch], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(CORPUS_HEADER)
    for k, e in enumerate(epochs):
        eid = e.id or f"epoch{k}"
        group = "" if e.group is None else str(e.group)
        for t, v in enumerate(e.values, start=1):
            w.writerow((eid, group, t, repr(float(v))))
    atomic_write(path, buf.getvalue())


def read_corpus(path) -> list[TimeSeriesEpoch]:
    """Read a long-format corpus file; epochs keep their first-seen order."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return []
    rows: OrderedDict[str, dict] = OrderedDict()
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    header = next(reader)
    if tuple(h.strip() for h in header) != CORPUS_HEADER:
        raise ParseError(f"expected header {' '.join(CORPUS_HEADER)!r}, got {header!r}", 1)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(row)}", lineno)
        eid, group, t, value = row
        try:
            t = int(t)
            value = float(value)
        except ValueError:
            raise ParseError(f"non-numeric t or value in {row!r}", lineno) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {value}", lineno)
        rec = rows.setdefault(eid, {"group": group, "t": [], "v": []})
        if rec["group"] != group:
            raise SchemaError(f"epoch {eid!r} has inconsistent group labels")
        rec["t"].append(t)
        rec["v"].append(value)

    epochs, lengths = [], set()
    for eid, rec in rows.items():
        order = np.argsort(rec["t"], kind="stable")
        t = np.asarray(rec["t"])[order]
        if not np.array_equal(t, np.arange(1, t.size + 1)):
            raise SchemaError(f"epoch {eid!r}: t must run contiguously over 1..N")
        lengths.add(t.size)
        group = rec["group"] or None
        epochs.append(TimeSeriesEpoch(np.asarray(rec["v"])[order], eid, group))
    if len(lengths) > 1:
        raise SchemaError(f"epochs have inconsistent lengths {sorted(lengths)}")
    return epochs


# ----------------------------------------------------------------- model files

def _listify(a):
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model: DiscriminantModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "L": model.L,
        "J": model.J,
        "Q": model.Q,
        "groups": list(model.groups),
        "counts": list(model.counts),
        "source_N": model.source_N,
        "priors": _listify(model.priors),
        "group_means": _listify(model.group_means),
        "pooled_within": _listify(model.pooled_within),
        "between": _listify(model.between),
        "weights": _listify(model.weights),
        "eigenvalues": _listify(model.eigenvalues),
        "meta": model.meta,
    }


def model_from_dict(d: dict) -> DiscriminantModel:
    if d.get("format") != MODEL_FORMAT:
        raise ParseError(f"not a model file (format={d.get('format')!r})")
    if d.get("version") != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"model file version {d.get('version')!r} is not supported (expected {MODEL_VERSION})")
    try:
        L, J, Q = int(d["L"]), int(d["J"]), int(d["Q"])
        groups = tuple(d["groups"])
        priors = np.asarray(d["priors"], float)
        means = np.asarray(d["group_means"], float).reshape(J, L)
        Gamma = np.asarray(d["pooled_within"], float).reshape(L, L)
        Lam = np.asarray(d["between"], float).reshape(L, L)
        W = np.asarray(d["weights"], float).reshape(Q, L)
        tau = np.asarray(d["eigenvalues"], float).reshape(Q)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None
    if len(groups) != J or priors.shape != (J,):
        raise ParseError("model file group count does not match priors")
    return DiscriminantModel(groups, priors, means, Gamma, Lam, W, tau,
                             tuple(d.get("counts", ())), d.get("source_N"), d.get("meta", {}))


def save_model(model: DiscriminantModel, path) -> None:
    atomic_write(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> DiscriminantModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse model file: {exc.msg}", exc.lineno) from None
    if not isinstance(d, dict):
        raise ParseError("model file must contain a JSON object")
    return model_from_dict(d)


# ---------------------------------------------------------------- report files

def _nan_to_none(xs):
    return [None if (x is None or (isinstance(x, float) and math.isnan(x))) else x for x in xs]


def save_report(report: ExperimentReport, path) -> None:
    d = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": report.config.to_dict(),
        "summary": {m: {k: (None if isinstance(v, float) and math.isnan(v) else v)
                        for k, v in s.items()} for m, s in report.summary().items()},
        "rates": {m: _nan_to_none(r) for m, r in report.rates.items()},
        "details": report.details,
    }
    atomic_write(path, json.dumps(d, indent=2) + "\n")


def load_report(path) -> ExperimentReport:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse report file: {exc.msg}", exc.lineno) from None
    if d.get("format") != REPORT_FORMAT:
        raise ParseError("not an experiment report file")
    if d.get("version") != REPORT_VERSION:
        raise UnsupportedVersionError(f"report version {d.get('version')!r} is not supported")
    rates = {m: [math.nan if x is None else float(x) for x in r] for m, r in d["rates"].items()}
    return ExperimentReport(ExperimentConfig.from_dict(d["config"]), rates, d.get("details", []))


# ------------------------------------------------------------------------ gait

GAIT_GROUPS = {"control": "control", "als": "ALS", "hunt": "Huntington", "park": "Parkinson"}


@dataclass(frozen=True, eq=False)
class StrideRecord:
    """Stride event times and intervals (seconds) for one participant."""

    times: np.ndarray
    intervals: np.ndarray
    group: object = None
    id: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, float)
        x = np.asarray(self.intervals, float)
        if t.shape != x.shape or t.ndim != 1:
            raise InvalidArgumentError("times and intervals must be equal-length vectors")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError(f"record {self.id!r}: event times must increase strictly")
        if np.any(x <= 0):
            raise InvalidArgumentError(f"record {self.id!r}: stride intervals must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "intervals", x)


def _gait_group(name: str):
    stem = name.lower()
    for prefix, label in GAIT_GROUPS.items():
        if stem.startswith(prefix):
            return label
    return None


def read_stride_file(path, group=None) -> StrideRecord:
    """Read whitespace-separated rows whose first two columns are
    elapsed time and left stride interval, both in seconds."""
    path = Path(path)
    times, intervals = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) < 2:
            raise ParseError(f"{path.name}: expected at least 2 columns", lineno)
        try:
            times.append(float(parts[0]))
            intervals.append(float(parts[1]))
        except ValueError:
            raise ParseError(f"{path.name}: non-numeric field", lineno) from None
    if group is None:
        group = _gait_group(path.stem)
    return StrideRecord(np.array(times), np.array(intervals), group, path.stem)


def read_gait_directory(path, groups=("control", "ALS", "Huntington"),
                        pattern="*.ts") -> list[StrideRecord]:
    """Stride records from a local copy of the gait dataset, sorted by file name."""
    out = []
    for f in sorted(Path(path).glob(pattern)):
        g = _gait_group(f.stem)
        if g in groups:
            out.append(read_stride_file(f, g))
    return out


def gait_preprocess(record: StrideRecord, *, start=20.0, duration=210.0, rate=2.0,
                    window=11, n_sd=3.0, lam=None) -> TimeSeriesEpoch:
    """Turn a stride record into a detrended, evenly sampled series.

    Events before ``start`` seconds are dropped, intervals further than
    ``n_sd`` standard deviations from a running median of width ``window``
    are replaced by that median, a cubic smoothing spline (``lam`` chosen by
    GCV when None) is sampled at ``rate`` Hz for ``duration`` seconds, and
    the least-squares line is removed.  The defaults give 420 points.
    """
    end = start + duration
    t, x = record.times, record.intervals
    available = (t[-1] - start) if t.size else 0.0
    if t.size == 0 or t[-1] < end:
        raise InvalidArgumentError(
            f"record {record.id!r}: needs events through {end:g} s "
            f"({duration:g} s after the {start:g} s start-up) but only "
            f"{max(available, 0.0):.1f} s are available")
    keep = t >= start
    t, x = t[keep], x[keep].copy()
    if t.size < 5:
        raise InvalidArgumentError(f"record {record.id!r}: too few strides after start-up")
    med = median_filter(x, size=window, mode="nearest")
    sd = x.std(ddof=1)
    out = np.abs(x - med) > n_sd * sd
    x[out] = med[out]
    spline = make_smoothing_spline(t, x, lam=lam)
    n_out = int(round(duration * rate))
    grid = start + np.arange(n_out) / rate
    y = detrend(spline(grid), type="linear")
    return TimeSeriesEpoch(y, record.id, record.group)


# ------------------------------------------------------------------ plot data

PLOT_KINDS = ("weight-functions", "discriminant-scatter", "log-spectra", "cv-curve", "rates")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _tsv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _scatter_rows(model: DiscriminantModel, corpus):
    from .discriminant import scores

    Q = min(model.Q, 2)
    if model.Q < 2:
        warnings.warn(f"model has Q={model.Q}; scatter emits only {Q} score column(s)")
    header = ["epoch_id", "group"] + [f"d{q + 1}" for q in range(Q)]
    rows = []
    for i in range(corpus.n):
        d = scores(model, corpus.matrix[i])
        rows.append([corpus.ids[i], _short_label(corpus.labels[i])] + list(d[:Q]))
    return header, rows


def _short_label(g) -> str:
    s = str(g)
    short = {"control": "C", "ALS": "A", "Huntington": "H"}
    return short.get(s, s)


def plot_table(obj, kind: str, *, G: int = 256, corpus=None, estimator=None):
    """Header and rows for one plot-data kind."""
    if kind not in PLOT_KINDS:
        raise InvalidArgumentError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    if kind == "weight-functions":
        if not isinstance(obj, DiscriminantModel):
            raise InvalidArgumentError("weight-functions needs a fitted model")
        lam = np.arange(G) / G
        cols = [weight_function(obj, q, G) for q in range(1, obj.Q + 1)]
        header = ["lambda"] + [f"xi{q}" for q in range(1, obj.Q + 1)]
        return header, [[lam[g]] + [c[g] for c in cols] for g in range(G)]
    if kind == "discriminant-scatter":
        if not isinstance(obj, DiscriminantModel) or corpus is None:
            raise InvalidArgumentError("discriminant-scatter needs a model and a cepstral corpus")
        return _scatter_rows(obj, corpus)
    if kind == "log-spectra":
        epochs = list(obj)
        est = estimator or EstimatorConfig()
        header = ["epoch_id", "group", "lambda", "log_spectrum"]
        rows = []
        for e in epochs:
            g = est.estimate(e).values
            M = e.N // 2 + 1
            for m in range(M):
                rows.append([e.id, "" if e.group is None else e.group, m / e.N, g[m]])
        return header, rows
    if kind == "cv-curve":
        if not isinstance(obj, CVResult):
            raise InvalidArgumentError("cv-curve needs a cross-validation result")
        return ["L", "misclassified"], [
            [L, "NA" if e is None else e] for L, e in zip(obj.candidates, obj.errors)]
    if not isinstance(obj, ExperimentReport):
        raise InvalidArgumentError("rates needs an experiment report")
    return ["method", "mean", "sd", "failures"], [
        [m, s["mean"], s["sd"], s["failures"]] for m, s in obj.summary().items()]


def emit_plot_data(obj, kind: str, path, *, G: int = 256, corpus=None, estimator=None,
                   figure: bool = False) -> Path:
    """Write a tab-separated plot table; with ``figure=True`` also render a PNG
    next to it (same stem).  Returns the TSV path."""
    header, rows = plot_table(obj, kind, G=G, corpus=corpus, estimator=estimator)
    path = Path(path)
    atomic_write(path, _tsv(header, rows))
    if figure:
        from .plotting import render

        render(kind, header, rows, path.with_suffix(".png"))
    return path
