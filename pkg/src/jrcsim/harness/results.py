"""Curve containers, CSV/SVG emission and curve arithmetic."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("x_db", "y", "trials", "count")


@dataclass(frozen=True)
class CurvePoint:
    x_db: float
    y: float
    trials: int
    count: int

    def __post_init__(self):
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"y must lie in [0, 1], got {self.y}")


@dataclass
class CurveResult:
    """One simulated curve; ``trials`` counts Bernoulli opportunities (symbols
    for SER, frames for Pd) so ``count/trials`` reproduces ``y``."""

    label: str
    points: list[CurvePoint]
    fingerprint: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = [p.x_db for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("curve points must be sorted by strictly increasing x")

    @property
    def x(self) -> np.ndarray:
        return np.array([p.x_db for p in self.points])

    @property
    def y(self) -> np.ndarray:
        return np.array([p.y for p in self.points])

    @classmethod
    def from_counts(cls, label, x_db, counts, trials, fingerprint="", **metadata) -> CurveResult:
        pts = [
            CurvePoint(float(x), int(c) / int(trials), int(trials), int(c))
            for x, c in zip(x_db, counts)
        ]
        return cls(label, pts, fingerprint, dict(metadata))

    def wilson(self, z: float = 1.96) -> np.ndarray:
        """Wilson score interval per point, shape ``(n, 2)``."""
        n = np.array([p.trials for p in self.points], dtype=float)
        ph = self.y
        den = 1 + z**2 / n
        mid = (ph + z**2 / (2 * n)) / den
        half = z * np.sqrt(ph * (1 - ph) / n + z**2 / (4 * n**2)) / den
        return np.column_stack([mid - half, mid + half])


def slug(label: str) -> str:
    s = re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower()
    return s or "curve"


def write_curve_csv(path, curve: CurveResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in curve.points:
            w.writerow([repr(float(p.x_db)), repr(float(p.y)), p.trials, p.count])


def read_curve_csv(path) -> list[CurvePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(CSV_COLUMNS)}")
    return [CurvePoint(float(x), float(y), int(t), int(c)) for x, y, t, c in rows[1:]]


def emit_results(
    curves: list[CurveResult],
    out_dir,
    formats=("csv",),
    kind: str = "ser",
    name: str = "results",
) -> dict:
    """Write one CSV per curve, an optional overlay figure and ``manifest.json``.

    ``kind`` selects the figure styling: ``"ser"`` (log y) or ``"pd"``.
    Returns the manifest dictionary.
    """
    formats = set(formats)
    bad = formats - {"csv", "svg", "png"}
    if bad:
        raise ValueError(f"unknown output formats {sorted(bad)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    files = []
    used = set()
    if "csv" in formats:
        for c in curves:
            fname = slug(c.label)
            while fname in used:
                fname += "_"
            used.add(fname)
            path = out / f"{fname}.csv"
            _guarded(path, write_curve_csv, path, c)
            files.append({"file": path.name, "label": c.label, "fingerprint": c.fingerprint})
    for fmt in sorted(formats & {"svg", "png"}):
        if not curves:
            continue
        from .plotting import plot_curves

        path = out / f"{name}.{fmt}"
        _guarded(path, plot_curves, curves, path, kind)
        files.append({"file": path.name, "label": "overlay", "fingerprint": ""})

    prints = sorted({c.fingerprint for c in curves if c.fingerprint})
    manifest = {"files": files, "fingerprint": prints[0] if len(prints) == 1 else prints}
    _guarded(out / "manifest.json", _write_json, out / "manifest.json", manifest)
    return manifest


def _write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _guarded(path, fn, *args):
    try:
        fn(*args)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def crossing(x, y, target: float, log_y: bool = False) -> float:
    """First ``x`` where the piecewise-linear curve reaches ``target``.

    With ``log_y`` the interpolation is linear in ``log10 y`` (SER curves).
    Returns NaN when the curve never brackets the target.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = target
    if log_y:
        with np.errstate(divide="ignore"):
            y = np.log10(y)
        t = np.log10(target)
    for i in range(x.size - 1):
        a, b = y[i], y[i + 1]
        if (a - t) * (b - t) <= 0 and np.isfinite(a) and np.isfinite(b) and a != b:
            return float(x[i] + (t - a) * (x[i + 1] - x[i]) / (b - a))
        if a == t:
            return float(x[i])
    if y.size and y[-1] == t:
        return float(x[-1])
    return float("nan")
