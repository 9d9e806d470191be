"""Simulation configuration and its fingerprint."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..framing import barker13_phases
from ..receiver import CfarConfig


@dataclass(frozen=True)
class SimConfig:
    """Parameters shared by the SER, detection and invariance experiments.

    ``snr_grid_db`` is read as ``rb = 2E_s/N0`` for SER runs and as
    ``d = 2E/N0`` for detection runs.
    """

    L: int = 200
    N: int = 13
    phase_seq: str | tuple[float, ...] = "barker13"
    path_counts: tuple[int, ...] = (1, 5, 10)
    snr_grid_db: tuple[float, ...] = (6.0, 7.0, 8.0, 9.0, 10.0, 11.0)
    trials: int = 1000
    P_FA: float = 1e-6
    cfar_mode: str = "known"
    M_ref: int = 32
    guard: int = 2
    master_seed: int = 0
    csi_mode: str = "detected"
    comparison: str = "coherent"
    tau: float = 1.0
    design_seed: int = 0
    design_max_iters: int = 10000
    design_tol: float = 1e-6
    pair_file: str | None = None
    batch_size: int = 250

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        grid = np.asarray(self.snr_grid_db, dtype=float)
        if grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("snr grid must be non-empty and strictly increasing")
        if any(p < 1 for p in self.path_counts):
            raise ValueError("path counts must be >= 1")
        if self.csi_mode not in ("ideal", "detected"):
            raise ValueError(f"csi_mode must be 'ideal' or 'detected', not {self.csi_mode!r}")
        if self.comparison not in ("coherent", "magnitude"):
            raise ValueError(f"unknown comparison {self.comparison!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if len(self.phases) != self.N:
            raise ValueError(f"phase sequence has {len(self.phases)} entries, N={self.N}")
        # validates CFAR fields
        self.cfar()

    @property
    def phases(self) -> np.ndarray:
        if isinstance(self.phase_seq, str):
            if self.phase_seq != "barker13":
                raise ValueError(f"unknown phase sequence {self.phase_seq!r}")
            return barker13_phases()
        return np.asarray(self.phase_seq, dtype=float)

    @property
    def T_s(self) -> int:
        return self.L

    @property
    def window(self) -> int:
        # receive window covers the frame under the largest drawn delay
        return (self.N + 3) * self.L

    def cfar(self, sigma2: float | None = None) -> CfarConfig:
        return CfarConfig(
            mode=self.cfar_mode, M_ref=self.M_ref, guard=self.guard, P_FA=self.P_FA, sigma2=sigma2
        )

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SimConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for k in ("path_counts", "snr_grid_db"):
            if k in d:
                d[k] = tuple(d[k])
        if isinstance(d.get("phase_seq"), list):
            d["phase_seq"] = tuple(float(x) for x in d["phase_seq"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> SimConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def fingerprint(self) -> str:
        blob = json.dumps({"config": self.to_dict(), "version": __version__}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
