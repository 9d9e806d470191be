"""Two-layer transmit frame: bit selects s1/s2, external phase rotates each symbol."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seqdesign import BARKER13, OrthogonalPair, as_complex_seq, read_sequences


@dataclass(frozen=True)
class FrameSpec:
    bits: tuple[int, ...]
    phases: tuple[float, ...]
    symbol_len: int

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        phases = tuple(float(p) for p in self.phases)
        if len(bits) < 1:
            raise ValueError("frame needs at least one symbol")
        if len(bits) != len(phases):
            raise ValueError(f"{len(bits)} bits but {len(phases)} phases")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        if self.symbol_len < 1:
            raise ValueError("symbol_len must be >= 1")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "phases", phases)

    @property
    def N(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class JrcFrame:
    samples: np.ndarray
    spec: FrameSpec

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples.real**2 + self.samples.imag**2))

    def __len__(self) -> int:
        return self.samples.size


def barker13_phases() -> np.ndarray:
    """Barker-13 chips as phases: 0 for +1, pi for -1."""
    return np.where(BARKER13 > 0, 0.0, np.pi)


def random_bits(N: int, rng: np.random.Generator) -> np.ndarray:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return rng.integers(0, 2, size=N, dtype=np.int64)


def assemble_frame(pair: OrthogonalPair, spec: FrameSpec) -> JrcFrame:
    """Concatenate ``s1 e^{j phi_n}`` (bit 1) or ``s2 e^{j phi_n}`` (bit 0).

    Symbols are contiguous with no guard interval.
    """
    if spec.symbol_len != pair.L:
        raise ValueError(
            f"symbol_len {spec.symbol_len} does not match pair length {pair.L}"
        )
    bits = np.asarray(spec.bits, dtype=bool)
    rot = np.exp(1j * np.asarray(spec.phases))
    symbols = np.where(bits[:, None], pair.s1[None, :], pair.s2[None, :])
    samples = (symbols * rot[:, None]).ravel()
    return JrcFrame(samples=samples, spec=spec)


def save_frame(path, frame: JrcFrame) -> Path:
    """Write samples in the pair text format plus a ``.json`` sidecar.

    Returns the sidecar path.
    """
    path = Path(path)
    lines = [f"L={frame.samples.size}"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in frame.samples]
    path.write_text("\n".join(lines) + "\n")
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(
        json.dumps(
            {
                "bits": list(frame.spec.bits),
                "phases": list(frame.spec.phases),
                "symbol_len": frame.spec.symbol_len,
            },
            indent=2,
        )
        + "\n"
    )
    return sidecar


def load_frame(path) -> JrcFrame:
    path = Path(path)
    _, blocks = read_sequences(path)
    if len(blocks) != 1:
        raise ValueError(f"{path}: expected 1 sequence, found {len(blocks)}")
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    spec = FrameSpec(tuple(meta["bits"]), tuple(meta["phases"]), int(meta["symbol_len"]))
    samples = as_complex_seq(blocks[0], "frame")
    if samples.size != spec.N * spec.symbol_len:
        raise ValueError(f"{path}: {samples.size} samples for {spec.N} symbols")
    return JrcFrame(samples=samples, spec=spec)
