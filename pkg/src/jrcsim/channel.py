"""Tapped-delay multipath channel and calibrated complex white noise.

Noise bookkeeping: the noise power spectral density is ``N0/2`` and one
complex sample is taken per chip, so the per-sample complex variance is
``sigma2 = N0/2``. A matched filter of energy ``E`` then reaches peak SNR
``E / sigma2 = 2E/N0``, which is the detection axis ``d``; the per-symbol
axis is ``rb = 2 E_s / N0 = E_s / sigma2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .framing import JrcFrame

_GAIN_HALF_WIDTH = np.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class ChannelRealization:
    """Taps ``(delay, gain)``, main path first with gain exactly 1."""

    taps: tuple[tuple[int, complex], ...]

    def __post_init__(self):
        taps = tuple((int(d), complex(g)) for d, g in self.taps)
        if not taps:
            raise ValueError("channel needs at least one tap")
        if taps[0][1] != 1 + 0j:
            raise ValueError(f"main path gain must be 1, got {taps[0][1]}")
        if any(d < 0 for d, _ in taps):
            raise ValueError("tap delays must be >= 0")
        object.__setattr__(self, "taps", taps)

    @property
    def main_delay(self) -> int:
        return self.taps[0][0]

    @property
    def path_count(self) -> int:
        return len(self.taps)

    @property
    def max_delay(self) -> int:
        return max(d for d, _ in self.taps)

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps], dtype=np.int64)

    @property
    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.taps], dtype=np.complex128)

    def to_json(self) -> str:
        return json.dumps(
            {"taps": [{"delay": d, "re": g.real, "im": g.imag} for d, g in self.taps]}
        )

    @classmethod
    def from_json(cls, line: str) -> ChannelRealization:
        obj = json.loads(line)
        return cls(tuple((t["delay"], complex(t["re"], t["im"])) for t in obj["taps"]))


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float
    N0_half: float | None = None
    rb: float | None = None

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


NOISELESS = NoiseSpec(0.0, 0.0)


def sample_channel(L_paths: int, T_s: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw delays uniformly on integer chips ``[0, 3 T_s)`` and interferer
    gains ``a + jb`` with ``a, b ~ U(-sqrt(2)/2, sqrt(2)/2)``."""
    if L_paths < 1:
        raise ValueError(f"L_paths must be >= 1, got {L_paths}")
    delays = rng.integers(0, 3 * T_s, size=L_paths)
    ab = rng.uniform(-_GAIN_HALF_WIDTH, _GAIN_HALF_WIDTH, size=(L_paths - 1, 2))
    gains = [1 + 0j] + list(ab[:, 0] + 1j * ab[:, 1])
    return ChannelRealization(tuple(zip(delays.tolist(), gains)))


def complex_awgn(n: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian noise, variance ``sigma2`` per sample."""
    z = rng.standard_normal((2, n))
    return (z[0] + 1j * z[1]) * np.sqrt(sigma2 / 2.0)


def multipath(samples: np.ndarray, ch: ChannelRealization, length: int | None = None) -> np.ndarray:
    """Noise-free tap sum; colliding delays add."""
    n = samples.size + ch.max_delay if length is None else int(length)
    out = np.zeros(n, dtype=np.complex128)
    for d, g in ch.taps:
        stop = min(n, d + samples.size)
        if stop > d:
            out[d:stop] += g * samples[: stop - d]
    return out


def apply_channel(
    frame,
    ch: ChannelRealization,
    noise: NoiseSpec = NOISELESS,
    rng: np.random.Generator | None = None,
    length: int | None = None,
) -> np.ndarray:
    """Received signal ``sum_taps gain * shift(frame, delay) + w``.

    The output keeps the full tail (``len(frame) + max_delay``) unless a
    fixed receive window ``length`` is given. No random numbers are drawn
    when ``noise.sigma2 == 0``.
    """
    samples = frame.samples if isinstance(frame, JrcFrame) else np.asarray(frame, np.complex128)
    if samples.size == 0:
        raise ValueError("frame must be non-empty")
    out = multipath(samples, ch, length)
    if noise.sigma2 > 0:
        if rng is None:
            raise ValueError("rng is required when sigma2 > 0")
        out += complex_awgn(out.size, noise.sigma2, rng)
    return out


def snr_to_sigma2(d: float, E: float, E_s: float | None = None) -> NoiseSpec:
    """Noise spec for detection SNR ``d = 2E/N0`` on a frame of energy ``E``.

    ``sigma2 = N0/2 = E/d``. If the symbol energy ``E_s`` is given the
    per-symbol ratio ``rb = 2 E_s / N0`` is reported as well.
    """
    if not d > 0:
        raise ValueError(f"SNR must be > 0, got {d}")
    if not E > 0:
        raise ValueError(f"energy must be > 0, got {E}")
    sigma2 = E / d
    rb = None if E_s is None else E_s / sigma2
    return NoiseSpec(sigma2=sigma2, N0_half=sigma2, rb=rb)


def rb_to_sigma2(rb: float, E_s: float) -> NoiseSpec:
    """Noise spec for per-symbol SNR ``rb = 2 E_s / N0``."""
    if not rb > 0:
        raise ValueError(f"rb must be > 0, got {rb}")
    sigma2 = E_s / rb
    return NoiseSpec(sigma2=sigma2, N0_half=sigma2, rb=rb)


def write_channel_log(path, realizations) -> None:
    with open(path, "w") as fh:
        for ch in realizations:
            fh.write(ch.to_json() + "\n")


def read_channel_log(path) -> list[ChannelRealization]:
    return [
        ChannelRealization.from_json(ln)
        for ln in Path(path).read_text().splitlines()
        if ln.strip()
    ]
