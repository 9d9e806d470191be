"""Internal matched filtering, information-independent radar processing,
CFAR thresholds and joint detection of the channel paths."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .seqdesign import OrthogonalPair, PairCorrelations, as_complex_seq, xcorr_fft


@dataclass(frozen=True)
class MatchedOutputs:
    """Correlations of the received signal with s1 and s2.

    Index ``lag0_index + t`` holds delay ``t``.
    """

    r1: np.ndarray
    r2: np.ndarray
    lag0_index: int

    def __post_init__(self):
        if self.r1.shape != self.r2.shape:
            raise ValueError("r1 and r2 must have equal length")


@dataclass(frozen=True)
class RadarOutput:
    r_f2: np.ndarray
    lag0_index: int

    def __post_init__(self):
        if not 0 <= self.lag0_index < self.r_f2.shape[-1]:
            raise ValueError("lag0_index out of bounds")

    def at(self, delay: int) -> complex:
        return complex(self.r_f2[self.lag0_index + delay])

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.r_f2.size) - self.lag0_index


def matched_filter_pair(r, pair: OrthogonalPair) -> MatchedOutputs:
    r = as_complex_seq(r, "r")
    return MatchedOutputs(
        r1=xcorr_fft(r, pair.s1), r2=xcorr_fft(r, pair.s2), lag0_index=pair.L - 1
    )


def composite_reference(pair: OrthogonalPair, phases) -> np.ndarray:
    """Impulse response of both radar filters combined, as a correlation
    reference: symbol n is ``(s1 + s2) e^{j phi_n}``."""
    rot = np.exp(1j * np.asarray(phases, dtype=float))
    return ((pair.s1 + pair.s2)[None, :] * rot[:, None]).ravel()


def shift_sum(c: np.ndarray, phases, T_s: int) -> np.ndarray:
    """Apply the external-phase filter to an ``s1 + s2`` correlation.

    ``out[i] = sum_n e^{-j phi_n} c[i - (N - 1 - n) T_s]``; works along the
    last axis.
    """
    phases = np.asarray(phases, dtype=float)
    N = phases.size
    n_c = c.shape[-1]
    out = np.zeros(c.shape[:-1] + (n_c + (N - 1) * T_s,), dtype=np.complex128)
    derot = np.exp(-1j * phases)
    for n in range(N):
        s = (N - 1 - n) * T_s
        out[..., s : s + n_c] += derot[n] * c
    return out


def radar_process(
    r, pair: OrthogonalPair, phases, order: Literal["cascade", "composite"] = "cascade"
) -> RadarOutput:
    """Radar output ``r_f2`` computed without knowledge of the bits.

    ``order="cascade"`` correlates with ``s1 + s2`` and then applies the
    phase-derotated shift-sum; ``order="composite"`` correlates once with
    the combined reference. Both give the same output, lag 0 at
    ``N * L - 1``.
    """
    r = as_complex_seq(r, "r")
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or phases.size < 1:
        raise ValueError("phases must be a non-empty 1-D list")
    L = pair.L
    N = phases.size
    if order == "cascade":
        out = shift_sum(xcorr_fft(r, pair.s1 + pair.s2), phases, L)
    elif order == "composite":
        out = xcorr_fft(r, composite_reference(pair, phases))
    else:
        raise ValueError(f"unknown order {order!r}")
    return RadarOutput(r_f2=out, lag0_index=N * L - 1)


def composite_autocorr(phases) -> np.ndarray:
    """Autocorrelation of ``e^{j phi}`` on the symbol-lag grid, lag 0 at ``N - 1``."""
    ph = np.asarray(phases, dtype=float)
    if ph.ndim != 1 or ph.size < 1:
        raise ValueError("phases must be a non-empty 1-D list")
    u = np.exp(1j * ph)
    return np.correlate(u, u, mode="full")


def radar_response_model(bits, phases, corr: PairCorrelations, T_s: int) -> RadarOutput:
    """Noise-free radar output of a zero-delay frame built from given
    correlation functions.

    Sums ``e^{j(phi_n - phi_m)} Q_n(t - (n - m) T_s)`` with
    ``Q_n = R11 + R12`` for a 1 bit and ``R21 + R22`` for a 0 bit. With
    :func:`~jrcsim.seqdesign.ideal_correlations` the result is the same for
    every bit vector.
    """
    bits = np.asarray(bits)
    ph = np.asarray(phases, dtype=float)
    N = ph.size
    if bits.size != N:
        raise ValueError("bits and phases differ in length")
    L = corr.lag0 + 1
    q1 = corr.r11 + corr.r12
    q0 = corr.r21 + corr.r22
    n_out = 2 * N * T_s - 1
    lag0 = N * T_s - 1
    out = np.zeros(n_out, dtype=np.complex128)
    for n in range(N):
        q = q1 if bits[n] else q0
        for m in range(N):
            start = lag0 + (n - m) * T_s - (L - 1)
            lo = max(start, 0)
            hi = min(start + q.size, n_out)
            out[lo:hi] += np.exp(1j * (ph[n] - ph[m])) * q[lo - start : hi - start]
    return RadarOutput(r_f2=out, lag0_index=lag0)


def radar_noise_power(pair: OrthogonalPair, phases, sigma2: float) -> float:
    """Per-cell noise power at the radar output for input noise ``sigma2``."""
    N = np.asarray(phases).size
    h = pair.s1 + pair.s2
    return float(sigma2 * N * np.vdot(h, h).real)


@dataclass(frozen=True)
class CfarConfig:
    """CFAR settings.

    ``mode="ca"`` averages ``M_ref`` reference cells of ``|r_f2|^2`` around
    the cell under test with ``guard`` cells excluded on each side;
    ``mode="known"`` thresholds ``|r_f2|`` using the known noise power
    ``sigma2`` at the radar output.
    """

    mode: Literal["ca", "known"] = "ca"
    M_ref: int = 32
    guard: int = 2
    P_FA: float = 1e-3
    sigma2: float | None = None

    def __post_init__(self):
        if not 0 < self.P_FA < 1:
            raise ValueError(f"P_FA must lie in (0, 1), got {self.P_FA}")
        if self.mode == "ca":
            if self.M_ref < 2 or self.M_ref % 2:
                raise ValueError(f"M_ref must be even and >= 2, got {self.M_ref}")
            if self.guard < 0:
                raise ValueError("guard must be >= 0")
        elif self.mode == "known":
            if self.sigma2 is not None and not self.sigma2 > 0:
                raise ValueError("sigma2 must be > 0")
        else:
            raise ValueError(f"unknown CFAR mode {self.mode!r}")


def ca_alpha(M: int, P_FA: float) -> float:
    """Cell-averaging scale factor for ``M`` exponential reference cells."""
    return M * (P_FA ** (-1.0 / M) - 1.0)


def _ca_windows(n: int, M: int, guard: int):
    h = M // 2
    i = np.arange(n)
    left_avail = np.clip(i - guard, 0, None)
    right_avail = np.clip(n - 1 - i - guard, 0, None)
    n_left = np.minimum(h, left_avail)
    n_right = np.minimum(h, right_avail)
    # one-sided fill near the edges keeps the window at M cells
    n_left = np.minimum(left_avail, n_left + (h - n_right))
    n_right = np.minimum(right_avail, n_right + (h - np.minimum(h, left_avail)))
    lo_l = i - guard - n_left
    hi_r = i + guard + n_right
    return lo_l, i - guard, i + guard + 1, hi_r + 1, n_left + n_right


def cfar_threshold_ca(cells, cfg: CfarConfig) -> np.ndarray:
    """Per-cell cell-averaging threshold ``(alpha / M) * sum(reference cells)``.

    Works along the last axis. Cells within ``guard + M_ref/2`` of an edge
    take the missing reference cells from the far side.
    """
    if cfg.mode != "ca":
        raise ValueError("cfar_threshold_ca needs mode='ca'")
    x = np.asarray(cells, dtype=float)
    n = x.shape[-1]
    if n <= cfg.M_ref + 2 * cfg.guard:
        raise ValueError(
            f"{n} cells cannot hold a window of {cfg.M_ref} reference + "
            f"{2 * cfg.guard} guard cells"
        )
    lo_l, hi_l, lo_r, hi_r, count = _ca_windows(n, cfg.M_ref, cfg.guard)
    cs = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    # guard zone may reach past the array: clip both ends
    hi_l = np.clip(hi_l, 0, n)
    lo_l = np.clip(lo_l, 0, n)
    lo_r = np.clip(lo_r, 0, n)
    hi_r = np.clip(hi_r, 0, n)
    total = (cs[..., hi_l] - cs[..., lo_l]) + (cs[..., hi_r] - cs[..., lo_r])
    assert np.all(count == cfg.M_ref)
    return ca_alpha(cfg.M_ref, cfg.P_FA) / cfg.M_ref * total


def cfar_threshold_known(cfg: CfarConfig) -> float:
    """Amplitude threshold ``sqrt(-sigma2 ln P_FA)`` for known noise power."""
    if cfg.mode != "known":
        raise ValueError("cfar_threshold_known needs mode='known'")
    if cfg.sigma2 is None:
        raise ValueError("known-noise CFAR needs sigma2")
    return float(np.sqrt(-cfg.sigma2 * np.log(cfg.P_FA)))


@dataclass(frozen=True)
class DetectionReport:
    """Detected paths: delays (chips, relative to lag 0) and complex values."""

    delays: np.ndarray
    values: np.ndarray
    main_index: int | None

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.complex128)
        if d.shape != v.shape:
            raise ValueError("delays and values differ in length")
        if d.size and np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly increasing")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_peaks(cls, delays, values) -> DetectionReport:
        d = np.asarray(delays, dtype=np.int64)
        v = np.asarray(values, dtype=np.complex128)
        order = np.argsort(d, kind="stable")
        d, v = d[order], v[order]
        main = int(np.argmax(v.real**2 + v.imag**2)) if d.size else None
        return cls(d, v, main)

    @property
    def M_paths(self) -> int:
        return int(self.delays.size)

    @property
    def empty(self) -> bool:
        return self.delays.size == 0

    @property
    def t0(self) -> int:
        if self.main_index is None:
            raise ValueError("empty detection report")
        return int(self.delays[self.main_index])

    @property
    def main_value(self) -> complex:
        if self.main_index is None:
            raise ValueError("empty detection report")
        return complex(self.values[self.main_index])

    def to_json(self) -> str:
        return json.dumps(
            {
                "peaks": [
                    {"delay": int(d), "re": float(v.real), "im": float(v.imag)}
                    for d, v in zip(self.delays, self.values)
                ],
                "main_index": self.main_index,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> DetectionReport:
        obj = json.loads(text)
        peaks = obj["peaks"]
        return cls(
            np.array([p["delay"] for p in peaks], dtype=np.int64),
            np.array([complex(p["re"], p["im"]) for p in peaks], dtype=np.complex128),
            obj["main_index"],
        )


def local_max_mask(mag: np.ndarray) -> np.ndarray:
    """Discrete peak condition ``m[t-1] < m[t] >= m[t+1]`` (edges padded low).

    ``mag`` may be magnitude or power; the condition is the same.
    """
    pad = np.full(mag.shape[:-1] + (1,), -np.inf)
    left = np.concatenate([pad, mag[..., :-1]], axis=-1)
    right = np.concatenate([mag[..., 1:], pad], axis=-1)
    return (left < mag) & (mag >= right)


def above_threshold(power: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    """CFAR test on cell powers ``|r_f2|^2`` (last axis)."""
    if cfg.mode == "ca":
        return power > cfar_threshold_ca(power, cfg)
    T = cfar_threshold_known(cfg)
    return power > T * T


def detection_mask(r_f2: np.ndarray, cfg: CfarConfig) -> np.ndarray:
    power = r_f2.real**2 + r_f2.imag**2
    return above_threshold(power, cfg) & local_max_mask(power)


def joint_detect(out: RadarOutput, cfg: CfarConfig) -> DetectionReport:
    """Keep every strict local maximum of ``|r_f2|`` that crosses the CFAR
    threshold, with its complex value."""
    idx = np.flatnonzero(detection_mask(out.r_f2, cfg))
    return DetectionReport.from_peaks(idx - out.lag0_index, out.r_f2[idx])


def estimate_pulse_width(out: RadarOutput, delay: int) -> int:
    """Number of contiguous samples around ``delay`` within 3 dB of its peak."""
    mag = np.abs(out.r_f2)
    i = out.lag0_index + delay
    level = mag[i] / np.sqrt(2.0)
    lo = i
    while lo > 0 and mag[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < mag.size - 1 and mag[hi + 1] >= level:
        hi += 1
    return hi - lo + 1
