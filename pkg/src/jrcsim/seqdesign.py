"""Orthogonal unimodular pair design and correlation primitives.

All signals are sampled at one sample per chip. Correlations follow the
convention ``c[lag] = sum_k a[k + lag] * conj(b[k])`` with lags running
from ``-(len(b) - 1)`` to ``len(a) - 1``; lag 0 sits at index ``len(b) - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft

BARKER13 = np.array([1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1], dtype=float)


def as_complex_seq(x, name: str = "sequence") -> np.ndarray:
    """Validate and convert ``x`` to a 1-D complex128 array."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def xcorr_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear cross-correlation along the last axis of ``a``.

    ``a`` may carry leading batch axes; ``b`` is 1-D. No validation.
    """
    na, nb = a.shape[-1], b.shape[-1]
    n_out = na + nb - 1
    nfft = sfft.next_fast_len(n_out)
    fa = sfft.fft(a, nfft, axis=-1)
    fb = sfft.fft(np.conj(b[::-1]), nfft)
    return sfft.ifft(fa * fb, axis=-1)[..., :n_out]


def cross_correlation(a, b) -> np.ndarray:
    """Full cross-correlation of ``a`` against ``b`` (lag 0 at ``len(b) - 1``).

    Parameters
    ----------
    a, b : array_like
        Non-empty complex sequences.

    Returns
    -------
    numpy.ndarray
        Length ``len(a) + len(b) - 1``.
    """
    a = as_complex_seq(a, "a")
    b = as_complex_seq(b, "b")
    return xcorr_fft(a, b)


@dataclass(frozen=True)
class PairCorrelations:
    """The four correlation functions of a pair, all sharing lag-0 index ``L - 1``."""

    r11: np.ndarray
    r12: np.ndarray
    r21: np.ndarray
    r22: np.ndarray

    @property
    def lag0(self) -> int:
        return (self.r11.size - 1) // 2


@dataclass(frozen=True)
class PairMetrics:
    E_s: float
    psl_auto: float
    cross_peak: float
    cross_zero: float
    isl: float


@dataclass
class OrthogonalPair:
    """A pair of equal-length sequences used as the two information symbols.

    ``iterations``, ``converged`` and ``isl_history`` are only populated by
    :func:`can_design`.
    """

    s1: np.ndarray
    s2: np.ndarray
    iterations: int = 0
    converged: bool = True
    isl_history: tuple[float, ...] | None = None

    def __post_init__(self):
        self.s1 = as_complex_seq(self.s1, "s1")
        self.s2 = as_complex_seq(self.s2, "s2")
        if self.s1.size != self.s2.size:
            raise ValueError(
                f"pair sequences differ in length: {self.s1.size} != {self.s2.size}"
            )

    @property
    def L(self) -> int:
        return self.s1.size

    def is_unimodular(self, tol: float = 1e-12) -> bool:
        return bool(
            np.all(np.abs(np.abs(self.s1) - 1) <= tol)
            and np.all(np.abs(np.abs(self.s2) - 1) <= tol)
        )

    @cached_property
    def metrics(self) -> PairMetrics:
        return pair_metrics(self)

    @property
    def E_s(self) -> float:
        return self.metrics.E_s

    @property
    def psl_auto(self) -> float:
        return self.metrics.psl_auto

    @property
    def cross_peak(self) -> float:
        return self.metrics.cross_peak

    @property
    def isl(self) -> float:
        return self.metrics.isl

    def correlations(self) -> PairCorrelations:
        return PairCorrelations(
            r11=xcorr_fft(self.s1, self.s1),
            r12=xcorr_fft(self.s1, self.s2),
            r21=xcorr_fft(self.s2, self.s1),
            r22=xcorr_fft(self.s2, self.s2),
        )

    def swapped(self) -> OrthogonalPair:
        return OrthogonalPair(self.s2, self.s1)


def ideal_correlations(L: int, E_s: float | None = None) -> PairCorrelations:
    """Correlation functions of a hypothetical perfectly orthogonal pair.

    No finite sequence pair achieves these; they let the radar chain be
    evaluated in its idealised form.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    E_s = float(L) if E_s is None else float(E_s)
    auto = np.zeros(2 * L - 1, dtype=np.complex128)
    auto[L - 1] = E_s
    zero = np.zeros(2 * L - 1, dtype=np.complex128)
    return PairCorrelations(r11=auto, r12=zero, r21=zero.copy(), r22=auto.copy())


def pair_metrics(p: OrthogonalPair) -> PairMetrics:
    """Energy, normalised peak sidelobes and integrated sidelobe level.

    ``isl`` is the Frobenius form
    ``sum_{k != 0} |R11|^2 + |R22|^2 + sum_k |R12|^2 + |R21|^2`` (unnormalised),
    which is the quantity the CAN iteration drives down.
    """
    c = p.correlations()
    z = c.lag0
    E_s = float(c.r11[z].real)
    a1 = np.abs(c.r11)
    a2 = np.abs(c.r22)
    side = np.ones(a1.size, dtype=bool)
    side[z] = False
    x12 = np.abs(c.r12)
    x21 = np.abs(c.r21)
    psl = max(a1[side].max(initial=0.0), a2[side].max(initial=0.0)) / E_s
    cross = max(x12.max(), x21.max()) / E_s
    isl = float(
        np.sum(a1[side] ** 2) + np.sum(a2[side] ** 2) + np.sum(x12**2) + np.sum(x21**2)
    )
    return PairMetrics(
        E_s=E_s,
        psl_auto=float(psl),
        cross_peak=float(cross),
        cross_zero=float(x12[z] / E_s),
        isl=isl,
    )


def _spectral_isl(Y: np.ndarray, L: int) -> float:
    # Parseval on the 2L grid: sum_k ||R_k||_F^2 = sum_p ||y_p||^4 / (2L)
    row_energy = np.sum(Y.real**2 + Y.imag**2, axis=1)
    total = float(np.sum(row_energy**2)) / (2 * L)
    return total - Y.shape[1] * L * L


def can_design(
    L: int,
    rng_seed: int = 0,
    max_iters: int = 10000,
    tol: float = 1e-6,
    record_history: bool = False,
    callback=None,
) -> OrthogonalPair:
    """Design a unimodular pair with low auto- and cross-correlation sidelobes.

    Cyclic alternating projection (the multi-sequence CAN scheme): the two
    sequences are stacked as columns, zero padded to ``2L`` and transformed;
    each frequency row is scaled to constant norm; the inverse transform's
    first ``L`` entries are projected back to unit modulus.

    Parameters
    ----------
    L : int
        Sequence length in chips, ``L >= 2``.
    rng_seed : int
        Seed for the random initial phases.
    max_iters : int
        Iteration cap. Hitting it is not an error; ``converged`` is False.
    tol : float
        Stop when the largest elementwise change drops below this.
    record_history : bool
        Keep the ISL of every iterate (initial point first).
    callback : callable, optional
        Called as ``callback(k, X)`` with the ``(L, 2)`` iterate after step k
        (``k = 0`` is the initial point).

    Returns
    -------
    OrthogonalPair
    """
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    rng = np.random.default_rng(rng_seed)
    X = np.exp(2j * np.pi * rng.random((L, 2)))
    history = []
    if callback is not None:
        callback(0, X.copy())

    converged = False
    it = 0
    Y = sfft.fft(X, 2 * L, axis=0)
    while it < max_iters:
        if record_history:
            history.append(_spectral_isl(Y, L))
        norms = np.linalg.norm(Y, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        Z = sfft.ifft(Y / norms, axis=0)[:L]
        X_new = np.exp(1j * np.angle(Z))
        change = np.max(np.abs(X_new - X))
        X = X_new
        it += 1
        Y = sfft.fft(X, 2 * L, axis=0)
        if callback is not None:
            callback(it, X.copy())
        if change < tol:
            converged = True
            break
    if record_history:
        history.append(_spectral_isl(Y, L))

    return OrthogonalPair(
        s1=X[:, 0],
        s2=X[:, 1],
        iterations=it,
        converged=converged,
        isl_history=tuple(history) if record_history else None,
    )


def save_pair(path, pair: OrthogonalPair) -> None:
    """Write ``L=<n>`` then ``re,im`` lines for s1, a blank line, then s2."""
    lines = [f"L={pair.L}"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in pair.s1]
    lines.append("")
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in pair.s2]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_block(lines: list[str]) -> np.ndarray:
    vals = []
    for ln in lines:
        re, im = ln.split(",")
        vals.append(complex(float(re), float(im)))
    return np.array(vals, dtype=np.complex128)


def read_sequences(path) -> tuple[int, list[np.ndarray]]:
    """Parse the ``L=<n>`` / ``re,im`` text format into its blocks."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("L="):
        raise ValueError(f"{path}: missing 'L=<n>' header")
    n = int(text[0][2:])
    blocks, cur = [], []
    for ln in text[1:]:
        if ln.strip() == "":
            if cur:
                blocks.append(_parse_block(cur))
                cur = []
        else:
            cur.append(ln)
    if cur:
        blocks.append(_parse_block(cur))
    for b in blocks:
        if b.size != n:
            raise ValueError(f"{path}: block of length {b.size}, header says {n}")
    return n, blocks


def load_pair(path) -> OrthogonalPair:
    _, blocks = read_sequences(path)
    if len(blocks) != 2:
        raise ValueError(f"{path}: expected 2 sequences, found {len(blocks)}")
    return OrthogonalPair(blocks[0], blocks[1])
