"""Batched trial kernels behind the Monte-Carlo experiments.

Each trial draws, from its own generator, the bits, the channel and one
unit-power noise record. The received signal at SNR point ``k`` is
``clean + sigma_k * unit``, so linear processing is run once on each part
and combined per SNR point. The decisions are those of the library path
(:mod:`jrcsim.receiver`, :mod:`jrcsim.equalizer`); trials that need
judgement-reconstruction are handed to the library functions directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft

from ..channel import ChannelRealization, multipath, sample_channel
from ..equalizer import (
    build_ci_matrix,
    equalize_reconstruct,
    is_grid_aliased,
    plain_judgement,
    select_demod_path,
)
from ..framing import random_bits
from ..receiver import (
    CfarConfig,
    DetectionReport,
    above_threshold,
    ca_alpha,
    composite_reference,
)
from ..seqdesign import OrthogonalPair

SER_STREAM = 1000
PD_STREAM = 2000
FA_STREAM = 3000
INVARIANCE_STREAM = 4000


def trial_rng(master_seed: int, stream: int, trial: int) -> np.random.Generator:
    """Generator owned by one trial; depends only on its arguments."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream, trial)))


@dataclass
class Setup:
    pair: OrthogonalPair
    phases: np.ndarray
    W: int

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        self.N = self.phases.size
        self.T = self.pair.L
        self.rot = np.exp(1j * self.phases)
        self.g = composite_reference(self.pair, self.phases)
        self.n_out = self.W + self.g.size - 1
        self.lag0 = self.g.size - 1
        self.nfft = sfft.next_fast_len(self.n_out)
        self.gf = sfft.fft(np.conj(self.g[::-1]), self.nfft)
        self.radar_gain = float(np.vdot(self.g, self.g).real)
        self.s1c = np.conj(self.pair.s1)
        self.s2c = np.conj(self.pair.s2)

    def radar(self, x: np.ndarray) -> np.ndarray:
        return sfft.ifft(sfft.fft(x, self.nfft, axis=-1) * self.gf, axis=-1)[..., : self.n_out]

    def frames(self, bits: np.ndarray) -> np.ndarray:
        sym = np.where(bits[..., None].astype(bool), self.pair.s1, self.pair.s2)
        return (sym * self.rot[:, None]).reshape(bits.shape[0], -1)


@dataclass
class Batch:
    bits: np.ndarray
    channels: list[ChannelRealization]
    frames: np.ndarray
    clean: np.ndarray
    unit: np.ndarray


def draw_batch(setup: Setup, trials, paths: int, master_seed: int, stream: int) -> Batch:
    B = len(trials)
    bits = np.empty((B, setup.N), dtype=np.int64)
    unit = np.empty((B, setup.W), dtype=np.complex128)
    channels = []
    for i, t in enumerate(trials):
        rng = trial_rng(master_seed, stream, t)
        bits[i] = random_bits(setup.N, rng)
        channels.append(sample_channel(paths, setup.T, rng))
        z = rng.standard_normal((2, setup.W))
        unit[i] = (z[0] + 1j * z[1]) * np.sqrt(0.5)
    frames = setup.frames(bits)
    clean = np.stack([multipath(frames[i], ch, setup.W) for i, ch in enumerate(channels)])
    return Batch(bits, channels, frames, clean, unit)


def ser_batch(
    setup: Setup,
    batch: Batch,
    sigmas,
    cfar: CfarConfig,
    csi_mode: str = "detected",
    tau: float = 1.0,
    comparison: str = "coherent",
):
    """Symbol errors and detection failures per SNR point for one batch."""
    N, T = setup.N, setup.T
    B = batch.bits.shape[0]
    pad_l, pad_r = T - 1, N * T
    clean_p = np.pad(batch.clean, ((0, 0), (pad_l, pad_r)))
    unit_p = np.pad(batch.unit, ((0, 0), (pad_l, pad_r)))
    errors = np.zeros(len(sigmas), dtype=np.int64)
    missed = np.zeros(len(sigmas), dtype=np.int64)

    if csi_mode == "ideal":
        plans = [_ideal_plan(setup, ch, tau) for ch in batch.channels]
        t0 = np.array([p[0] for p in plans])
        ref = np.array([p[1] for p in plans])
        cache = _SampleCache(setup, clean_p, unit_p)
        for k, sigma in enumerate(sigmas):
            r1_s, r2_s = cache.samples(t0 + pad_l, sigma)
            est = plain_judgement(r1_s, r2_s, setup.phases, comparison, ref[:, None])
            for b, (_, _, report, decision) in enumerate(plans):
                if decision is not None:
                    _, est[b] = equalize_reconstruct(
                        r1_s[b], r2_s[b], report, decision, setup.phases, N, comparison
                    )
            errors[k] = np.count_nonzero(est != batch.bits)
        return errors, missed

    A = setup.radar(batch.clean)
    U = setup.radar(batch.unit)
    # |A + sigma U|^2 expanded so each SNR point costs two real axpys
    AA = A.real**2 + A.imag**2
    AU = 2 * (A.real * U.real + A.imag * U.imag)
    UU = U.real**2 + U.imag**2
    cache = _SampleCache(setup, clean_p, unit_p)
    n_out = setup.n_out
    for k, sigma in enumerate(sigmas):
        power = AA + sigma * AU + sigma**2 * UU
        if cfar.mode == "known":
            cfg = CfarConfig(
                "known", cfar.M_ref, cfar.guard, cfar.P_FA, sigma**2 * setup.radar_gain
            )
        else:
            cfg = cfar
        r, c = np.nonzero(above_threshold(power, cfg))
        v = power[r, c]
        left = np.where(c > 0, power[r, np.maximum(c - 1, 0)], -np.inf)
        right = np.where(c < n_out - 1, power[r, np.minimum(c + 1, n_out - 1)], -np.inf)
        peak = (left < v) & (v >= right)
        r, c, v = r[peak], c[peak], v[peak]

        # strongest peak per trial, earliest on ties
        order = np.lexsort((c, -v, r))
        first = order[np.r_[True, r[order][1:] != r[order][:-1]]] if r.size else order
        found = np.zeros(B, dtype=bool)
        main = np.zeros(B, dtype=np.int64)
        found[r[first]] = True
        main[r[first]] = c[first]
        t0 = main - setup.lag0
        valid = found & (t0 >= -(T - 1)) & (t0 + (N - 1) * T <= setup.W - 1)

        off = c - main[r]
        hit = (off >= 1) & (off <= (N - 1) * T) & is_grid_aliased(off, T, tau)
        need = np.zeros(B, dtype=bool)
        need[r[hit]] = True
        need &= valid

        ref = A[np.arange(B), main] + sigma * U[np.arange(B), main]
        r1_s, r2_s = cache.samples(np.where(valid, t0 + pad_l, 0), sigma)
        with np.errstate(divide="ignore", invalid="ignore"):
            est = plain_judgement(r1_s, r2_s, setup.phases, comparison, ref[:, None])
        for b in np.flatnonzero(need):
            idx = c[r == b]
            report = DetectionReport.from_peaks(idx - setup.lag0, A[b, idx] + sigma * U[b, idx])
            decision = select_demod_path(report, build_ci_matrix(report, T, tau))
            assert decision.t0 == t0[b]
            _, est[b] = equalize_reconstruct(
                r1_s[b], r2_s[b], report, decision, setup.phases, N, comparison
            )
        bad = np.count_nonzero(~valid)
        errors[k] = np.count_nonzero((est != batch.bits)[valid]) + bad * N
        missed[k] = bad
    return errors, missed


class _SampleCache:
    """Symbol-instant samples of the clean and noise parts, recomputed only
    for trials whose sampling start moved since the previous SNR point."""

    def __init__(self, setup: Setup, clean_p, unit_p):
        self.setup = setup
        self.clean_p = clean_p
        self.unit_p = unit_p
        self.start = None

    def _compute(self, rows, start):
        st = self.setup
        idx = start[:, None] + np.arange(st.N * st.T)[None, :]
        out = []
        for x in (self.clean_p, self.unit_p):
            seg = x[rows[:, None], idx].reshape(rows.size, st.N, st.T)
            out.append((seg @ st.s1c, seg @ st.s2c))
        return out

    def samples(self, start, sigma):
        if self.start is None:
            rows = np.arange(start.size)
            (self.c1, self.c2), (self.u1, self.u2) = self._compute(rows, start)
        else:
            rows = np.flatnonzero(start != self.start)
            if rows.size:
                (c1, c2), (u1, u2) = self._compute(rows, start[rows])
                self.c1[rows], self.c2[rows], self.u1[rows], self.u2[rows] = c1, c2, u1, u2
        self.start = start.copy()
        return self.c1 + sigma * self.u1, self.c2 + sigma * self.u2


def ideal_report(setup: Setup, ch: ChannelRealization) -> DetectionReport:
    """Perfect CSI: true path delays with their noise-free radar peak values."""
    delays, inv = np.unique(ch.delays, return_inverse=True)
    gains = np.zeros(delays.size, dtype=np.complex128)
    np.add.at(gains, inv, ch.gains)
    return DetectionReport.from_peaks(delays, setup.N * setup.pair.E_s * gains)


def _ideal_plan(setup: Setup, ch: ChannelRealization, tau: float):
    report = ideal_report(setup, ch)
    decision = select_demod_path(report, build_ci_matrix(report, setup.T, tau))
    off = np.array([o for o, _ in decision.interferers], dtype=np.int64)
    useful = off.size and np.any((off >= 1) & (off <= (setup.N - 1) * setup.T))
    return decision.t0, decision.reference, report, decision if useful else None


def _window_stats(view: np.ndarray, ref: np.ndarray) -> np.ndarray:
    if ref.ndim == 1:
        return view @ np.conj(ref)
    return np.einsum("bdk,bk->bd", view, np.conj(ref))


def pd_batch(setup: Setup, batch: Batch, sigmas, cfar: CfarConfig):
    """Detections of the true delay (within one chip) by the bit-blind radar
    chain and by a matched filter that knows the transmitted frame."""
    NT = setup.g.size
    D = 2 if cfar.mode == "known" else max(2, 1 + cfar.guard + cfar.M_ref // 2)
    tau0 = np.array([ch.main_delay for ch in batch.channels])
    span = 2 * D + NT
    rows = np.arange(tau0.size)[:, None]
    idx = tau0[:, None] + np.arange(span)[None, :]

    def windows(x):
        xp = np.pad(x, ((0, 0), (D, D + NT)))
        return sliding_window_view(xp[rows, idx], NT, axis=1)

    cw, uw = windows(batch.clean), windows(batch.unit)
    chains = {
        "proposed": (setup.g, setup.radar_gain),
        "baseline": (batch.frames, None),
    }
    out = {}
    for name, (ref, gain) in chains.items():
        yA, yB = _window_stats(cw, ref), _window_stats(uw, ref)
        if gain is None:
            gain = np.sum(batch.frames.real**2 + batch.frames.imag**2, axis=1)[:, None]
        hits = np.zeros(len(sigmas), dtype=np.int64)
        for k, sigma in enumerate(sigmas):
            y = yA + sigma * yB
            p = y.real**2 + y.imag**2
            thr = _window_threshold(p, D, cfar, sigma**2 * gain)
            ok = np.zeros(p.shape[0], dtype=bool)
            for c in (D - 1, D, D + 1):
                ok |= (p[:, c] > thr[:, c - (D - 1)]) & (p[:, c - 1] < p[:, c]) & (p[:, c] >= p[:, c + 1])
            hits[k] = np.count_nonzero(ok)
        out[name] = hits
    return out["proposed"], out["baseline"]


def _window_threshold(p: np.ndarray, D: int, cfar: CfarConfig, noise_power) -> np.ndarray:
    """Thresholds (power units) for the three cells around the true delay."""
    B = p.shape[0]
    if cfar.mode == "known":
        t2 = -np.asarray(noise_power, dtype=float) * np.log(cfar.P_FA)
        return np.broadcast_to(np.reshape(t2, (-1, 1)), (B, 3))
    h, g = cfar.M_ref // 2, cfar.guard
    scale = ca_alpha(cfar.M_ref, cfar.P_FA) / cfar.M_ref
    thr = np.empty((B, 3))
    for j, c in enumerate((D - 1, D, D + 1)):
        ref_cells = p[:, c - g - h : c - g].sum(axis=1) + p[:, c + g + 1 : c + g + 1 + h].sum(axis=1)
        thr[:, j] = scale * ref_cells
    return thr
