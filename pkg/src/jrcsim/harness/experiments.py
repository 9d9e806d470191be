"""Monte-Carlo experiments: SER, detection probability, information
invariance and CFAR calibration."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc

from ..channel import apply_channel, complex_awgn, rb_to_sigma2, sample_channel, snr_to_sigma2
from ..equalizer import demodulate
from ..framing import FrameSpec, assemble_frame, random_bits
from ..receiver import (
    CfarConfig,
    above_threshold,
    joint_detect,
    matched_filter_pair,
    radar_noise_power,
    radar_process,
    radar_response_model,
)
from ..seqdesign import OrthogonalPair, can_design, ideal_correlations, load_pair
from . import engine
from .config import SimConfig
from .results import CurveResult

log = logging.getLogger("jrcsim")


def fsk2_coherent_ser(rb_linear):
    """Coherent binary orthogonal FSK error rate ``Q(sqrt(rb))``."""
    rb = np.asarray(rb_linear, dtype=float)
    if np.any(rb < 0):
        raise ValueError("rb must be >= 0")
    out = 0.5 * erfc(np.sqrt(rb / 2.0))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def _designed(L: int, seed: int, iters: int, tol: float) -> OrthogonalPair:
    log.info("designing CAN pair L=%d seed=%d", L, seed)
    return can_design(L, rng_seed=seed, max_iters=iters, tol=tol)


def get_pair(cfg: SimConfig) -> OrthogonalPair:
    """The configured pair: loaded from ``pair_file`` or designed (cached)."""
    if cfg.pair_file:
        pair = load_pair(cfg.pair_file)
        if pair.L != cfg.L:
            raise ValueError(f"pair file has L={pair.L}, config has L={cfg.L}")
        return pair
    return _designed(cfg.L, cfg.design_seed, cfg.design_max_iters, cfg.design_tol)


def _chunks(n: int, size: int):
    for a in range(0, n, size):
        yield range(a, min(a + size, n))


def _fan_out(fn, jobs, workers: int):
    """Ordered map; results do not depend on the number of workers."""
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _ser_job(setup, cfg: SimConfig, paths: int, trials, sigmas):
    batch = engine.draw_batch(setup, trials, paths, cfg.master_seed, engine.SER_STREAM + paths)
    return engine.ser_batch(
        setup, batch, sigmas, cfg.cfar(), cfg.csi_mode, cfg.tau, cfg.comparison
    )


def ser_sigmas(cfg: SimConfig, pair: OrthogonalPair) -> np.ndarray:
    rb = 10 ** (np.asarray(cfg.snr_grid_db) / 10)
    return np.sqrt([rb_to_sigma2(x, pair.E_s).sigma2 for x in rb])


def run_ser_experiment(cfg: SimConfig, workers: int = 1) -> list[CurveResult]:
    """SER against ``rb`` for every configured path count.

    Each curve's ``trials`` field counts symbols (``trials * N``). Trials
    whose detection fails, or whose main path leaves no room for the frame,
    count all ``N`` symbols as errors and are tallied in
    ``metadata["missed"]``.
    """
    pair = get_pair(cfg)
    setup = engine.Setup(pair, cfg.phases, cfg.window)
    sigmas = ser_sigmas(cfg, pair)
    curves = []
    for paths in cfg.path_counts:
        jobs = [(setup, cfg, paths, ch, sigmas) for ch in _chunks(cfg.trials, cfg.batch_size)]
        errors = np.zeros(sigmas.size, dtype=np.int64)
        missed = np.zeros(sigmas.size, dtype=np.int64)
        for e, m in _fan_out(_ser_job, jobs, workers):
            errors += e
            missed += m
        log.info("ser paths=%d errors=%s", paths, errors.tolist())
        curves.append(
            CurveResult.from_counts(
                f"{paths} path" + ("s" if paths > 1 else ""),
                cfg.snr_grid_db,
                errors,
                cfg.trials * cfg.N,
                cfg.fingerprint(),
                paths=paths,
                csi_mode=cfg.csi_mode,
                frames=cfg.trials,
                missed=missed.tolist(),
            )
        )
    return curves


def _pd_job(setup, cfg: SimConfig, trials, sigmas):
    batch = engine.draw_batch(setup, trials, 1, cfg.master_seed, engine.PD_STREAM)
    return engine.pd_batch(setup, batch, sigmas, cfg.cfar())


def pd_sigmas(cfg: SimConfig) -> np.ndarray:
    E = float(cfg.N * cfg.L)
    d = 10 ** (np.asarray(cfg.snr_grid_db) / 10)
    return np.sqrt([snr_to_sigma2(x, E).sigma2 for x in d])


def run_pd_experiment(cfg: SimConfig, workers: int = 1) -> tuple[CurveResult, CurveResult]:
    """Detection probability against ``d = 2E/N0`` for the bit-blind radar
    chain and for a matched filter that knows the transmitted frame.

    A trial scores when a thresholded local maximum lies within one chip of
    the true delay. Both chains use the same CFAR.
    """
    pair = get_pair(cfg)
    setup = engine.Setup(pair, cfg.phases, cfg.window)
    sigmas = pd_sigmas(cfg)
    jobs = [(setup, cfg, ch, sigmas) for ch in _chunks(cfg.trials, cfg.batch_size)]
    hp = np.zeros(sigmas.size, dtype=np.int64)
    hb = np.zeros(sigmas.size, dtype=np.int64)
    for p, b in _fan_out(_pd_job, jobs, workers):
        hp += p
        hb += b
    log.info("pd proposed=%s baseline=%s", hp.tolist(), hb.tolist())
    fp = cfg.fingerprint()
    meta = {"cfar_mode": cfg.cfar_mode, "P_FA": cfg.P_FA}
    return (
        CurveResult.from_counts("proposed", cfg.snr_grid_db, hp, cfg.trials, fp, **meta),
        CurveResult.from_counts("matched filter", cfg.snr_grid_db, hb, cfg.trials, fp, **meta),
    )


@dataclass(frozen=True)
class FalseAlarmResult:
    mode: str
    P_FA: float
    cells: int
    alarms: int

    @property
    def rate(self) -> float:
        return self.alarms / self.cells


def run_false_alarm_study(
    cfg: SimConfig,
    mode: str,
    min_cells: int = 10**6,
    record_len: int = 20000,
) -> FalseAlarmResult:
    """Threshold crossings of the radar output under noise only.

    Only cells whose correlation window and CFAR reference window lie fully
    inside the record are counted, so every counted cell sees stationary
    noise.
    """
    pair = get_pair(cfg)
    setup = engine.Setup(pair, cfg.phases, record_len)
    sigma2 = 1.0
    out_power = radar_noise_power(pair, cfg.phases, sigma2)
    c = CfarConfig(mode, cfg.M_ref, cfg.guard, cfg.P_FA, out_power if mode == "known" else None)
    margin = cfg.guard + cfg.M_ref // 2
    lo = setup.lag0 + margin
    hi = record_len - 1 - margin
    if hi < lo:
        raise ValueError("record too short for the CFAR window")
    per_record = hi - lo + 1
    cells = alarms = 0
    k = 0
    while cells < min_cells:
        rng = engine.trial_rng(cfg.master_seed, engine.FA_STREAM, k)
        y = setup.radar(complex_awgn(record_len, sigma2, rng))
        p = y.real**2 + y.imag**2
        alarms += int(np.count_nonzero(above_threshold(p, c)[lo : hi + 1]))
        cells += per_record
        k += 1
    return FalseAlarmResult(mode, cfg.P_FA, cells, alarms)


@dataclass(frozen=True)
class InvarianceReport:
    """Pointwise ``| |r_f2^a| - |r_f2^b| |`` over all bit-vector pairs.

    ``psl`` is the smallest sidelobe peak of the outputs (main cell
    excluded), so ``fraction_below_psl`` is conservative.
    """

    n_bitvectors: int
    n_pairs: int
    n_points: int
    peak: float
    psl: float
    max_diff: float
    median_diff: float
    fraction_below_psl: float


def invariance_bitvectors(cfg: SimConfig, n: int) -> list[np.ndarray]:
    return [
        random_bits(cfg.N, engine.trial_rng(cfg.master_seed, engine.INVARIANCE_STREAM, i))
        for i in range(n)
    ]


def invariance_outputs(cfg: SimConfig, bitvectors, ideal: bool = False) -> np.ndarray:
    """Noise-free single-path ``|r_f2|`` for each bit vector (rows)."""
    phases = cfg.phases
    if ideal:
        corr = ideal_correlations(cfg.L)
        rows = [np.abs(radar_response_model(b, phases, corr, cfg.L).r_f2) for b in bitvectors]
    else:
        pair = get_pair(cfg)
        rows = []
        for b in bitvectors:
            frame = assemble_frame(pair, FrameSpec(np.asarray(b), phases, cfg.L))
            rows.append(np.abs(radar_process(frame.samples, pair, phases).r_f2))
    return np.vstack(rows)


def run_invariance_study(
    cfg: SimConfig, num_bitvectors: int, ideal: bool = False, bitvectors=None
) -> InvarianceReport:
    """Compare noise-free radar outputs across random (or given) bit vectors.

    With ``ideal=True`` the outputs are built from ideal correlation
    functions instead of the designed pair.
    """
    if bitvectors is None:
        if num_bitvectors < 2:
            raise ValueError("num_bitvectors must be >= 2")
        bitvectors = invariance_bitvectors(cfg, num_bitvectors)
    bitvectors = [np.asarray(b, dtype=np.int64) for b in bitvectors]
    if len(bitvectors) < 2:
        raise ValueError("need at least two bit vectors")
    mags = invariance_outputs(cfg, bitvectors, ideal)
    n, m = mags.shape
    lag0 = cfg.N * cfg.L - 1
    side = np.delete(mags, lag0, axis=1)
    psl = float(side.max(axis=1).min())
    diffs = np.concatenate(
        [np.abs(mags[i + 1 :] - mags[i]).astype(np.float32).ravel() for i in range(n - 1)]
    )
    return InvarianceReport(
        n_bitvectors=n,
        n_pairs=n * (n - 1) // 2,
        n_points=int(diffs.size),
        peak=float(mags[:, lag0].min()),
        psl=psl,
        max_diff=float(diffs.max()),
        median_diff=float(np.median(diffs)),
        fraction_below_psl=float(np.count_nonzero(diffs < psl)) / diffs.size,
    )


def simulate_trial(cfg: SimConfig, paths: int, trial: int, rb_db: float) -> dict:
    """One SER trial through the per-trial library path (no batching).

    Draws exactly what the batched engine draws for the same trial, so the
    two can be compared. Returns bits, estimate, channel and detection
    report; ``estimate`` is None when demodulation was impossible.
    """
    pair = get_pair(cfg)
    rng = engine.trial_rng(cfg.master_seed, engine.SER_STREAM + paths, trial)
    bits = random_bits(cfg.N, rng)
    ch = sample_channel(paths, cfg.L, rng)
    noise = rb_to_sigma2(10 ** (rb_db / 10), pair.E_s)
    frame = assemble_frame(pair, FrameSpec(bits, cfg.phases, cfg.L))
    r = apply_channel(frame, ch, noise, rng, length=cfg.window)
    if cfg.csi_mode == "ideal":
        setup = engine.Setup(pair, cfg.phases, cfg.window)
        report = engine.ideal_report(setup, ch)
    else:
        out = radar_process(r, pair, cfg.phases)
        report = joint_detect(out, cfg.cfar(radar_noise_power(pair, cfg.phases, noise.sigma2)))
    est = None
    if not report.empty:
        try:
            est = demodulate(
                matched_filter_pair(r, pair), report, cfg.phases, cfg.L, cfg.tau, cfg.comparison
            )
        except ValueError:
            est = None
    return {"bits": bits, "estimate": est, "channel": ch, "report": report, "received": r}
