"""Channel-information matrix and judgement-reconstruction equalization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .receiver import DetectionReport, MatchedOutputs

Comparison = Literal["magnitude", "coherent"]


class DegenerateCSIError(ValueError):
    """The main-path CSI value is zero, so nothing can be normalised by it."""


@dataclass(frozen=True)
class CIMatrix:
    a: np.ndarray
    tau: float
    T_s: int

    def row(self, i: int) -> np.ndarray:
        return self.a[i]


@dataclass(frozen=True)
class DemodDecision:
    """Outcome of the channel-state judgement.

    ``interferers`` holds ``(offset, value)`` with offset ``T_k - t_0`` in
    chips and the detected complex value ``r_d(T_k)``.
    """

    mode: Literal["plain", "reconstruct"]
    main_index: int
    t0: int
    reference: complex
    T_s: int
    interferers: tuple[tuple[int, complex], ...] = ()

    @property
    def K(self) -> int:
        return len(self.interferers)


@dataclass
class ReconstructedSeqs:
    re1: np.ndarray
    re2: np.ndarray
    trace: list[dict] = field(default_factory=list)


def is_grid_aliased(diff, T_s: int, tau: float):
    """Relative delay lands within ``tau`` of a positive multiple of ``T_s``."""
    d = np.abs(np.asarray(diff))
    m = np.mod(d, T_s)
    return (d > T_s - tau) & ((m < tau) | (m > T_s - tau))


def build_ci_matrix(report: DetectionReport, T_s: int, tau: float = 1.0) -> CIMatrix:
    """Binary matrix flagging path pairs whose correlation peaks fall on each
    other's symbol sampling instants."""
    if report.M_paths < 1:
        raise ValueError("report has no paths")
    if not 0 < tau < T_s / 2:
        raise ValueError(f"tau must lie in (0, T_s/2), got {tau}")
    t = report.delays
    diff = t[:, None] - t[None, :]
    a = is_grid_aliased(diff, T_s, tau).astype(np.int8)
    np.fill_diagonal(a, 0)
    return CIMatrix(a=a, tau=float(tau), T_s=int(T_s))


def select_demod_path(report: DetectionReport, ci: CIMatrix) -> DemodDecision:
    if report.empty:
        raise ValueError("empty detection report")
    i = report.main_index
    t0 = report.t0
    ref = report.main_value
    row = ci.row(i)
    if not row.any():
        return DemodDecision("plain", i, t0, ref, ci.T_s)
    ks = np.flatnonzero(row)
    inter = tuple((int(report.delays[k] - t0), complex(report.values[k])) for k in ks)
    return DemodDecision("reconstruct", i, t0, ref, ci.T_s, inter)


def sample_at_symbol_instants(mo: MatchedOutputs, t0: int, N: int, T_s: int):
    """Values of both matched outputs at delays ``t0 + n T_s``."""
    idx = mo.lag0_index + t0 + T_s * np.arange(N)
    if N < 1 or idx[0] < 0 or idx[-1] >= mo.r1.size:
        raise ValueError(
            f"sampling instants t0={t0}, N={N}, T_s={T_s} fall outside the "
            f"matched outputs (delays {-mo.lag0_index}..{mo.r1.size - 1 - mo.lag0_index})"
        )
    return mo.r1[idx].copy(), mo.r2[idx].copy()


def _statistic(x, phases, reference, mode: Comparison):
    z = x * np.exp(-1j * np.asarray(phases))
    if mode == "magnitude":
        return np.abs(z)
    if mode == "coherent":
        if reference is None:
            raise ValueError("coherent comparison needs the main-path reference")
        return np.real(z / reference)
    raise ValueError(f"unknown comparison {mode!r}")


def plain_judgement(
    r1_s, r2_s, phases, mode: Comparison = "magnitude", reference: complex | None = None
) -> np.ndarray:
    """Bit is 1 where branch 1 beats branch 2; ties decide 0.

    ``magnitude`` compares ``|r1|`` against ``|r2|``. ``coherent`` compares
    real parts after removing the external phase and the main-path value.
    """
    r1_s = np.asarray(r1_s, dtype=np.complex128)
    r2_s = np.asarray(r2_s, dtype=np.complex128)
    if r1_s.shape != r2_s.shape:
        raise ValueError("branch sample lists differ in length")
    z1 = _statistic(r1_s, phases, reference, mode)
    z2 = _statistic(r2_s, phases, reference, mode)
    return (z1 > z2).astype(np.int64)


def equalize_reconstruct(
    r1_s,
    r2_s,
    report: DetectionReport,
    decision: DemodDecision,
    phases,
    N: int,
    mode: Comparison = "magnitude",
    keep_trace: bool = False,
):
    """Sequential interference subtraction using reconstructed symbols.

    For each symbol the scaled reconstructions of earlier symbols hit by an
    interferer are removed from both branches before comparing. The winning
    branch is then reconstructed as ``r_d(t_0) e^{j phi_n} / N``. Interferer
    offsets are rounded to whole symbols; offsets beyond the frame are
    dropped, and interferers arriving before the main path only reference
    symbols that are not reconstructed yet, so they contribute nothing.

    Returns
    -------
    (ReconstructedSeqs, numpy.ndarray)
    """
    r1_s = np.asarray(r1_s, dtype=np.complex128)
    r2_s = np.asarray(r2_s, dtype=np.complex128)
    phases = np.asarray(phases, dtype=float)
    if r1_s.size != N or r2_s.size != N or phases.size != N:
        raise ValueError("sample lists and phases must all have N entries")
    ref = complex(decision.reference)
    if ref == 0:
        raise DegenerateCSIError("main-path value r_d(t0) is zero")
    T_s = decision.T_s

    taps = []
    for offset, value in decision.interferers:
        k = int(round(offset / T_s))
        if abs(offset) > (N - 1) * T_s or k == 0:
            continue
        taps.append((k, value / ref))

    re1 = np.zeros(N, dtype=np.complex128)
    re2 = np.zeros(N, dtype=np.complex128)
    trace = []
    bits = np.zeros(N, dtype=np.int64)
    for n in range(N):
        res1 = r1_s[n]
        res2 = r2_s[n]
        for k, g in taps:
            j = n - k
            if 0 <= j < n:
                res1 -= g * re1[j]
                res2 -= g * re2[j]
        z1 = _statistic(res1, phases[n], ref, mode)
        z2 = _statistic(res2, phases[n], ref, mode)
        win = ref * np.exp(1j * phases[n]) / N
        if z1 > z2:
            bits[n] = 1
            re1[n] = win
        else:
            re2[n] = win
        if keep_trace:
            trace.append(
                {
                    "n": n,
                    "res1": [res1.real, res1.imag],
                    "res2": [res2.real, res2.imag],
                    "bit": int(bits[n]),
                    "re1": [re1[n].real, re1[n].imag],
                    "re2": [re2[n].real, re2[n].imag],
                }
            )
    return ReconstructedSeqs(re1, re2, trace), bits


def demodulate(
    mo: MatchedOutputs,
    report: DetectionReport,
    phases,
    T_s: int,
    tau: float = 1.0,
    mode: Comparison = "magnitude",
) -> np.ndarray:
    """Judgement or judgement-reconstruction, whichever the CI matrix calls for."""
    phases = np.asarray(phases, dtype=float)
    N = phases.size
    ci = build_ci_matrix(report, T_s, tau)
    decision = select_demod_path(report, ci)
    r1_s, r2_s = sample_at_symbol_instants(mo, decision.t0, N, T_s)
    if decision.mode == "plain":
        return plain_judgement(r1_s, r2_s, phases, mode, decision.reference)
    _, bits = equalize_reconstruct(r1_s, r2_s, report, decision, phases, N, mode)
    return bits


def write_trace(path, trace: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec) + "\n")
