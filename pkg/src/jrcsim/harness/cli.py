"""Command line: ``jrcsim {design,ser,pd,invariance,demo}``.

Progress and errors go to standard error; standard output only carries the
JSON summary of what was written.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..channel import ChannelRealization, NOISELESS, apply_channel, rb_to_sigma2
from ..equalizer import (
    build_ci_matrix,
    equalize_reconstruct,
    sample_at_symbol_instants,
    select_demod_path,
    write_trace,
)
from ..framing import FrameSpec, assemble_frame, save_frame
from ..receiver import (
    composite_autocorr,
    joint_detect,
    matched_filter_pair,
    radar_noise_power,
    radar_process,
)
from ..seqdesign import can_design, cross_correlation, save_pair
from .config import SimConfig
from .experiments import (
    get_pair,
    invariance_bitvectors,
    invariance_outputs,
    run_invariance_study,
    run_pd_experiment,
    run_ser_experiment,
    simulate_trial,
)
from .results import emit_results

log = logging.getLogger("jrcsim")

DEMO_BITS = "1000011000011"


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from exc


def _formats(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with SimConfig fields")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out-dir", type=Path, default=Path("results"))
    common.add_argument("--pair-file", help="use a saved pair instead of designing one")
    common.add_argument("-v", "--verbose", action="store_true")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--trials", type=int)
    mc.add_argument("--snr-db", type=_floats, help="SNR grid in dB, e.g. '6,7,8'")
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--formats", type=_formats, default=("csv", "svg"), help="csv,svg,png")
    mc.add_argument("--cfar", choices=("known", "ca"), help="CFAR mode")
    mc.add_argument("--pfa", type=float, help="false-alarm probability")

    p = argparse.ArgumentParser(prog="jrcsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", parents=[common], help="design a sequence pair and save it")
    d.add_argument("--L", type=int, default=200)
    d.add_argument("--max-iters", type=int, default=10000)
    d.add_argument("--tol", type=float, default=1e-6)

    s = sub.add_parser("ser", parents=[common, mc], help="symbol error rate curves")
    s.add_argument("--paths", type=_ints, help="path counts, e.g. '1,5,10'")
    s.add_argument("--csi", choices=("ideal", "detected"))
    s.add_argument("--comparison", choices=("coherent", "magnitude"))
    s.add_argument("--dump-csi", action="store_true", help="write per-trial CSI for early trials")

    sub.add_parser("pd", parents=[common, mc], help="detection probability curves")

    inv = sub.add_parser("invariance", parents=[common], help="radar output vs. bit vector")
    inv.add_argument("--bitvectors", type=int, default=100)
    inv.add_argument("--ideal", action="store_true", help="use ideal correlation functions")

    demo = sub.add_parser("demo", parents=[common], help="single noise-free or noisy frame")
    demo.add_argument("--bits", default=DEMO_BITS, help="bit string, e.g. 1000011000011")
    demo.add_argument(
        "--snr-db", dest="rb_db", type=float, help="rb in dB; noise-free (threshold set for 20 dB) if omitted"
    )
    demo.add_argument("--delays", type=_ints, default=(0,), help="path delays (first is main)")
    demo.add_argument(
        "--gains", type=_floats, default=(), help="interferer gains as re,im pairs"
    )
    demo.add_argument("--dump-csi", action="store_true")
    return p


def _config(args) -> SimConfig:
    cfg = SimConfig.from_json(args.config) if args.config else SimConfig()
    changes = {}
    for attr, field in [
        ("seed", "master_seed"),
        ("trials", "trials"),
        ("snr_db", "snr_grid_db"),
        ("paths", "path_counts"),
        ("csi", "csi_mode"),
        ("comparison", "comparison"),
        ("cfar", "cfar_mode"),
        ("pfa", "P_FA"),
        ("pair_file", "pair_file"),
    ]:
        v = getattr(args, attr, None)
        if v is not None:
            changes[field] = v
    return cfg.replace(**changes) if changes else cfg


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_design(args) -> dict:
    seed = 0 if args.seed is None else args.seed
    pair = can_design(args.L, rng_seed=seed, max_iters=args.max_iters, tol=args.tol)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / f"pair_L{args.L}_seed{seed}.txt"
    save_pair(path, pair)
    m = pair.metrics
    info = {
        "file": str(path),
        "iterations": pair.iterations,
        "converged": pair.converged,
        "metrics": dataclasses.asdict(m),
    }
    _write_json(args.out_dir / "design.json", info)
    return info


def cmd_ser(args) -> dict:
    cfg = _config(args)
    curves = run_ser_experiment(cfg, workers=args.workers)
    manifest = emit_results(curves, args.out_dir, args.formats, kind="ser", name="ser")
    _write_json(args.out_dir / "config.json", cfg.to_dict())
    if args.dump_csi:
        n = min(cfg.trials, 100)
        for paths in cfg.path_counts:
            path = args.out_dir / f"csi_{paths}path.jsonl"
            with open(path, "w") as fh:
                for t in range(n):
                    rec = simulate_trial(cfg, paths, t, cfg.snr_grid_db[0])
                    fh.write(
                        json.dumps(
                            {
                                "trial": t,
                                "channel": json.loads(rec["channel"].to_json()),
                                "report": json.loads(rec["report"].to_json()),
                            }
                        )
                        + "\n"
                    )
            manifest["files"].append({"file": path.name, "label": "csi", "fingerprint": ""})
    return manifest


def cmd_pd(args) -> dict:
    cfg = _config(args)
    curves = list(run_pd_experiment(cfg.replace(path_counts=(1,)), workers=args.workers))
    manifest = emit_results(curves, args.out_dir, args.formats, kind="pd", name="pd")
    _write_json(args.out_dir / "config.json", cfg.to_dict())
    return manifest


def cmd_invariance(args) -> dict:
    cfg = _config(args)
    rep = run_invariance_study(cfg, args.bitvectors, ideal=args.ideal)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    info = dataclasses.asdict(rep)
    _write_json(args.out_dir / "invariance.json", info)
    from .plotting import plot_invariance

    bv = invariance_bitvectors(cfg, min(args.bitvectors, 8))
    mags = invariance_outputs(cfg, bv, args.ideal)
    delays = np.arange(mags.shape[1]) - (cfg.N * cfg.L - 1)
    plot_invariance(delays, mags, args.out_dir / "invariance.png")
    info["files"] = ["invariance.json", "invariance.png"]
    return info


def _demo_channel(args) -> ChannelRealization:
    g = args.gains
    if len(g) % 2 or len(g) // 2 != len(args.delays) - 1:
        raise ValueError("--gains needs one re,im pair per interferer delay")
    gains = [1 + 0j] + [complex(g[2 * i], g[2 * i + 1]) for i in range(len(g) // 2)]
    return ChannelRealization(tuple(zip(args.delays, gains)))


def _csv(path: Path, header, cols) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) + "\n")


def cmd_demo(args) -> dict:
    from .plotting import plot_matched_outputs, plot_radar_stages

    cfg = _config(args)
    pair = get_pair(cfg)
    if set(args.bits) - {"0", "1"} or len(args.bits) != cfg.N:
        raise ValueError(f"--bits must be {cfg.N} characters of 0/1")
    bits = np.array([int(b) for b in args.bits])
    phases = cfg.phases
    frame = assemble_frame(pair, FrameSpec(bits, phases, cfg.L))
    ch = _demo_channel(args)
    if args.rb_db is None:
        noise, rng = NOISELESS, None
    else:
        noise = rb_to_sigma2(10 ** (args.rb_db / 10), pair.E_s)
        rng = np.random.default_rng(cfg.master_seed)
    r = apply_channel(frame, ch, noise, rng)

    out = radar_process(r, pair, phases)
    mo = matched_filter_pair(r, pair)
    # a noise-free run keeps the threshold calibrated for rb = 20 dB
    cal = noise.sigma2 if noise.sigma2 > 0 else rb_to_sigma2(100.0, pair.E_s).sigma2
    sigma_out = radar_noise_power(pair, phases, cal)
    report = joint_detect(out, cfg.cfar(sigma_out) if cfg.cfar_mode == "known" else cfg.cfar())
    if report.empty:
        raise RuntimeError("no path detected")
    decision = select_demod_path(report, build_ci_matrix(report, cfg.L, cfg.tau))
    r1_s, r2_s = sample_at_symbol_instants(mo, decision.t0, cfg.N, cfg.L)
    rec, est = equalize_reconstruct(
        r1_s, r2_s, report, decision, phases, cfg.N, cfg.comparison, keep_trace=True
    )

    o = args.out_dir
    o.mkdir(parents=True, exist_ok=True)
    mf_delays = np.arange(mo.r1.size) - mo.lag0_index
    _csv(o / "matched.csv", ("delay", "abs_r1", "abs_r2"),
         (mf_delays.tolist(), np.abs(mo.r1).tolist(), np.abs(mo.r2).tolist()))
    _csv(o / "radar.csv", ("delay", "abs_r_f2"), (out.delays.tolist(), np.abs(out.r_f2).tolist()))
    R = cross_correlation(pair.s1 + pair.s2, pair.s1 + pair.s2)
    R2 = composite_autocorr(phases)
    dR = np.arange(R.size) - (pair.L - 1)
    dR2 = (np.arange(R2.size) - (cfg.N - 1)) * cfg.L
    save_frame(o / "frame.txt", frame)
    write_trace(o / "equalizer_trace.jsonl", rec.trace)
    plot_matched_outputs(mf_delays, mo.r1, mo.r2, decision.t0, cfg.L, cfg.N, o / "matched.png")
    plot_radar_stages(dR, R, dR2, R2, out.delays, out.r_f2, o / "radar.png")
    files = ["matched.csv", "radar.csv", "frame.txt", "frame.txt.json",
             "equalizer_trace.jsonl", "matched.png", "radar.png"]
    if args.dump_csi:
        (o / "csi.json").write_text(report.to_json() + "\n")
        files.append("csi.json")
    info = {
        "bits": args.bits,
        "estimate": "".join(str(int(b)) for b in est),
        "symbol_errors": int(np.count_nonzero(est != bits)),
        "mode": decision.mode,
        "t0": decision.t0,
        "files": files,
    }
    _write_json(o / "demo.json", info)
    return info


COMMANDS = {
    "design": cmd_design,
    "ser": cmd_ser,
    "pd": cmd_pd,
    "invariance": cmd_invariance,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        info = COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - report any failure as exit status
        print(f"jrcsim: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(info, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
