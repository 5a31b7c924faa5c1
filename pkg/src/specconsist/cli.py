"""Command-line front end wiring the library into reproducible experiments.

Subcommands: analyze, reconstruct, compare, synth. Configuration comes from a
JSON file (--config) with CLI flags taking precedence; every report embeds the
fully resolved configuration. Exit codes: 0 success, 1 warning (e.g. empty
corpus), 2 input/configuration error, 3 solver divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import audio_io, metrics, solvers
from .consistency import get_kernel
from .errors import DivergenceError, InputError, SpecConsistError
from .stft import expand_half_spectrum, make_config, stft

EXIT_OK = 0
EXIT_WARNING = 1
EXIT_INPUT = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

TRACE_COLUMNS = ("iter", "loss", "consistency_measure", "step_size")

# CLI spellings -> library names
LOSS_FLAGS = {
    "ec": "ec", "cos": "cos", "aw": "aw",
    "comp-l1": "comp_l1", "comp-l2": "comp_l2",
    "time-l1": "time_l1", "time-l2": "time_l2",
    "cos-derv": "cos_derv", "aw-derv": "aw_derv",
}
INIT_FLAGS = {"zeros": "zeros", "random": "random_uniform",
              "noisy": "noisy_phase", "provided": "provided"}

DEFAULT_CONFIG = {
    "stft": {"window_len": 512, "hop": 128, "window_kind": "hann"},
    "solver": {
        "kind": "gd",
        "max_iters": 100,
        "step_rule": "cosine_anneal",
        "initial_step": 1e-3,
        "final_step": 1e-5,
        "init": "random_uniform",
        "parameterization": "direct_phase",
        "tolerance": 0.0,
    },
    "loss": "ec",
    "metrics": {"search_radius": 128},
    "io": {"output_dir": "."},
    "seed": 0,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(config_path=None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- CLI flags, validated against preconditions."""
    resolved = copy.deepcopy(DEFAULT_CONFIG)
    if config_path is not None:
        try:
            with open(config_path) as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise InputError("config file must contain a JSON object")
        resolved = _deep_merge(resolved, file_cfg)
    if overrides:
        resolved = _deep_merge(resolved, overrides)
    # Fail early on anything the modules would reject.
    make_config(**resolved["stft"])
    _solver_options(resolved).validate()
    if resolved["loss"] not in solvers.LOSSES:
        raise InputError(f"unknown loss {resolved['loss']!r}")
    if resolved["solver"]["kind"] not in ("gla", "gd"):
        raise InputError("solver kind must be 'gla' or 'gd'")
    if resolved["metrics"]["search_radius"] < 0:
        raise InputError("search radius must be nonnegative")
    return resolved


def _solver_options(cfg: dict, init_phase=None) -> solvers.SolverOptions:
    s = cfg["solver"]
    return solvers.SolverOptions(
        max_iters=int(s["max_iters"]),
        step_rule=s["step_rule"],
        initial_step=float(s["initial_step"]),
        final_step=float(s["final_step"]),
        init=s["init"],
        seed=int(cfg["seed"]),
        parameterization=s["parameterization"],
        tolerance=float(s["tolerance"]),
        init_phase=init_phase,
    )


def _stft_config(cfg: dict):
    return make_config(**cfg["stft"])


def _config_overrides(args) -> dict:
    over: dict = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    solver_over = {}
    if getattr(args, "solver", None) is not None:
        solver_over["kind"] = args.solver
    if getattr(args, "iters", None) is not None:
        solver_over["max_iters"] = args.iters
    if getattr(args, "init", None) is not None:
        solver_over["init"] = INIT_FLAGS[args.init]
    if getattr(args, "step", None) is not None:
        solver_over["initial_step"] = args.step
    if getattr(args, "final_step", None) is not None:
        solver_over["final_step"] = args.final_step
    if getattr(args, "step_rule", None) is not None:
        solver_over["step_rule"] = args.step_rule
    if solver_over:
        over["solver"] = solver_over
    if getattr(args, "loss", None) is not None:
        over["loss"] = LOSS_FLAGS[args.loss]
    if getattr(args, "radius", None) is not None:
        over["metrics"] = {"search_radius": args.radius}
    if getattr(args, "window_len", None) is not None:
        over.setdefault("stft", {})["window_len"] = args.window_len
    if getattr(args, "hop", None) is not None:
        over.setdefault("stft", {})["hop"] = args.hop
    if getattr(args, "window", None) is not None:
        over.setdefault("stft", {})["window_kind"] = args.window
    return over


def _write_report(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trace(path: Path, trace: solvers.SolveTrace):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec in trace.records:
            writer.writerow([rec.iteration, rec.loss,
                             rec.consistency_measure, rec.step_size])


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    cfg = resolve_config(args.config, _config_overrides(args))
    config = _stft_config(cfg)
    signal, meta = audio_io.read_wav(args.input, downmix=args.downmix)
    spec = stft(signal, config)
    measure = metrics.consistency_measure(spec, get_kernel(config))
    report = {
        "command": "analyze",
        "config": cfg,
        "input": {"path": str(args.input), "samples": len(signal),
                  "sample_rate": meta.sample_rate, "encoding": meta.encoding},
        "results": {
            "consistency_measure": measure,
            "frames": spec.num_frames,
            "bins": config.window_len,
        },
    }
    out = Path(args.out) if args.out else Path(cfg["io"]["output_dir"]) / "report.json"
    _write_report(out, report)
    print(f"consistency_measure={measure:.6e} frames={spec.num_frames} "
          f"bins={config.window_len} -> {out}")
    return EXIT_OK


def _load_reconstruct_input(args, config):
    """Returns (magnitude, noisy_phase_or_None, reference_or_None, sample_rate)."""
    path = Path(args.input)
    if path.suffix.lower() == ".npy":
        arr = np.load(path)
        if np.iscomplexobj(arr):
            raise InputError("matrix input must be a real magnitude array")
        if arr.ndim != 2:
            raise InputError("matrix input must be 2-D (frames x bins)")
        if arr.shape[1] == config.window_len // 2 + 1:
            arr = expand_half_spectrum(arr)
        if arr.shape[1] != config.window_len:
            raise InputError(
                f"matrix has {arr.shape[1]} bins; config expects "
                f"{config.window_len} (or {config.window_len // 2 + 1} half-band)")
        return np.asarray(arr, dtype=np.float64), None, None, args.sr
    signal, meta = audio_io.read_wav(path, downmix=args.downmix)
    spec = stft(signal, config)
    return spec.magnitude, spec.phase, signal, meta.sample_rate


def cmd_reconstruct(args) -> int:
    cfg = resolve_config(args.config, _config_overrides(args))
    config = _stft_config(cfg)
    mag, noisy_phase, reference, sample_rate = _load_reconstruct_input(args, config)

    if args.reference is not None:
        reference, _ = audio_io.read_wav(args.reference, downmix=args.downmix)

    init_phase = None
    if cfg["solver"]["init"] == "noisy_phase":
        if noisy_phase is None:
            raise InputError("noisy-phase init requires WAV input")
        init_phase = noisy_phase
    elif cfg["solver"]["init"] == "provided":
        if args.init_phase is None:
            raise InputError("provided init requires --init-phase")
        init_phase = np.load(args.init_phase)

    target_phase = None
    if args.target_phase is not None:
        if cfg["loss"] == "ec":
            raise InputError("the consistency loss never consumes a target phase")
        target_phase = np.load(args.target_phase)

    opts = _solver_options(cfg, init_phase=init_phase)
    out_dir = Path(args.out) if args.out else Path(cfg["io"]["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    solver_kind = cfg["solver"]["kind"]
    try:
        if solver_kind == "gla":
            phase, trace = solvers.griffin_lim(mag, opts, config)
        else:
            phase, trace = solvers.gd_reconstruct(mag, cfg["loss"], target_phase,
                                                  opts, config)
    except DivergenceError as exc:
        if exc.trace is not None:
            _write_trace(out_dir / "trace.csv", exc.trace)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE

    n, r = config.window_len, config.hop
    length = len(reference) if reference is not None else mag.shape[0] * r - n + r
    recon = solvers.reconstruct_signal(mag, phase, config, length=length,
                                       sample_rate=sample_rate)

    results = {
        "solver": solver_kind,
        "loss": cfg["loss"] if solver_kind == "gd" else "inconsistency",
        "iterations": len(trace.records),
        "best_iteration": trace.best_iteration,
        "initial_loss": trace.records[0].loss,
        "final_loss": trace.records[trace.best_iteration].loss,
        "eval": None,
    }
    if reference is not None:
        est_spec = stft(recon, config)
        snr, alignment = metrics.aligned_snr(
            reference, recon, cfg["metrics"]["search_radius"])
        report_eval = metrics.EvalReport(
            consistency_measure=trace.records[trace.best_iteration].consistency_measure,
            spectral_convergence_db=metrics.spectral_convergence(
                mag, est_spec.magnitude),
            aligned_snr_db=snr,
            alignment=alignment,
        )
        results["eval"] = report_eval.to_dict()

    audio_io.write_wav(recon, audio_io.WavMeta(sample_rate, 1, args.encoding,
                                               len(recon)),
                       out_dir / "out.wav")
    _write_trace(out_dir / "trace.csv", trace)
    _write_report(out_dir / "report.json", {
        "command": "reconstruct",
        "config": cfg,
        "input": {"path": str(args.input)},
        "results": results,
    })
    print(f"{solver_kind}: loss {results['initial_loss']:.6e} -> "
          f"{results['final_loss']:.6e} in {results['iterations']} iterations "
          f"-> {out_dir}")
    return EXIT_OK


def _compare_one(path: Path, loss_names, cfg, config):
    signal, _ = audio_io.read_wav(path)
    spec = stft(signal, config)
    mag, clean_phase = spec.magnitude, spec.phase
    kernel = get_kernel(config)
    rows = []
    for loss in loss_names:
        target = None if loss == "ec" else clean_phase
        opts = _solver_options(cfg)
        phase, trace = solvers.gd_reconstruct(mag, loss, target, opts, config)
        recon = solvers.reconstruct_signal(mag, phase, config, length=len(signal))
        snr, _ = metrics.aligned_snr(signal, recon, cfg["metrics"]["search_radius"])
        est_mag = stft(recon, config).magnitude
        rows.append([
            str(path), loss,
            trace.records[trace.best_iteration].loss,
            metrics.consistency_measure(mag * np.exp(1j * phase), kernel),
            snr,
            metrics.spectral_convergence(mag, est_mag),
        ])
    return rows


def cmd_compare(args) -> int:
    cfg = resolve_config(args.config, _config_overrides(args))
    config = _stft_config(cfg)
    loss_names = [LOSS_FLAGS[name.strip()] for name in args.losses.split(",")]
    corpus = sorted(Path(args.corpus).glob("*.wav"))
    out_path = Path(args.out) if args.out else Path(cfg["io"]["output_dir"]) / "results.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)

    header = ["file", "loss", "final_loss", "consistency_measure",
              "aligned_snr_db", "spectral_convergence_db"]
    threads = max(1, int(os.environ.get("SPECCONSIST_THREADS", "1")))
    if corpus:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_file = list(pool.map(
                lambda p: _compare_one(p, loss_names, cfg, config), corpus))
    else:
        per_file = []

    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rows in per_file:
            for row in rows:
                writer.writerow(row)

    if not corpus:
        print(f"warning: no WAV files in {args.corpus}; wrote header-only CSV",
              file=sys.stderr)
        return EXIT_WARNING
    print(f"wrote {sum(len(r) for r in per_file)} rows -> {out_path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    params: dict = {}
    if args.freq is not None:
        params["freq"] = args.freq
    if args.freqs is not None:
        params["freqs"] = [float(f) for f in args.freqs.split(",")]
    if args.amps is not None:
        params["amps"] = [float(a) for a in args.amps.split(",")]
    if args.phases is not None:
        params["phases"] = [float(p) for p in args.phases.split(",")]
    if args.f0 is not None:
        params["f0"] = args.f0
    if args.f1 is not None:
        params["f1"] = args.f1
    if args.amp is not None:
        params["amp"] = args.amp
    if args.position is not None:
        params["position"] = args.position
    if args.seed is not None:
        params["seed"] = args.seed
    signal = audio_io.synth(args.kind, params, args.sr, args.duration)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    audio_io.write_wav(signal, audio_io.WavMeta(args.sr, 1, args.encoding,
                                                len(signal)), out)
    print(f"wrote {len(signal)} samples at {args.sr} Hz -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags take precedence")
    sub.add_argument("--seed", type=int, help="master seed (also the solver seed)")
    sub.add_argument("--window-len", type=int, dest="window_len")
    sub.add_argument("--hop", type=int)
    sub.add_argument("--window", choices=("hann", "rectangular"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specconsist",
        description="Consistent-spectrogram experiments: analysis, phase "
                    "reconstruction, and loss comparison.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="consistency measure of a WAV file's STFT")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--out", help="report path (default <output_dir>/report.json)")
    p.add_argument("--downmix", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("reconstruct",
                        help="phase reconstruction from a WAV or magnitude matrix")
    _add_common(p)
    p.add_argument("input", help="WAV file or .npy magnitude matrix")
    p.add_argument("--solver", choices=("gla", "gd"))
    p.add_argument("--loss", choices=sorted(LOSS_FLAGS))
    p.add_argument("--iters", type=int)
    p.add_argument("--init", choices=sorted(INIT_FLAGS))
    p.add_argument("--init-phase", dest="init_phase", help=".npy phase for --init provided")
    p.add_argument("--target-phase", dest="target_phase",
                   help=".npy target phase for target-based losses")
    p.add_argument("--step", type=float, help="initial step size")
    p.add_argument("--final-step", dest="final_step", type=float)
    p.add_argument("--step-rule", dest="step_rule", choices=("fixed", "cosine_anneal"))
    p.add_argument("--reference", help="WAV reference for the evaluation report")
    p.add_argument("--radius", type=int, help="alignment search radius in samples")
    p.add_argument("--sr", type=int, default=16000,
                   help="sample rate for matrix inputs (default 16000)")
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="float32")
    p.add_argument("--out", help="output directory")
    p.add_argument("--downmix", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = subs.add_parser("compare", help="loss comparison table over a WAV corpus")
    _add_common(p)
    p.add_argument("corpus", help="directory of WAV files")
    p.add_argument("--losses", default="ec,cos,aw",
                   help="comma-separated loss names (CLI spellings)")
    p.add_argument("--iters", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--final-step", dest="final_step", type=float)
    p.add_argument("--step-rule", dest="step_rule", choices=("fixed", "cosine_anneal"))
    p.add_argument("--radius", type=int)
    p.add_argument("--out", help="results CSV path (default <output_dir>/results.csv)")
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("synth", help="write a deterministic test signal")
    p.add_argument("kind", choices=audio_io.SYNTH_KINDS)
    p.add_argument("--sr", type=int, default=16000)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--freq", type=float)
    p.add_argument("--freqs", help="comma-separated frequencies (multisine)")
    p.add_argument("--amps", help="comma-separated amplitudes (multisine)")
    p.add_argument("--phases", help="comma-separated phases (multisine)")
    p.add_argument("--f0", type=float)
    p.add_argument("--f1", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--position", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="float32")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except SpecConsistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
