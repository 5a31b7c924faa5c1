"""Phase reconstruction from a known magnitude.

Two solvers: the classic alternating-projection iteration, and plain
first-order gradient descent on any of the phase losses (including the
consistency loss, which never sees a target phase). Runs are deterministic
given options and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import phase_losses
from .consistency import ec_loss_and_grad, get_kernel, loss_ec
from .errors import DivergenceError, InputError
from .stft import Signal, Spectrogram, StftConfig, istft, stft

LOSSES = ("ec", "cos", "aw", "comp_l1", "comp_l2", "time_l1", "time_l2",
          "cos_derv", "aw_derv")
INITS = ("zeros", "random_uniform", "noisy_phase", "provided")
STEP_RULES = ("fixed", "cosine_anneal")
PARAMETERIZATIONS = ("direct_phase", "c1_c2")


@dataclass
class SolverOptions:
    max_iters: int = 100
    step_rule: str = "cosine_anneal"
    initial_step: float = 1e-3
    final_step: float = 1e-5
    init: str = "random_uniform"
    seed: int = 0
    parameterization: str = "direct_phase"
    tolerance: float = 0.0
    init_phase: np.ndarray | None = None

    def validate(self):
        if self.max_iters < 1:
            raise InputError("max_iters must be at least 1")
        if self.initial_step <= 0 or self.final_step <= 0:
            raise InputError("step sizes must be positive")
        if self.tolerance < 0:
            raise InputError("tolerance must be nonnegative")
        if self.step_rule not in STEP_RULES:
            raise InputError(f"unknown step rule {self.step_rule!r}")
        if self.init not in INITS:
            raise InputError(f"unknown init {self.init!r}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise InputError(f"unknown parameterization {self.parameterization!r}")


@dataclass
class TraceRecord:
    iteration: int
    loss: float
    consistency_measure: float
    step_size: float


@dataclass
class SolveTrace:
    """Per-iteration loss/consistency records plus the returned phase.

    The returned phase is the lowest-loss iterate observed; the records keep
    the actual path (transient increases under a fixed step are legal and
    recorded, never an error).
    """

    records: list[TraceRecord] = field(default_factory=list)
    final_phase: np.ndarray | None = None
    best_iteration: int = 0

    @property
    def losses(self) -> np.ndarray:
        return np.array([rec.loss for rec in self.records])

    @property
    def consistency_measures(self) -> np.ndarray:
        return np.array([rec.consistency_measure for rec in self.records])


def _initial_phase(shape, opts: SolverOptions) -> np.ndarray:
    if opts.init == "zeros":
        return np.zeros(shape)
    if opts.init == "random_uniform":
        rng = np.random.default_rng(opts.seed)
        # pi - U[0, 2*pi) lands in the principal interval (-pi, pi].
        return np.pi - rng.uniform(0.0, 2.0 * np.pi, size=shape)
    if opts.init_phase is None:
        raise InputError(f"init {opts.init!r} requires init_phase")
    phase = np.asarray(opts.init_phase, dtype=np.float64)
    if phase.shape != shape:
        raise InputError("init_phase shape does not match the magnitude")
    return phase.copy()


def _step_size(k: int, opts: SolverOptions) -> float:
    if opts.step_rule == "fixed":
        return opts.initial_step
    span = max(opts.max_iters - 1, 1)
    frac = 0.5 * (1.0 + np.cos(np.pi * k / span))
    return opts.final_step + (opts.initial_step - opts.final_step) * frac


def _check_magnitude(mag, config: StftConfig) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != config.window_len:
        raise InputError("magnitude shape inconsistent with config")
    if np.any(mag < 0):
        raise InputError("magnitude entries must be nonnegative")
    return mag


def _normalized_inconsistency(h: np.ndarray, kernel, norm_sq: float) -> float:
    if norm_sq == 0.0:
        return 0.0
    return float(np.sqrt(loss_ec(h, kernel) / norm_sq))


def griffin_lim(mag, opts: SolverOptions, config: StftConfig
                ) -> tuple[np.ndarray, SolveTrace]:
    """Alternating projection between the magnitude set and true STFTs.

    Each iteration resynthesizes a time signal, re-analyzes it, and keeps only
    its phase. The signal length is chosen so that every sample is covered by
    the full window overlap, which makes the signal update an exact
    least-squares step; the inconsistency ``||A e^{jP} - STFT(iSTFT(A e^{jP}))||^2``
    is then non-increasing at every iteration.
    """
    opts.validate()
    mag = _check_magnitude(mag, config)
    m = mag.shape[0]
    n, r = config.window_len, config.hop
    if m < config.overlap_factor:
        raise InputError(
            f"need at least Q={config.overlap_factor} frames, got {m}")
    sig_len = m * r - n + r
    kernel = get_kernel(config)
    norm_sq = float(np.sum(mag ** 2))
    phase = _initial_phase(mag.shape, opts)

    trace = SolveTrace()
    prev = None
    for k in range(opts.max_iters):
        h = mag * np.exp(1j * phase)
        x = istft(Spectrogram(h, config), length=sig_len)
        z = stft(x, config).data
        inconsistency = float(np.vdot(h - z, h - z).real)
        trace.records.append(TraceRecord(
            k, inconsistency, _normalized_inconsistency(h, kernel, norm_sq), 0.0))
        # Keep the previous phase wherever the projection is exactly zero.
        nz = np.abs(z) > 0.0
        phase = np.where(nz, np.angle(z), phase)
        if prev is not None and opts.tolerance > 0 and (prev - inconsistency) < opts.tolerance:
            break
        prev = inconsistency

    trace.final_phase = phase
    trace.best_iteration = len(trace.records) - 1
    return phase, trace


def gd_reconstruct(mag, loss: str, target_phase, opts: SolverOptions,
                   config: StftConfig) -> tuple[np.ndarray, SolveTrace]:
    """Gradient descent on the chosen loss over the selected parameterization.

    The consistency loss ``ec`` forbids a target phase (it measures only
    magnitude-phase consistency); every other loss requires one. Returns the
    lowest-loss iterate. A non-finite loss raises DivergenceError carrying the
    partial trace.
    """
    opts.validate()
    if loss not in LOSSES:
        raise InputError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    mag = _check_magnitude(mag, config)
    if loss == "ec":
        if target_phase is not None:
            raise InputError("the consistency loss never consumes a target phase")
    else:
        if target_phase is None:
            raise InputError(f"loss {loss!r} requires a target phase")
        target_phase = np.asarray(target_phase, dtype=np.float64)
        if target_phase.shape != mag.shape:
            raise InputError("target phase shape does not match the magnitude")

    kernel = get_kernel(config)
    norm_sq = float(np.sum(mag ** 2))
    phase = _initial_phase(mag.shape, opts)
    use_c1c2 = opts.parameterization == "c1_c2"
    if use_c1c2:
        c1, c2 = np.sin(phase), np.cos(phase)

    trace = SolveTrace()
    best_loss = np.inf
    best_phase = phase.copy()
    prev = None
    for k in range(opts.max_iters):
        if use_c1c2:
            phase = np.arctan2(c1, c2)
        value, grad = _loss_and_grad(loss, mag, phase, target_phase, config, kernel)
        if loss == "ec":
            measure = 0.0 if norm_sq == 0.0 else float(np.sqrt(value / norm_sq))
        else:
            measure = _normalized_inconsistency(mag * np.exp(1j * phase),
                                                kernel, norm_sq)
        step = _step_size(k, opts)
        trace.records.append(TraceRecord(k, value, measure, step))
        if not np.isfinite(value):
            trace.final_phase = best_phase
            raise DivergenceError(
                f"loss {loss!r} became non-finite at iteration {k}", trace=trace)
        if value < best_loss:
            best_loss = value
            best_phase = phase.copy()
            trace.best_iteration = k
        if use_c1c2:
            r_sq = np.maximum(c1 ** 2 + c2 ** 2, 1e-300)
            g1 = grad * c2 / r_sq
            g2 = -grad * c1 / r_sq
            c1 = c1 - step * g1
            c2 = c2 - step * g2
        else:
            phase = phase - step * grad
        if prev is not None and opts.tolerance > 0 and (prev - value) < opts.tolerance:
            break
        prev = value

    trace.final_phase = best_phase
    return best_phase, trace


def _loss_and_grad(name, mag, phase, target, config, kernel):
    if name == "ec":
        return ec_loss_and_grad(mag, phase, kernel)
    if name == "cos":
        return phase_losses.cos_value_and_grad(target, phase)
    if name == "aw":
        return phase_losses.aw_value_and_grad(target, phase)
    if name in ("comp_l1", "comp_l2"):
        norm = "L1" if name.endswith("l1") else "L2"
        return phase_losses.complex_value_and_grad(target, phase, mag, norm)
    if name in ("time_l1", "time_l2"):
        norm = "L1" if name.endswith("l1") else "L2"
        return phase_losses.time_value_and_grad(target, phase, mag, config, norm)
    base = name.split("_")[0]
    return phase_losses.derivative_value_and_grad(target, phase, base)


def reconstruct_signal(mag, phase, config: StftConfig, length: int | None = None,
                       sample_rate: int = 1) -> Signal:
    """Inverse STFT of ``mag * exp(1j * phase)``."""
    mag = _check_magnitude(mag, config)
    phase = np.asarray(phase, dtype=np.float64)
    if phase.shape != mag.shape:
        raise InputError("magnitude and phase shapes differ")
    h = Spectrogram(mag * np.exp(1j * phase), config)
    return istft(h, length=length, sample_rate=sample_rate)
