import numpy as np
import pytest

import specconsist as sc
from specconsist.consistency import (_apply, _apply_adjoint, compute_kernel,
                                     ec_loss_and_grad, get_kernel)
from specconsist.stft import project, stft

from conftest import random_spectrogram

# Frozen once from this implementation (sine 440 Hz / 0.8 amp at 8 kHz,
# config 256/64 hann, phase seed 12345); guards against regressions.
PINNED_SINE_RANDOM_PHASE_LOSS = 176564.9672678542


def kernel_for(n, r, kind="hann"):
    return get_kernel(sc.make_config(n, r, kind))


def alpha_direct_sum(config, q, p):
    """Independent direct-summation oracle for one coefficient."""
    n, r = config.window_len, config.hop
    w, s = config.analysis_window, config.synthesis_window
    total = 0.0 + 0.0j
    for k in range(n):
        ks = k + q * r
        if 0 <= ks < n:
            total += w[k] * s[ks] * np.exp(-2j * np.pi * p * ks / n)
    if p == 0 and q == 0:
        total -= 1.0
    return total


class TestComputeKernel:
    def test_vanishes_off_support(self, cfg_64_16):
        # the defining sum is zero for |q| >= Q: direct oracle
        for q in (4, 5, -4, -6):
            for p in (0, 1, 17, 63):
                assert alpha_direct_sum(cfg_64_16, q, p) == 0.0
        # stored table only carries |q| <= Q-1
        k = compute_kernel(cfg_64_16)
        assert k.alpha.shape == (7, 64)

    def test_alpha_00_direct_summation(self, cfg_512_128):
        k = compute_kernel(cfg_512_128)
        oracle = alpha_direct_sum(cfg_512_128, 0, 0)
        assert abs(k.alpha[3, 0] - oracle) < 1e-12
        # closed form: hop/window_len - 1
        assert abs(k.alpha[3, 0] - (128.0 / 512.0 - 1.0)) < 1e-12

    def test_alpha_matches_direct_sum_at_random_entries(self, cfg_64_16, rng):
        k = compute_kernel(cfg_64_16)
        for _ in range(20):
            q = int(rng.integers(-3, 4))
            p = int(rng.integers(0, 64))
            got = k.alpha[q + 3, p]
            assert abs(got - alpha_direct_sum(cfg_64_16, q, p)) < 1e-12

    def test_rectangular_single_frame_blocks(self, cfg_rect_4, rng):
        # Q=1: every spectrogram of independent frames is consistent
        k = compute_kernel(cfg_rect_4)
        for _ in range(100):
            h = random_spectrogram(rng, 5, 4)
            r = sc.residual(h, k)
            oracle = project(h, cfg_rect_4).data - h
            assert np.abs(r - oracle).max() <= 1e-12 * max(np.abs(h).max(), 1.0)
            assert np.abs(r).max() < 1e-12 * np.abs(h).max()

    def test_cache_returns_same_object(self, cfg_256_64):
        assert get_kernel(cfg_256_64) is get_kernel(cfg_256_64)


class TestResidual:
    def test_consistent_input_gives_zero(self, cfg_512_128, rng):
        k = get_kernel(cfg_512_128)
        x = rng.standard_normal(3000)
        h = stft(x, cfg_512_128)
        r = sc.residual(h, k)
        assert np.abs(r).max() < 1e-8 * np.abs(h.data).max()

    @pytest.mark.parametrize("shape", [(6, 512), (17, 512)])
    def test_projection_oracle_on_random_input(self, cfg_512_128, rng, shape):
        k = get_kernel(cfg_512_128)
        h = random_spectrogram(rng, *shape)
        r = sc.residual(h, k)
        oracle = project(h, cfg_512_128).data - h
        assert np.abs(r - oracle).max() < 1e-9 * np.abs(oracle).max()

    def test_global_phase_rotation_is_linear(self, cfg_64_16, rng):
        k = get_kernel(cfg_64_16)
        h = random_spectrogram(rng, 9, 64)
        theta = 1.234
        lhs = sc.residual(h * np.exp(1j * theta), k)
        rhs = np.exp(1j * theta) * sc.residual(h, k)
        assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()

    def test_linearity(self, cfg_64_16, rng):
        k = get_kernel(cfg_64_16)
        h1 = random_spectrogram(rng, 8, 64)
        h2 = random_spectrogram(rng, 8, 64)
        a, b = 0.7 - 0.2j, 1.5 + 0.4j
        lhs = sc.residual(a * h1 + b * h2, k)
        rhs = a * sc.residual(h1, k) + b * sc.residual(h2, k)
        assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()

    def test_fft_and_direct_paths_agree(self, cfg_64_16, cfg_rect_4, rng):
        # rectangular Q=1 residual is exactly zero, so scale by the input there
        for cfg in (cfg_64_16, cfg_rect_4):
            k = get_kernel(cfg)
            h = random_spectrogram(rng, 7, cfg.window_len)
            r_fft = sc.residual(h, k, method="fft")
            r_direct = sc.residual(h, k, method="direct")
            scale = max(np.abs(r_fft).max(), np.abs(h).max())
            assert np.abs(r_fft - r_direct).max() < 1e-12 * scale

    def test_config_mismatch_rejected(self, cfg_512_128, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        h = stft(rng.standard_normal(2000), cfg_512_128)
        with pytest.raises(sc.InputError):
            sc.residual(h, k)

    def test_boundary_frames_treated_as_zero(self, cfg_64_16, rng):
        # single-frame spectrogram: all cross-frame terms must vanish cleanly
        k = get_kernel(cfg_64_16)
        h = random_spectrogram(rng, 1, 64)
        r = sc.residual(h, k)
        oracle = project(h, cfg_64_16).data - h
        assert np.abs(r - oracle).max() < 1e-11 * np.abs(oracle).max()


class TestLossEc:
    def test_near_zero_for_true_stfts(self, cfg_512_128, rng):
        k = get_kernel(cfg_512_128)
        for _ in range(5):
            x = rng.standard_normal(2048)
            h = stft(x, cfg_512_128)
            norm_sq = np.vdot(h.data, h.data).real
            assert sc.loss_ec(h, k) < 1e-16 * norm_sq

    def test_positive_for_random_spectrograms(self, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        for _ in range(20):
            h = random_spectrogram(rng, 10, 256)
            assert sc.loss_ec(h, k) > 0.0

    def test_matches_projection_norm(self, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        h = random_spectrogram(rng, 12, 256)
        diff = project(h, cfg_256_64).data - h
        oracle = np.vdot(diff, diff).real
        assert abs(sc.loss_ec(h, k) - oracle) < 1e-9 * oracle

    @pytest.mark.parametrize("theta", [np.pi / 7, np.pi / 2, np.pi, 1.999 * np.pi])
    def test_global_phase_shift_invariance_ulps(self, cfg_64_16, rng, theta):
        k = get_kernel(cfg_64_16)
        h = random_spectrogram(rng, 9, 64)
        base = sc.loss_ec(h, k)
        shifted = sc.loss_ec(h * np.exp(1j * theta), k)
        assert abs(shifted - base) <= 4.0 * np.spacing(base)


class TestLossEcPhase:
    def test_clean_pair_is_consistent(self, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        h = stft(rng.standard_normal(1500), cfg_256_64)
        mag, phase = h.magnitude, h.phase
        norm_sq = np.vdot(h.data, h.data).real
        assert sc.loss_ec_phase(mag, phase, k) < 1e-16 * norm_sq

    def test_sign_indeterminacy_ulps(self, cfg_64_16, rng):
        k = get_kernel(cfg_64_16)
        mag = rng.uniform(0, 1, (9, 64))
        phase = rng.uniform(-np.pi, np.pi, (9, 64))
        a = sc.loss_ec_phase(mag, phase, k)
        b = sc.loss_ec_phase(mag, phase + np.pi, k)
        assert abs(a - b) <= 4.0 * np.spacing(a)

    def test_pinned_sine_random_phase_regression(self):
        cfg = sc.make_config(256, 64, "hann")
        sig = sc.synth("sine", {"freq": 440.0, "amp": 0.8}, 8000, 0.25)
        mag = stft(sig, cfg).magnitude
        rng = np.random.default_rng(12345)
        phase = np.pi - rng.uniform(0, 2 * np.pi, mag.shape)
        value = sc.loss_ec_phase(mag, phase, get_kernel(cfg))
        assert value > 0.0
        assert abs(value - PINNED_SINE_RANDOM_PHASE_LOSS) < 1e-9 * PINNED_SINE_RANDOM_PHASE_LOSS

    def test_shape_mismatch_rejected(self, cfg_64_16):
        k = get_kernel(cfg_64_16)
        with pytest.raises(sc.InputError):
            sc.loss_ec_phase(np.ones((3, 64)), np.ones((4, 64)), k)


class TestAdjointAndGradient:
    def test_adjoint_identity(self, cfg_64_16, cfg_256_64, rng):
        for cfg, m in ((cfg_64_16, 9), (cfg_256_64, 6)):
            k = get_kernel(cfg)
            h = random_spectrogram(rng, m, cfg.window_len)
            g = random_spectrogram(rng, m, cfg.window_len)
            lhs = np.vdot(_apply(h, k), g)
            rhs = np.vdot(h, _apply_adjoint(g, k))
            assert abs(lhs - rhs) < 1e-12 * abs(lhs)

    def test_gradient_zero_at_consistent_pair(self, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        h = stft(0.5 * rng.standard_normal(1200), cfg_256_64)
        grad = sc.grad_loss_ec_phase(h.magnitude, h.phase, k)
        assert np.abs(grad).max() < 1e-8

    def test_gradient_matches_finite_differences(self, cfg_64_16, rng):
        k = get_kernel(cfg_64_16)
        mag = rng.uniform(0, 1, (12, 64))
        phase = rng.uniform(-np.pi, np.pi, (12, 64))
        _, grad = ec_loss_and_grad(mag, phase, k)
        eps = 1e-6
        worst = 0.0
        for idx in [(0, 0), (5, 17), (11, 63), (3, 32), (8, 1)]:
            plus, minus = phase.copy(), phase.copy()
            plus[idx] += eps
            minus[idx] -= eps
            fd = (sc.loss_ec_phase(mag, plus, k)
                  - sc.loss_ec_phase(mag, minus, k)) / (2 * eps)
            worst = max(worst, abs(grad[idx] - fd) / max(abs(fd), 1e-12))
        assert worst < 1e-5

    def test_gradient_2pi_periodic(self, cfg_64_16, rng):
        k = get_kernel(cfg_64_16)
        mag = rng.uniform(0, 1, (6, 64))
        phase = rng.uniform(-np.pi, np.pi, (6, 64))
        g1 = sc.grad_loss_ec_phase(mag, phase, k)
        g2 = sc.grad_loss_ec_phase(mag, phase + 2 * np.pi, k)
        assert np.abs(g1 - g2).max() < 1e-10 * max(np.abs(g1).max(), 1.0)


class TestIffCharacterization:
    def test_real_signals_consistent_random_not(self, cfg_256_64, rng):
        k = get_kernel(cfg_256_64)
        for _ in range(50):
            x = rng.standard_normal(int(rng.integers(300, 3000)))
            h = stft(x, cfg_256_64)
            norm_sq = np.vdot(h.data, h.data).real
            assert sc.loss_ec(h, k) / norm_sq < 1e-14
        for _ in range(50):
            h = random_spectrogram(rng, int(rng.integers(4, 20)), 256)
            assert sc.loss_ec(h, k) > 0.0
