"""Network building blocks: initializers, encodings, activations, the
truncated spectral convolution, and forward-pass invariants."""

import numpy as np
import pytest
from scipy.special import erf

import fnodisc.storage as storage
from fnodisc.fno import (
    FnoConfig,
    FnoParams,
    ModeOverflowError,
    activation_apply,
    activation_derivative_bound,
    append_encoding,
    forward,
    init_params,
    layer_growth_bounds,
    n_half_modes,
    spectral_conv,
)
from fnodisc.grf import GrfSpec, sample_grf, subsample
from fnodisc.spectral import GridField, SpectralField, idft_on_grid, norm


def small_config(**kw):
    base = dict(
        d=2, in_channels=1, out_channels=1, width=8, n_layers=3, modes=4,
        activation="gelu", encoding="none",
    )
    base.update(kw)
    return FnoConfig(**base)


def bandlimited_field(n, kmax, seed=0, channels=1):
    """Real field with spectrum supported on |k|_inf <= kmax."""
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((n, n, channels), dtype=complex)
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            if (k1, k2) <= (0, 0):
                continue
            z = rng.standard_normal(channels) + 1j * rng.standard_normal(channels)
            coeffs[k1 % n, k2 % n] = z
            coeffs[(-k1) % n, (-k2) % n] = np.conj(z)
    coeffs[0, 0] = rng.standard_normal(channels)
    return idft_on_grid(SpectralField(coeffs), n)


# ---------------------------------------------------------------------------
# init schemes


def test_all_ones_init():
    params = init_params(small_config(width=2), "all_ones")
    assert np.all(params.w == 1.0)
    assert np.all(params.b == 1.0)
    assert np.all(params.lift_w == 1.0)
    assert np.all(params.p_half == 1.0 + 0.0j)


def test_scaled_init_is_ten_times_default():
    cfg = small_config()
    base = init_params(cfg, "default", seed=7)
    scaled = init_params(cfg, "scaled", seed=7, scale=10.0)
    assert np.allclose(scaled.w, 10.0 * base.w)
    assert np.allclose(scaled.p_half, 10.0 * base.p_half)
    assert np.allclose(scaled.proj_b, 10.0 * base.proj_b)


def test_default_init_respects_support():
    cfg = small_config(width=8)
    params = init_params(cfg, "default", seed=3)
    w = cfg.width
    assert np.abs(params.w).max() <= 1.0 / np.sqrt(w)
    assert np.abs(params.p_half).max() <= np.sqrt(2.0) / w**2
    assert np.abs(params.b).max() <= 1.0 / np.sqrt(w)
    # zero mode stays real under symmetrization
    band = params.band()
    assert np.all(params.p_half[:, band.self_conj].imag == 0.0)


def test_default_init_norm_bounds_computable():
    # the boundedness audit: each measured norm below its closed-form cap
    cfg = small_config(width=8, modes=4, n_layers=3)
    params = init_params(cfg, "default", seed=11)
    w, k, d = cfg.width, cfg.modes, cfg.d
    cap_w = np.sqrt(w)
    cap_p = np.sqrt(2.0) * (2 * k + 1) ** (d / 2) / w
    report = params.norm_report()
    assert all(x <= cap_w for x in report["w_spectral"])
    assert all(x <= cap_p for x in report["p_frobenius"])
    assert all(x <= 1.0 for x in report["b_euclid"])
    assert all(np.isfinite(v).all() for v in map(np.atleast_1d, report.values()))


def test_init_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        init_params(small_config(), "xavier")


# ---------------------------------------------------------------------------
# encodings


def test_encoding_none_is_identity():
    f = GridField(np.ones((4, 4, 1)))
    assert append_encoding(f, "none") is f


def test_periodic_encoding_values():
    f = GridField(np.zeros((4, 4, 1)))
    enc = append_encoding(f, "periodic")
    assert enc.channels == 5
    # first appended channel: sin(2 pi x1) at x1 in {0, 1/4, 1/2, 3/4}
    assert np.allclose(enc.values[:, 0, 1], [0.0, 1.0, 0.0, -1.0], atol=1e-15)
    # cos channel
    assert np.allclose(enc.values[:, 0, 2], [1.0, 0.0, -1.0, 0.0], atol=1e-15)


def test_nonperiodic_encoding_values():
    f = GridField(np.zeros((4, 4, 1)))
    enc = append_encoding(f, "nonperiodic")
    assert enc.channels == 3
    assert np.allclose(enc.values[:, 0, 1], [0.0, 0.25, 0.5, 0.75])
    assert np.allclose(enc.values[0, :, 2], [0.0, 0.25, 0.5, 0.75])


def test_encoding_rejects_1d():
    f = GridField(np.zeros((8, 1)))
    with pytest.raises(ValueError):
        append_encoding(f, "periodic")


def test_forward_rejects_channel_mismatch():
    cfg = small_config(encoding="periodic", in_channels=1)
    params = init_params(cfg, "default", seed=0)
    bad = GridField(np.zeros((16, 16, 3)))  # 3 + 4 != 5
    with pytest.raises(ValueError):
        forward(params, bad)


# ---------------------------------------------------------------------------
# activations


def test_activation_values_at_zero_and_saturation():
    z = GridField(np.zeros((4, 4, 1)))
    assert np.all(activation_apply(z, "gelu").values == 0.0)
    assert np.all(activation_apply(z, "relu").values == 0.0)
    ten = GridField(np.full((2, 2, 1), 10.0))
    g10 = activation_apply(ten, "gelu").values[0, 0, 0]
    assert 9.999 <= g10 <= 10.0


def test_gelu_derivative_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.uniform(-4, 4, size=(10, 10, 1))
    f = GridField(x)
    h = 1e-6
    fd_deriv = (
        activation_apply(GridField(x + h), "gelu").values
        - activation_apply(GridField(x - h), "gelu").values
    ) / (2 * h)
    exact = activation_apply(f, "gelu", derivative=True).values
    assert np.abs(fd_deriv - exact).max() < 1e-7


def test_relu_derivative_convention():
    # subgradient 0 at the kink
    f = GridField(np.array([-1.0, 0.0, 2.0])[:, None])
    d = activation_apply(f, "relu", derivative=True)
    assert list(d.values[:, 0]) == [0.0, 0.0, 1.0]


def test_derivative_bound_constant():
    # max of GeLU' sits at sqrt(2): Phi(sqrt 2) + sqrt(2) phi(sqrt 2)
    b = activation_derivative_bound("gelu")
    expected = 0.5 * (1 + erf(1.0)) + np.sqrt(2) * np.exp(-1.0) / np.sqrt(2 * np.pi)
    assert abs(b - expected) < 1e-15
    assert 1.12 < b < 1.13
    assert activation_derivative_bound("relu") == 1.0


# ---------------------------------------------------------------------------
# spectral convolution


def test_spectral_conv_zero_weights():
    v = bandlimited_field(16, 3, seed=2, channels=2)
    p = np.zeros((n_half_modes(2, 4), 2, 2), dtype=complex)
    out = spectral_conv(v, p, 4)
    assert np.all(out.values == 0.0)


def test_spectral_conv_identity_on_band():
    k = 4
    v = bandlimited_field(16, k, seed=5, channels=2)
    n_half = n_half_modes(2, k)
    p = np.tile(np.eye(2, dtype=complex), (n_half, 1, 1))
    out = spectral_conv(v, p, k)
    assert np.abs(out.values - v.values).max() < 1e-12 * max(1, np.abs(v.values).max())


def test_spectral_conv_kills_out_of_band_mode():
    # a mode beyond the band (and below Nyquist, so no fold-in) maps to zero
    n, k = 32, 4
    coeffs = np.zeros((n, n, 1), dtype=complex)
    coeffs[9 % n, 2 % n, 0] = 1.0 - 0.7j
    coeffs[(-9) % n, (-2) % n, 0] = 1.0 + 0.7j
    v = idft_on_grid(SpectralField(coeffs), n)
    p = np.tile(np.eye(1, dtype=complex), (n_half_modes(2, k), 1, 1))
    out = spectral_conv(v, p, k)
    assert np.abs(out.values).max() < 1e-12


def test_spectral_conv_mode_overflow():
    v = GridField(np.zeros((8, 8, 1)))
    p = np.zeros((n_half_modes(2, 4), 1, 1), dtype=complex)
    with pytest.raises(ModeOverflowError):
        spectral_conv(v, p, 4)  # K = 4 needs N > 8


# ---------------------------------------------------------------------------
# forward pass


def test_forward_zero_params_constant_output():
    cfg = small_config()
    zeros = {
        name: np.zeros_like(arr)
        for name, arr in init_params(cfg, "default", seed=0).as_tensors().items()
    }
    zeros["proj_b"] = np.full_like(zeros["proj_b"], 0.3)
    params = FnoParams.from_tensors(cfg, zeros)
    rng = np.random.default_rng(0)
    out, _ = forward(params, GridField(rng.standard_normal((16, 16, 1))))
    assert np.abs(out.values - 0.3).max() < 1e-15


def test_identity_activation_bandlimited_grid_consistency():
    # with the identity hook and in-band input, every layer preserves the
    # band, so coarse and fine forward passes agree on shared grid points
    cfg = small_config(activation="identity", modes=4, n_layers=3)
    params = init_params(cfg, "default", seed=9)
    fine_in = bandlimited_field(64, cfg.modes, seed=3)
    coarse_in = GridField(fine_in.values[::2, ::2])
    out_fine, tr_fine = forward(params, fine_in, capture_trace=True)
    out_coarse, tr_coarse = forward(params, coarse_in, capture_trace=True)
    scale = max(1.0, np.abs(out_fine.values).max())
    assert np.abs(out_fine.values[::2, ::2] - out_coarse.values).max() < 1e-12 * scale
    for sf, sc in zip(tr_fine.states, tr_coarse.states):
        s = max(1.0, np.abs(sf.values).max())
        assert np.abs(sf.values[::2, ::2] - sc.values).max() < 1e-12 * s


def test_forward_1d_bandlimited_consistency():
    # the 1d path: identity hook + in-band input is grid-consistent
    cfg = FnoConfig(
        d=1, in_channels=1, out_channels=1, width=4, n_layers=2, modes=3,
        activation="identity", encoding="none",
    )
    params = init_params(cfg, "default", seed=4)
    n = 32
    coeffs = np.zeros((n, 1), dtype=complex)
    for k in (1, 2, 3):
        z = complex(0.3 * k, -0.1 * k)
        coeffs[k % n, 0] = z
        coeffs[(-k) % n, 0] = np.conj(z)
    fine = idft_on_grid(SpectralField(coeffs), n)
    coarse = GridField(fine.values[::2])
    out_fine, _ = forward(params, fine)
    out_coarse, _ = forward(params, coarse)
    assert np.abs(out_fine.values[::2] - out_coarse.values).max() < 1e-13


def test_forward_trace_shape_and_realness():
    cfg = small_config(encoding="periodic", n_layers=4, width=6)
    params = init_params(cfg, "default", seed=2)
    a = sample_grf(GrfSpec(s=1.5, d=2, n_ref=32, seed=4))
    out, trace = forward(params, a, capture_trace=True)
    assert len(trace) == cfg.n_layers + 1
    assert len(trace.pre_activations) == cfg.n_layers
    assert all(s.n_grid == 32 for s in trace.states)
    assert all(s.values.dtype == np.float64 for s in trace.states)
    assert out.channels == cfg.out_channels


def test_forward_mode_overflow():
    cfg = small_config(modes=12)
    params = init_params(cfg, "default", seed=0)
    with pytest.raises(ModeOverflowError):
        forward(params, GridField(np.zeros((16, 16, 1))))


@pytest.mark.parametrize("activation", ["gelu", "relu", "identity"])
def test_layer_growth_bounds_hold(activation):
    cfg = small_config(activation=activation, encoding="periodic", width=8, modes=6, n_layers=4)
    params = init_params(cfg, "default", seed=6)
    a = sample_grf(GrfSpec(s=2.0, d=2, n_ref=64, seed=8))
    _, trace = forward(params, a, capture_trace=True)
    for lhs, rhs in layer_growth_bounds(params, trace):
        assert np.isfinite(lhs) and np.isfinite(rhs)
        assert lhs <= rhs
    # H^s sums stay finite along the trace
    for state in trace.states:
        assert np.isfinite(norm(state, "hs", s=2.0))


def test_forward_error_shrinks_with_resolution():
    cfg = small_config(encoding="periodic", width=8, modes=4, n_layers=2)
    params = init_params(cfg, "default", seed=1)
    master = sample_grf(GrfSpec(s=2.0, d=2, n_ref=256, seed=5))
    out_ref, _ = forward(params, master)
    diffs = []
    for n in (16, 32, 64):
        out_n, _ = forward(params, subsample(master, n))
        step = 256 // n
        diffs.append(
            float(np.abs(out_n.values - out_ref.values[::step, ::step]).max())
        )
    assert diffs[0] > diffs[1] > diffs[2] > 0


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    cfg = small_config(encoding="periodic")
    params = init_params(cfg, "default", seed=42)
    manifest = storage.save_checkpoint(tmp_path, params)
    again = storage.load_checkpoint(manifest)
    assert again.config == cfg
    for name, arr in params.as_tensors().items():
        assert np.array_equal(again.as_tensors()[name], arr)
    # deterministic bytes
    blob1 = (tmp_path / "checkpoint.bin").read_bytes()
    storage.save_checkpoint(tmp_path, params)
    assert (tmp_path / "checkpoint.bin").read_bytes() == blob1


def test_field_bundle_roundtrip(tmp_path):
    f = sample_grf(GrfSpec(s=1.0, d=2, n_ref=32, seed=3))
    manifest = storage.save_fields(tmp_path, "fields", {"a": f})
    back = storage.load_fields(manifest)["a"]
    assert np.array_equal(back.values, f.values)


def test_bundle_rejects_wrong_format(tmp_path):
    f = sample_grf(GrfSpec(s=1.0, d=2, n_ref=32, seed=3))
    manifest = storage.save_fields(tmp_path, "fields", {"a": f})
    text = manifest.read_text().replace('"format_version": 1', '"format_version": 99')
    manifest.write_text(text)
    with pytest.raises(ValueError):
        storage.load_bundle(manifest)
