"""Grid-discretized Fourier neural operator.

A forward pass lifts the (optionally position-encoded) input pointwise,
applies T layers of

    v_{t+1} = sigma(W_t v_t + conv_t(v_t) + b_t),

and projects pointwise.  ``conv_t`` multiplies the centered DFT of the state
by a per-frequency complex matrix on the truncation band |k|_inf <= K and
transforms back; the band requires K < N/2 on an N-point grid.  Spectral
weights are stored on a canonical half of the band and mirrored with complex
conjugation on use, which makes every state exactly real by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as _fft
from scipy.special import erf

from .seeding import generator
from .spectral import GridField, _assert_real

__all__ = [
    "FnoConfig",
    "FnoParams",
    "LayerTrace",
    "ModeOverflowError",
    "ACTIVATIONS",
    "ENCODINGS",
    "activation_derivative_bound",
    "init_params",
    "append_encoding",
    "activation_apply",
    "spectral_conv",
    "forward",
    "layer_growth_bounds",
]

ACTIVATIONS = ("gelu", "relu", "identity")  # identity is a test hook only
ENCODINGS = ("none", "periodic", "nonperiodic")

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ModeOverflowError(ValueError):
    """Truncation band does not fit on the evaluation grid (needs K < N/2)."""


def _std_normal_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2))


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gelu":
        return z * _std_normal_cdf(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _act_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gelu":
        return _std_normal_cdf(z) + z * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    if kind == "relu":
        return (z > 0.0).astype(np.float64)  # subgradient 0 at the kink
    if kind == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative_bound(kind: str) -> float:
    """Supremum of |sigma'|; the Lipschitz constant used in layer audits."""
    if kind == "gelu":
        # maximum of Phi(x) + x*phi(x), attained at x = sqrt(2)
        return float(_std_normal_cdf(np.array(_SQRT2)) + _SQRT2 * _INV_SQRT_2PI * math.exp(-1.0))
    if kind in ("relu", "identity"):
        return 1.0
    raise ValueError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class FnoConfig:
    """Architecture hyperparameters, grid-independent.

    ``modes`` is the per-dimension frequency cutoff K: the convolution acts
    on |k|_inf <= K.  ``proj_activation`` optionally applies the smooth
    activation after the final affine map (off by default, keeping outputs
    unconstrained).
    """

    d: int
    in_channels: int
    out_channels: int
    width: int
    n_layers: int
    modes: int
    activation: str = "gelu"
    encoding: str = "none"
    proj_activation: bool = False

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        for name in ("in_channels", "out_channels", "width", "n_layers", "modes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"encoding must be one of {ENCODINGS}")
        if self.encoding in ("periodic", "nonperiodic") and self.d != 2:
            raise ValueError(f"encoding {self.encoding!r} is defined for d = 2 only")

    @property
    def encoded_channels(self) -> int:
        extra = {"none": 0, "periodic": 4, "nonperiodic": 2}[self.encoding]
        return self.in_channels + extra

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "width": self.width,
            "n_layers": self.n_layers,
            "modes": self.modes,
            "activation": self.activation,
            "encoding": self.encoding,
            "proj_activation": self.proj_activation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FnoConfig":
        return cls(**data)


class _BandIndex:
    """Index bookkeeping for the truncation band {-K..K}^d in bin layout.

    Band bins order frequencies [0..K, -K..-1] per axis, matching the slabs
    gathered from an FFT.  The canonical half consists of the zero mode plus
    all lexicographically positive modes; the other half is reconstructed by
    conjugate mirroring.
    """

    def __init__(self, d: int, k: int):
        self.d = d
        self.k = k
        self.size = 2 * k + 1
        freqs = np.concatenate([np.arange(0, k + 1), np.arange(-k, 0)])
        if d == 1:
            kvecs = freqs[:, None]
        else:
            kvecs = np.stack(
                [np.repeat(freqs, self.size), np.tile(freqs, self.size)], axis=1
            )
        n_band = self.size**d
        flat_of = {tuple(kvecs[i]): i for i in range(n_band)}
        half, mirror, is_zero = [], [], []
        for i in range(n_band):
            kv = kvecs[i]
            nz = kv[kv != 0]
            if nz.size == 0:
                half.append(i)
                mirror.append(i)
                is_zero.append(True)
            elif nz[0] > 0:
                half.append(i)
                mirror.append(flat_of[tuple(-kv)])
                is_zero.append(False)
        self.n_band = n_band
        self.half_flat = np.array(half)
        self.mirror_flat = np.array(mirror)
        self.self_conj = np.array(is_zero)
        self.n_half = len(half)
        self.half_modes = kvecs[self.half_flat]
        self._build_rfft_map()

    def _build_rfft_map(self):
        """Locate every canonical half mode on the real-FFT band slab.

        The slab keeps the last-axis frequencies 0..K only; half modes with a
        negative last component are read off the slab at their mirror with a
        conjugation.  ``pair_weight`` is 2 for properly paired modes (their
        mirror contributes an identical conjugate term to gradients) and 1
        for the self-conjugate zero mode.
        """
        k, size = self.k, self.size

        def row(k1: int) -> int:
            return k1 if k1 >= 0 else size + k1

        pos, conj = [], []
        for kv in self.half_modes:
            if self.d == 1:
                pos.append(int(kv[0]))
                conj.append(False)
            else:
                k1, k2 = int(kv[0]), int(kv[1])
                if k2 >= 0:
                    pos.append(row(k1) * (k + 1) + k2)
                    conj.append(False)
                else:
                    pos.append(row(-k1) * (k + 1) - k2)
                    conj.append(True)
        self.rfft_pos = np.array(pos)
        self.rfft_conj = np.array(conj)
        self.pair_weight = np.where(self.self_conj, 1.0, 2.0)

    def slab_of(self, full_p: np.ndarray) -> np.ndarray:
        """Restrict a full band tensor to the rfft slab (last-axis k >= 0)."""
        if self.d == 1:
            return full_p[: self.k + 1]
        return full_p[:, : self.k + 1]

    def half_grad_from_slab(self, slab_outer: np.ndarray) -> np.ndarray:
        """Half-storage gradient from per-slab-mode outer products.

        ``slab_outer`` has shape (slab modes..., o, i) flattened to
        (n_slab, o, i); entries are d(loss)/d(full band multiplier) at slab
        frequencies.  Mirror pairing doubles paired modes.
        """
        g = slab_outer[self.rfft_pos].copy()
        g[self.rfft_conj] = np.conj(g[self.rfft_conj])
        g *= self.pair_weight[:, None, None]
        g[self.self_conj] = g[self.self_conj].real
        return g

    def mirror_full(self, p_half: np.ndarray) -> np.ndarray:
        """Half storage (n_half, o, i) -> full band tensor (2K+1,)^d + (o, i).

        Self-conjugate modes are projected onto their real part; their
        imaginary components are not free parameters.
        """
        o, i = p_half.shape[-2:]
        full = np.zeros((self.n_band, o, i), dtype=np.complex128)
        full[self.half_flat] = p_half
        full[self.half_flat[self.self_conj]] = p_half[self.self_conj].real
        pair = ~self.self_conj
        full[self.mirror_flat[pair]] = np.conj(p_half[pair])
        return full.reshape((self.size,) * self.d + (o, i))

    def gather_half_grad(self, g_full_flat: np.ndarray) -> np.ndarray:
        """Fold a full-band gradient back onto the half storage."""
        g = g_full_flat[self.half_flat].copy()
        pair = ~self.self_conj
        g[pair] += np.conj(g_full_flat[self.mirror_flat[pair]])
        g[self.self_conj] = g[self.self_conj].real
        return g

    def band_bins(self, n_grid: int) -> np.ndarray:
        """FFT bin indices of the band frequencies on an N-point grid."""
        return np.concatenate([np.arange(0, self.k + 1), np.arange(n_grid - self.k, n_grid)])


@lru_cache(maxsize=None)
def _band_index(d: int, k: int) -> _BandIndex:
    return _BandIndex(d, k)


def n_half_modes(d: int, k: int) -> int:
    return _band_index(d, k).n_half


@dataclass(frozen=True)
class FnoParams:
    """All trainable tensors of one model.

    Spectral weights ``p_half[t]`` have shape (n_half, width, width); entry
    (m, o, i) maps input channel i to output channel o at the m-th canonical
    half mode.  Mirrored modes are implied by conjugation and the zero mode
    is real, so states stay real.
    """

    config: FnoConfig
    lift_w: np.ndarray
    lift_b: np.ndarray
    w: np.ndarray  # (T, width, width)
    b: np.ndarray  # (T, width)
    p_half: np.ndarray  # (T, n_half, width, width) complex
    proj_w: np.ndarray
    proj_b: np.ndarray

    def band(self) -> _BandIndex:
        return _band_index(self.config.d, self.config.modes)

    def spectral_full(self, t: int) -> np.ndarray:
        return self.band().mirror_full(self.p_half[t])

    def p_frobenius(self, t: int) -> float:
        """Frobenius norm over the full band (mirrored modes counted)."""
        sq = np.sum(np.abs(self.p_half[t]) ** 2, axis=(-2, -1))
        pair = ~self.band().self_conj
        return float(np.sqrt(np.sum(sq) + np.sum(sq[pair])))

    def w_spectral(self, t: int) -> float:
        return float(np.linalg.norm(self.w[t], 2))

    def b_euclid(self, t: int) -> float:
        return float(np.linalg.norm(self.b[t]))

    def lift_nn_norm(self) -> float:
        return float(np.sqrt(np.sum(self.lift_w**2) + np.sum(self.lift_b**2)))

    def proj_nn_norm(self) -> float:
        return float(np.sqrt(np.sum(self.proj_w**2) + np.sum(self.proj_b**2)))

    def norm_report(self) -> dict:
        """Per-layer parameter norms for boundedness audits."""
        t_layers = self.config.n_layers
        return {
            "p_frobenius": [self.p_frobenius(t) for t in range(t_layers)],
            "w_spectral": [self.w_spectral(t) for t in range(t_layers)],
            "b_euclid": [self.b_euclid(t) for t in range(t_layers)],
            "lift_nn": self.lift_nn_norm(),
            "proj_nn": self.proj_nn_norm(),
        }

    def scaled(self, c: float) -> "FnoParams":
        return replace(
            self,
            lift_w=self.lift_w * c,
            lift_b=self.lift_b * c,
            w=self.w * c,
            b=self.b * c,
            p_half=self.p_half * c,
            proj_w=self.proj_w * c,
            proj_b=self.proj_b * c,
        )

    TENSOR_NAMES = ("lift_w", "lift_b", "w", "b", "p_half", "proj_w", "proj_b")

    def as_tensors(self) -> dict[str, np.ndarray]:
        """Named tensors in a fixed order (checkpoint and optimizer layout)."""
        return {name: getattr(self, name) for name in self.TENSOR_NAMES}

    @classmethod
    def from_tensors(cls, config: FnoConfig, tensors: dict[str, np.ndarray]) -> "FnoParams":
        return cls(config=config, **{name: tensors[name] for name in cls.TENSOR_NAMES})


@dataclass
class LayerTrace:
    """States v_0 .. v_T of one forward pass, all at the same resolution."""

    states: list[GridField]
    pre_activations: list[GridField] | None = None

    @property
    def n_grid(self) -> int:
        return self.states[0].n_grid

    def __len__(self) -> int:
        return len(self.states)


def init_params(
    config: FnoConfig, scheme: str = "default", seed: int = 0, scale: float = 10.0
) -> FnoParams:
    """Draw parameters.

    default: affine and bias entries iid U(-1/sqrt(fan_in), 1/sqrt(fan_in));
    spectral real and imaginary parts iid U(0, 1/width^2), then the zero mode
    is made real (Hermitian symmetrization of the half storage).
    scaled: a default draw with every parameter multiplied by ``scale``.
    all_ones: every real parameter 1, every spectral entry 1 + 0i.
    """
    if scheme not in ("default", "scaled", "all_ones"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    w_dim = config.width
    d_in = config.encoded_channels
    d_out = config.out_channels
    t_layers = config.n_layers
    n_half = n_half_modes(config.d, config.modes)
    band = _band_index(config.d, config.modes)

    if scheme == "all_ones":
        params = FnoParams(
            config=config,
            lift_w=np.ones((w_dim, d_in)),
            lift_b=np.ones(w_dim),
            w=np.ones((t_layers, w_dim, w_dim)),
            b=np.ones((t_layers, w_dim)),
            p_half=np.ones((t_layers, n_half, w_dim, w_dim), dtype=np.complex128),
            proj_w=np.ones((d_out, w_dim)),
            proj_b=np.ones(d_out),
        )
        return params

    rng = generator(seed)

    def affine(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray]:
        bound = 1.0 / math.sqrt(n_in)
        return (
            rng.uniform(-bound, bound, size=(n_out, n_in)),
            rng.uniform(-bound, bound, size=n_out),
        )

    lift_w, lift_b = affine(w_dim, d_in)
    w = np.empty((t_layers, w_dim, w_dim))
    b = np.empty((t_layers, w_dim))
    p_half = np.empty((t_layers, n_half, w_dim, w_dim), dtype=np.complex128)
    hi = 1.0 / w_dim**2
    for t in range(t_layers):
        w[t], b[t] = affine(w_dim, w_dim)
        re = rng.uniform(0.0, hi, size=(n_half, w_dim, w_dim))
        im = rng.uniform(0.0, hi, size=(n_half, w_dim, w_dim))
        im[band.self_conj] = 0.0
        p_half[t] = re + 1j * im
    proj_w, proj_b = affine(d_out, w_dim)

    params = FnoParams(
        config=config,
        lift_w=lift_w,
        lift_b=lift_b,
        w=w,
        b=b,
        p_half=p_half,
        proj_w=proj_w,
        proj_b=proj_b,
    )
    return params.scaled(scale) if scheme == "scaled" else params


def _encoding_channels(kind: str, n: int) -> np.ndarray:
    """Positional channels on the N x N grid, shape (N, N, 4 or 2)."""
    x = np.arange(n) / n
    x1 = np.broadcast_to(x[:, None], (n, n))
    x2 = np.broadcast_to(x[None, :], (n, n))
    if kind == "periodic":
        return np.stack(
            [
                np.sin(2 * np.pi * x1),
                np.cos(2 * np.pi * x1),
                np.sin(2 * np.pi * x2),
                np.cos(2 * np.pi * x2),
            ],
            axis=-1,
        )
    return np.stack([x1, x2], axis=-1)


def append_encoding(f: GridField, kind: str) -> GridField:
    """Append positional channels: (sin, cos) pairs or raw coordinates."""
    if kind == "none":
        return f
    if kind not in ENCODINGS:
        raise ValueError(f"encoding must be one of {ENCODINGS}")
    if f.d != 2:
        raise ValueError(f"encoding {kind!r} is defined for d = 2 only")
    extra = _encoding_channels(kind, f.n_grid)
    return GridField(np.concatenate([f.values, extra], axis=-1))


def activation_apply(f: GridField, kind: str, derivative: bool = False) -> GridField:
    """Pointwise activation (or its derivative) on every channel."""
    fn = _act_deriv if derivative else _act
    return GridField(fn(f.values, kind))


def _check_band_fits(k: int, n: int) -> None:
    if 2 * k >= n:
        raise ModeOverflowError(
            f"mode overflow: truncation K={k} requires grid N > 2K, got N={n}"
        )


def band_bins(n: int, k: int) -> np.ndarray:
    """FFT bin indices carrying frequencies [0..K, -K..-1] on an N-point grid."""
    return np.concatenate([np.arange(0, k + 1), np.arange(n - k, n)])


def gather_band(f_hat: np.ndarray, bins: np.ndarray, d: int) -> np.ndarray:
    """Extract the truncation-band slab of a channels-last spectrum."""
    if d == 1:
        return f_hat[..., bins, :]
    return f_hat[..., bins[:, None], bins[None, :], :]


def scatter_band(
    shape: tuple, bins: np.ndarray, band_vals: np.ndarray, d: int
) -> np.ndarray:
    """Zero array of ``shape`` with the band slab written back in."""
    out = np.zeros(shape, dtype=np.complex128)
    if d == 1:
        out[..., bins, :] = band_vals
    else:
        out[..., bins[:, None], bins[None, :], :] = band_vals
    return out


def _conv_raw(
    values: np.ndarray, full_p: np.ndarray, k: int, d: int
) -> np.ndarray:
    """Spectral convolution on raw arrays with leading batch dimensions.

    values: (..., N^d spatial, w_in) real.  full_p: (2K+1,)^d + (w_out, w_in).
    """
    n = values.shape[-2]
    axes = tuple(range(values.ndim - 1 - d, values.ndim - 1))
    f_hat = _fft.fftn(values, axes=axes)
    bins = band_bins(n, k)
    band = gather_band(f_hat, bins, d)
    spec = "xoi,...xi->...xo" if d == 1 else "xyoi,...xyi->...xyo"
    band_out = np.einsum(spec, full_p, band)
    out_ft = scatter_band(values.shape[:-1] + (full_p.shape[-2],), bins, band_out, d)
    out = _fft.ifftn(out_ft, axes=axes)
    return _assert_real(out)


def _gather_rfft_slab(x_hat: np.ndarray, n: int, k: int, d: int) -> np.ndarray:
    """Band slab of an rfft spectrum: last axis 0..K, other axes mirrored."""
    if d == 1:
        return x_hat[..., : k + 1, :]
    bins = band_bins(n, k)
    return x_hat[..., bins[:, None], np.arange(k + 1)[None, :], :]


def _conv_rfft(values: np.ndarray, full_p: np.ndarray, k: int, d: int) -> np.ndarray:
    """The same convolution as :func:`_conv_raw` through the real FFT.

    Hermitian mirroring of the multiplier makes the result identical (to
    round-off) while computing only the half spectrum; the output is real by
    construction.  Used on training hot paths.
    """
    n = values.shape[-2]
    axes = tuple(range(values.ndim - 1 - d, values.ndim - 1))
    x_hat = _fft.rfftn(values, axes=axes)
    slab = _gather_rfft_slab(x_hat, n, k, d)
    slab_p = full_p[: k + 1] if d == 1 else full_p[:, : k + 1]
    spec = "xoi,...xi->...xo" if d == 1 else "xyoi,...xyi->...xyo"
    band_out = np.einsum(spec, slab_p, slab)
    out_ft = np.zeros(x_hat.shape[:-1] + (full_p.shape[-2],), dtype=np.complex128)
    if d == 1:
        out_ft[..., : k + 1, :] = band_out
    else:
        bins = band_bins(n, k)
        out_ft[..., bins[:, None], np.arange(k + 1)[None, :], :] = band_out
    return _fft.irfftn(out_ft, s=(n,) * d, axes=axes)


def spectral_conv(v: GridField, p_half: np.ndarray, k: int) -> GridField:
    """Fourier-multiplier convolution truncated to |k|_inf <= K.

    ``p_half`` is the canonical half-spectrum tensor (n_half, w_out, w_in);
    the conjugate half is implied.  Rejects K >= N/2 (mode overflow).
    """
    _check_band_fits(k, v.n_grid)
    band = _band_index(v.d, k)
    if p_half.shape[0] != band.n_half:
        raise ValueError(
            f"spectral tensor has {p_half.shape[0]} half modes, band needs {band.n_half}"
        )
    full = band.mirror_full(np.asarray(p_half, dtype=np.complex128))
    return GridField(_conv_raw(v.values, full, k, v.d))


def forward_values(
    params: FnoParams, values: np.ndarray, capture: bool = False
) -> tuple[np.ndarray, list[np.ndarray] | None, list[np.ndarray] | None]:
    """Batched forward pass on raw arrays (..., N^d spatial, channels).

    ``values`` must already carry the encoding channels.  Returns the output
    array and, when capturing, the state and pre-activation arrays v_0..v_T
    and z_1..z_T.
    """
    cfg = params.config
    n = values.shape[-2]
    _check_band_fits(cfg.modes, n)
    if values.shape[-1] != cfg.encoded_channels:
        raise ValueError(
            f"input has {values.shape[-1]} channels, lift expects {cfg.encoded_channels}"
        )
    band = params.band()
    # the identity test hook bypasses every activation, the lift's included,
    # so bandlimited inputs stay bandlimited through the whole network
    lift_act = "identity" if cfg.activation == "identity" else "gelu"
    v = _act(values @ params.lift_w.T + params.lift_b, lift_act)
    states = [v] if capture else None
    preacts = [] if capture else None
    for t in range(cfg.n_layers):
        full = band.mirror_full(params.p_half[t])
        z = v @ params.w[t].T + _conv_raw(v, full, cfg.modes, cfg.d) + params.b[t]
        v = _act(z, cfg.activation)
        if capture:
            states.append(v)
            preacts.append(z)
    out = v @ params.proj_w.T + params.proj_b
    if cfg.proj_activation:
        out = _act(out, "gelu")
    return out, states, preacts


def forward(
    params: FnoParams, a: GridField, capture_trace: bool = False
) -> tuple[GridField, LayerTrace | None]:
    """Full model evaluation on one input field at its native resolution."""
    encoded = append_encoding(a, params.config.encoding)
    out, states, preacts = forward_values(params, encoded.values, capture=capture_trace)
    trace = None
    if capture_trace:
        trace = LayerTrace(
            states=[GridField(s) for s in states],
            pre_activations=[GridField(z) for z in preacts],
        )
    return GridField(out), trace


def layer_growth_bounds(params: FnoParams, trace: LayerTrace) -> list[tuple[float, float]]:
    """Per-layer sup-norm growth audit.

    For each layer the left side is ||v_{t+1}||_inf and the right side the
    Lipschitz bound sigma* + B * M_t * (1 + ||v_t||_inf + K^{d/2} ||v_t||_L2)
    with B the activation derivative bound and M_t the largest measured
    parameter norm of the layer.  The bound holding along a trace certifies
    that regularity-controlling quantities stay finite layer to layer.
    """
    from .spectral import norm as _norm

    cfg = params.config
    big_b = activation_derivative_bound(cfg.activation)
    sigma_star = max(float(_act(np.zeros(1), cfg.activation)[0]), 1.0)
    kfac = float(cfg.modes ** (cfg.d / 2))
    out = []
    for t in range(cfg.n_layers):
        v_t = trace.states[t]
        v_next = trace.states[t + 1]
        m_t = max(params.w_spectral(t), params.p_frobenius(t), params.b_euclid(t))
        lhs = _norm(v_next, "linf")
        rhs = sigma_star + big_b * m_t * (
            1.0 + _norm(v_t, "linf") + kfac * _norm(v_t, "l2")
        )
        out.append((lhs, rhs))
    return out
