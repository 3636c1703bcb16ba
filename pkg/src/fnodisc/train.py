"""Supervised training of the discretized operator network.

Gradients are hand-derived adjoints of the exact discrete computation
(pointwise activation derivatives, transposed contractions for the affine
maps, and the conjugate-transposed multiplier with Hermitian-pair folding
for the spectral convolution), so they match finite differences to
truncation order.  Data lives at a master resolution and is restricted to
the training grid by pointwise subsampling; the adaptive scheduler doubles
the grid along a ladder once the validation error stops improving for a
patience window.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.fft as _fft

from .fno import (
    _INV_SQRT_2PI,
    FnoConfig,
    FnoParams,
    ModeOverflowError,
    _act,
    _conv_rfft,
    _encoding_channels,
    _gather_rfft_slab,
    _std_normal_cdf,
    band_bins,
)
from .grf import GrfSpec, sample_grf
from .seeding import derive_seed, generator
from .spectral import GridField, GridNestingError, _assert_real

__all__ = [
    "Dataset",
    "TrainConfig",
    "SchedulerConfig",
    "SchedulerState",
    "History",
    "make_dataset",
    "loss_eval",
    "forward_backward",
    "train_loop",
    "scheduler_step",
    "evaluate_relative_error",
]

DATASET_KINDS = ("gradient_map", "inverse_helmholtz")
LOSS_KINDS = ("relative_l2", "mse")


@dataclass(frozen=True)
class Dataset:
    """Paired input/target fields at a master resolution, with fixed splits.

    Restricting inputs and targets with the same stride keeps the pairing
    intact at every training grid.  Splits partition the sample axis as
    train | validation | test.
    """

    inputs: np.ndarray  # (n, N_ref, N_ref, 1)
    targets: np.ndarray  # (n, N_ref, N_ref, c_out)
    split: tuple[int, int, int]
    kind: str
    s: float
    n_ref: int
    seed: int

    def __post_init__(self):
        n = self.inputs.shape[0]
        if self.targets.shape[0] != n:
            raise ValueError("inputs and targets must pair one-to-one")
        if sum(self.split) != n or any(k < 0 for k in self.split):
            raise ValueError(f"split {self.split} must partition {n} samples")

    @property
    def n_train(self) -> int:
        return self.split[0]

    @property
    def n_val(self) -> int:
        return self.split[1]

    @property
    def n_test(self) -> int:
        return self.split[2]

    def _range(self, which: str) -> slice:
        tr, va, _ = self.split
        return {
            "train": slice(0, tr),
            "val": slice(tr, tr + va),
            "test": slice(tr + va, None),
        }[which]

    def part(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        sl = self._range(which)
        return self.inputs[sl], self.targets[sl]


def restrict_batch(arr: np.ndarray, n_coarse: int) -> np.ndarray:
    """Pointwise restriction of (B, N, N, c) master data to a nested grid."""
    n = arr.shape[1]
    if n % n_coarse != 0:
        raise GridNestingError(f"grid {n_coarse} does not divide master grid {n}")
    step = n // n_coarse
    return arr[:, ::step, ::step]


def _derivative_multipliers(n: int) -> tuple[np.ndarray, np.ndarray]:
    """2*pi*i*k multipliers along each axis, unpaired edge frequency zeroed."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0  # real representative of the -N/2 mode has no odd derivative
    m = 2j * np.pi * k
    return m[:, None], m[None, :]


def apply_operator(kind: str, fields: np.ndarray) -> np.ndarray:
    """Apply the target map to a batch of scalar fields (B, N, N).

    gradient_map returns the two spectral partial derivatives (B, N, N, 2);
    inverse_helmholtz solves (I - Laplacian) w = u exactly in Fourier space,
    returning (B, N, N, 1).
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"dataset kind must be one of {DATASET_KINDS}")
    n = fields.shape[-1]
    f_hat = _fft.fftn(fields, axes=(1, 2))
    if kind == "gradient_map":
        m1, m2 = _derivative_multipliers(n)
        d1 = _assert_real(_fft.ifftn(f_hat * m1[None], axes=(1, 2)))
        d2 = _assert_real(_fft.ifftn(f_hat * m2[None], axes=(1, 2)))
        return np.stack([d1, d2], axis=-1)
    k = np.fft.fftfreq(n, d=1.0 / n)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    mult = 1.0 / (1.0 + 4.0 * np.pi**2 * k2)
    return _assert_real(_fft.ifftn(f_hat * mult[None], axes=(1, 2)))[..., None]


def make_dataset(
    kind: str,
    n: int,
    s: float,
    n_ref: int,
    seed: int,
    split: tuple[int, int, int] | None = None,
    tau: float = 3.0,
    amp: float = 1.0,
) -> Dataset:
    """Generate a synthetic operator dataset from random-field inputs.

    gradient_map: targets are the two spectral partial derivatives of the
    input (output regularity one order below the input).
    inverse_helmholtz: targets solve (I - Laplacian) w = u exactly in
    Fourier space, multiplier (1 + 4 pi^2 |k|^2)^{-1} (regularity-raising).
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"dataset kind must be one of {DATASET_KINDS}")
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    if split is None:
        n_val = max(n // 10, 1) if n >= 3 else 0
        split = (n - 2 * n_val, n_val, n_val)
    fields = np.empty((n, n_ref, n_ref))
    for i in range(n):
        spec = GrfSpec(
            s=s, d=2, n_ref=n_ref, tau=tau, amp=amp, seed=derive_seed(seed, 11, i)
        )
        fields[i] = sample_grf(spec).values[..., 0]
    targets = apply_operator(kind, fields)
    return Dataset(
        inputs=fields[..., None],
        targets=targets,
        split=split,
        kind=kind,
        s=float(s),
        n_ref=n_ref,
        seed=int(seed),
    )


def _batch_loss_grad(
    pred: np.ndarray, target: np.ndarray, kind: str
) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to pred.

    Fields are compared in the grid-normalized L2 norm; the normalization
    cancels in relative_l2 and scales mse by N^{-d}.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    bsz = pred.shape[0]
    n_pts = float(np.prod(pred.shape[1:-1]))
    diff = pred - target
    if kind == "mse":
        loss = float(np.sum(diff**2)) / (n_pts * bsz)
        return loss, 2.0 * diff / (n_pts * bsz)
    if kind != "relative_l2":
        raise ValueError(f"loss kind must be one of {LOSS_KINDS}")
    flat = diff.reshape(bsz, -1)
    tgt = target.reshape(bsz, -1)
    dn = np.sqrt(np.sum(flat**2, axis=1))
    tn = np.sqrt(np.sum(tgt**2, axis=1))
    if np.any(tn == 0):
        raise ValueError("relative_l2 is undefined for zero-norm targets")
    loss = float(np.mean(dn / tn))
    safe = np.where(dn > 0, dn, 1.0)
    grad = flat / (safe * tn * bsz)[:, None]
    grad[dn == 0] = 0.0
    return loss, grad.reshape(pred.shape)


def loss_eval(pred: GridField, target: GridField, kind: str) -> float:
    """Loss between two fields (a batch of one); see _batch_loss_grad."""
    loss, _ = _batch_loss_grad(pred.values[None], target.values[None], kind)
    return loss


def _encode_batch(values: np.ndarray, kind: str) -> np.ndarray:
    if kind == "none":
        return values
    n = values.shape[1]
    extra = _encoding_channels(kind, n)
    tiled = np.broadcast_to(extra, (values.shape[0],) + extra.shape)
    return np.concatenate([values, tiled], axis=-1)


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = x.reshape(-1, x.shape[-1]) @ w.T + b
    return out.reshape(x.shape[:-1] + (w.shape[0],))


def _outer_grad(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    return g.reshape(-1, g.shape[-1]).T @ x.reshape(-1, x.shape[-1])


def _act_cached(z: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Activation value plus the cache its derivative can be rebuilt from."""
    if kind == "gelu":
        cdf = _std_normal_cdf(z)
        return z * cdf, cdf
    return _act(z, kind), None


def _act_deriv_cached(z: np.ndarray, cache: np.ndarray | None, kind: str) -> np.ndarray:
    if kind == "gelu":
        return cache + z * (_INV_SQRT_2PI * np.exp(-0.5 * z * z))
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _forward_fast(params: FnoParams, values: np.ndarray) -> np.ndarray:
    """Batched forward pass through the real-FFT convolution (no trace).

    Numerically identical (to round-off) to :func:`fnodisc.fno.forward_values`
    but roughly twice as fast; used inside the training loop.
    """
    cfg = params.config
    lift_act = "identity" if cfg.activation == "identity" else "gelu"
    v = _act(_affine(values, params.lift_w, params.lift_b), lift_act)
    for t in range(cfg.n_layers):
        full = params.band().mirror_full(params.p_half[t])
        z = _affine(v, params.w[t], params.b[t]) + _conv_rfft(v, full, cfg.modes, cfg.d)
        v = _act(z, cfg.activation)
    out = _affine(v, params.proj_w, params.proj_b)
    if cfg.proj_activation:
        out = _act(out, "gelu")
    return out


def forward_backward(
    params: FnoParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss_kind: str = "relative_l2",
) -> tuple[float, FnoParams]:
    """Loss and exact reverse-mode gradients for one batch at one grid.

    ``inputs`` are raw (un-encoded) fields (B, N^d spatial, in_channels);
    encodings are appended here, matching the forward pass.  Returns the
    gradients in a params-shaped container; spectral gradients satisfy the
    same Hermitian mirror symmetry as the weights they belong to.
    """
    cfg = params.config
    d, k = cfg.d, cfg.modes
    n = inputs.shape[-2]
    if 2 * k >= n:
        raise ModeOverflowError(f"mode overflow: K={k} needs grid N > 2K, got N={n}")
    if inputs.ndim != d + 2:
        raise ValueError(
            f"expected one batch dimension: (B, N^d spatial, channels), got shape {inputs.shape}"
        )
    band = params.band()
    axes = tuple(range(inputs.ndim - 1 - d, inputs.ndim - 1))
    nd = float(n**d)
    outer_spec = "bxo,bxi->xoi" if d == 1 else "bxyo,bxyi->xyoi"

    x_enc = _encode_batch(inputs, cfg.encoding)
    if x_enc.shape[-1] != cfg.encoded_channels:
        raise ValueError(
            f"input has {x_enc.shape[-1]} channels after encoding, "
            f"lift expects {cfg.encoded_channels}"
        )
    lift_act = "identity" if cfg.activation == "identity" else "gelu"
    mul_spec = "xoi,bxi->bxo" if d == 1 else "xyoi,bxyi->bxyo"
    bins = band_bins(n, k)
    cols = np.arange(k + 1)

    def conv_from_slab(slab: np.ndarray, full_p: np.ndarray, hat_shape: tuple) -> np.ndarray:
        out_ft = np.zeros(hat_shape[:-1] + (full_p.shape[-2],), dtype=np.complex128)
        band_out = np.einsum(mul_spec, band.slab_of(full_p), slab)
        if d == 1:
            out_ft[..., : k + 1, :] = band_out
        else:
            out_ft[..., bins[:, None], cols[None, :], :] = band_out
        return _fft.irfftn(out_ft, s=(n,) * d, axes=axes)

    # forward, taping states, pre-activations, and band spectra
    z_lift = _affine(x_enc, params.lift_w, params.lift_b)
    v, lift_cache = _act_cached(z_lift, lift_act)
    states = [v]
    preacts, caches, v_slabs = [], [], []
    fulls = [band.mirror_full(params.p_half[t]) for t in range(cfg.n_layers)]
    for t in range(cfg.n_layers):
        v_hat = _fft.rfftn(v, axes=axes)
        v_slab = _gather_rfft_slab(v_hat, n, k, d)
        z = _affine(v, params.w[t], params.b[t]) + conv_from_slab(
            v_slab, fulls[t], v_hat.shape
        )
        v, cache = _act_cached(z, cfg.activation)
        preacts.append(z)
        caches.append(cache)
        v_slabs.append(v_slab)
        states.append(v)
    z_proj = _affine(v, params.proj_w, params.proj_b)
    pred = _act(z_proj, "gelu") if cfg.proj_activation else z_proj

    loss, g = _batch_loss_grad(pred, targets, loss_kind)

    # reverse pass; the convolution adjoint is the convolution with the
    # conjugate-transposed multiplier, itself a Hermitian-symmetric family
    if cfg.proj_activation:
        g = g * _act_deriv_cached(z_proj, _std_normal_cdf(z_proj), "gelu")
    grad_proj_w = _outer_grad(g, states[-1])
    grad_proj_b = g.reshape(-1, g.shape[-1]).sum(axis=0)
    gv = _affine(g, params.proj_w.T, np.zeros(cfg.width))
    grad_w = np.empty_like(params.w)
    grad_b = np.empty_like(params.b)
    grad_p = np.empty_like(params.p_half)
    for t in reversed(range(cfg.n_layers)):
        gz = gv * _act_deriv_cached(preacts[t], caches[t], cfg.activation)
        grad_b[t] = gz.reshape(-1, cfg.width).sum(axis=0)
        grad_w[t] = _outer_grad(gz, states[t])
        g_hat = _fft.rfftn(gz, axes=axes)
        g_slab = _gather_rfft_slab(g_hat, n, k, d)
        slab_outer = np.einsum(outer_spec, g_slab, np.conj(v_slabs[t])) / nd
        grad_p[t] = band.half_grad_from_slab(
            slab_outer.reshape(-1, cfg.width, cfg.width)
        )
        adjoint_p = np.conj(np.swapaxes(fulls[t], -1, -2))
        gv = _affine(gz, params.w[t].T, np.zeros(cfg.width)) + conv_from_slab(
            g_slab, adjoint_p, g_hat.shape
        )
    gz0 = gv * _act_deriv_cached(z_lift, lift_cache, lift_act)
    grad_lift_w = _outer_grad(gz0, x_enc)
    grad_lift_b = gz0.reshape(-1, cfg.width).sum(axis=0)

    grads = FnoParams(
        config=cfg,
        lift_w=grad_lift_w,
        lift_b=grad_lift_b,
        w=grad_w,
        b=grad_b,
        p_half=grad_p,
        proj_w=grad_proj_w,
        proj_b=grad_proj_b,
    )
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop hyperparameters.

    The optimizer is adaptive-moments first order (step size, two decay
    rates, epsilon).  ``eval_grid`` is the training/validation grid when no
    scheduler is attached.  ``wall_clock=False`` records zero wall times so
    histories are byte-reproducible in deterministic runs.
    """

    epochs: int
    batch_size: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "relative_l2"
    eval_grid: int = 64
    seed: int = 0
    wall_clock: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        for name in ("lr", "eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("beta1", "beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")


@dataclass(frozen=True)
class SchedulerConfig:
    """Grid ladder with plateau detection.

    The run starts on the first ladder grid and doubles up one rung when the
    validation error has not improved (relatively by more than
    ``min_improvement``) for ``patience`` consecutive epochs; at the top it
    holds forever.
    """

    ladder: tuple[int, ...]
    patience: int = 40
    min_improvement: float = 0.0

    def __post_init__(self):
        if len(self.ladder) == 0:
            raise ValueError("grid ladder must be nonempty")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError(f"grid ladder must be strictly increasing, got {self.ladder}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.min_improvement < 0:
            raise ValueError("min_improvement must be >= 0")


@dataclass(frozen=True)
class SchedulerState:
    """Current rung, incumbent best error, and the non-improvement counter."""

    ladder: tuple[int, ...]
    patience: int
    min_improvement: float
    index: int = 0
    best: float = math.inf
    epochs_since_best: int = 0

    @classmethod
    def from_config(cls, cfg: SchedulerConfig) -> "SchedulerState":
        return cls(
            ladder=tuple(cfg.ladder),
            patience=cfg.patience,
            min_improvement=cfg.min_improvement,
        )

    @property
    def grid(self) -> int:
        return self.ladder[self.index]


def scheduler_step(state: SchedulerState, err: float) -> tuple[SchedulerState, str]:
    """Advance the plateau detector by one epoch of validation error."""
    if err < state.best * (1.0 - state.min_improvement):
        return replace(state, best=err, epochs_since_best=0), "hold"
    since = state.epochs_since_best + 1
    if since >= state.patience and state.index + 1 < len(state.ladder):
        new = replace(
            state, index=state.index + 1, best=math.inf, epochs_since_best=0
        )
        return new, "double_grid"
    return replace(state, epochs_since_best=since), "hold"


@dataclass
class History:
    """Per-epoch record of one training run."""

    epoch: list[int] = dc_field(default_factory=list)
    grid: list[int] = dc_field(default_factory=list)
    train_loss: list[float] = dc_field(default_factory=list)
    val_err: list[float] = dc_field(default_factory=list)
    test_err: list[float] = dc_field(default_factory=list)
    wall_ms: list[float] = dc_field(default_factory=list)
    cum_gridpoint_epochs: list[float] = dc_field(default_factory=list)

    COLUMNS = (
        "epoch",
        "grid",
        "train_loss",
        "val_err",
        "test_err",
        "wall_ms",
        "cum_gridpoint_epochs",
    )

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "history",
            **{c: getattr(self, c) for c in self.COLUMNS},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "History":
        return cls(**{c: list(data[c]) for c in cls.COLUMNS})

    def csv_rows(self):
        for i in range(len(self.epoch)):
            yield tuple(getattr(self, c)[i] for c in self.COLUMNS)


class _Adam:
    """Adaptive-moment updates; complex tensors are treated as real pairs."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self.m: dict[str, np.ndarray] | None = None
        self.v: dict[str, np.ndarray] | None = None

    @staticmethod
    def _real_view(arr: np.ndarray) -> np.ndarray:
        return arr.view(np.float64) if np.iscomplexobj(arr) else arr

    def step(self, params: FnoParams, grads: FnoParams) -> FnoParams:
        tensors = params.as_tensors()
        gtensors = grads.as_tensors()
        if self.m is None:
            self.m = {k: np.zeros_like(self._real_view(a)) for k, a in tensors.items()}
            self.v = {k: np.zeros_like(self._real_view(a)) for k, a in tensors.items()}
        self.step_count += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.step_count
        bc2 = 1.0 - c.beta2**self.step_count
        new = {}
        for name, p in tensors.items():
            g = self._real_view(np.ascontiguousarray(gtensors[name]))
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            upd = (m / bc1) / (np.sqrt(v / bc2) + c.eps)
            p_new = p.copy()
            self._real_view(p_new)[...] -= c.lr * upd
            new[name] = p_new
        return FnoParams.from_tensors(params.config, new)


def gradient_check(
    params: FnoParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss_kind: str,
    n_coords: int = 200,
    h: float = 1e-5,
    seed: int = 0,
) -> dict:
    """Audit the adjoint gradients against central finite differences.

    Samples ``n_coords`` random parameter coordinates (complex entries count
    as two), perturbs each by +-h, and compares the difference quotient with
    the adjoint gradient.  Errors are reported relative to the gradient's
    own infinity norm, the scale at which a wrong adjoint would show up.
    """
    loss0, grads = forward_backward(params, inputs, targets, loss_kind)
    tensors = params.as_tensors()
    gtensors = grads.as_tensors()
    views = {k: _Adam._real_view(v) for k, v in tensors.items()}
    gviews = {k: _Adam._real_view(np.ascontiguousarray(g)) for k, g in gtensors.items()}
    sizes = {k: v.size for k, v in views.items()}
    names = list(views)
    total = sum(sizes.values())
    scale = max(float(np.abs(g).max()) for g in gviews.values())
    rng = generator(seed, 909)
    flat = rng.choice(total, size=min(n_coords, total), replace=False)
    worst = 0.0
    for fi in np.sort(flat):
        offset = int(fi)
        for name in names:
            if offset < sizes[name]:
                break
            offset -= sizes[name]
        view = views[name].reshape(-1)
        orig = view[offset]
        view[offset] = orig + h
        lp, _ = forward_backward(params, inputs, targets, loss_kind)
        view[offset] = orig - h
        lm, _ = forward_backward(params, inputs, targets, loss_kind)
        view[offset] = orig
        fd = (lp - lm) / (2.0 * h)
        ad = gviews[name].reshape(-1)[offset]
        worst = max(worst, abs(fd - ad) / max(scale, 1e-300))
    return {
        "loss": loss0,
        "max_rel_err": worst,
        "n_coords": int(min(n_coords, total)),
        "h": h,
        "grad_scale": scale,
    }


def evaluate_relative_error(
    params: FnoParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    grid: int,
    chunk: int = 50,
) -> float:
    """Mean per-sample relative L2 error at a grid, evaluated in chunks."""
    ins = restrict_batch(inputs, grid)
    tgts = restrict_batch(targets, grid)
    total, count = 0.0, 0
    for lo in range(0, ins.shape[0], chunk):
        xs = _encode_batch(ins[lo : lo + chunk], params.config.encoding)
        pred = _forward_fast(params, xs)
        t = tgts[lo : lo + chunk]
        dn = np.sqrt(np.sum((pred - t).reshape(t.shape[0], -1) ** 2, axis=1))
        tn = np.sqrt(np.sum(t.reshape(t.shape[0], -1) ** 2, axis=1))
        total += float(np.sum(dn / tn))
        count += t.shape[0]
    return total / count


def train_loop(
    params: FnoParams,
    dataset: Dataset,
    train_cfg: TrainConfig,
    scheduler_cfg: SchedulerConfig | None = None,
) -> tuple[FnoParams, History]:
    """Mini-batch training with optional adaptive grid refinement.

    Each epoch shuffles the training split (seeded), steps over batches at
    the current grid, then records validation error at the current grid and
    test error at the master resolution.  With a scheduler, the grid ladder
    advances when validation plateaus; optimizer moment state carries across
    switches (parameters are resolution-independent).
    """
    grids = list(scheduler_cfg.ladder) if scheduler_cfg else [train_cfg.eval_grid]
    for g in grids:
        if dataset.n_ref % g != 0:
            raise GridNestingError(f"grid {g} does not divide master resolution {dataset.n_ref}")
        if 2 * params.config.modes >= g:
            raise ModeOverflowError(
                f"mode overflow: K={params.config.modes} needs grid N > 2K, got N={g}"
            )
    state = SchedulerState.from_config(scheduler_cfg) if scheduler_cfg else None
    grid = state.grid if state else train_cfg.eval_grid

    train_x, train_y = dataset.part("train")
    val_x, val_y = dataset.part("val")
    test_x, test_y = dataset.part("test")
    opt = _Adam(train_cfg)
    history = History()
    cum_gpe = 0.0
    for epoch in range(1, train_cfg.epochs + 1):
        tic = time.perf_counter()
        perm = generator(train_cfg.seed, 101, epoch).permutation(dataset.n_train)
        ins = restrict_batch(train_x, grid)
        tgts = restrict_batch(train_y, grid)
        losses = []
        for lo in range(0, dataset.n_train, train_cfg.batch_size):
            idx = perm[lo : lo + train_cfg.batch_size]
            loss, grads = forward_backward(params, ins[idx], tgts[idx], train_cfg.loss)
            params = opt.step(params, grads)
            losses.append(loss)
        val_err = evaluate_relative_error(params, val_x, val_y, grid)
        test_err = evaluate_relative_error(params, test_x, test_y, dataset.n_ref)
        cum_gpe += float(grid) ** 2
        wall = (time.perf_counter() - tic) * 1e3 if train_cfg.wall_clock else 0.0
        history.epoch.append(epoch)
        history.grid.append(grid)
        history.train_loss.append(float(np.mean(losses)) if losses else 0.0)
        history.val_err.append(val_err)
        history.test_err.append(test_err)
        history.wall_ms.append(wall)
        history.cum_gridpoint_epochs.append(cum_gpe)
        if state is not None:
            state, action = scheduler_step(state, val_err)
            if action == "double_grid":
                grid = state.grid
    return params, history
