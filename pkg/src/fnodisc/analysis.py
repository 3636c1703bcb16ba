"""Multi-resolution error measurement for discretized operator networks.

The central experiment compares a forward pass on a fine reference grid
against passes on nested coarser grids of the same master input: every
coarse state is interpolated trigonometrically back to the reference grid,
the relative discrete-L2 error is recorded per layer, and log-log slopes
against the resolution quantify the decay rate.  A second instrument breaks
one layer's error into its sources: pure aliasing of the reference state,
the transported input error, the kernel-propagated error, and the
post-activation error handed to the next layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft as _fft

from .fno import FnoConfig, FnoParams, LayerTrace, activation_derivative_bound, forward, init_params
from .grf import GrfSpec, sample_grf, subsample
from .seeding import derive_seed
from .spectral import GridField, GridNestingError, dft, embed_spectrum, trig_interpolate
from .spectral import norm as field_norm

__all__ = [
    "ErrorReport",
    "DecompRow",
    "DecompReport",
    "relative_layer_error",
    "convergence_experiment",
    "build_error_report",
    "fit_loglog_slope",
    "state_norm_profile",
    "error_components",
    "SLOPE_FIT_FLOOR",
]

#: Relative errors below this are treated as 64-bit rounding noise; trailing
#: resolutions at or under the floor are excluded from slope fits.
SLOPE_FIT_FLOOR = 10 * np.finfo(np.float64).eps

REPORT_SCHEMA_VERSION = 1


def fit_loglog_slope(ns, errs) -> tuple[float, float, float]:
    """Least-squares line through (log N, log err).

    Returns (slope, intercept, residual) with residual the RMS misfit in
    log space.  Requires at least three strictly positive points.
    """
    ns = np.asarray(ns, dtype=np.float64)
    errs = np.asarray(errs, dtype=np.float64)
    if ns.size < 3:
        raise ValueError(f"slope fit needs >= 3 points, got {ns.size}")
    if np.any(errs <= 0):
        raise ValueError("slope fit needs strictly positive errors")
    x, y = np.log(ns), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), resid


def relative_layer_error(trace_coarse: LayerTrace, trace_ref: LayerTrace) -> np.ndarray:
    """Per-layer relative error of a coarse trace against a reference trace.

    Each coarse state is interpolated to the reference grid and compared
    there in the discrete L2 norm: ||p(v_t^N) - v_t|| / ||v_t||.
    """
    if len(trace_coarse) != len(trace_ref):
        raise ValueError(
            f"traces have {len(trace_coarse)} and {len(trace_ref)} states; layer counts must match"
        )
    n_ref = trace_ref.n_grid
    n = trace_coarse.n_grid
    if n_ref % n != 0:
        raise GridNestingError(f"coarse grid {n} does not divide reference grid {n_ref}")
    errs = np.empty(len(trace_ref))
    for t, (coarse, ref) in enumerate(zip(trace_coarse.states, trace_ref.states)):
        # at matched grids the interpolant fixes the data exactly
        lifted = coarse if n == n_ref else trig_interpolate(coarse, n_ref)
        denom = field_norm(ref, "discrete_l2")
        if denom == 0.0:
            raise ValueError(f"reference state {t} has zero norm; relative error undefined")
        errs[t] = (
            float(np.sqrt(np.sum((lifted.values - ref.values) ** 2))) / denom
        )
    return errs


def state_norm_profile(trace: LayerTrace) -> np.ndarray:
    """Grid-normalized L2 norm of every state v_0 .. v_T."""
    return np.array([field_norm(s, "l2") for s in trace.states])


def relative_layer_error_shared(
    trace_coarse: LayerTrace, trace_ref: LayerTrace
) -> np.ndarray:
    """Per-layer relative state error at the shared (coarse) grid points.

    This is the discrete quantity whose decay the layer-recursion theory
    bounds: no interpolant is involved, so it isolates the propagated state
    error from the representation error of the coarse state itself.  Layer 0
    reports exactly zero for matched inputs.
    """
    if len(trace_coarse) != len(trace_ref):
        raise ValueError("traces must hold the same number of states")
    n = trace_coarse.n_grid
    n_ref = trace_ref.n_grid
    if n_ref % n != 0:
        raise GridNestingError(f"coarse grid {n} does not divide reference grid {n_ref}")
    step = n_ref // n
    sl = (slice(None, None, step),) * trace_ref.states[0].d
    errs = np.empty(len(trace_ref))
    for t, (coarse, ref) in enumerate(zip(trace_coarse.states, trace_ref.states)):
        restricted = ref.values[sl]
        denom = float(np.sqrt(np.sum(restricted**2)))
        if denom == 0.0:
            raise ValueError(f"reference state {t} vanishes on the shared grid")
        errs[t] = float(np.sqrt(np.sum((coarse.values - restricted) ** 2))) / denom
    return errs


class _ReferenceSpectra:
    """Centered-set spectra and norms of a reference trace, computed once.

    Comparing a coarse state against the reference is then a Parseval
    identity: the interpolant's fine-grid values have the embedded coarse
    spectrum as their transform, so the discrete L2 distance on the fine
    grid equals the coefficient-space distance (times N_ref^{d/2}).  This
    avoids one full-size inverse transform per state and resolution and
    agrees with :func:`relative_layer_error` to round-off.
    """

    def __init__(self, trace_ref: LayerTrace):
        self.n_ref = trace_ref.n_grid
        self.spectra = [dft(s).coeffs for s in trace_ref.states]
        self.sq_norms = [float(np.sum(np.abs(c) ** 2)) for c in self.spectra]

    def layer_errors(self, trace_coarse: LayerTrace) -> np.ndarray:
        n = trace_coarse.n_grid
        if self.n_ref % n != 0:
            raise GridNestingError(
                f"coarse grid {n} does not divide reference grid {self.n_ref}"
            )
        if len(trace_coarse) != len(self.spectra):
            raise ValueError("traces must hold the same number of states")
        errs = np.empty(len(self.spectra))
        for t, coarse in enumerate(trace_coarse.states):
            denom = self.sq_norms[t]
            if denom == 0.0:
                raise ValueError(f"reference state {t} has zero norm")
            emb = embed_spectrum(dft(coarse).coeffs, coarse.d, n, self.n_ref)
            diff_sq = float(np.sum(np.abs(emb - self.spectra[t]) ** 2))
            errs[t] = np.sqrt(diff_sq / denom)
        return errs


@dataclass
class ErrorReport:
    """Aggregated multi-resolution errors with fitted decay rates.

    ``rel_err`` is indexed [s][sample][resolution][layer]; means/stds are
    over samples; slopes are fitted per (s, layer) on the sample means over
    the resolutions in ``fit_ns`` (the ladder minus any floor-contaminated
    trailing points).
    """

    config: dict
    init_scheme: str
    s_values: list[float]
    resolutions: list[int]
    n_ref: int
    n_samples: int
    seed: int
    rel_err: np.ndarray  # (n_s, n_samples, n_res, n_layers + 1)
    mean_rel_err: np.ndarray  # (n_s, n_res, n_layers + 1)
    std_rel_err: np.ndarray
    slopes: np.ndarray  # (n_s, n_layers + 1)
    intercepts: np.ndarray
    residuals: np.ndarray
    fit_ns: list[list[int]] = dc_field(default_factory=list)
    schema_version: int = REPORT_SCHEMA_VERSION

    def __post_init__(self):
        ns = self.resolutions
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"resolutions must be strictly increasing, got {ns}")
        if any(n >= self.n_ref for n in ns):
            raise ValueError(f"all resolutions must lie below n_ref={self.n_ref}")
        if np.any(self.rel_err < 0):
            raise ValueError("relative errors must be nonnegative")
        if not np.all(np.isfinite(self.slopes)):
            raise ValueError("fitted slopes must be finite")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": "error_report",
            "config": self.config,
            "init_scheme": self.init_scheme,
            "s_values": self.s_values,
            "resolutions": self.resolutions,
            "n_ref": self.n_ref,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "rel_err": self.rel_err.tolist(),
            "mean_rel_err": self.mean_rel_err.tolist(),
            "std_rel_err": self.std_rel_err.tolist(),
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
            "residuals": self.residuals.tolist(),
            "fit_ns": self.fit_ns,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorReport":
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(
                f"report schema {data.get('schema_version')} does not match {REPORT_SCHEMA_VERSION}"
            )
        return cls(
            config=data["config"],
            init_scheme=data["init_scheme"],
            s_values=list(data["s_values"]),
            resolutions=list(data["resolutions"]),
            n_ref=data["n_ref"],
            n_samples=data["n_samples"],
            seed=data["seed"],
            rel_err=np.asarray(data["rel_err"]),
            mean_rel_err=np.asarray(data["mean_rel_err"]),
            std_rel_err=np.asarray(data["std_rel_err"]),
            slopes=np.asarray(data["slopes"]),
            intercepts=np.asarray(data["intercepts"]),
            residuals=np.asarray(data["residuals"]),
            fit_ns=[list(x) for x in data["fit_ns"]],
        )

    def csv_rows(self):
        """Flat rows (s, seed, N, layer, rel_err); seed is the sample index."""
        for i_s, s in enumerate(self.s_values):
            for j in range(self.n_samples):
                for i_n, n in enumerate(self.resolutions):
                    for layer in range(self.rel_err.shape[-1]):
                        yield (s, j, n, layer, self.rel_err[i_s, j, i_n, layer])


def build_error_report(
    config: FnoConfig,
    init_scheme: str,
    s_values,
    resolutions,
    n_ref: int,
    seed: int,
    rel_err: np.ndarray,
) -> ErrorReport:
    """Aggregate a raw error tensor [s][sample][N][layer] into a report.

    Split out from the experiment loop so synthetic error tensors can be
    injected when testing the aggregation and slope fitting.
    """
    resolutions = [int(n) for n in resolutions]
    mean = rel_err.mean(axis=1)
    std = rel_err.std(axis=1, ddof=0)
    n_s, _, n_res, n_layers = rel_err.shape
    slopes = np.empty((n_s, n_layers))
    intercepts = np.empty((n_s, n_layers))
    residuals = np.empty((n_s, n_layers))
    fit_ns: list[list[int]] = []
    for i_s in range(n_s):
        keep = n_res
        # drop trailing resolutions already at the rounding floor
        while keep > 3 and np.all(mean[i_s, keep - 1] <= SLOPE_FIT_FLOOR):
            keep -= 1
        fit_ns.append(resolutions[:keep])
        for layer in range(n_layers):
            slopes[i_s, layer], intercepts[i_s, layer], residuals[i_s, layer] = (
                fit_loglog_slope(resolutions[:keep], mean[i_s, :keep, layer])
            )
    return ErrorReport(
        config=config.to_dict(),
        init_scheme=init_scheme,
        s_values=[float(s) for s in s_values],
        resolutions=resolutions,
        n_ref=int(n_ref),
        n_samples=int(rel_err.shape[1]),
        seed=int(seed),
        rel_err=rel_err,
        mean_rel_err=mean,
        std_rel_err=std,
        slopes=slopes,
        intercepts=intercepts,
        residuals=residuals,
        fit_ns=fit_ns,
    )


def convergence_experiment(
    config: FnoConfig,
    scheme: str,
    s_list,
    n_list,
    n_ref: int,
    n_samples: int,
    seed: int,
    tau: float = 3.0,
    amp: float = 1.0,
    scale: float = 10.0,
    params: FnoParams | None = None,
) -> ErrorReport:
    """Measure per-layer relative errors across a resolution ladder.

    One model (drawn once from ``scheme``) is evaluated on ``n_samples``
    random master inputs per regularity in ``s_list``; each input is
    restricted to every N in ``n_list`` and the coarse traces are compared
    against the reference trace at ``n_ref``.
    """
    n_list = sorted(int(n) for n in n_list)
    if n_samples < 2:
        raise ValueError("need n_samples >= 2 to estimate the sample spread")
    for n in n_list:
        if n_ref % n != 0:
            raise GridNestingError(f"resolution {n} does not divide n_ref={n_ref}")
        if 2 * config.modes >= n:
            raise ValueError(
                f"truncation K={config.modes} too large for resolution {n} (needs K < N/2)"
            )
    if params is None:
        params = init_params(config, scheme, seed=derive_seed(seed, 0), scale=scale)
    n_layers = config.n_layers + 1
    rel = np.empty((len(s_list), n_samples, len(n_list), n_layers))
    for i_s, s in enumerate(s_list):
        for j in range(n_samples):
            spec = GrfSpec(
                s=float(s),
                d=config.d,
                n_ref=n_ref,
                tau=tau,
                amp=amp,
                seed=derive_seed(seed, 1, i_s, j),
            )
            master = sample_grf(spec)
            if field_norm(master, "l2") < 1e-14:
                raise ValueError(
                    "degenerate input: master field has (near-)zero norm"
                )
            _, ref_trace = forward(params, master, capture_trace=True)
            ref = _ReferenceSpectra(ref_trace)
            del ref_trace
            for i_n, n in enumerate(n_list):
                coarse = subsample(master, n)
                _, coarse_trace = forward(params, coarse, capture_trace=True)
                rel[i_s, j, i_n] = ref.layer_errors(coarse_trace)
    return build_error_report(config, scheme, s_list, n_list, n_ref, seed, rel)


@dataclass
class DecompRow:
    """Norms of one layer's error components on the coarse grid.

    e1 is the aliasing of the reference state (the per-layer error source),
    e2 the transform of the incoming state error, e3 the kernel-propagated
    combination, e0/e0_next the state errors entering this layer and the
    next.  e2_full is e2 measured over the whole coarse frequency set, which
    must equal N^{-d/2} e0 exactly (a Parseval identity).
    """

    layer: int
    n_grid: int
    e0: float
    e1: float
    e2: float
    e2_full: float
    e3: float
    e0_next: float
    p_frobenius: float
    w_spectral: float
    deriv_bound: float

    def check(self, d: int, tol_eq: float = 1e-10) -> None:
        """Assert the per-layer norm relations on this measured row."""
        nd = float(self.n_grid ** (d / 2))
        lhs, rhs = self.e2_full, self.e0 / nd
        scale = max(abs(lhs), abs(rhs), 1e-300)
        if abs(lhs - rhs) > tol_eq * scale:
            raise AssertionError(
                f"transform norm identity violated at layer {self.layer}: {lhs} vs {rhs}"
            )
        slack = 1e-12 * max(1.0, self.e3)
        if self.e3 > nd * self.p_frobenius * (self.e1 + self.e2) + slack:
            raise AssertionError(f"kernel propagation bound violated at layer {self.layer}")
        bound = self.deriv_bound * (self.w_spectral * self.e0 + self.e3)
        if self.e0_next > bound + 1e-12 * max(1.0, bound):
            raise AssertionError(f"activation propagation bound violated at layer {self.layer}")

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "n_grid": self.n_grid,
            "e0": self.e0,
            "e1": self.e1,
            "e2": self.e2,
            "e2_full": self.e2_full,
            "e3": self.e3,
            "e0_next": self.e0_next,
            "p_frobenius": self.p_frobenius,
            "w_spectral": self.w_spectral,
            "deriv_bound": self.deriv_bound,
        }


@dataclass
class DecompReport:
    """Error-component rows for every layer of one coarse/reference pair."""

    config: dict
    n_grid: int
    n_ref: int
    s: float
    seed: int
    rows: list[DecompRow]
    schema_version: int = REPORT_SCHEMA_VERSION

    def check(self) -> None:
        d = self.config["d"]
        for row in self.rows:
            row.check(d)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": "decomp_report",
            "config": self.config,
            "n_grid": self.n_grid,
            "n_ref": self.n_ref,
            "s": self.s,
            "seed": self.seed,
            "rows": [r.to_dict() for r in self.rows],
        }

    def csv_rows(self):
        for r in self.rows:
            yield (
                self.s,
                self.seed,
                self.n_grid,
                r.layer,
                r.e0,
                r.e1,
                r.e2,
                r.e3,
                r.e0_next,
            )


def _band_coeffs(values: np.ndarray, k: int, d: int) -> np.ndarray:
    """Amplitude-normalized DFT of grid values, gathered on |k|_inf <= K."""
    n = values.shape[0]
    axes = tuple(range(d))
    f_hat = _fft.fftn(values, axes=axes) / float(n**d)
    bins = np.concatenate([np.arange(0, k + 1), np.arange(n - k, n)])
    if d == 1:
        return f_hat[bins, :]
    return f_hat[bins[:, None], bins[None, :], :]


def error_components(
    params: FnoParams,
    trace_coarse: LayerTrace,
    trace_ref: LayerTrace,
    t: int,
) -> DecompRow:
    """Measure one layer's error components between nested traces.

    The continuum transform of the reference state is approximated by its
    DFT on the reference grid, which requires n_ref / N >= 4 so that the
    stand-in error is higher order than the quantities measured.
    """
    cfg = params.config
    if t >= cfg.n_layers:
        raise ValueError(f"layer index {t} out of range for {cfg.n_layers} layers")
    n = trace_coarse.n_grid
    n_ref = trace_ref.n_grid
    if n_ref % n != 0:
        raise GridNestingError(f"coarse grid {n} does not divide reference grid {n_ref}")
    if n_ref < 4 * n:
        raise GridNestingError(
            f"reference grid {n_ref} must be >= 4x the coarse grid {n} for the transform oracle"
        )
    step = n_ref // n
    d, k = cfg.d, cfg.modes
    sl = (slice(None, None, step),) * d

    def restricted(g: GridField) -> np.ndarray:
        return g.values[sl]

    v_ref = trace_ref.states[t]
    v_coarse = trace_coarse.states[t]
    e0_vals = v_coarse.values - restricted(v_ref)
    e0 = float(np.sqrt(np.sum(e0_vals**2)))

    dft_n_of_ref = _band_coeffs(restricted(v_ref), k, d)
    dft_ref = _band_coeffs(v_ref.values, k, d)
    e1_band = dft_n_of_ref - dft_ref
    e1 = float(np.sqrt(np.sum(np.abs(e1_band) ** 2)))

    axes = tuple(range(d))
    e0_hat_full = _fft.fftn(e0_vals, axes=axes) / float(n**d)
    e2_full = float(np.sqrt(np.sum(np.abs(e0_hat_full) ** 2)))
    bins = np.concatenate([np.arange(0, k + 1), np.arange(n - k, n)])
    e2_band = e0_hat_full[bins, :] if d == 1 else e0_hat_full[bins[:, None], bins[None, :], :]
    e2 = float(np.sqrt(np.sum(np.abs(e2_band) ** 2)))

    full_p = params.spectral_full(t)
    if d == 1:
        prop = np.einsum("xoi,xi->xo", full_p, e1_band + e2_band)
    else:
        prop = np.einsum("xyoi,xyi->xyo", full_p, e1_band + e2_band)
    coeffs = np.zeros((n,) * d + (prop.shape[-1],), dtype=np.complex128)
    if d == 1:
        coeffs[bins, :] = prop
    else:
        coeffs[bins[:, None], bins[None, :], :] = prop
    e3_vals = _fft.ifftn(coeffs, axes=axes) * float(n**d)
    e3 = float(np.sqrt(np.sum(e3_vals.real**2 + e3_vals.imag**2)))

    e0_next_vals = trace_coarse.states[t + 1].values - restricted(trace_ref.states[t + 1])
    e0_next = float(np.sqrt(np.sum(e0_next_vals**2)))

    return DecompRow(
        layer=t,
        n_grid=n,
        e0=e0,
        e1=e1,
        e2=e2,
        e2_full=e2_full,
        e3=e3,
        e0_next=e0_next,
        p_frobenius=params.p_frobenius(t),
        w_spectral=params.w_spectral(t),
        deriv_bound=activation_derivative_bound(cfg.activation),
    )


def decompose_trace(
    params: FnoParams,
    trace_coarse: LayerTrace,
    trace_ref: LayerTrace,
    s: float,
    seed: int,
) -> DecompReport:
    """Error components for all layers of one coarse/reference trace pair."""
    rows = [
        error_components(params, trace_coarse, trace_ref, t)
        for t in range(params.config.n_layers)
    ]
    return DecompReport(
        config=params.config.to_dict(),
        n_grid=trace_coarse.n_grid,
        n_ref=trace_ref.n_grid,
        s=float(s),
        seed=int(seed),
        rows=rows,
    )
