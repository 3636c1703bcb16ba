"""Discrete Fourier analysis on the uniform grid of the d-torus.

Conventions used throughout the package:

* The torus is [0, 1)^d with grid points x_n = n/N, n in [N]^d.
* Fourier coefficients are indexed by the centered (symmetric) integer
  frequency set, per dimension {-K..K} for N = 2K+1 and {-K..K-1} for
  N = 2K.  Arrays store coefficients in FFT bin order: frequencies
  0..K sit in bins 0..K and negative frequencies -K..-1 in bins N-K..N-1,
  which is exactly ``numpy.fft`` layout.
* Forward transform carries the 1/N^d factor, so a coefficient equals the
  amplitude of its complex exponential:
  c(k) = N^{-d} sum_n v(x_n) exp(-2*pi*i*<k, x_n>).
* Inverse evaluation sums c(k) exp(+2*pi*i*<k, x>) with no prefactor.

All arrays are float64 / complex128; fields are channels-last, shape
(N,)*d + (m,).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

__all__ = [
    "GridField",
    "SpectralField",
    "SobolevParams",
    "GridNestingError",
    "RealnessError",
    "modes",
    "dft",
    "idft_on_grid",
    "trig_interpolate",
    "norm",
    "aliasing_decomposition",
]

#: Relative ceiling on the imaginary residue of inverse transforms.  Hermitian
#: symmetry makes the exact result real; anything above FFT round-off at the
#: field's own scale indicates a symmetry bug upstream.
IMAG_TOL = 1e-9

NORM_KINDS = ("discrete_l2", "l2", "hs", "hs_seminorm", "linf")


class GridNestingError(ValueError):
    """Raised when two grid resolutions do not nest as required."""


class RealnessError(FloatingPointError):
    """Raised when an inverse transform carries a non-negligible imaginary part."""


def _check_spatial(values: np.ndarray) -> tuple[int, int, int]:
    if values.ndim < 2 or values.ndim > 3:
        raise ValueError(f"expected shape (N,)*d + (m,) with d in {{1, 2}}, got {values.shape}")
    d = values.ndim - 1
    n = values.shape[0]
    if n <= 1:
        raise ValueError(f"grid size must exceed 1, got {n}")
    if any(values.shape[a] != n for a in range(d)):
        raise ValueError(f"spatial dimensions must match, got {values.shape}")
    return d, n, values.shape[-1]


@dataclass(frozen=True)
class GridField:
    """Real vector-valued function sampled on the uniform torus grid.

    ``values`` has shape (N,)*d + (m,), entry n holding v(x_n) with
    x_n = n/N.  The grid itself is implicit.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        _check_spatial(v)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.ndim - 1

    @property
    def n_grid(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients on the centered frequency set, FFT bin order.

    Hermitian symmetry coeffs(-k) = conj(coeffs(k)) holds whenever both
    frequencies are representable; for even N the unpaired edge frequency
    -N/2 carries a real coefficient (the unique real-valued completion).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        _check_spatial(c)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def n_grid(self) -> int:
        return self.coeffs.shape[0]

    @property
    def channels(self) -> int:
        return self.coeffs.shape[-1]

    def validate(self, tol: float = 1e-12) -> None:
        """Check Hermitian symmetry (paired bins conjugate, edge bins real)."""
        c = self.coeffs
        mirrored = c
        for axis in range(self.d):
            mirrored = _mirror_axis(mirrored, axis)
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(np.conj(mirrored) - c).max() > tol * scale:
            raise ValueError("coefficients are not Hermitian-symmetric")


def _mirror_axis(c: np.ndarray, axis: int) -> np.ndarray:
    """Reorder bins along ``axis`` so bin(k) holds the old bin(-k).

    Bin 0 is self-paired; for even N the edge bin N/2 (frequency -N/2) is
    also self-paired because +N/2 and -N/2 coincide mod N.
    """
    n = c.shape[axis]
    idx = (-np.arange(n)) % n
    return np.take(c, idx, axis=axis)


@dataclass(frozen=True)
class SobolevParams:
    """Regularity exponent s (> 0) with its spatial dimension."""

    s: float
    d: int

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"regularity exponent must be positive, got {self.s}")
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")

    @property
    def satisfies_rate_assumption(self) -> bool:
        """Whether s > d/2, the hypothesis behind the N^{-s} rate claims."""
        return self.s > self.d / 2


def modes(n: int) -> np.ndarray:
    """Integer frequencies of the centered set in FFT bin order."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


def mode_norm2_grid(n: int, d: int) -> np.ndarray:
    """|k|^2 on the full (N,)*d bin grid."""
    k = modes(n).astype(np.float64)
    if d == 1:
        return k**2
    return k[:, None] ** 2 + k[None, :] ** 2


def _assert_real(arr: np.ndarray) -> np.ndarray:
    """Drop the imaginary part after checking it is round-off at field scale."""
    re = arr.real
    scale = max(1.0, float(np.abs(re).max()))
    resid = float(np.abs(arr.imag).max())
    if resid > IMAG_TOL * scale:
        raise RealnessError(
            f"imaginary residue {resid:.3e} exceeds {IMAG_TOL:.0e} x scale {scale:.3e}"
        )
    return np.ascontiguousarray(re)


def dft(f: GridField) -> SpectralField:
    """Forward transform: c(k) = N^{-d} sum_n f(x_n) e^{-2 pi i <k, x_n>}."""
    axes = tuple(range(f.d))
    coeffs = _fft.fftn(f.values, axes=axes) / float(f.n_grid**f.d)
    return SpectralField(coeffs)


def _embed_axis(c: np.ndarray, axis: int, n_src: int, n_dst: int) -> np.ndarray:
    """Zero-pad one spatial axis from the centered set of n_src to n_dst.

    For even n_src the unpaired edge frequency -n_src/2 is split half-and-half
    onto +-n_src/2 of the finer set, which is the unique real-valued
    completion of the coarse data.
    """
    if n_dst == n_src:
        return c
    src = modes(n_src)
    shape = list(c.shape)
    shape[axis] = n_dst
    out = np.zeros(shape, dtype=np.complex128)
    moved = np.moveaxis(c, axis, 0)
    out_m = np.moveaxis(out, axis, 0)
    edge = -(n_src // 2) if n_src % 2 == 0 else None
    regular = src != edge if edge is not None else np.ones(n_src, dtype=bool)
    out_m[src[regular] % n_dst] = moved[regular]
    if edge is not None:
        row = moved[n_src // 2]  # bin of the unpaired frequency -N/2
        out_m[edge % n_dst] += 0.5 * row
        out_m[(-edge) % n_dst] += 0.5 * row
    return out


def embed_spectrum(coeffs: np.ndarray, d: int, n_src: int, n_dst: int) -> np.ndarray:
    """Zero-pad spectral bins (N_src)^d into (N_dst)^d, splitting edge modes."""
    out = coeffs
    for axis in range(d):
        out = _embed_axis(out, axis, n_src, n_dst)
    return out


def idft_on_grid(c: SpectralField, n_target: int) -> GridField:
    """Evaluate the trigonometric polynomial of ``c`` on the finer grid X^(M).

    For M = N this inverts :func:`dft` exactly.  M < N is rejected;
    spectral downsampling is intentionally not provided.
    """
    n = c.n_grid
    if n_target < n:
        raise GridNestingError(f"target grid {n_target} must be >= source grid {n}")
    padded = embed_spectrum(c.coeffs, c.d, n, n_target)
    axes = tuple(range(c.d))
    values = _fft.ifftn(padded, axes=axes) * float(n_target**c.d)
    return GridField(_assert_real(values))


def trig_interpolate(f: GridField, n_fine: int) -> GridField:
    """Trigonometric interpolation of grid data onto a nested finer grid.

    Requires n_fine to be a multiple of N so the source grid points are a
    subset of the target ones; the interpolant matches f exactly there.
    """
    if n_fine % f.n_grid != 0:
        raise GridNestingError(
            f"fine grid {n_fine} must be a multiple of coarse grid {f.n_grid}"
        )
    return idft_on_grid(dft(f), n_fine)


def _spectral_weight(kind: str, s: float | None, n: int, d: int) -> np.ndarray:
    if s is None:
        raise ValueError(f"norm kind {kind!r} requires the regularity exponent s")
    if s <= 0:
        raise ValueError(f"regularity exponent must be positive, got {s}")
    k2 = mode_norm2_grid(n, d)
    if kind == "hs":
        return 1.0 + k2**s
    return k2**s


def norm(f: GridField | SpectralField, kind: str, s: float | None = None) -> float:
    """Norms of a field, discrete or spectral.

    * ``discrete_l2``: (sum_n |f(x_n)|^2)^(1/2)
    * ``l2``: N^{-d/2} times discrete_l2, the Riemann approximation of the
      continuum L^2 norm (exact for trigonometric polynomials)
    * ``hs``: (sum_k (1 + |k|^{2s}) |c(k)|^2)^(1/2) over the centered set
    * ``hs_seminorm``: (sum_k |k|^{2s} |c(k)|^2)^(1/2); this is the
      Laplacian-based seminorm scaled by (2 pi)^{-s} so that
      hs^2 = hs_seminorm^2 + l2^2 holds exactly on trig polynomials
    * ``linf``: max over grid points of the Euclidean channel norm
    """
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    if kind in ("hs", "hs_seminorm"):
        c = f if isinstance(f, SpectralField) else dft(f)
        w = _spectral_weight(kind, s, c.n_grid, c.d)
        power = np.sum(np.abs(c.coeffs) ** 2, axis=-1)
        return float(np.sqrt(np.sum(w * power)))
    if isinstance(f, SpectralField):
        if kind == "linf":
            return norm(idft_on_grid(f, f.n_grid), "linf")
        # Parseval: sum_k |c|^2 = N^{-d} sum_n |v|^2
        l2 = float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
        return l2 if kind == "l2" else l2 * float(f.n_grid ** (f.d / 2))
    v = f.values
    if kind == "linf":
        return float(np.sqrt(np.sum(v**2, axis=-1)).max())
    dl2 = float(np.sqrt(np.sum(v**2)))
    if kind == "discrete_l2":
        return dl2
    return dl2 / float(f.n_grid ** (f.d / 2))


def _fold_bins(n_fine: int, n_coarse: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis fold of fine frequencies onto the coarse centered set.

    Returns (coarse bin index per fine bin, mask of fine bins whose frequency
    already lies in the coarse set).
    """
    k_fine = modes(n_fine)
    half = n_coarse // 2 if n_coarse % 2 == 0 else (n_coarse - 1) // 2
    k_fold = ((k_fine + half) % n_coarse) - half
    in_band = k_fold == k_fine
    return k_fold % n_coarse, in_band


def aliasing_decomposition(truth: SpectralField, n_coarse: int) -> tuple[float, float]:
    """Split the coarse-grid interpolation error of a fine-band "truth".

    Treating the fine spectrum as the continuum function, the error of its
    N-point trigonometric interpolant decomposes orthogonally into

    * ``tail``: energy of frequencies outside the coarse centered set, and
    * ``alias``: energy of the fold-in sums sum_{l != 0} c(k + l*N) that
      contaminate each retained frequency k,

    so tail^2 + alias^2 equals the squared L^2 error of the (complex)
    degree-N interpolant.
    """
    n_fine = truth.n_grid
    if n_coarse >= n_fine:
        raise GridNestingError(
            f"coarse grid {n_coarse} must be strictly below the fine grid {n_fine}"
        )
    d, m = truth.d, truth.channels
    fold0, band0 = _fold_bins(n_fine, n_coarse)
    if d == 1:
        flat_idx = fold0
        in_band = band0
    else:
        fold1, band1 = fold0, band0
        flat_idx = (fold0[:, None] * n_coarse + fold1[None, :]).ravel()
        in_band = (band0[:, None] & band1[None, :]).ravel()
    c = truth.coeffs.reshape(-1, m)
    tail_sq = float(np.sum(np.abs(c[~in_band]) ** 2))
    alias_sq = 0.0
    n_bins = n_coarse**d
    for ch in range(m):
        col = c[:, ch]
        acc = np.bincount(flat_idx, weights=col.real, minlength=n_bins).astype(
            np.complex128
        )
        acc += 1j * np.bincount(flat_idx, weights=col.imag, minlength=n_bins)
        # remove the l = 0 term: the in-band coefficient itself
        own = np.zeros(n_bins, dtype=np.complex128)
        np.add.at(own, flat_idx[in_band], col[in_band])
        alias_sq += float(np.sum(np.abs(acc - own) ** 2))
    return float(np.sqrt(tail_sq)), float(np.sqrt(alias_sq))
