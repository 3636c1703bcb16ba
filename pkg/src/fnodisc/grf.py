"""Gaussian random fields of prescribed Sobolev smoothness.

Samples are drawn spectrally with a Matern-like power law: the coefficient
at frequency k is amp-normalized (tau^2 + |k|^2)^{-(s + d/2)/2} xi_k with
xi_k white complex Gaussian noise under Hermitian symmetry and xi_0 = 0.
The resulting field lies in H^{s'} for every s' < s almost surely, and not
in H^s.  One master field at the reference resolution is restricted to
nested coarser grids by pointwise subsampling, never re-sampled, so the
coarse and fine discretizations denote the same function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .seeding import generator
from .spectral import GridField, GridNestingError, _assert_real, dft, mode_norm2_grid

__all__ = ["GrfSpec", "sample_grf", "subsample", "empirical_spectral_slope"]


@dataclass(frozen=True)
class GrfSpec:
    """Sampling law for one random field.

    s: target regularity exponent (> 0); the sample is H^{s-}.
    d: spatial dimension (1 or 2).
    n_ref: master resolution, a power of two.
    tau: inverse length scale (> 0).
    amp: expected L2 norm of the field (0 gives the zero field).
    seed: 64-bit integer.
    """

    s: float
    d: int
    n_ref: int
    tau: float = 3.0
    amp: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"regularity exponent must be positive, got {self.s}")
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        n = self.n_ref
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"master resolution must be a power of two >= 2, got {n}")
        if self.tau <= 0:
            raise ValueError(f"inverse length scale must be positive, got {self.tau}")
        if self.amp < 0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amp}")


def _multiplier(spec: GrfSpec) -> np.ndarray:
    """Spectral multiplier, normalized so E ||field||_L2^2 = amp^2."""
    k2 = mode_norm2_grid(spec.n_ref, spec.d)
    m = (spec.tau**2 + k2) ** (-(spec.s + spec.d / 2) / 2.0)
    flat = m.reshape(-1)
    flat[0] = 0.0  # mean-zero field
    total = float(np.sum(m**2))
    if total > 0:
        m = m * (spec.amp / np.sqrt(total))
    return m


def sample_grf(spec: GrfSpec) -> GridField:
    """Draw one real field at the master resolution.

    Equal seeds give bit-identical fields.  The white noise is Hermitian by
    construction (it is the transform of real grid noise), so the inverse
    transform is exactly real up to round-off.
    """
    n, d = spec.n_ref, spec.d
    rng = generator(spec.seed)
    white = rng.standard_normal((n,) * d)
    # xi(k) = FFT(white)/N^{d/2}: unit-variance complex Gaussian, Hermitian,
    # real at self-conjugate bins.
    xi = _fft.fftn(white) / float(n ** (d / 2))
    coeffs = _multiplier(spec) * xi
    values = _fft.ifftn(coeffs) * float(n**d)
    return GridField(_assert_real(values)[..., None])


def subsample(f: GridField, n_coarse: int) -> GridField:
    """Pointwise restriction to the nested coarse grid x = n/N (no smoothing)."""
    if n_coarse < 1 or f.n_grid % n_coarse != 0:
        raise GridNestingError(
            f"coarse grid {n_coarse} must divide the source grid {f.n_grid}"
        )
    step = f.n_grid // n_coarse
    if f.d == 1:
        return GridField(f.values[::step].copy())
    return GridField(f.values[::step, ::step].copy())


def _dyadic_shells(n: int, d: int) -> list[np.ndarray]:
    """Flat bin-index sets for shells 2^j <= |k| < 2^{j+1}, complete shells only.

    A shell is complete when its upper edge stays within the Nyquist ball of
    the grid; the last complete shell (top octave) is dropped by the caller.
    """
    k2 = mode_norm2_grid(n, d).reshape(-1)
    absk = np.sqrt(k2)
    shells = []
    j = 0
    while 2 ** (j + 1) <= n // 2:
        lo, hi = 2.0**j, 2.0 ** (j + 1)
        idx = np.nonzero((absk >= lo) & (absk < hi))[0]
        if idx.size:
            shells.append(idx)
        j += 1
    return shells


def empirical_spectral_slope(f: GridField) -> float:
    """Log-log decay rate of the power spectrum over dyadic shells.

    Fits least squares of log(shell-averaged |c(k)|^2) against log|k|, with
    each shell represented by the geometric mean of its mode magnitudes;
    k = 0 and the top octave are excluded.  For the sampling law above the
    expected slope is -2(s + d/2).
    """
    power = np.sum(np.abs(dft(f).coeffs) ** 2, axis=-1).reshape(-1)
    if not np.any(power > 0):
        raise ValueError("spectral slope of the zero field is undefined")
    shells = _dyadic_shells(f.n_grid, f.d)[:-1]
    if len(shells) < 3:
        raise ValueError(
            f"grid {f.n_grid} too coarse for a slope fit (need >= 3 complete shells)"
        )
    shells = [idx for idx in shells if np.mean(power[idx]) > 0]
    if len(shells) < 3:
        raise ValueError("too few shells with nonzero power for a slope fit")
    absk = np.sqrt(mode_norm2_grid(f.n_grid, f.d).reshape(-1))
    xs = np.array([np.mean(np.log(absk[idx])) for idx in shells])
    ys = np.array([np.log(np.mean(power[idx])) for idx in shells])
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)
