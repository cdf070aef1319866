"""Fourier representation of periodic fields on the torus [0, 2*pi)^d.

A field is stored as its full (not half) complex coefficient array, with

    f(x) = sum_k c(k) exp(i k.x),    c = fftn(samples) / prod(modes),

so that the L2 integral over the torus is (2*pi)^d * sum |c(k)|^2.
The Nyquist plane (index modes/2 on any axis) is always kept at zero, so
every stored coefficient has |k_i| < modes_i / 2 and conjugate symmetry
is exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridError

TWO_PI = 2.0 * np.pi


def fft_workers() -> int:
    """Thread count for transforms, capped by ``MHDLAB_THREADS``."""
    value = os.environ.get("MHDLAB_THREADS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform collocation grid, period 2*pi on every axis."""

    modes: tuple[int, ...]

    def __post_init__(self):
        modes = tuple(int(n) for n in self.modes)
        object.__setattr__(self, "modes", modes)
        if len(modes) not in (2, 3):
            raise GridError(f"dimension must be 2 or 3, got {len(modes)}")
        for n in modes:
            if n < 8 or n % 2:
                raise GridError(f"modes per axis must be even and >= 8, got {n}")

    @classmethod
    def square(cls, n: int, dim: int = 2) -> "Grid":
        return cls((n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.modes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.modes

    @property
    def size(self) -> int:
        return int(np.prod(self.modes))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(TWO_PI / n for n in self.modes)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(TWO_PI * np.arange(n) / n for n in self.modes)

    @cached_property
    def points(self) -> tuple[np.ndarray, ...]:
        """Physical sample coordinates, one array per axis, ``indexing='ij'``."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, shaped to broadcast against coefficients."""
        ks = []
        for axis, n in enumerate(self.modes):
            k = np.fft.fftfreq(n, 1.0 / n)
            shape = [1] * self.dim
            shape[axis] = n
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on coefficients that may be nonzero (Nyquist planes excluded)."""
        keep = np.ones(self.shape, dtype=bool)
        for k, n in zip(self.wavenumbers, self.modes):
            keep &= np.abs(k) < n // 2
        return keep

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: |k_i| <= (n_i - 1) // 3 on every axis."""
        keep = np.ones(self.shape, dtype=bool)
        for k, n in zip(self.wavenumbers, self.modes):
            keep &= np.abs(k) <= (n - 1) // 3
        return keep

    def max_wavenumber(self) -> int:
        return min(self.modes) // 2 - 1


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar or vector field.

    ``coeffs`` has shape ``(ncomp, *grid.modes)``; ``ncomp`` is 1 for a
    scalar and ``grid.dim`` for a vector field. The flags record what the
    constructor claims; :func:`check_flags` verifies them.
    """

    grid: Grid
    coeffs: np.ndarray
    divergence_free: bool = False
    zero_mean: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == self.grid.dim:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise GridError(f"coefficient shape {c.shape[1:]} does not match grid {self.grid.shape}")
        if c.shape[0] not in (1, self.grid.dim):
            raise GridError(f"expected 1 or {self.grid.dim} components, got {c.shape[0]}")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.ncomp == 1

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_coeffs(self, coeffs, **flags) -> "SpectralField":
        opts = dict(divergence_free=self.divergence_free, zero_mean=self.zero_mean)
        opts.update(flags)
        return SpectralField(self.grid, coeffs, **opts)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_layout(self, other)
        return SpectralField(
            self.grid,
            self.coeffs + other.coeffs,
            divergence_free=self.divergence_free and other.divergence_free,
            zero_mean=self.zero_mean and other.zero_mean,
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-other)

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs / float(scalar))


def _same_layout(a: SpectralField, b: SpectralField):
    if a.grid != b.grid or a.ncomp != b.ncomp:
        raise GridError("fields live on different grids or have different ranks")


def zeros(grid: Grid, ncomp: int | None = None) -> SpectralField:
    n = grid.dim if ncomp is None else ncomp
    return SpectralField(grid, np.zeros((n, *grid.shape), complex), divergence_free=True, zero_mean=True)


# --- transforms -----------------------------------------------------------


def to_physical(f: SpectralField) -> np.ndarray:
    """Real samples, shape ``(ncomp, *modes)``."""
    axes = tuple(range(1, f.dim + 1))
    values = sfft.ifftn(f.coeffs, axes=axes, norm="forward", workers=fft_workers())
    return values.real.copy()


def to_spectral(samples, grid: Grid, **flags) -> SpectralField:
    """Coefficients of real samples; Nyquist content is discarded."""
    data = np.asarray(samples, dtype=float)
    if data.shape == grid.shape:
        data = data[None]
    if data.shape[1:] != grid.shape:
        raise GridError(f"sample shape {data.shape[1:]} does not match grid {grid.shape}")
    axes = tuple(range(1, grid.dim + 1))
    c = sfft.fftn(data, axes=axes, norm="forward", workers=fft_workers())
    c = c * grid.nyquist_mask
    if flags.get("zero_mean"):
        c[(slice(None),) + (0,) * grid.dim] = 0.0
    return SpectralField(grid, c, **flags)


def from_function(func, grid: Grid, **flags) -> SpectralField:
    """Sample ``func(*points) -> sequence of component arrays`` and transform."""
    values = func(*grid.points)
    if isinstance(values, (list, tuple)):
        arr = np.array([np.broadcast_to(np.asarray(v, float), grid.shape) for v in values])
    else:
        arr = np.asarray(values, float)
    return to_spectral(arr, grid, **flags)


def resample(f: SpectralField, grid: Grid) -> SpectralField:
    """Zero-pad or truncate coefficients onto another grid of the same dimension."""
    if grid.dim != f.dim:
        raise GridError("cannot resample across dimensions")
    out = np.zeros((f.ncomp, *grid.shape), complex)
    src_k = [np.fft.fftfreq(n, 1.0 / n).astype(int) for n in f.grid.modes]
    dst_k = [np.fft.fftfreq(n, 1.0 / n).astype(int) for n in grid.modes]
    sel_src, sel_dst = [], []
    for ks, kd, nd in zip(src_k, dst_k, grid.modes):
        keep = np.abs(ks) < nd // 2
        sel_src.append(np.nonzero(keep)[0])
        sel_dst.append(np.mod(ks[keep], nd))
    out[(slice(None), *np.ix_(*sel_dst))] = f.coeffs[(slice(None), *np.ix_(*sel_src))]
    out *= grid.nyquist_mask
    return f.__class__(grid, out, divergence_free=f.divergence_free, zero_mean=f.zero_mean)


# --- differential operators ---------------------------------------------


def differentiate(f: SpectralField, axis: int, order: int = 1) -> SpectralField:
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    k = f.grid.wavenumbers[axis]
    return f.with_coeffs(f.coeffs * (1j * k) ** order)


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field."""
    if not f.is_scalar:
        raise ValueError("gradient expects a scalar field")
    c = np.array([f.coeffs[0] * 1j * k for k in f.grid.wavenumbers])
    return SpectralField(f.grid, c, zero_mean=True)


def divergence(f: SpectralField) -> SpectralField:
    c = sum(f.coeffs[i] * 1j * k for i, k in enumerate(f.grid.wavenumbers))
    return SpectralField(f.grid, c, zero_mean=True)


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_coeffs(-f.grid.k2 * f.coeffs, zero_mean=True)


def invert_laplacian(f: SpectralField) -> SpectralField:
    """Solve lap(g) = f in the zero-mean gauge; f itself must be zero-mean."""
    origin = (slice(None),) + (0,) * f.dim
    scale = max(f.max_abs(), 1e-300)
    if np.max(np.abs(f.coeffs[origin])) > 1e-12 * scale:
        raise ValueError("invert_laplacian needs a zero-mean input")
    k2 = f.grid.k2.copy()
    k2[(0,) * f.dim] = 1.0
    c = -f.coeffs / k2
    c[origin] = 0.0
    return f.with_coeffs(c, zero_mean=True)


def leray_project(f: SpectralField) -> SpectralField:
    """Divergence-free part of a vector field; the mean is left untouched."""
    if f.is_scalar:
        raise ValueError("leray_project expects a vector field")
    ks = f.grid.wavenumbers
    k2 = f.grid.k2.copy()
    k2[(0,) * f.dim] = 1.0
    kdotc = sum(f.coeffs[i] * k for i, k in enumerate(ks)) / k2
    c = np.array([f.coeffs[i] - k * kdotc for i, k in enumerate(ks)])
    return f.with_coeffs(c, divergence_free=True)


def curl(f: SpectralField) -> SpectralField:
    """3-D curl, or the scalar d1 f2 - d2 f1 in 2-D."""
    if f.is_scalar:
        raise ValueError("curl expects a vector field")
    ks = f.grid.wavenumbers
    c = f.coeffs
    if f.dim == 2:
        out = 1j * ks[0] * c[1] - 1j * ks[1] * c[0]
        return SpectralField(f.grid, out, zero_mean=True)
    out = np.array([
        1j * ks[1] * c[2] - 1j * ks[2] * c[1],
        1j * ks[2] * c[0] - 1j * ks[0] * c[2],
        1j * ks[0] * c[1] - 1j * ks[1] * c[0],
    ])
    return SpectralField(f.grid, out, divergence_free=True, zero_mean=True)


def perp_gradient(psi: SpectralField) -> SpectralField:
    """(d2 psi, -d1 psi) for a 2-D scalar."""
    if not psi.is_scalar or psi.dim != 2:
        raise ValueError("perp_gradient expects a 2-D scalar field")
    k1, k2 = psi.grid.wavenumbers
    c = np.array([1j * k2 * psi.coeffs[0], -1j * k1 * psi.coeffs[0]])
    return SpectralField(psi.grid, c, divergence_free=True, zero_mean=True)


def heat_evolve(f: SpectralField, diffusivity: float, t: float) -> SpectralField:
    """Apply exp(diffusivity * t * lap)."""
    if t < 0:
        raise ValueError("heat_evolve needs t >= 0")
    if diffusivity < 0:
        raise ValueError("diffusivity must be nonnegative")
    return f.with_coeffs(f.coeffs * np.exp(-diffusivity * t * f.grid.k2))


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs * f.grid.dealias_mask)


# --- norms and checks ----------------------------------------------------


def sobolev_norm(f: SpectralField, r: int = 0) -> float:
    """sqrt(sum_{m<=r} integral |grad^m f|^2), tensor-norm convention."""
    if r < 0:
        raise ValueError("Sobolev index must be >= 0")
    k2 = f.grid.k2
    weight = sum(k2**m for m in range(r + 1))
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    return float(np.sqrt(TWO_PI**f.dim * np.sum(weight * power)))


def seminorm(f: SpectralField, m: int) -> float:
    """sqrt(integral |grad^m f|^2)."""
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    return float(np.sqrt(TWO_PI**f.dim * np.sum(f.grid.k2**m * power)))


def conjugate_symmetry_error(f: SpectralField) -> float:
    """max |c(-k) - conj(c(k))| relative to max |c|."""
    axes = tuple(range(1, f.dim + 1))
    flipped = np.roll(np.flip(f.coeffs, axis=axes), shift=1, axis=axes)
    err = float(np.max(np.abs(flipped - np.conj(f.coeffs)))) if f.coeffs.size else 0.0
    return err / max(f.max_abs(), 1e-14)


def divergence_error(f: SpectralField) -> float:
    """max |k . c(k)| relative to max |c|."""
    kdotc = sum(f.coeffs[i] * k for i, k in enumerate(f.grid.wavenumbers))
    return float(np.max(np.abs(kdotc))) / max(f.max_abs(), 1e-14)


def mean_value(f: SpectralField) -> np.ndarray:
    return f.coeffs[(slice(None),) + (0,) * f.dim].real.copy()


def check_flags(f: SpectralField, tol: float = 1e-12) -> list[str]:
    """Names of claimed properties that the coefficients violate."""
    bad = []
    if conjugate_symmetry_error(f) > 1e-13:
        bad.append("conjugate_symmetry")
    if f.zero_mean and np.any(mean_value(f) != 0.0):
        bad.append("zero_mean")
    if f.divergence_free and not f.is_scalar and divergence_error(f) > tol:
        bad.append("divergence_free")
    return bad


# --- off-grid evaluation -------------------------------------------------


@dataclass
class Evaluator:
    """Exact trigonometric-sum evaluation of a field and its Jacobian.

    Coefficients below ``prune * max|c|`` are skipped; the default keeps
    everything that is not exactly zero.
    """

    field: SpectralField
    prune: float = 0.0
    _k: np.ndarray = field(init=False, repr=False)
    _c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = self.field
        amp = np.max(np.abs(f.coeffs), axis=0)
        keep = amp > self.prune * max(f.max_abs(), 1e-300)
        idx = np.nonzero(keep)
        self._k = np.stack([np.asarray(np.broadcast_to(k, f.grid.shape))[idx] for k in f.grid.wavenumbers], axis=1)
        self._c = f.coeffs[(slice(None), *idx)]

    def _phase(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(1j * pts @ self._k.T), pts.shape[0]

    def __call__(self, x) -> np.ndarray:
        """Values at points ``x`` of shape (d,) or (P, d); returns (ncomp,) or (P, ncomp)."""
        single = np.ndim(x) == 1
        ph, _ = self._phase(x)
        vals = (ph @ self._c.T).real
        return vals[0] if single else vals

    def jacobian(self, x) -> np.ndarray:
        """d f_i / d x_j at ``x``; shape (ncomp, d) or (P, ncomp, d)."""
        single = np.ndim(x) == 1
        ph, _ = self._phase(x)
        terms = 1j * self._c[:, None, :] * self._k.T[None, :, :]
        jac = np.einsum("pm,ijm->pij", ph, terms).real
        return jac[0] if single else jac

    def value_and_jacobian(self, x):
        single = np.ndim(x) == 1
        ph, _ = self._phase(x)
        vals = (ph @ self._c.T).real
        terms = 1j * self._c[:, None, :] * self._k.T[None, :, :]
        jac = np.einsum("pm,ijm->pij", ph, terms).real
        if single:
            return vals[0], jac[0]
        return vals, jac


def evaluate_at(f: SpectralField, x) -> np.ndarray:
    return Evaluator(f)(x)


# --- time series container ----------------------------------------------


@dataclass
class NormSeries:
    """Named nonnegative scalar series sampled at increasing times."""

    times: list[float] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)

    def append(self, t: float, entries: dict[str, float]):
        if self.times and t <= self.times[-1]:
            raise ValueError("times must be strictly increasing")
        n = len(self.times)
        for label, value in entries.items():
            if value < 0 or not np.isfinite(value):
                raise ValueError(f"norm {label} must be finite and nonnegative, got {value}")
            self.values.setdefault(label, [np.nan] * n).append(float(value))
        for label, series in self.values.items():
            if len(series) == n:
                series.append(np.nan)
        self.times.append(float(t))

    def labels(self) -> list[str]:
        return list(self.values)

    def array(self, label: str) -> np.ndarray:
        return np.asarray(self.values[label], dtype=float)

    def __len__(self) -> int:
        return len(self.times)

    def rows(self) -> list[tuple[float, str, float]]:
        """(t, label, value) rows sorted by time, then label."""
        out = []
        for i, t in enumerate(self.times):
            for label in sorted(self.values):
                v = self.values[label][i]
                if np.isfinite(v):
                    out.append((t, label, v))
        return out


def sobolev_profile(prefix: str, f: SpectralField, r: int) -> dict[str, float]:
    return {f"{prefix}_H{s}": sobolev_norm(f, s) for s in range(r + 1)}


def as_points(x: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.mod(np.asarray(x, dtype=float), TWO_PI)
