"""Explicit fields: Taylor and Beltrami eigenfields, sheared data, random velocities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spectral as sp
from .errors import ResolutionError
from .spectral import TWO_PI, Grid, SpectralField


@dataclass(frozen=True)
class TaylorSpec:
    """One member of the Taylor families.

    With ``m >= 1`` this is V^family_{nm}; with ``m == 0`` it is the
    single-direction family V^family_n, e.g. (sin n x2, 0) for family 1.
    """

    n: int
    m: int
    family: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError("Taylor fields need n >= 1 and m >= 0")
        if self.family not in (1, 2, 3, 4):
            raise ValueError(f"family must be 1..4, got {self.family}")

    @property
    def eigenvalue(self) -> int:
        return self.n**2 + self.m**2

    @property
    def frequency(self) -> float:
        return math.sqrt(self.eigenvalue)


@dataclass(frozen=True)
class BeltramiSpec:
    """Finite sum of curl eigenmodes with |k| = |frequency| and k.b_k = 0."""

    frequency: int
    modes: tuple = ()
    amplitude: float = 1.0

    def __post_init__(self):
        if self.frequency == 0:
            raise ValueError("Beltrami frequency must be nonzero")
        clean = []
        for k, b in self.modes:
            k = tuple(int(v) for v in k)
            b = tuple(float(v) for v in b)
            if len(k) != 3 or len(b) != 3:
                raise ValueError("Beltrami modes need 3-vectors")
            if sum(v * v for v in k) != self.frequency**2:
                raise ValueError(f"|k|^2 = {sum(v * v for v in k)} differs from N0^2 = {self.frequency**2}")
            if abs(np.dot(k, b)) > 1e-12 * max(1.0, np.linalg.norm(b)):
                raise ValueError(f"b_k = {b} is not orthogonal to k = {k}")
            clean.append((k, b))
        object.__setattr__(self, "modes", tuple(clean))

    @classmethod
    def b0(cls, n0: int, amplitude: float = TWO_PI**-1.5) -> "BeltramiSpec":
        """(sin N0 x3, cos N0 x3, 0) scaled by ``amplitude``."""
        return cls(n0, (((0, 0, n0), (0.0, 1.0, 0.0)),), amplitude)


def periodic_shear_profile(x):
    """Periodic stand-in for g(x) = x: equal value and slope at x = 0 and x = pi."""
    return 0.5 * np.pi * (1.0 - np.cos(x)) + 0.5 * np.sin(2.0 * x)


def periodic_shear_slope(x):
    return 0.5 * np.pi * np.sin(x) + np.cos(2.0 * x)


@dataclass(frozen=True)
class ShearSpec:
    """Volume-preserving shear.

    2-D: (x1, x2) -> (x1, x2 - eps * g(x1)), with g the periodic profile
    (``profile='periodic'``) or g(x) = x (``'linear'``, a torus map only
    for integer eps). 3-D: x -> (x1, x2, x3 + eps * cos(p x1 - q x2)).
    """

    eps: float
    dim: int = 2
    p: int = 1
    q: int = 1
    profile: str = "periodic"

    def __post_init__(self):
        if abs(self.eps) >= 1 and not (self.profile == "linear" and float(self.eps).is_integer()):
            raise ValueError("shear amplitude must satisfy |eps| < 1")
        if self.dim not in (2, 3):
            raise ValueError("shear dimension must be 2 or 3")
        if self.profile not in ("periodic", "linear"):
            raise ValueError(f"unknown shear profile {self.profile!r}")
        if self.profile == "linear" and not float(self.eps).is_integer():
            raise ValueError("linear shear is periodic only for integer eps; use profile='periodic'")
        if self.dim == 3 and math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p={self.p}, q={self.q} must be coprime")

    def g(self, x1):
        return x1 if self.profile == "linear" else periodic_shear_profile(x1)

    def dg(self, x1):
        return np.ones_like(x1) if self.profile == "linear" else periodic_shear_slope(x1)

    def h(self, x1, x2):
        return np.cos(self.p * x1 - self.q * x2)

    def dh(self, x1, x2):
        s = np.sin(self.p * x1 - self.q * x2)
        return -self.p * s, self.q * s

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Phi(x) for points of shape (..., dim)."""
        out = np.array(pts, dtype=float, copy=True)
        if self.dim == 2:
            out[..., 1] -= self.eps * self.g(pts[..., 0])
        else:
            out[..., 2] += self.eps * self.h(pts[..., 0], pts[..., 1])
        return out


@dataclass(frozen=True)
class DatumSpec:
    """Parameters for one of the scenario initial data."""

    kind: str
    M: float = 1.0
    delta: float = 0.0
    L: int = 2
    c: float = 0.1
    taylor: TaylorSpec | None = None
    beltrami: BeltramiSpec | None = None
    shear: ShearSpec | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("reconnect2d", "viscous2d", "instant2d", "instant3d"):
            raise ValueError(f"unknown datum kind {self.kind!r}")
        if self.M <= 0:
            raise ValueError("M must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


def _check_resolution(grid: Grid, kmax: int):
    if grid.dim != 2:
        raise ResolutionError("Taylor fields live on 2-D grids")
    if min(grid.modes) < 4 * kmax:
        raise ResolutionError(f"grid {grid.modes} under-resolves wavenumber {kmax} (need >= {4 * kmax} points)")


def taylor_field(spec: TaylorSpec, grid: Grid) -> SpectralField:
    n, m, a = spec.n, spec.m, spec.amplitude
    _check_resolution(grid, max(n, m))
    x1, x2 = grid.points
    s1, c1 = np.sin(n * x1), np.cos(n * x1)
    if m == 0:
        zero = np.zeros(grid.shape)
        comps = {
            1: (np.sin(n * x2), zero),
            2: (np.cos(n * x2), zero),
            3: (zero, s1),
            4: (zero, c1),
        }[spec.family]
    else:
        s2, c2 = np.sin(m * x2), np.cos(m * x2)
        comps = {
            1: (m * s1 * c2, -n * c1 * s2),
            2: (m * c1 * s2, -n * s1 * c2),
            3: (m * c1 * c2, n * s1 * s2),
            4: (m * s1 * s2, n * c1 * c2),
        }[spec.family]
    return sp.to_spectral(a * np.array(comps), grid, divergence_free=True, zero_mean=True)


def taylor_stream(spec: TaylorSpec, grid: Grid) -> SpectralField:
    """Stream function psi with perp-grad psi = taylor_field(spec)."""
    n, m, a = spec.n, spec.m, spec.amplitude
    _check_resolution(grid, max(n, m))
    x1, x2 = grid.points
    if m == 0:
        psi = {
            1: -np.cos(n * x2) / n,
            2: np.sin(n * x2) / n,
            3: np.cos(n * x1) / n,
            4: -np.sin(n * x1) / n,
        }[spec.family]
    else:
        psi = {
            1: np.sin(n * x1) * np.sin(m * x2),
            2: -np.cos(n * x1) * np.cos(m * x2),
            3: np.cos(n * x1) * np.sin(m * x2),
            4: -np.sin(n * x1) * np.cos(m * x2),
        }[spec.family]
    return sp.to_spectral(a * psi, grid, zero_mean=True)


def stable_taylor_v1(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    """amplitude * (sin x2, sin(x1) / 2)."""
    if grid.dim != 2:
        raise ResolutionError("V1 lives on a 2-D grid")
    x1, x2 = grid.points
    return sp.to_spectral(amplitude * np.array([np.sin(x2), 0.5 * np.sin(x1)]), grid,
                          divergence_free=True, zero_mean=True)


def v1_stream(grid: Grid, amplitude: float = 1.0) -> SpectralField:
    x1, x2 = grid.points
    return sp.to_spectral(amplitude * (0.5 * np.cos(x1) - np.cos(x2)), grid, zero_mean=True)


def beltrami_field(spec: BeltramiSpec, grid: Grid) -> SpectralField:
    if grid.dim != 3:
        raise ResolutionError("Beltrami fields live on 3-D grids")
    kmax = max((max(abs(v) for v in k) for k, _ in spec.modes), default=0)
    if kmax >= min(grid.modes) // 2:
        raise ResolutionError(f"grid {grid.modes} cannot hold wavenumber {kmax}")
    x = np.stack(grid.points, axis=-1)
    out = np.zeros((3, *grid.shape))
    for k, b in spec.modes:
        k = np.asarray(k, float)
        b = np.asarray(b, float)
        theta = x @ k
        bxk = np.cross(b, k) / spec.frequency
        out += b[:, None, None, None] * np.cos(theta) + bxk[:, None, None, None] * np.sin(theta)
    return sp.to_spectral(spec.amplitude * out, grid, divergence_free=True, zero_mean=True)


# --- shear pullback ------------------------------------------------------


def _pullback_values(f: SpectralField, shear: ShearSpec, grid: Grid) -> np.ndarray:
    pts = np.stack(grid.points, axis=-1)
    moved = sp.as_points(shear.apply(pts))
    vals = sp.Evaluator(f)(moved.reshape(-1, grid.dim)).T.reshape(f.ncomp, *grid.shape)
    if f.is_scalar:
        return vals
    if grid.dim == 2:
        slope = shear.dg(pts[..., 0])
        vals[1] = vals[1] + shear.eps * slope * vals[0]
    else:
        h1, h2 = shear.dh(pts[..., 0], pts[..., 1])
        vals[2] = vals[2] - shear.eps * (h1 * vals[0] + h2 * vals[1])
    return vals


def shear_pullback(f: SpectralField, shear: ShearSpec, oversample: int = 2, tol: float = 1e-13) -> SpectralField:
    """(D Phi)^{-1} f(Phi(x)) for vectors, f(Phi(x)) for scalars.

    Sampled on a grid ``oversample`` times finer, transformed, and truncated
    to ``f.grid``; raises :class:`ResolutionError` when more than ``tol`` of
    the coefficient mass falls outside the target grid.
    """
    if f.dim != shear.dim:
        raise ValueError(f"{f.dim}-D field with {shear.dim}-D shear")
    fine = Grid(tuple(oversample * n for n in f.grid.modes))
    vals = _pullback_values(f, shear, fine)
    flags = dict(zero_mean=f.zero_mean, divergence_free=f.divergence_free)
    big = sp.to_spectral(vals, fine, **flags)
    out = sp.resample(big, f.grid)
    lost = np.sqrt(np.sum(np.abs((big - sp.resample(out, fine)).coeffs) ** 2))
    if lost > tol * max(np.sqrt(np.sum(np.abs(big.coeffs) ** 2)), 1e-300):
        raise ResolutionError(f"sheared spectrum not resolved on {f.grid.modes} (lost fraction {lost:.2e})")
    if f.divergence_free and not f.is_scalar:
        out = sp.leray_project(out)
    return out.with_coeffs(out.coeffs, **flags)


def instant2d_formula(pts: np.ndarray, eps: float, M: float = 1.0, shear: ShearSpec | None = None) -> np.ndarray:
    """Closed form of the sheared -V^4_11 datum at points (..., 2).

    With the linear profile this is
    M(-sin x1 sin(x2 - eps x1), -eps sin x1 sin(x2 - eps x1) - cos x1 cos(x2 - eps x1)).
    """
    shear = shear or ShearSpec(eps)
    x1, x2 = pts[..., 0], pts[..., 1]
    s = x2 - eps * shear.g(x1)
    dg = shear.dg(x1)
    first = -np.sin(x1) * np.sin(s)
    second = -eps * dg * np.sin(x1) * np.sin(s) - np.cos(x1) * np.cos(s)
    return M * np.stack([first, second], axis=-1)


def instant2d_stream_formula(pts: np.ndarray, eps: float, M: float = 1.0, shear: ShearSpec | None = None) -> np.ndarray:
    """Stream function (perp-grad convention) of :func:`instant2d_formula`."""
    shear = shear or ShearSpec(eps)
    x1, x2 = pts[..., 0], pts[..., 1]
    return M * np.sin(x1) * np.cos(x2 - eps * shear.g(x1))


def instant3d_formula(pts: np.ndarray, eps: float, M: float, p: int, q: int) -> np.ndarray:
    """M(sin(x3+eps h), cos(x3+eps h), -eps h_1 sin(.) - eps h_2 cos(.)), h = cos(p x1 - q x2)."""
    x1, x2, x3 = pts[..., 0], pts[..., 1], pts[..., 2]
    h = np.cos(p * x1 - q * x2)
    h1 = -p * np.sin(p * x1 - q * x2)
    h2 = q * np.sin(p * x1 - q * x2)
    ph = x3 + eps * h
    return M * np.stack([np.sin(ph), np.cos(ph), -eps * h1 * np.sin(ph) - eps * h2 * np.cos(ph)], axis=-1)


def instant2d_datum(grid: Grid, eps: float, M: float = 1.0, profile: str = "periodic") -> SpectralField:
    base = taylor_field(TaylorSpec(1, 1, family=4, amplitude=-M), grid)
    return shear_pullback(base, ShearSpec(eps, dim=2, profile=profile))


def instant3d_datum(grid: Grid, eps: float, M: float = 1.0, p: int = 1, q: int = 1) -> SpectralField:
    base = beltrami_field(BeltramiSpec.b0(1, amplitude=M), grid)
    return shear_pullback(base, ShearSpec(eps, dim=3, p=p, q=q))


# --- scenario data -------------------------------------------------------


def reconnection_delta(M: float, n: int, m: int, L: int, c: float) -> float:
    """delta = c M / N^(L+1) with N^2 = n^2 + m^2."""
    N = math.sqrt(n * n + m * m)
    return c * M / N ** (L + 1)


def reconnection_datum_2d(M: float, n: int, m: int, L: int, c: float, grid: Grid,
                          delta: float | None = None, normalize: bool = False):
    """(M/N) V_N + delta V1 with V_N = V^1_{nm}; returns (field, delta).

    ``normalize`` rescales the result to L2 norm M (the topology is unchanged).
    """
    if delta is None:
        if not 0 < c < 1:
            raise ValueError("c must lie in (0, 1)")
        if L < 2:
            raise ValueError("L must be >= 2")
        delta = reconnection_delta(M, n, m, L, c)
        if delta < 1e-12 * M:
            raise ValueError(f"delta = {delta:.3e} underflows; L={L} is too large at this scale")
    N = math.sqrt(n * n + m * m)
    field_ = taylor_field(TaylorSpec(n, m, 1, M / N), grid)
    if delta:
        field_ = field_ + stable_taylor_v1(grid, delta)
    if normalize:
        field_ = field_ * (M / sp.sobolev_norm(field_, 0))
    return field_, delta


def random_velocity(R: float, r: int, seed: int, grid: Grid, kmax: int = 8, slope: float = 3.0) -> SpectralField:
    """Random divergence-free zero-mean field with H^r norm R.

    Band-limited to |k| <= kmax; amplitudes scale as (1 + |k|^2)^(-slope).
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R == 0:
        return sp.zeros(grid)
    rng = np.random.default_rng(seed)
    kmax = min(kmax, grid.max_wavenumber())
    k2 = grid.k2
    band = (k2 <= kmax**2) & (k2 > 0) & grid.nyquist_mask
    raw = rng.standard_normal((grid.dim, *grid.shape)) + 1j * rng.standard_normal((grid.dim, *grid.shape))
    raw *= band * (1.0 + k2) ** (-slope)
    axes = tuple(range(1, grid.dim + 1))
    mirrored = np.roll(np.flip(raw, axis=axes), shift=1, axis=axes)
    sym = 0.5 * (raw + np.conj(mirrored))
    f = sp.leray_project(SpectralField(grid, sym))
    f = f * (R / sp.sobolev_norm(f, r))
    return f.with_coeffs(f.coeffs, divergence_free=True, zero_mean=True)


def random_scalar(seed: int, grid: Grid, kmax: int = 8, slope: float = 1.0) -> SpectralField:
    """Random zero-mean band-limited scalar, unit L2 norm."""
    rng = np.random.default_rng(seed)
    k2 = grid.k2
    band = (k2 <= kmax**2) & (k2 > 0) & grid.nyquist_mask
    raw = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * band * (1.0 + k2) ** (-slope)
    axes = tuple(range(grid.dim))
    mirrored = np.roll(np.flip(raw, axis=axes), shift=1, axis=axes)
    f = SpectralField(grid, 0.5 * (raw + np.conj(mirrored)), zero_mean=True)
    return f / sp.sobolev_norm(f, 0)


def lattice_points(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Hyperbolic points x* and elliptic points x-bar of V^1_{nm} in [0, 2 pi)^2."""
    k1 = np.arange(2 * n)
    k2 = np.arange(2 * m)
    a, b = np.meshgrid(k1, k2, indexing="ij")
    saddles = np.stack([a.ravel() * np.pi / n, b.ravel() * np.pi / m], axis=1)
    centers = np.stack([np.pi / (2 * n) + a.ravel() * np.pi / n, np.pi / (2 * m) + b.ravel() * np.pi / m], axis=1)
    return np.mod(saddles, TWO_PI), np.mod(centers, TWO_PI)


def sup_norm(f: SpectralField) -> float:
    vals = sp.to_physical(f)
    return float(np.max(np.sqrt(np.sum(vals**2, axis=0))))


def v_n_sup_scaling(pairs: Sequence[tuple[int, int]], grid: Grid) -> list[tuple[float, float]]:
    """(N, max |V^1_{nm}|) over a list of (n, m); grows like N."""
    return [(math.sqrt(n * n + m * m), sup_norm(taylor_field(TaylorSpec(n, m), grid))) for n, m in pairs]
