"""Pseudo-spectral time integration of incompressible resistive MHD.

    du/dt + (u.grad)u = (b.grad)b - grad P + nu lap u
    db/dt + (u.grad)b = (b.grad)u + eta lap b,    div u = div b = 0

The nonlinear terms are formed in divergence form,

    du_i = -d_j(u_j u_i - b_j b_i),    db_i = d_j(u_i b_j - b_i u_j),

with the pressure removed by Leray projection. Diffusion is treated
exactly by an integrating factor (IFRK4) or by exponential time
differencing (ETDRK4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from . import spectral as sp
from .errors import CflError, NumericalError
from .spectral import Grid, NormSeries, SpectralField

INTEGRATORS = ("IFRK4", "ETDRK4")


@dataclass(frozen=True)
class MhdParams:
    nu: float
    eta: float
    dt: float
    t_end: float
    dealias: bool = True
    integrator: str = "IFRK4"
    freeze_velocity: bool = False
    norm_order: int = 3

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")


@dataclass(frozen=True)
class MhdState:
    t: float
    u: SpectralField
    b: SpectralField

    def __post_init__(self):
        if self.u.grid != self.b.grid:
            raise ValueError("u and b live on different grids")
        if self.u.is_scalar or self.b.is_scalar:
            raise ValueError("u and b must be vector fields")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def magnetic_only(cls, b: SpectralField, t: float = 0.0) -> "MhdState":
        return cls(t, sp.zeros(b.grid), b)

    def energy(self) -> float:
        return 0.5 * (sp.sobolev_norm(self.u, 0) ** 2 + sp.sobolev_norm(self.b, 0) ** 2)


@dataclass
class EnergyLedger:
    """Per-step energy and dissipation records."""

    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    viscous: list[float] = field(default_factory=list)
    ohmic: list[float] = field(default_factory=list)
    dissipated: list[float] = field(default_factory=list)
    gamma: float = 1.0

    def record(self, state: MhdState, params: MhdParams):
        du = params.nu * sp.seminorm(state.u, 1) ** 2
        db = params.eta * sp.seminorm(state.b, 1) ** 2
        if self.times:
            rate = self.viscous[-1] + self.ohmic[-1]
            total = self.dissipated[-1] + 0.5 * (state.t - self.times[-1]) * (rate + du + db)
        else:
            total = 0.0
            self.gamma = 1.0 + sp.sobolev_norm(state.u, 0) ** 2 + sp.sobolev_norm(state.b, 0) ** 2
        self.times.append(state.t)
        self.energy.append(state.energy())
        self.viscous.append(du)
        self.ohmic.append(db)
        self.dissipated.append(total)

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        e = np.asarray(self.energy)
        return bool(np.all(np.diff(e) <= rtol * max(e[0] if e.size else 0.0, 1e-300)))

    def rows(self):
        return list(zip(self.times, self.energy, self.viscous, self.ohmic, self.dissipated))


def gamma_tilde(u0: SpectralField, b0: SpectralField, v0: SpectralField, h0: SpectralField) -> float:
    return 1.0 + sum(sp.sobolev_norm(f, 0) ** 2 for f in (u0, b0, v0, h0))


@dataclass
class RunRecord:
    params: MhdParams
    snapshots: list[MhdState]
    ledger: EnergyLedger
    norms: NormSeries
    steps: int = 0

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.snapshots]

    def at(self, t: float, tol: float = 1e-12) -> MhdState:
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")

    @property
    def final(self) -> MhdState:
        return self.snapshots[-1]


# --- nonlinear terms ------------------------------------------------------


@lru_cache(maxsize=16)
def _mirror_index(shape):
    """Index arrays mapping the upper half of the last axis to conj(c(-k))."""
    n = shape[-1]
    idx = []
    for axis, m in enumerate(shape[:-1]):
        sh = [1] * len(shape)
        sh[axis] = m
        idx.append(((-np.arange(m)) % m).reshape(sh))
    last = [1] * len(shape)
    last[-1] = n - n // 2 - 1
    idx.append((n - np.arange(n // 2 + 1, n)).reshape(last))
    return tuple(idx)


class _HalfSpectrum:
    """Real-FFT layout of a grid: the last axis keeps k >= 0 only."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.shape = grid.shape
        self.nh = grid.shape[-1] // 2 + 1
        cut = (Ellipsis, slice(0, self.nh))
        self.ks = tuple(np.asarray(k)[cut] for k in grid.wavenumbers)
        self.k2 = grid.k2[cut]
        self.dealias = grid.dealias_mask[cut]
        self.axes = tuple(range(1, grid.dim + 1))

    def half(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[..., : self.nh])

    def full(self, half: np.ndarray) -> np.ndarray:
        out = np.empty(half.shape[:1] + self.shape, complex)
        out[..., : self.nh] = half
        out[..., self.nh:] = np.conj(half[(Ellipsis,) + _mirror_index(self.shape)])
        return out

    def inv(self, half: np.ndarray) -> np.ndarray:
        return sfft.irfftn(half, s=self.shape, axes=self.axes, norm="forward", workers=sp.fft_workers())

    def fwd(self, x: np.ndarray) -> np.ndarray:
        return sfft.rfftn(x, axes=self.axes, norm="forward", workers=sp.fft_workers())


@lru_cache(maxsize=16)
def _layout(grid: Grid) -> _HalfSpectrum:
    return _HalfSpectrum(grid)


def _nonlinear(uc: np.ndarray, bc: np.ndarray, hs: _HalfSpectrum, dealias: bool, freeze_u: bool):
    """Half-spectrum right-hand sides (du, db) of the quadratic terms."""
    d = hs.grid.dim
    if dealias:
        uc = uc * hs.dealias
        bc = bc * hs.dealias
    u = hs.inv(uc)
    b = hs.inv(bc)
    ks = hs.ks
    db = np.zeros_like(uc)
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    emf = hs.fwd(np.array([u[i] * b[j] - b[i] * u[j] for i, j in pairs]))
    for p, (i, j) in enumerate(pairs):
        # db_i += d_j E_ij and db_j += d_i E_ji = -d_i E_ij
        db[i] += 1j * ks[j] * emf[p]
        db[j] -= 1j * ks[i] * emf[p]
    if freeze_u:
        du = np.zeros_like(uc)
    else:
        sym = [(i, j) for i in range(d) for j in range(i, d)]
        stress = hs.fwd(np.array([u[i] * u[j] - b[i] * b[j] for i, j in sym]))
        du = np.zeros_like(uc)
        for p, (i, j) in enumerate(sym):
            du[i] -= 1j * ks[j] * stress[p]
            if i != j:
                du[j] -= 1j * ks[i] * stress[p]
        k2 = hs.k2.copy()
        k2[(0,) * d] = 1.0
        kdot = sum(du[i] * ks[i] for i in range(d)) / k2
        for i in range(d):
            du[i] -= ks[i] * kdot
    if dealias:
        du *= hs.dealias
        db *= hs.dealias
    return du, db


def _pad(f: SpectralField, factor: int = 2) -> SpectralField:
    return sp.resample(f, Grid(tuple(factor * n for n in f.grid.modes)))


def exact_rhs(state: MhdState, params: MhdParams) -> tuple[SpectralField, SpectralField]:
    """Time derivatives (du/dt, db/dt) with alias-free products, on a 2x grid."""
    u, b = _pad(state.u), _pad(state.b)
    g = u.grid
    hs = _layout(g)
    du, db = _nonlinear(hs.half(u.coeffs), hs.half(b.coeffs), hs, False, params.freeze_velocity)
    du, db = hs.full(du), hs.full(db)
    if not params.freeze_velocity:
        du = du - params.nu * g.k2 * u.coeffs
    db = db - params.eta * g.k2 * b.coeffs
    mask = g.nyquist_mask
    return SpectralField(g, du * mask), SpectralField(g, db * mask)


# --- integrators -------------------------------------------------------------


def _etd_coefficients(lin: np.ndarray, dt: float, contour: int = 32):
    """Kassam-Trefethen contour averages for ETDRK4 at every entry of ``lin``."""
    r = np.exp(1j * np.pi * (np.arange(1, contour + 1) - 0.5) / contour)
    lr = dt * lin[..., None] + r
    e = np.exp(lr)
    q = dt * np.real(np.mean((np.exp(lr / 2) - 1) / lr, axis=-1))
    f1 = dt * np.real(np.mean((-4 - lr + e * (4 - 3 * lr + lr**2)) / lr**3, axis=-1))
    f2 = dt * np.real(np.mean((2 + lr + e * (lr - 2)) / lr**3, axis=-1))
    f3 = dt * np.real(np.mean((-4 - 3 * lr - lr**2 + e * (4 - lr)) / lr**3, axis=-1))
    return q, f1, f2, f3


class _Stepper:
    """Advances packed half-spectrum (u, b) arrays; caches exponentials per dt."""

    def __init__(self, grid: Grid, params: MhdParams):
        self.grid = grid
        self.params = params
        self.hs = _layout(grid)
        nu = 0.0 if params.freeze_velocity else params.nu
        self.lin = np.stack([-nu * self.hs.k2, -params.eta * self.hs.k2])
        self._cache: dict[float, tuple] = {}

    def rhs(self, y):
        d = self.grid.dim
        du, db = _nonlinear(y[:d], y[d:], self.hs, self.params.dealias, self.params.freeze_velocity)
        return np.concatenate([du, db])

    def _expand(self, a):
        d = self.grid.dim
        shape = (d,) + a.shape[1:]
        return np.concatenate([np.broadcast_to(a[0], shape), np.broadcast_to(a[1], shape)])

    def coefficients(self, dt):
        if dt not in self._cache:
            if len(self._cache) > 8:
                self._cache.clear()
            e = self._expand(np.exp(self.lin * dt))
            e2 = self._expand(np.exp(self.lin * dt / 2))
            if self.params.integrator == "ETDRK4":
                extra = tuple(self._expand(a) for a in _etd_coefficients(self.lin, dt))
            else:
                extra = ()
            self._cache[dt] = (e, e2) + extra
        return self._cache[dt]

    def advance(self, y, dt):
        co = self.coefficients(dt)
        e, e2 = co[:2]
        n = self.rhs
        if self.params.integrator == "IFRK4":
            a = dt * n(y)
            b = dt * n(e2 * (y + a / 2))
            c = dt * n(e2 * y + b / 2)
            d = dt * n(e * y + e2 * c)
            return e * y + (e * a + 2 * e2 * (b + c) + d) / 6
        q, f1, f2, f3 = co[2:]
        ny = n(y)
        a = e2 * y + q * ny
        na = n(a)
        b = e2 * y + q * na
        nb = n(b)
        c = e2 * a + q * (2 * nb - ny)
        nc = n(c)
        return e * y + ny * f1 + 2 * (na + nb) * f2 + nc * f3

    def cfl(self, y) -> float:
        d = self.grid.dim
        vals = self.hs.inv(y)
        speed = max(float(np.sqrt(np.max(np.sum(vals[:d] ** 2, axis=0)))),
                    float(np.sqrt(np.max(np.sum(vals[d:] ** 2, axis=0)))))
        return math.inf if speed == 0 else 0.5 * min(self.grid.spacing) / speed

    def pack(self, state: MhdState) -> np.ndarray:
        return self.hs.half(np.concatenate([state.u.coeffs, state.b.coeffs]))

    def unpack(self, y: np.ndarray, t: float) -> MhdState:
        d = self.grid.dim
        full = self.hs.full(y) * self.grid.nyquist_mask
        full[(slice(None),) + (0,) * d] = 0.0
        u = SpectralField(self.grid, full[:d], divergence_free=True, zero_mean=True)
        b = SpectralField(self.grid, full[d:], divergence_free=True, zero_mean=True)
        return MhdState(t, u, b)


def cfl_bound(state: MhdState) -> float:
    """0.5 * dx / max(|u|, |b|); infinite for the zero state."""
    speed = 0.0
    for f in (state.u, state.b):
        vals = sp.to_physical(f)
        speed = max(speed, float(np.sqrt(np.max(np.sum(vals**2, axis=0)))))
    return math.inf if speed == 0 else 0.5 * min(state.grid.spacing) / speed


def _check_health(y: np.ndarray, t_prev: float):
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite coefficients", t_prev)


def step(state: MhdState, params: MhdParams, dt: float | None = None) -> MhdState:
    """Advance by ``dt`` (default ``params.dt``); raises CflError above the bound."""
    dt = params.dt if dt is None else dt
    bound = cfl_bound(state)
    if dt > bound * (1 + 1e-12):
        raise CflError(dt, bound)
    stepper = _Stepper(state.grid, params)
    y = stepper.advance(stepper.pack(state), dt)
    _check_health(y, state.t)
    return stepper.unpack(y, state.t + dt)


def _record_norms(series: NormSeries, state: MhdState, r: int):
    entries = sp.sobolev_profile("u", state.u, r)
    entries.update(sp.sobolev_profile("b", state.b, r))
    series.append(state.t, entries)


def _state_div(f: SpectralField, state: MhdState) -> float:
    """max |k . c| of one field relative to the largest coefficient of the state.

    A field that is pure roundoff next to an O(1) partner would otherwise
    report an O(1) relative divergence.
    """
    scale = max(state.u.max_abs(), state.b.max_abs(), 1e-300)
    return sp.divergence_error(f) * max(f.max_abs(), 1e-14) / scale


def evolve(state: MhdState, params: MhdParams, snapshot_times: Sequence[float] | None = None,
           div_tol: float = 1e-10, callback: Callable[[MhdState], None] | None = None) -> RunRecord:
    """Integrate from ``state.t`` to ``params.t_end``.

    Steps are uniform inside each interval between consecutive snapshot
    times, with size min(params.dt, CFL bound) rounded down to divide the
    interval; the bound is re-checked every step.
    """
    t0, t_end = state.t, params.t_end
    times = sorted(set([t0] + [float(t) for t in (snapshot_times or [])] + [t_end]))
    if times[0] < t0 - 1e-14 or times[-1] > t_end + 1e-14:
        raise ValueError(f"snapshot times must lie in [{t0}, {t_end}]")
    if params.freeze_velocity and state.u.max_abs() > 0:
        raise ValueError("freeze_velocity expects u = 0")
    for f, name in ((state.u, "u"), (state.b, "b")):
        if not np.all(np.isfinite(f.coeffs)):
            raise NumericalError(f"initial {name} has non-finite values", None)
        if _state_div(f, state) > div_tol:
            raise ValueError(f"initial {name} is not divergence-free ({_state_div(f, state):.2e})")
    # Per-mode projection strips roundoff-level compressive parts; left in,
    # slowly decaying low modes would dominate the relative check later.
    initial = state
    state = MhdState(state.t, sp.leray_project(state.u), sp.leray_project(state.b))
    stepper = _Stepper(state.grid, params)
    ledger = EnergyLedger()
    norms = NormSeries()
    ledger.record(initial, params)
    _record_norms(norms, initial, params.norm_order)
    snaps = [initial]
    steps = 0
    current = state
    y = stepper.pack(state)
    for target in times[1:]:
        while target - current.t > 1e-14 * max(1.0, abs(target)):
            remaining = target - current.t
            h = min(params.dt, stepper.cfl(y))
            count = max(1, math.ceil(remaining / h - 1e-9))
            h = remaining / count
            for i in range(count):
                if i and h > stepper.cfl(y) * (1 + 1e-12):
                    break
                y_new = stepper.advance(y, h)
                _check_health(y_new, current.t)
                t_new = target if i == count - 1 else current.t + h
                current = stepper.unpack(y_new, t_new)
                y = stepper.pack(current)
                steps += 1
                for f, name in ((current.u, "u"), (current.b, "b")):
                    if _state_div(f, current) > div_tol:
                        raise NumericalError(f"div {name} drifted to {_state_div(f, current):.2e}", current.t)
                ledger.record(current, params)
                _record_norms(norms, current, params.norm_order)
                if callback:
                    callback(current)
        snaps.append(current)
    return RunRecord(params, snaps, ledger, norms, steps)


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class ResidualSeries:
    times: np.ndarray
    residual: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0


def energy_identity_residual(ledger: EnergyLedger) -> ResidualSeries:
    """|dE/dt + nu |grad u|^2 + eta |grad b|^2| with centered differences."""
    if len(ledger.times) < 3:
        raise ValueError("energy residual needs at least 3 records")
    t = np.asarray(ledger.times)
    e = np.asarray(ledger.energy)
    dis = np.asarray(ledger.viscous) + np.asarray(ledger.ohmic)
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    return ResidualSeries(t[1:-1], np.abs(dedt + dis[1:-1]))


def recover_pressure(state: MhdState, params: MhdParams | None = None) -> SpectralField:
    """P = lap^-1 div((b.grad)b - (u.grad)u), zero-mean gauge.

    Products are formed on a 2x grid and the result truncated to the
    state's grid.
    """
    u, b = _pad(state.u), _pad(state.b)
    g = u.grid
    d = g.dim
    up, bp = sp.to_physical(u), sp.to_physical(b)
    ks = g.wavenumbers
    # div((b.grad)b - (u.grad)u) = d_i d_j (b_i b_j - u_i u_j)
    src = np.zeros(g.shape, complex)
    for i in range(d):
        for j in range(d):
            src -= ks[i] * ks[j] * sp.to_spectral(bp[i] * bp[j] - up[i] * up[j], g).coeffs[0]
    src[(0,) * d] = 0.0
    p = sp.invert_laplacian(SpectralField(g, src, zero_mean=True))
    return sp.resample(p, state.grid)


@dataclass(frozen=True)
class DuhamelReport:
    """Norms of the linear part e^{eta t lap} h0 and the remainder D."""

    series: NormSeries
    order: int

    def remainder(self, t: float | None = None) -> float:
        arr = self.series.array(f"D_H{self.order}")
        if t is None:
            return float(arr[-1])
        return float(arr[int(np.argmin(np.abs(np.asarray(self.series.times) - t)))])


def duhamel_decompose(run: RunRecord, h0: SpectralField, reference: Callable[[float], SpectralField],
                      r: int = 3) -> DuhamelReport:
    """Split h = b - reference into e^{eta t lap} h0 and the remainder D."""
    eta = run.params.eta
    series = NormSeries()
    for s in run.snapshots:
        if s.grid != h0.grid:
            raise ValueError("h0 and the run live on different grids")
        h = s.b - reference(s.t)
        lin = sp.heat_evolve(h0, eta, s.t - run.snapshots[0].t)
        entries = sp.sobolev_profile("lin", lin, r)
        entries.update(sp.sobolev_profile("D", h - lin, r))
        series.append(s.t, entries)
    return DuhamelReport(series, r)


def difference_norms(run_a: RunRecord, run_b: RunRecord, r: int = 3) -> NormSeries:
    """H^0..H^r norms of v = u_A - u_B and h = b_A - b_B at shared snapshot times."""
    ta, tb = run_a.times, run_b.times
    if len(ta) != len(tb) or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("runs have different snapshot schedules")
    series = NormSeries()
    for a, b in zip(run_a.snapshots, run_b.snapshots):
        entries = sp.sobolev_profile("v", a.u - b.u, r)
        entries.update(sp.sobolev_profile("h", a.b - b.b, r))
        series.append(a.t, entries)
    return series


def induction_gauge_residual(state: MhdState, params: MhdParams) -> float:
    """max |g - mean g| with g = d_t psi + u.grad psi - eta lap psi (2-D).

    The 2-D induction equation says g is spatially constant; everything is
    evaluated on a 2x grid so that the check is exact up to roundoff.
    """
    if state.grid.dim != 2:
        raise ValueError("induction gauge residual is defined in 2-D only")
    _, db = exact_rhs(state, params)
    b = _pad(state.b)
    u = _pad(state.u)
    g = b.grid
    psi = sp.invert_laplacian(-sp.curl(b))
    psi_t = sp.invert_laplacian(-sp.curl(db.with_coeffs(db.coeffs, zero_mean=True)))
    grad = sp.to_physical(sp.gradient(psi))
    adv = np.sum(sp.to_physical(u) * grad, axis=0)
    gauge = sp.to_physical(psi_t)[0] + adv - params.eta * sp.to_physical(sp.laplacian(psi))[0]
    return float(np.max(np.abs(gauge - gauge.mean())))


def linearized_rhs(state: MhdState, params: MhdParams) -> SpectralField:
    """First-order coefficient of b: eta lap b0 - (u0.grad)b0 + (b0.grad)u0, on a 2x grid."""
    return exact_rhs(state, params)[1]
