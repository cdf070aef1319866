"""Critical points, field lines and separatrices of magnetic fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spectral as sp
from .spectral import TWO_PI, Evaluator, Grid, SpectralField

KINDS = ("saddle", "center", "degenerate")
BRANCHES = ("unstable+", "unstable-", "stable+", "stable-")


def torus_distance(a, b) -> np.ndarray:
    """Euclidean distance on [0, 2 pi)^d between points (broadcasting over leading axes)."""
    d = np.mod(np.asarray(a, float) - np.asarray(b, float) + np.pi, TWO_PI) - np.pi
    return np.sqrt(np.sum(d**2, axis=-1))


def classify(jacobian, tol_deg: float = 0.0) -> str:
    """saddle if det < -tol_deg, center if det > tol_deg, else degenerate."""
    det = float(np.linalg.det(np.asarray(jacobian, float)))
    if det < -tol_deg:
        return "saddle"
    if det > tol_deg:
        return "center"
    return "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    position: np.ndarray
    jacobian: np.ndarray
    kind: str
    residual: float
    origin: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "position", np.mod(np.asarray(self.position, float), TWO_PI))
        object.__setattr__(self, "jacobian", np.asarray(self.jacobian, float))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.jacobian))


def _sample_grid(f: SpectralField, per_axis: int) -> SpectralField:
    n = max(per_axis, max(f.grid.modes))
    n += n % 2
    return sp.resample(f, Grid((n,) * f.dim))


def _local_minima(mag: np.ndarray) -> np.ndarray:
    """Indices where mag <= all 8 neighbours and < at least one of them."""
    le = np.ones(mag.shape, bool)
    lt = np.zeros(mag.shape, bool)
    for s1 in (-1, 0, 1):
        for s2 in (-1, 0, 1):
            if s1 == s2 == 0:
                continue
            nb = np.roll(mag, (s1, s2), axis=(0, 1))
            le &= mag <= nb
            lt |= mag < nb
    return np.argwhere(le & lt)


def jacobian_sup(f: SpectralField, per_axis: int = 128) -> float:
    """max over a fine grid of the largest |d f_i / d x_j|."""
    fine = _sample_grid(f, per_axis)
    out = 0.0
    for i in range(f.ncomp):
        comp = fine.with_coeffs(fine.coeffs[i:i + 1])
        for j in range(f.dim):
            out = max(out, float(np.max(np.abs(sp.to_physical(sp.differentiate(comp, j))))))
    return out


def find_critical_points(f: SpectralField, tol: float = 1e-10, per_axis: int = 128,
                         max_iter: int = 60, dedupe: float = 1e-6) -> list[CriticalPoint]:
    """Zeros of a 2-D field by Newton iteration from local minima of |f|.

    ``tol`` is relative to max |f|; a point is degenerate when
    |det grad f| < 1e-8 * (sup |grad f|)^2.
    """
    if f.dim != 2 or f.is_scalar:
        raise ValueError("critical points are computed for 2-D vector fields")
    fine = _sample_grid(f, per_axis)
    vals = sp.to_physical(fine)
    mag = np.sum(vals**2, axis=0)
    fmax = float(np.sqrt(mag.max()))
    if fmax == 0.0:
        return []
    seeds_idx = _local_minima(mag)
    if seeds_idx.size == 0:
        return []
    h = TWO_PI / fine.grid.modes[0]
    x = seeds_idx * h
    ev = Evaluator(f, prune=1e-15)
    alive = np.ones(len(x), bool)
    for _ in range(max_iter):
        F, J = ev.value_and_jacobian(x[alive])
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.abs(det) > 1e-300
        step = np.zeros_like(F)
        # explicit 2x2 inverse
        step[ok, 0] = (J[ok, 1, 1] * F[ok, 0] - J[ok, 0, 1] * F[ok, 1]) / det[ok]
        step[ok, 1] = (-J[ok, 1, 0] * F[ok, 0] + J[ok, 0, 0] * F[ok, 1]) / det[ok]
        length = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, 2 * h / np.maximum(length, 1e-300))
        idx = np.nonzero(alive)[0]
        x[idx] -= step * scale[:, None]
        alive[idx[~ok]] = False
        if np.all(length[ok] < 1e-15 * TWO_PI):
            break
    F = ev(x)
    res = np.linalg.norm(F, axis=1)
    good = alive & (res <= tol * fmax)
    gsup = jacobian_sup(f, per_axis)
    tol_deg = 1e-8 * gsup**2
    out: list[CriticalPoint] = []
    for p in np.mod(x[good], TWO_PI):
        if out and np.min(torus_distance(np.array([c.position for c in out]), p)) < dedupe:
            continue
        jac = ev.jacobian(p)
        out.append(CriticalPoint(p, jac, classify(jac, tol_deg), float(np.linalg.norm(ev(p)))))
    out.sort(key=lambda c: (round(c.position[0], 9), round(c.position[1], 9)))
    return out


# --- continuation ----------------------------------------------------------------


@dataclass(frozen=True)
class ContinuedPoint:
    origin: np.ndarray
    position: np.ndarray
    iterations: int
    converged: bool
    kind: str


@dataclass(frozen=True)
class ContinuationResult:
    points: list[ContinuedPoint]
    radius: float
    min_separation: float
    separation_floor: float

    @property
    def all_converged(self) -> bool:
        return all(p.converged for p in self.points)

    @property
    def separated(self) -> bool:
        return self.min_separation >= self.separation_floor

    @property
    def ok(self) -> bool:
        return self.all_converged and self.separated

    @property
    def lost(self) -> list[ContinuedPoint]:
        return [p for p in self.points if not p.converged]


def dominant_frequency(f: SpectralField) -> float:
    """Energy-weighted sqrt(|k|^2); equals N for a single Taylor eigenfield."""
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    return float(np.sqrt(np.sum(f.grid.k2 * power) / np.sum(power)))


def continue_critical_points(base: SpectralField, perturbed: SpectralField, L: int, C: float = 1.0,
                             lattice: Sequence | None = None, N: float | None = None,
                             separation_floor: float | None = None, max_iter: int = 100,
                             tol: float = 1e-13) -> ContinuationResult:
    """Frozen-Jacobian iteration x <- x - (grad F(x*))^-1 F(x) from every lattice point.

    The iteration must stay inside the ball of radius rho0 = C N^-L about
    its lattice point and converge within ``max_iter`` steps; otherwise the
    point is reported as lost.
    """
    if lattice is None:
        lattice = [c.position for c in find_critical_points(base)]
    lattice = np.asarray(lattice, float).reshape(-1, 2)
    N = dominant_frequency(base) if N is None else N
    rho0 = C * N ** (-L)
    ev = Evaluator(perturbed, prune=1e-15)
    fmax = max(float(np.abs(sp.to_physical(perturbed)).max()), 1e-300)
    results = []
    for x_star in lattice:
        jac = ev.jacobian(x_star)
        try:
            inv = np.linalg.inv(jac)
        except np.linalg.LinAlgError:
            results.append(ContinuedPoint(x_star, x_star, 0, False, "degenerate"))
            continue
        x = x_star.copy()
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            dx = inv @ ev(x)
            x = x - dx
            if torus_distance(x, x_star) > rho0:
                break
            if np.linalg.norm(dx) < tol * TWO_PI and np.linalg.norm(ev(x)) <= 1e-10 * fmax:
                converged = True
                break
        kind = classify(ev.jacobian(x)) if converged else "degenerate"
        results.append(ContinuedPoint(x_star, np.mod(x, TWO_PI), it, converged, kind))
    pos = np.array([p.position for p in results])
    if len(pos) > 1:
        dist = torus_distance(pos[:, None, :], pos[None, :, :])
        dist[np.diag_indices(len(pos))] = np.inf
        min_sep = float(dist.min())
        lat = torus_distance(lattice[:, None, :], lattice[None, :, :])
        lat[np.diag_indices(len(lattice))] = np.inf
        floor = float(lat.min()) * 0.5 if separation_floor is None else separation_floor
    else:
        min_sep, floor = math.inf, 0.0 if separation_floor is None else separation_floor
    return ContinuationResult(results, rho0, min_sep, floor)


# --- stream function ------------------------------------------------------


def stream_function(f: SpectralField) -> SpectralField:
    """psi with perp-grad psi = (d2 psi, -d1 psi) = f, zero-mean gauge."""
    if f.dim != 2 or f.is_scalar:
        raise ValueError("stream functions are defined for 2-D vector fields")
    return sp.invert_laplacian(-sp.curl(f))


def saddle_value_gap(psi: SpectralField, a, b) -> float:
    """psi(a) - psi(b) by exact evaluation."""
    ev = Evaluator(psi)
    return float(ev(np.asarray(a, float))[0] - ev(np.asarray(b, float))[0])


# --- field lines -------------------------------------------------------------


@dataclass(frozen=True)
class FieldLine:
    samples: np.ndarray
    closure: str
    winding: tuple | None
    rotation: np.ndarray | None
    arclength: float

    def __post_init__(self):
        if self.closure not in ("closed", "quasi-periodic", "undetermined"):
            raise ValueError(f"unknown closure {self.closure!r}")
        if self.closure == "undetermined" and self.winding is not None:
            raise ValueError("undetermined lines carry no winding")

    @property
    def contractible(self) -> bool | None:
        if self.closure != "closed":
            return None
        return not any(self.winding)


class _Direction:
    """Unit tangent f / |f| with spectral evaluation."""

    def __init__(self, f: SpectralField, sign: float = 1.0, prune: float = 1e-15):
        self.ev = Evaluator(f, prune=prune)
        self.sign = sign
        self.fmax = float(np.max(np.sqrt(np.sum(sp.to_physical(f) ** 2, axis=0))))

    def __call__(self, x):
        v = self.ev(np.mod(x, TWO_PI))
        n = np.linalg.norm(v)
        return self.sign * v / n, n


def _rk4(direction: _Direction, x, h):
    k1, n1 = direction(x)
    k2, n2 = direction(x + 0.5 * h * k1)
    k3, n3 = direction(x + 0.5 * h * k2)
    k4, n4 = direction(x + h * k3)
    return x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6, min(n1, n2, n3, n4)


def _hermite(x0, d0, x1, d1, h, s):
    """Cubic Hermite interpolant on [0, h] evaluated at s."""
    t = s / h
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    return h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1


def integrate_field_line(f: SpectralField, x0, arclength: float = 4 * TWO_PI, step: float = 0.01,
                         closure_tol: float = 1e-6, stop_on_closure: bool = True) -> FieldLine:
    """RK4 in arclength for x' = f / |f|, tracked in the covering space.

    Closure is tested at each crossing of the plane through x0 normal to
    f(x0): the crossing point (cubic Hermite interpolation) must lie within
    ``closure_tol`` of a lattice translate of x0.
    """
    x0 = np.asarray(x0, float)
    direction = _Direction(f)
    if direction.fmax == 0:
        raise ValueError("field vanishes identically")
    t0, n0 = direction(x0)
    if n0 <= 1e-8 * direction.fmax:
        raise ValueError("x0 is a stagnation point")
    samples = [x0.copy()]
    x = x0.copy()
    d_prev = t0
    side_prev = 0.0
    s = 0.0
    steps = int(math.ceil(arclength / step))
    for _ in range(steps):
        x_new, nmin = _rk4(direction, x, step)
        if not np.all(np.isfinite(x_new)) or nmin <= 1e-8 * direction.fmax:
            return FieldLine(np.array(samples), "undetermined", None, None, s)
        d_new, _ = direction(x_new)
        s += step
        samples.append(x_new.copy())
        side_new = float(np.dot(x_new - x0 - TWO_PI * np.round((x_new - x0) / TWO_PI), t0))
        crossed = side_prev < 0 <= side_new and s > 2 * step
        if crossed:
            lo, hi = 0.0, step
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                p = _hermite(x, d_prev, x_new, d_new, step, mid)
                w = np.round((p - x0) / TWO_PI)
                if np.dot(p - x0 - TWO_PI * w, t0) < 0:
                    lo = mid
                else:
                    hi = mid
            p = _hermite(x, d_prev, x_new, d_new, step, hi)
            w = np.round((p - x0) / TWO_PI)
            if np.linalg.norm(p - x0 - TWO_PI * w) <= closure_tol and stop_on_closure:
                s_close = s - step + hi
                winding = tuple(int(v) for v in w)
                return FieldLine(np.array(samples), "closed", winding, (p - x0) / s_close, s_close)
        side_prev = side_new
        x, d_prev = x_new, d_new
    disp = x - x0
    if np.max(np.abs(disp)) >= TWO_PI:
        winding = tuple(int(v) for v in np.round(disp / TWO_PI))
        return FieldLine(np.array(samples), "quasi-periodic", winding, disp / s, s)
    return FieldLine(np.array(samples), "undetermined", None, None, s)


def winding_vector(line: FieldLine):
    """Integer lattice displacement, or None when the closure is undetermined."""
    if line.closure == "undetermined":
        return None
    return np.asarray(line.winding, int)


# --- separatrices ---------------------------------------------------------------


@dataclass(frozen=True)
class SeparatrixReport:
    source: int
    branch: str
    terminal: int | None
    connection: str
    min_approach: float
    arclength: float
    closest: tuple = ()

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.connection == "heteroclinic" and self.terminal == self.source:
            raise ValueError("heteroclinic connection must end at another saddle")
        if self.connection == "homoclinic" and self.terminal != self.source:
            raise ValueError("homoclinic connection must return to its source")


def _trace_branch(direction: _Direction, start, saddles: np.ndarray, source: int, max_arclength: float,
                  step: float, tol: float, min_step: float = 1e-6):
    x = np.asarray(start, float).copy()
    s = 0.0
    best = math.inf
    closest = np.full(len(saddles), np.inf)
    source_armed = False
    while s < max_arclength:
        dist = torus_distance(saddles, np.mod(x, TWO_PI))
        if not source_armed and s >= 0.1 and dist[source] > 0.05:
            source_armed = True
        considered = dist.copy()
        if not source_armed:
            considered[source] = np.inf
        closest = np.minimum(closest, considered)
        j = int(np.argmin(considered))
        best = min(best, float(considered[j]))
        if considered[j] <= tol:
            return j, best, s, closest
        h = max(min(step, 0.5 * float(np.min(dist))), min_step)
        x_new, nmin = _rk4(direction, x, h)
        if not np.all(np.isfinite(x_new)):
            break
        x = x_new
        s += h
    return None, best, s, closest


def trace_separatrices(f: SpectralField, saddles: Sequence[CriticalPoint], offset: float = 1e-4,
                       max_arclength: float = 8 * TWO_PI, tol: float = 1e-3,
                       step: float = 0.01, sources: Sequence[int] | None = None) -> list[SeparatrixReport]:
    """Follow the four separatrix branches of every saddle (or of ``sources`` only).

    Terminals are searched among all given saddles and their lattice images.
    """
    saddles = [c for c in saddles if c.kind == "saddle"]
    if not saddles:
        return []
    pos = np.array([c.position for c in saddles])
    forward = _Direction(f, 1.0)
    backward = _Direction(f, -1.0)
    reports = []
    for i, c in enumerate(saddles):
        if sources is not None and i not in sources:
            continue
        w, v = np.linalg.eig(c.jacobian)
        w, v = w.real, v.real
        order = np.argsort(w)
        stable, unstable = v[:, order[0]], v[:, order[1]]
        for branch, vec, sign, direction in (
            ("unstable+", unstable, 1.0, forward),
            ("unstable-", unstable, -1.0, forward),
            ("stable+", stable, 1.0, backward),
            ("stable-", stable, -1.0, backward),
        ):
            start = c.position + sign * offset * vec / np.linalg.norm(vec)
            term, best, s, closest = _trace_branch(direction, start, pos, i, max_arclength, step, tol)
            if term is None:
                conn = "none"
            elif term == i:
                conn = "homoclinic"
            else:
                conn = "heteroclinic"
            reports.append(SeparatrixReport(i, branch, term, conn, best, s, tuple(float(v) for v in closest)))
    return reports


# --- reports -----------------------------------------------------------------


@dataclass
class TopologyReport:
    points: list[CriticalPoint]
    separatrices: list[SeparatrixReport] = field(default_factory=list)
    traced: bool = False

    @property
    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in KINDS}
        for c in self.points:
            out[c.kind] += 1
        return out

    @property
    def total(self) -> int:
        return len(self.points)

    @property
    def valid(self) -> bool:
        """No degenerate critical points."""
        return self.counts["degenerate"] == 0

    @property
    def saddles(self) -> list[CriticalPoint]:
        return [c for c in self.points if c.kind == "saddle"]

    def connections(self) -> dict[str, int]:
        out = {"heteroclinic": 0, "homoclinic": 0, "none": 0}
        for r in self.separatrices:
            out[r.connection] += 1
        return out

    @property
    def has_heteroclinic(self) -> bool:
        return any(r.connection == "heteroclinic" for r in self.separatrices)

    def summary(self) -> dict:
        out = {"points": self.total, **self.counts}
        if self.traced:
            out["connections"] = self.connections()
        return out

    def inequivalent(self, other: "TopologyReport") -> bool:
        """Different (saddle, center) counts rule out a homeomorphism."""
        a, b = self.counts, other.counts
        return (a["saddle"], a["center"]) != (b["saddle"], b["center"])


def topology_report(f: SpectralField, separatrices: bool = True, tol: float = 1e-10,
                    **trace_options) -> TopologyReport:
    points = find_critical_points(f, tol=tol)
    seps = trace_separatrices(f, points, **trace_options) if separatrices else []
    return TopologyReport(points, seps, separatrices)
