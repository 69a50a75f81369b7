"""Probability measures on the real line: atoms plus a gridded density.

A density grid whose nodes sit at the Chebyshev–Gauss points of its support
interval is integrated with the matching cosine-midpoint rule, which stays
spectrally accurate for square-root and inverse-square-root edges. Nodes at
power-mapped Chebyshev points (``x = lo + W s^p``) get the same rule in the
``s`` variable, for edges like ``x^(-2/3)``. Any other node layout is
integrated as a piecewise-linear density (trapezoid rule).
The Chebyshev and piecewise-linear representations give the Cauchy transform
in closed form, so it can be evaluated arbitrarily close to the real axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.fft import dct

from .errors import EvaluationError, MeasureError

EPS_NORM = 1e-6
ATOM_COLLISION_TOL = 1e-12
SCHEMA = "v1"

_CHUNK = 256


def chebyshev_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    """Chebyshev–Gauss nodes of ``[lo, hi]`` in ascending order."""
    if n < 1:
        raise MeasureError("need at least one node")
    if not hi > lo:
        raise MeasureError(f"empty interval [{lo}, {hi}]")
    phi = chebyshev_angles(n)
    w = hi - lo
    # measure from the nearer endpoint to avoid cancellation at the edges
    return np.where(phi > 0.5 * np.pi, lo + w * np.cos(0.5 * phi) ** 2, hi - w * np.sin(0.5 * phi) ** 2)


def edge_distances(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(x - lo, hi - x)`` at the Chebyshev nodes, computed from the angles.

    Both are accurate to relative rounding even where the node itself is
    within a few ulps of an endpoint.
    """
    phi = chebyshev_angles(n)
    w = hi - lo
    return w * np.cos(0.5 * phi) ** 2, w * np.sin(0.5 * phi) ** 2


def chebyshev_angles(n: int) -> np.ndarray:
    """Angles matching :func:`chebyshev_nodes` (descending, in (0, pi))."""
    return (np.arange(n)[::-1] + 0.5) * np.pi / n


def mapped_nodes(lo: float, hi: float, n: int, power: float, side: str = "left") -> np.ndarray:
    """Chebyshev nodes of ``s`` in [0, 1] pushed through ``x = lo + W s^power``.

    ``side="right"`` mirrors the map (``x = hi - W (1-s)^power``). Used for
    densities with an edge singularity stronger than ``1/sqrt``.
    """
    if n < 1:
        raise MeasureError("need at least one node")
    if not hi > lo:
        raise MeasureError(f"empty interval [{lo}, {hi}]")
    phi = chebyshev_angles(n)
    s = np.cos(0.5 * phi) ** 2
    w = hi - lo
    if side == "left":
        return lo + w * s ** power
    if side == "right":
        return hi - w * np.sin(0.5 * phi) ** (2 * power)
    raise MeasureError(f"unknown side {side!r}")


def _quantize_power(p: float) -> float:
    return round(p * 1000.0) / 1000.0


def detect_chebyshev_interval(nodes: Sequence[float]) -> tuple[float, float] | None:
    """Return ``(lo, hi)`` if ``nodes`` are Chebyshev–Gauss nodes, else None."""
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if n < 2:
        return None
    c = math.cos(math.pi / (2 * n))
    mid = 0.5 * (x[0] + x[-1])
    half = 0.5 * (x[-1] - x[0]) / c
    if half <= 0:
        return None
    lo, hi = mid - half, mid + half
    if np.max(np.abs(chebyshev_nodes(lo, hi, n) - x)) > 1e-12 * half:
        return None
    return lo, hi


def _power_series(zeta: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``sum_k c_k zeta^k``: powers within blocks, Horner across blocks."""
    k = c.size
    b = min(max(16, 2 * math.isqrt(k)), k)
    nb = -(-k // b)
    cc = np.zeros(nb * b, dtype=c.dtype)
    cc[:k] = c
    pw = np.empty((zeta.size, b), dtype=complex)
    pw[:, 0] = 1.0
    if b > 1:
        pw[:, 1:] = np.cumprod(np.broadcast_to(zeta[:, None], (zeta.size, b - 1)), axis=1)
    parts = pw @ cc.reshape(nb, b).T
    zb = pw[:, -1] * zeta
    acc = parts[:, -1]
    for j in range(nb - 2, -1, -1):
        acc = acc * zb + parts[:, j]
    return acc


@dataclass(frozen=True)
class Atom:
    location: float
    mass: float

    def __post_init__(self):
        loc, mass = float(self.location), float(self.mass)
        if not (math.isfinite(loc) and math.isfinite(mass)):
            raise MeasureError(f"non-finite atom ({self.location}, {self.mass})")
        if not 0.0 < mass <= 1.0 + 1e-12:
            raise MeasureError(f"atom mass {mass} outside (0, 1]")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "mass", mass)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density values sampled on ordered nodes inside ``[support_lo, support_hi]``."""

    support_lo: float
    support_hi: float
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes, values = _frozen(self.nodes), _frozen(self.values)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise MeasureError("nodes and values must be 1-d arrays of equal length >= 2")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise MeasureError("non-finite node or density value")
        if np.any(np.diff(nodes) <= 0):
            raise MeasureError("density nodes must be strictly increasing")
        lo, hi = float(self.support_lo), float(self.support_hi)
        if not lo < hi:
            raise MeasureError(f"empty support [{lo}, {hi}]")
        slack = 1e-12 * (hi - lo)
        if nodes[0] < lo - slack or nodes[-1] > hi + slack:
            raise MeasureError("density nodes outside the declared support")
        object.__setattr__(self, "support_lo", lo)
        object.__setattr__(self, "support_hi", hi)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @cached_property
    def layout(self) -> tuple[str, float, str]:
        """``(rule, power, side)``; rule is chebyshev, mapped or trapezoid."""
        n = self.nodes.size
        lo, hi = self.support_lo, self.support_hi
        w = hi - lo
        ref = chebyshev_nodes(lo, hi, n)
        if np.max(np.abs(ref - self.nodes)) <= 1e-12 * w:
            return "chebyshev", 1.0, "left"
        if n >= 2:
            s0 = math.sin(math.pi / (4 * n)) ** 2
            for side, gap in (("left", self.nodes[0] - lo), ("right", hi - self.nodes[-1])):
                if not gap > 0:
                    continue
                p = _quantize_power(math.log(gap / w) / math.log(s0))
                if p <= 0 or p == 1.0:
                    continue
                cand = mapped_nodes(lo, hi, n, p, side)
                if np.max(np.abs(cand - self.nodes)) <= 1e-12 * w:
                    return "mapped", p, side
        return "trapezoid", 1.0, "left"

    @property
    def rule(self) -> str:
        """``"chebyshev"``, ``"mapped"`` (power-mapped Chebyshev) or ``"trapezoid"``."""
        return self.layout[0]

    def _jacobian(self) -> np.ndarray:
        # |dx/dphi| at the nodes for the (mapped) Chebyshev layouts
        n = self.nodes.size
        phi = chebyshev_angles(n)
        _, p, side = self.layout
        t = np.cos(0.5 * phi) ** 2 if side == "left" else np.sin(0.5 * phi) ** 2
        w = self.support_hi - self.support_lo
        return p * w * t ** (p - 1.0) * 0.5 * np.sin(phi)

    def _angle(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.support_lo, self.support_hi
        _, p, side = self.layout
        u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        if side == "left":
            s = u ** (1.0 / p)
        else:
            s = 1.0 - (1.0 - u) ** (1.0 / p)
        return np.arccos(np.clip(2.0 * s - 1.0, -1.0, 1.0))

    @property
    def mid(self) -> float:
        return 0.5 * (self.support_lo + self.support_hi)

    @property
    def half(self) -> float:
        return 0.5 * (self.support_hi - self.support_lo)

    @cached_property
    def weights(self) -> np.ndarray:
        n = self.nodes.size
        if self.rule != "trapezoid":
            w = (np.pi / n) * self._jacobian()
        else:
            h = np.diff(self.nodes)
            w = np.zeros(n)
            w[:-1] += 0.5 * h
            w[1:] += 0.5 * h
        w.setflags(write=False)
        return w

    @cached_property
    def _cosine_coefficients(self) -> np.ndarray:
        # g(phi) = density(x(phi)) |dx/dphi| = sum_k c_k cos(k phi)
        n = self.nodes.size
        g = (self.values * self._jacobian())[::-1]
        c = dct(g, type=2) / n
        c[0] *= 0.5
        mag = np.abs(c)
        floor = 1e-16 * max(mag.sum(), 1e-300)
        tail = max(n // 10, 1)
        if n >= 40:
            # a flat tail is rounding noise in the node values: cut above it
            last = np.median(mag[-tail:])
            prev = np.median(mag[-2 * tail:-tail])
            if prev > 0 and last > 0.5 * prev:
                floor = max(floor, 4.0 * last)
        keep = np.nonzero(mag > floor)[0]
        k_eff = int(keep[-1]) + 1 if keep.size else 1
        return c[:k_eff].copy()

    def mass(self) -> float:
        return float(np.dot(self.weights, self.values))

    # --- Cauchy transform of the density part -------------------------------

    def cauchy(self, z, derivative: bool = False):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.size, dtype=complex)
        flat = z.ravel()
        chunk = 8 * _CHUNK if self.rule == "chebyshev" else _CHUNK
        for s in range(0, flat.size, chunk):
            blk = flat[s:s + chunk]
            if self.rule == "chebyshev":
                out[s:s + chunk] = self._cauchy_cheb(blk, derivative)
            elif self.rule == "mapped":
                out[s:s + chunk] = self._cauchy_direct(blk, derivative)
            else:
                out[s:s + chunk] = self._cauchy_linear(blk, derivative)
        return out.reshape(z.shape)

    def _cauchy_cheb(self, z, derivative):
        c = self._cosine_coefficients
        half = self.half
        w = (z - self.mid) / half
        q = np.sqrt(w - 1.0) * np.sqrt(w + 1.0)
        zeta = 1.0 / (w + q)
        s0 = _power_series(zeta, c)
        if not derivative:
            return np.pi * s0 / (half * q)
        s1 = _power_series(zeta, np.arange(c.size) * c)
        # d/dw [zeta^k / q] = -zeta^k (k + w/q) / q^2
        dg_dw = -np.pi * (s1 + s0 * w / q) / (q * q * half)
        return dg_dw / half

    def _cauchy_direct(self, z, derivative):
        # plain quadrature: accurate once Im z exceeds the local node spacing
        d = z[:, None] - self.nodes[None, :]
        wr = self.weights * self.values
        if not derivative:
            return (1.0 / d) @ wr
        return -(1.0 / (d * d)) @ wr

    def _cauchy_linear(self, z, derivative):
        x = self.nodes
        r = self.values
        h = np.diff(x)
        q = np.diff(r) / h
        zc = z[:, None]
        d_left = zc - x[None, :-1]
        d_right = zc - x[None, 1:]
        a = np.log(d_left) - np.log(d_right)
        if not derivative:
            return (r[None, :-1] * a + q[None, :] * (d_left * a - h[None, :])).sum(axis=1)
        da = 1.0 / d_left - 1.0 / d_right
        return (r[None, :-1] * da + q[None, :] * (a + d_left * da)).sum(axis=1)

    # --- distribution function of the density part --------------------------

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size)
        if self.rule != "trapezoid":
            c = self._cosine_coefficients
            k = np.arange(1, c.size)
            for s in range(0, flat.size, _CHUNK):
                blk = flat[s:s + _CHUNK]
                phi = self._angle(blk)
                tail = np.sin(np.outer(phi, k)) @ (c[1:] / k) if k.size else 0.0
                out[s:s + _CHUNK] = c[0] * (np.pi - phi) - tail
            total = self.mass()
            out = np.clip(out, 0.0, total)
            out = np.where(flat <= self.support_lo, 0.0, out)
            out = np.where(flat >= self.support_hi, total, out)
        else:
            nodes, r = self.nodes, self.values
            h = np.diff(nodes)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (r[:-1] + r[1:]))])
            i = np.clip(np.searchsorted(nodes, flat, side="right") - 1, 0, nodes.size - 2)
            t = np.clip(flat - nodes[i], 0.0, h[i])
            slope = (r[i + 1] - r[i]) / h[i]
            out = cum[i] + r[i] * t + 0.5 * slope * t * t
            out = np.where(flat < nodes[0], 0.0, out)
            out = np.where(flat >= nodes[-1], cum[-1], out)
        return out.reshape(x.shape)


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atoms plus an optional absolutely continuous part.

    Instances are immutable. Construction checks structure only; use
    :func:`validate` for normalization and atom-collision diagnostics.
    """

    atoms: tuple[Atom, ...] = ()
    ac: DensityGrid | None = None

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        atoms = tuple(sorted(atoms, key=lambda a: a.location))
        object.__setattr__(self, "atoms", atoms)
        if not atoms and self.ac is None:
            raise MeasureError("a measure needs atoms or a density")

    # --- basic quantities ---------------------------------------------------

    @property
    def atom_locations(self) -> np.ndarray:
        return np.array([a.location for a in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms], dtype=float)

    def atom_mass(self, x: float, tol: float = ATOM_COLLISION_TOL) -> float:
        return float(sum(a.mass for a in self.atoms if abs(a.location - x) <= tol))

    @property
    def total_mass(self) -> float:
        ac = self.ac.mass() if self.ac is not None else 0.0
        return float(self.atom_masses.sum() + ac)

    @property
    def support(self) -> tuple[float, float]:
        """Smallest interval containing atoms and the density support."""
        pts = list(self.atom_locations)
        if self.ac is not None:
            pts += [self.ac.support_lo, self.ac.support_hi]
        return float(min(pts)), float(max(pts))

    # --- transforms ---------------------------------------------------------

    def cauchy(self, z):
        """Cauchy transform at ``z`` (no domain checks; see ``transforms.cauchy_G``)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.atoms:
            out += a.mass / (z - a.location)
        if self.ac is not None:
            out += self.ac.cauchy(z)
        return out

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.atoms:
            out -= a.mass / (z - a.location) ** 2
        if self.ac is not None:
            out += self.ac.cauchy(z, derivative=True)
        return out

    def cdf(self, x, left: bool = False):
        """Distribution function; ``left=True`` gives the left limit."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a in self.atoms:
            hit = (x > a.location) if left else (x >= a.location)
            out += np.where(hit, a.mass, 0.0)
        if self.ac is not None:
            out += self.ac.cdf(x)
        return out

    # --- transformations ----------------------------------------------------

    def dilate(self, s: float) -> "SpectralMeasure":
        """Law of ``s * X``."""
        if s == 0:
            return SpectralMeasure(atoms=(Atom(0.0, 1.0),))
        atoms = tuple(Atom(s * a.location, a.mass) for a in self.atoms)
        ac = None
        if self.ac is not None:
            g = self.ac
            nodes, values = s * g.nodes, g.values / abs(s)
            lo, hi = sorted((s * g.support_lo, s * g.support_hi))
            if s < 0:
                nodes, values = nodes[::-1], values[::-1]
            rule, p, side = g.layout
            if rule == "chebyshev":
                nodes = chebyshev_nodes(lo, hi, nodes.size)
            elif rule == "mapped":
                if s < 0:
                    side = "right" if side == "left" else "left"
                nodes = mapped_nodes(lo, hi, nodes.size, p, side)
            ac = DensityGrid(lo, hi, nodes, values)
        return SpectralMeasure(atoms, ac)

    def shift(self, c: float) -> "SpectralMeasure":
        """Law of ``X + c``."""
        atoms = tuple(Atom(a.location + c, a.mass) for a in self.atoms)
        ac = None
        if self.ac is not None:
            g = self.ac
            lo, hi = g.support_lo + c, g.support_hi + c
            rule, p, side = g.layout
            if rule == "chebyshev":
                nodes = chebyshev_nodes(lo, hi, g.nodes.size)
            elif rule == "mapped":
                nodes = mapped_nodes(lo, hi, g.nodes.size, p, side)
            else:
                nodes = g.nodes + c
            ac = DensityGrid(lo, hi, nodes, g.values)
        return SpectralMeasure(atoms, ac)

    # --- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "atoms": [{"x": a.location, "mass": a.mass} for a in self.atoms],
            "ac": None,
        }
        if self.ac is not None:
            out["ac"] = {
                "lo": self.ac.support_lo,
                "hi": self.ac.support_hi,
                "nodes": self.ac.nodes.tolist(),
                "values": self.ac.values.tolist(),
            }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralMeasure":
        try:
            atoms = tuple(Atom(float(a["x"]), float(a["mass"])) for a in data.get("atoms", []))
            ac_data = data.get("ac")
            ac = None
            if ac_data:
                ac = DensityGrid(
                    float(ac_data["lo"]),
                    float(ac_data["hi"]),
                    np.asarray(ac_data["nodes"], dtype=float),
                    np.asarray(ac_data["values"], dtype=float),
                )
        except (KeyError, TypeError, AttributeError) as exc:
            raise MeasureError(f"malformed measure JSON: {exc}") from exc
        return cls(atoms, ac)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SpectralMeasure":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MeasureError(f"malformed measure JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise MeasureError("measure JSON must be an object")
        return cls.from_dict(data)


def dirac(c: float = 0.0) -> SpectralMeasure:
    return SpectralMeasure(atoms=(Atom(c, 1.0),))


def discrete(points: Iterable[tuple[float, float]]) -> SpectralMeasure:
    """Purely atomic measure from ``(location, mass)`` pairs."""
    return SpectralMeasure(atoms=tuple(Atom(x, m) for x, m in points))


def density_measure(
    density: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n_nodes: int = 2000,
    atoms: Iterable = (),
    edges: bool = False,
) -> SpectralMeasure:
    """Sample a density on Chebyshev nodes of ``[lo, hi]``.

    ``atoms`` holds :class:`Atom` objects or ``(location, mass)`` pairs.
    With ``edges=True`` the density is called as ``density(x, x - lo, hi - x)``
    with exact edge distances (see :func:`edge_distances`).
    """
    nodes = chebyshev_nodes(lo, hi, n_nodes)
    if edges:
        values = np.asarray(density(nodes, *edge_distances(lo, hi, n_nodes)), dtype=float)
    else:
        values = np.asarray(density(nodes), dtype=float)
    atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in atoms)
    return SpectralMeasure(atoms, DensityGrid(lo, hi, nodes, values))


# --- integration ------------------------------------------------------------


def _apply(f, x: np.ndarray) -> np.ndarray:
    try:
        y = np.asarray(f(x))
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([f(float(t)) for t in x])


def integrate(m: SpectralMeasure, f: Callable) -> complex | float:
    """Integral of ``f`` against ``m`` with the grid's fixed quadrature rule."""
    total = 0.0 + 0.0j
    locs = m.atom_locations
    if locs.size:
        fa = _apply(f, locs)
        bad = ~np.isfinite(fa)
        if np.any(bad):
            raise EvaluationError(f"integrand not finite at atom x={float(locs[bad][0])!r}")
        total += np.dot(m.atom_masses, fa)
    if m.ac is not None:
        fx = _apply(f, m.ac.nodes)
        bad = ~np.isfinite(fx)
        if np.any(bad):
            raise EvaluationError(f"integrand not finite at node x={float(m.ac.nodes[bad][0])!r}")
        total += np.dot(m.ac.weights * m.ac.values, fx)
    total = complex(total)
    return total.real if total.imag == 0.0 else total


def moment(m: SpectralMeasure, k: int) -> float:
    if k < 0 or int(k) != k:
        raise ValueError("moment order must be a non-negative integer")
    if k == 0:
        return m.total_mass
    return float(np.real(integrate(m, lambda x: np.asarray(x, dtype=float) ** int(k))))


def mean(m: SpectralMeasure) -> float:
    return moment(m, 1) / m.total_mass


def variance(m: SpectralMeasure) -> float:
    mu = moment(m, 1)
    return moment(m, 2) - mu * mu


# --- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class MeasureDiagnostics:
    passed: bool
    total_mass: float
    atom_mass: float
    ac_mass: float
    negative_nodes: int
    min_density: float
    collisions: tuple[tuple[float, float], ...] = ()
    messages: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "total_mass": self.total_mass,
            "atom_mass": self.atom_mass,
            "ac_mass": self.ac_mass,
            "negative_nodes": self.negative_nodes,
            "min_density": self.min_density,
            "collisions": [list(c) for c in self.collisions],
            "messages": list(self.messages),
        }


def validate(m: SpectralMeasure, eps_norm: float = EPS_NORM) -> MeasureDiagnostics:
    msgs = []
    atom_mass = float(m.atom_masses.sum())
    ac_mass = m.ac.mass() if m.ac is not None else 0.0
    total = atom_mass + ac_mass
    if abs(total - 1.0) > eps_norm:
        msgs.append(f"total mass {total!r} outside 1 +/- {eps_norm}")
    neg, min_val = 0, 0.0
    if m.ac is not None:
        neg = int(np.count_nonzero(m.ac.values < 0))
        min_val = float(m.ac.values.min())
        if neg:
            msgs.append(f"{neg} negative density values (min {min_val!r})")
    locs = m.atom_locations
    collisions = tuple(
        (float(locs[i]), float(locs[i + 1]))
        for i in range(locs.size - 1)
        if locs[i + 1] - locs[i] < ATOM_COLLISION_TOL
    )
    if collisions:
        msgs.append(f"{len(collisions)} atom collision(s) at {[c[0] for c in collisions]}")
    return MeasureDiagnostics(
        passed=not msgs,
        total_mass=total,
        atom_mass=atom_mass,
        ac_mass=ac_mass,
        negative_nodes=neg,
        min_density=min_val,
        collisions=collisions,
        messages=tuple(msgs),
    )


# --- distances and quantiles -------------------------------------------------


def _probe_points(measures: Sequence[SpectralMeasure], n: int) -> np.ndarray:
    pts = []
    lo = min(m.support[0] for m in measures)
    hi = max(m.support[1] for m in measures)
    width = max(hi - lo, 1e-9)
    pts.append(np.linspace(lo - 1e-3 * width, hi + 1e-3 * width, n))
    for m in measures:
        if m.ac is not None:
            pts.append(m.ac.nodes)
            pts.append([m.ac.support_lo, m.ac.support_hi])
    return np.unique(np.concatenate(pts))


def ks_distance(m1: SpectralMeasure, m2: SpectralMeasure, n_probe: int = 20001) -> float:
    """Kolmogorov–Smirnov distance, including left limits at every atom.

    Atoms of the two laws closer than ``ATOM_COLLISION_TOL`` (relative to the
    support scale) count as one location, so a recovered atom that is off by
    rounding error does not register as a full-mass jump.
    """
    lo = min(m1.support[0], m2.support[0])
    hi = max(m1.support[1], m2.support[1])
    tol = ATOM_COLLISION_TOL * max(1.0, abs(lo), abs(hi))
    atoms = np.sort(np.concatenate([m1.atom_locations, m2.atom_locations]))
    clusters: list[list[float]] = []
    for a in atoms:
        if clusters and a - clusters[-1][1] <= tol:
            clusters[-1][1] = a
        else:
            clusters.append([a, a])
    x = _probe_points((m1, m2), n_probe)
    for a, b in clusters:
        x = x[(x < a - tol) | (x > b + tol)]
    d = float(np.max(np.abs(m1.cdf(x) - m2.cdf(x)))) if x.size else 0.0
    if clusters:
        left = np.array([c[0] for c in clusters])
        right = np.array([c[1] for c in clusters])
        d = max(d, float(np.max(np.abs(m1.cdf(left, left=True) - m2.cdf(left, left=True)))))
        d = max(d, float(np.max(np.abs(m1.cdf(right) - m2.cdf(right)))))
    return d


def ks_empirical(m: SpectralMeasure, samples, snap: float = 1e-12) -> float:
    """KS distance between ``m`` and the empirical law of ``samples``.

    Samples within ``snap`` (relative to the support scale) of an atom of
    ``m`` are moved onto it, so eigenvalues carrying rounding error still
    register as hits of the atom.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    locs = m.atom_locations
    if locs.size and snap > 0:
        lo, hi = m.support
        tol = snap * max(1.0, abs(lo), abs(hi))
        j = np.clip(np.searchsorted(locs, s), 1, locs.size) - 1
        for k in (j, np.minimum(j + 1, locs.size - 1)):
            s = np.where(np.abs(s - locs[k]) <= tol, locs[k], s)
        s = np.sort(s)
    n = s.size
    f_right = m.cdf(s)
    f_left = m.cdf(s, left=True)
    # empirical CDF just right and just left of each sample; exact with ties
    e_right = np.searchsorted(s, s, side="right") / n
    e_left = np.searchsorted(s, s, side="left") / n
    return float(max(np.max(np.abs(e_right - f_right)), np.max(np.abs(e_left - f_left))))


def sup_cdf_distance(m1: SpectralMeasure, m2: SpectralMeasure) -> float:
    return ks_distance(m1, m2)


def quantile(m: SpectralMeasure, p, n_table: int = 40001) -> np.ndarray:
    """Generalized inverse of the distribution function."""
    lo, hi = m.support
    x = np.linspace(lo, hi, n_table)
    if m.ac is not None:
        x = np.concatenate([x, m.ac.nodes])
    locs = m.atom_locations
    if locs.size:
        x = np.concatenate([x, locs, np.nextafter(locs, -np.inf)])
    x = np.unique(x)
    f = np.maximum.accumulate(np.clip(m.cdf(x), 0.0, None))
    f = f / f[-1]
    p = np.asarray(p, dtype=float)
    # ties in f (flat stretches) resolve to the left end
    f_u, idx = np.unique(f, return_index=True)
    return np.interp(p, f_u, x[idx])
