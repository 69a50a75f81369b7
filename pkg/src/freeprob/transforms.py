"""Analytic transforms of probability measures and their numerical inverses.

Conventions::

    G(z)   = int mu(dx) / (z - x)                 Cauchy transform
    L(z)   = 1 / G(z)                             reciprocal Cauchy transform
    phi(z) = L^{-1}(z) - z,   R(w) = phi(1/w)     Voiculescu / R-transform
    psi(z) = int z x / (1 - z x) mu(dx)           moment transform
    chi    = psi^{-1},        S(w) = (1 + w) chi(w) / w

Every function taking a law accepts either a :class:`SpectralMeasure` or a
``kind="G"`` :class:`AnalyticFunctionHandle` (a closed-form or composed
Cauchy transform).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BranchError, DomainError, EvaluationError, InversionError, PoleError
from .measure import (
    Atom,
    DensityGrid,
    SpectralMeasure,
    _quantize_power,
    chebyshev_nodes,
    detect_chebyshev_interval,
    mapped_nodes,
)

log = logging.getLogger(__name__)

UPPER_HALF_PLANE = "upper-half-plane"
CONE = "truncated-cone"
SLIT_PLANE = "slit-plane"
OMEGA = "punctured-disk-image"

DEFAULT_LADDER = (1e-2, 5e-3, 2.5e-3)
# for handles that are exact up to the real axis (closed forms, series-based G)
FINE_LADDER = (1e-9, 5e-10, 2.5e-10)

BRANCH_TOL = 1e-12
ATOM_FLOOR = 1e-5


@dataclass(frozen=True)
class InversionConfig:
    newton_tol: float = 1e-12
    max_iter: int = 100
    seed_point: complex | None = None

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class AnalyticFunctionHandle:
    """A vectorized complex function with a declared domain.

    ``kind="G"`` marks a Cauchy transform; calls on the upper half-plane then
    enforce ``Im G <= 0``. ``raw`` skips all checks and is what the numerical
    engines use internally (boundary values, real points off the support).
    """

    def __init__(
        self,
        func: Callable,
        domain: str = UPPER_HALF_PLANE,
        *,
        eta: float | None = None,
        M: float | None = None,
        kind: str = "generic",
        derivative: Callable | None = None,
        support: tuple[float, float] | None = None,
        label: str = "",
    ):
        if domain not in (UPPER_HALF_PLANE, CONE, SLIT_PLANE, OMEGA):
            raise ValueError(f"unknown domain tag {domain!r}")
        if domain == CONE and (eta is None or M is None):
            raise ValueError("cone domain needs eta and M")
        self.func = func
        self.domain = domain
        self.eta = eta
        self.M = M
        self.kind = kind
        self._derivative = derivative
        self.support = support
        self.label = label
        # known atoms, when the constructor can supply them exactly
        self.atoms = None

    def __repr__(self):
        return f"AnalyticFunctionHandle({self.label or self.kind!r}, domain={self.domain!r})"

    def in_domain(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.domain == UPPER_HALF_PLANE:
            return z.imag > 0
        if self.domain == CONE:
            return (np.abs(z.real) < self.eta * z.imag) & (z.imag > self.M)
        if self.domain == SLIT_PLANE:
            return ~((z.imag == 0) & (z.real >= 0))
        return np.ones(z.shape, dtype=bool)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        bad = ~self.in_domain(z)
        if np.any(bad):
            raise DomainError(f"{z[bad].ravel()[0]!r} outside the {self.domain} domain of {self!r}")
        val = np.asarray(self.func(z), dtype=complex)
        if self.kind == "G":
            up = z.imag > 0
            if np.any(val.imag[up] > BRANCH_TOL * np.maximum(1.0, np.abs(val[up]))):
                raise BranchError(f"Im G > 0 on the upper half-plane for {self!r}")
        return val if val.ndim else complex(val)

    def raw(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=complex)), dtype=complex)

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        if self._derivative is not None:
            return np.asarray(self._derivative(z), dtype=complex)
        # four-point contour rule, O(h^4)
        h = 1e-3 * np.maximum(1.0, np.abs(z))
        acc = np.zeros(z.shape, dtype=complex)
        for k in range(4):
            u = 1j ** k
            acc += self.raw(z + h * u) / u
        return acc / (4 * h)


# --- law plumbing -----------------------------------------------------------


def cauchy_handle(m: SpectralMeasure, label: str = "") -> AnalyticFunctionHandle:
    return AnalyticFunctionHandle(
        m.cauchy,
        UPPER_HALF_PLANE,
        kind="G",
        derivative=m.cauchy_derivative,
        support=m.support,
        label=label or "measure",
    )


def _law(m):
    """Return (G, dG, support) callables for a measure or a G-handle."""
    if isinstance(m, SpectralMeasure):
        return m.cauchy, m.cauchy_derivative, m.support
    if isinstance(m, AnalyticFunctionHandle):
        if m.kind != "G":
            raise TypeError("expected a Cauchy-transform handle (kind='G')")
        return m.raw, m.deriv, m.support
    raise TypeError(f"expected SpectralMeasure or G-handle, got {type(m).__name__}")


def _ret(z_in, val):
    return val if np.ndim(z_in) else complex(np.asarray(val).ravel()[0])


# --- forward transforms -----------------------------------------------------


def cauchy_G(m, z):
    """Cauchy transform ``G(z) = int mu(dx)/(z - x)``.

    Raises :class:`PoleError` for real ``z`` on an atom or inside the density
    support.
    """
    G, _, _ = _law(m)
    z_arr = np.asarray(z, dtype=complex)
    real = z_arr.imag == 0
    if np.any(real) and isinstance(m, SpectralMeasure):
        x = z_arr.real[real]
        on_atom = np.isin(x, m.atom_locations)
        on_ac = np.zeros_like(on_atom)
        if m.ac is not None:
            on_ac = (x >= m.ac.support_lo) & (x <= m.ac.support_hi)
        if np.any(on_atom | on_ac):
            raise PoleError(f"z={x[on_atom | on_ac][0]!r} lies on the support")
    val = G(z_arr)
    if np.any(~np.isfinite(val)):
        raise PoleError("Cauchy transform is not finite at the requested point")
    return _ret(z, val)


def reciprocal_L(m, z):
    g = np.asarray(cauchy_G(m, z), dtype=complex)
    if np.any(g == 0):
        raise EvaluationError("G(z) = 0; reciprocal undefined")
    return _ret(z, 1.0 / g)


def _newton(F, dF, z0, target, tol, max_iter, admissible=None, label="newton"):
    """Vectorized damped Newton for ``F(z) = target``.

    ``admissible(z_old, z_new)`` masks steps that leave the allowed region;
    rejected or non-decreasing steps are halved. Non-finite derivatives fall
    back to a secant step.
    """
    z = np.array(z0, dtype=complex, copy=True).ravel()
    target = np.broadcast_to(np.asarray(target, dtype=complex), z.shape).ravel()
    tol = np.maximum(tol, 4 * np.finfo(float).eps * np.abs(target))
    r = F(z) - target
    trace = [float(np.max(np.abs(r)))]
    z_prev, r_prev = None, None
    for _ in range(max_iter):
        active = ~(np.abs(r) <= tol)
        if not np.any(active):
            break
        d = dF(z)
        step = r / d
        bad = ~np.isfinite(step)
        if np.any(bad):
            if z_prev is not None:
                sec = (r - r_prev) / (z - z_prev)
                step = np.where(bad, r / sec, step)
            step = np.where(np.isfinite(step), step, 0.0)
        lam = np.ones(z.shape)
        z_new, r_new = z.copy(), r.copy()
        pending = active.copy()
        for _ in range(40):
            cand = z - lam * step
            r_cand = np.full(z.shape, np.inf + 0j)
            r_cand[pending] = F(cand[pending]) - target[pending]
            ok = np.isfinite(r_cand) & (np.abs(r_cand) < np.abs(r) * (1 - 1e-4 * lam) + tol)
            if admissible is not None:
                ok &= admissible(z, cand)
            acc = pending & ok
            z_new[acc], r_new[acc] = cand[acc], r_cand[acc]
            pending &= ~ok
            if not np.any(pending):
                break
            lam = np.where(pending, 0.5 * lam, lam)
        z_prev, r_prev = z, r
        z, r = z_new, r_new
        trace.append(float(np.max(np.abs(r))))
        if np.all(~active | (z == z_prev)):
            break
    conv = np.abs(r) <= tol
    return z, conv, trace


def invert_L(m, w, cfg: InversionConfig | None = None):
    """Right inverse of ``L = 1/G``: solve ``L(z) = w`` with ``Im z`` of the sign of ``Im w``."""
    cfg = cfg or InversionConfig()
    G, dG, _ = _law(m)
    w_arr = np.atleast_1d(np.asarray(w, dtype=complex)).ravel()

    def F(z):
        return 1.0 / G(z)

    def dF(z):
        g = G(z)
        return -dG(z) / (g * g)

    sgn = np.sign(w_arr.imag)

    def admissible(z_old, z_new):
        s = np.broadcast_to(sgn, z_new.shape) if z_new.shape == sgn.shape else np.sign(z_old.imag)
        return np.where(s > 0, z_new.imag > 0, np.where(s < 0, z_new.imag < 0, True))

    seed = w_arr if cfg.seed_point is None else np.full(w_arr.shape, cfg.seed_point, dtype=complex)
    z, conv, trace = _newton(F, dF, seed, w_arr, cfg.newton_tol, cfg.max_iter, admissible)
    if not np.all(conv):
        raise InversionError(
            f"L^-1 Newton did not converge at w={w_arr[~conv][0]!r} after {cfg.max_iter} steps",
            trace,
        )
    return _ret(w, z.reshape(np.shape(w)))


def inversion_cone(m, eta: float = 1.0, M0: float = 1.0, cfg: InversionConfig | None = None):
    """Find a truncated cone on which ``invert_L`` succeeds.

    ``M`` is doubled up to ``2**10 * M0`` until Newton converges on probe
    points along the cone boundary.
    """
    M = M0
    for _ in range(11):
        t = np.linspace(-0.99 * eta, 0.99 * eta, 9)
        probes = np.concatenate([(t + 1j) * M * 1.01, (t + 1j) * M * 8])
        try:
            z = np.asarray(invert_L(m, probes, cfg))
            if np.all(z.imag > 0):
                return eta, M
        except InversionError:
            pass
        M *= 2.0
    raise InversionError(f"no inversion cone found up to M={M / 2}")


def phi_handle(m, eta: float = 1.0, M0: float = 1.0, cfg: InversionConfig | None = None):
    eta, M = inversion_cone(m, eta, M0, cfg)
    return AnalyticFunctionHandle(
        lambda z: np.asarray(voiculescu_phi(m, z, cfg)), CONE, eta=eta, M=M, label="phi"
    )


def voiculescu_phi(m, z, cfg: InversionConfig | None = None):
    """``phi(z) = L^{-1}(z) - z``."""
    zi = np.asarray(invert_L(m, z, cfg), dtype=complex)
    return _ret(z, zi - np.asarray(z, dtype=complex))


def r_transform(m, w, cfg: InversionConfig | None = None):
    """``R(w) = phi(1/w)``."""
    w_arr = np.asarray(w, dtype=complex)
    if np.any(w_arr == 0):
        # R(0) is the mean; approach along the imaginary axis
        raise DomainError("evaluate R at w != 0 (R(0) is a limit)")
    return voiculescu_phi(m, 1.0 / w_arr if w_arr.ndim else 1.0 / complex(w), cfg)


def r_series(m, n_terms: int, radius: float | None = None, points: int = 64,
             cfg: InversionConfig | None = None) -> np.ndarray:
    """Free cumulants ``kappa_1..kappa_n`` from Taylor coefficients of ``R``.

    Uses the discrete Cauchy formula on a circle of radius ``radius``.
    """
    _, _, support = _law(m)
    if radius is None:
        span = max(abs(support[0]), abs(support[1])) if support else 4.0
        radius = 1.0 / (4.0 * (span + 1.0))
    theta = 2 * np.pi * np.arange(points) / points
    w = radius * np.exp(1j * theta)
    r = np.asarray(r_transform(m, w, cfg))
    c = np.fft.fft(r) / points
    k = np.arange(n_terms)
    return np.real(c[k] / radius ** k)


def _psi_quadrature(m: SpectralMeasure, z, derivative=False):
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = np.zeros(z.shape, dtype=complex)
    pts, wts = [], []
    if m.atoms:
        pts.append(m.atom_locations)
        wts.append(m.atom_masses)
    if m.ac is not None:
        pts.append(m.ac.nodes)
        wts.append(m.ac.weights * m.ac.values)
    x = np.concatenate(pts)
    wt = np.concatenate(wts)
    for s in range(0, z.size, 256):
        zz = z[s:s + 256, None]
        den = 1.0 - zz * x[None, :]
        if derivative:
            out[s:s + 256] = (x[None, :] / den ** 2) @ wt
        else:
            out[s:s + 256] = (zz * x[None, :] / den) @ wt
    return out


def _check_psi_domain(m: SpectralMeasure, z):
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    real = (z.imag == 0) & (z.real != 0)
    if not np.any(real):
        return
    x = 1.0 / z.real[real]
    hit = np.isin(x, m.atom_locations)
    if m.ac is not None:
        hit |= (x >= m.ac.support_lo) & (x <= m.ac.support_hi)
    if np.any(hit):
        raise PoleError(f"1/z = {x[hit][0]!r} lies on the support; psi has a pole")


def psi_transform(m, z):
    """Moment transform ``psi(z) = int z x / (1 - z x) mu(dx)``.

    Computed by direct quadrature for measures, and from ``G`` for handles.
    """
    if isinstance(m, SpectralMeasure):
        _check_psi_domain(m, z)
        val = _psi_quadrature(m, z)
        return _ret(z, val.reshape(np.shape(z)))
    return _ret(z, psi_via_G(m, z))


def psi_derivative(m, z):
    if isinstance(m, SpectralMeasure):
        val = _psi_quadrature(m, z, derivative=True)
        return _ret(z, val.reshape(np.shape(z)))
    G, dG, _ = _law(m)
    z = np.asarray(z, dtype=complex)
    u = 1.0 / z
    return -(u ** 2) * G(u) - (u ** 3) * dG(u)


def psi_via_G(m, z):
    """``psi(z) = (1/z) G(1/z) - 1``; valid for all ``z`` off ``1/supp``."""
    G, _, _ = _law(m)
    z = np.asarray(z, dtype=complex)
    u = 1.0 / z
    return u * G(u) - 1.0


def _mass_at_zero(m) -> float:
    if isinstance(m, SpectralMeasure):
        return m.atom_mass(0.0)
    atoms = getattr(m, "atoms", None)
    if atoms is not None:
        return sum(a.mass for a in atoms if a.location == 0.0)
    return atom_mass_at(m, 0.0, FINE_LADDER)


def _first_moment(m) -> float:
    if isinstance(m, SpectralMeasure):
        from .measure import moment

        return moment(m, 1)
    G, _, _ = _law(m)
    y = 1e6
    return float(np.real((1j * y) * ((1j * y) * G(np.array([1j * y]))[0] - 1.0)))


def chi_inverse(m, w, cfg: InversionConfig | None = None):
    """Inverse ``chi`` of ``psi`` restricted to the left half-plane.

    Real ``w`` must lie in ``(mu({0}) - 1, 0)``; the result is then real
    negative.
    """
    cfg = cfg or InversionConfig()
    w_arr = np.atleast_1d(np.asarray(w, dtype=complex)).ravel()
    if np.any(w_arr == 0):
        raise DomainError("chi is evaluated at w != 0")
    m0 = _mass_at_zero(m)
    real = w_arr.imag == 0
    if np.any(real & ((w_arr.real <= m0 - 1.0) | (w_arr.real >= 0.0))):
        raise DomainError(f"real w must lie in ({m0 - 1.0}, 0)")
    m1 = _first_moment(m)
    if not m1 > 0:
        raise DomainError("chi needs a law on [0, inf) other than delta_0")

    def F(z):
        return np.asarray(psi_transform(m, z), dtype=complex).ravel() if np.ndim(z) else psi_transform(m, z)

    def dF(z):
        return np.asarray(psi_derivative(m, z), dtype=complex).ravel()

    def admissible(z_old, z_new):
        return z_new.real < 0

    seed = w_arr / m1 if cfg.seed_point is None else np.full(w_arr.shape, cfg.seed_point)
    seed = np.where(seed.real < 0, seed, -abs(seed))
    z, conv, trace = _newton(F, dF, seed, w_arr, cfg.newton_tol, cfg.max_iter, admissible)
    for i in np.nonzero(~conv & real)[0]:
        # psi is increasing on (-inf, 0): bracket and bisect
        target = w_arr[i].real

        def f(t):
            return float(np.real(F(np.array([t + 0j]))[0])) - target

        lo = -1.0 / m1
        while f(lo) > 0:
            lo *= 2.0
            if lo < -1e12:
                break
        try:
            z[i] = brentq(f, lo, 0.0 - 1e-300, xtol=1e-15, rtol=4e-16, maxiter=500)
            conv[i] = abs(f(z[i].real)) <= max(cfg.newton_tol, 1e-14)
        except ValueError:
            pass
    if not np.all(conv):
        raise InversionError(f"chi Newton did not converge at w={w_arr[~conv][0]!r}", trace)
    z = np.where(real, z.real + 0j, z)
    return _ret(w, z.reshape(np.shape(w)))


def s_transform(m, w, cfg: InversionConfig | None = None):
    """``S(w) = (1 + w) chi(w) / w``."""
    w_arr = np.asarray(w, dtype=complex)
    if np.any(w_arr == 0):
        raise DomainError("S is evaluated at w != 0")
    if isinstance(m, SpectralMeasure) and m.atom_mass(0.0) >= 1.0 - 1e-12:
        raise DomainError("S-transform of delta_0 is undefined")
    chi = np.asarray(chi_inverse(m, w_arr, cfg), dtype=complex)
    return _ret(w, (1.0 + w_arr) * chi / w_arr)


# --- Stieltjes inversion ----------------------------------------------------


def _extrapolate_zero(eps: Sequence[float], values: np.ndarray) -> np.ndarray:
    """Polynomial (Richardson) extrapolation of ``values[j] ~ f(eps[j])`` to 0."""
    eps = np.asarray(eps, dtype=float)
    out = np.zeros(values.shape[1:], dtype=values.dtype)
    for j in range(eps.size):
        c = 1.0
        for k in range(eps.size):
            if k != j:
                c *= eps[k] / (eps[k] - eps[j])
        out = out + c * values[j]
    return out


def _g_callable(g):
    if isinstance(g, SpectralMeasure):
        return g.cauchy
    if isinstance(g, AnalyticFunctionHandle):
        return g.raw
    return lambda z: np.asarray(g(np.asarray(z, dtype=complex)), dtype=complex)


@dataclass(frozen=True)
class AtomEstimate:
    location: float
    mass: float
    spread: float


def atom_mass_estimate(g, x0: float, eps_ladder=DEFAULT_LADDER) -> AtomEstimate:
    """Extrapolate ``-eps * Im g(x0 + i eps)`` to ``eps = 0``.

    ``spread`` is the change between the last two extrapolation levels.
    """
    gf = _g_callable(g)
    eps = np.asarray(eps_ladder, dtype=float)
    e = -eps * np.imag(gf(x0 + 1j * eps))
    est = float(_extrapolate_zero(eps, e[:, None])[0])
    lower = float(_extrapolate_zero(eps[:-1], e[:-1, None])[0]) if eps.size > 1 else est
    return AtomEstimate(float(x0), est, abs(est - lower))


def atom_mass_at(g, x0: float, eps_ladder=DEFAULT_LADDER) -> float:
    """Mass of an atom of the law with Cauchy transform ``g`` at ``x0``."""
    est = atom_mass_estimate(g, x0, eps_ladder)
    if est.spread > 1e-3:
        warnings.warn(f"atom ladder not converged at x={x0}: spread {est.spread:.2e}", RuntimeWarning)
    return max(est.mass, 0.0)


def _refine_peak(gf, a: float, b: float, iters: int = 48) -> float:
    for _ in range(iters):
        width = b - a
        if width <= 1e-15 * max(1.0, abs(a)):
            break
        xs = np.linspace(a, b, 9)
        vals = -np.imag(gf(xs + 1j * (width / 4)))
        c = xs[int(np.argmax(vals))]
        a, b = c - width / 4, c + width / 4
    return 0.5 * (a + b)


def detect_atoms(g, grid, eps_ladder=DEFAULT_LADDER, floor: float = ATOM_FLOOR) -> list[Atom]:
    """Locate atoms of the law with Cauchy transform ``g`` near ``grid``."""
    gf = _g_callable(g)
    x = np.asarray(grid, dtype=float)
    if x.size < 3:
        cands = list(x)
    else:
        h = np.gradient(x)
        e = -h * np.imag(gf(x + 1j * h))
        peak = np.ones(x.size, dtype=bool)
        peak[1:] &= e[1:] >= e[:-1]
        peak[:-1] &= e[:-1] >= e[1:]
        peak &= e > floor / 4
        cands = []
        for i in np.nonzero(peak)[0]:
            a = x[max(i - 1, 0)]
            b = x[min(i + 1, x.size - 1)]
            cands.append(_refine_peak(gf, a, b))
    atoms: list[Atom] = []
    for c in cands:
        est = atom_mass_estimate(gf, c, eps_ladder)
        if not (est.mass > floor and est.spread < max(1e-3, 0.05 * est.mass)):
            continue
        # an integrable singularity |x - c|^-gamma mimics an atom on a fixed
        # ladder, but its eps * Im g decays like eps^(1 - gamma); an atom does not
        fine = atom_mass_estimate(gf, c, tuple(e / 10 for e in eps_ladder))
        if abs(fine.mass - est.mass) < max(1e-6, 0.05 * est.mass):
            if all(abs(c - a.location) > 1e-9 for a in atoms):
                atoms.append(Atom(c, min(est.mass, 1.0)))
    return atoms


def stieltjes_invert(
    g,
    grid,
    eps_ladder=DEFAULT_LADDER,
    atoms: Sequence[Atom] | None = None,
    support: tuple[float, float] | None = None,
) -> SpectralMeasure:
    """Recover a measure from its Cauchy transform.

    The density at each grid node is ``-Im g(x + i eps)/pi`` extrapolated to
    ``eps = 0`` down ``eps_ladder``; atoms (detected when not given) are
    subtracted first.
    """
    gf = _g_callable(g)
    x = np.asarray(grid, dtype=float)
    if atoms is None:
        atoms = detect_atoms(gf, x, eps_ladder)
    atoms = list(atoms)
    eps = np.asarray(eps_ladder, dtype=float)
    z = x[None, :] + 1j * eps[:, None]
    vals = np.asarray(gf(z), dtype=complex)
    for a in atoms:
        vals = vals - a.mass / (z - a.location)
    dens = _extrapolate_zero(eps, -np.imag(vals) / np.pi)
    scale = max(float(np.max(np.abs(dens))), 1.0)
    if np.min(dens) < -1e-6 * scale:
        raise BranchError(
            f"negative extrapolated density {float(np.min(dens)):.3e}; g is not a Cauchy transform"
        )
    dens = np.maximum(dens, 0.0)
    if support is None:
        support = detect_chebyshev_interval(x) or (float(x[0]), float(x[-1]))
    ac = DensityGrid(support[0], support[1], x, dens) if np.any(dens > 0) else None
    if ac is None and not atoms:
        raise InversionError("no mass recovered on the grid")
    return SpectralMeasure(tuple(atoms), ac)


def boundary_density(g, x, eps_ladder=FINE_LADDER, atoms: Sequence[Atom] = (), eps_scale=1.0) -> np.ndarray:
    """``-Im g(x + i0)/pi`` by extrapolation, with known atoms removed.

    ``eps_scale`` (scalar or per point) multiplies the ladder, so points very
    close to an edge can use proportionally smaller heights.
    """
    gf = _g_callable(g)
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps_ladder, dtype=float)
    sc = np.broadcast_to(np.asarray(eps_scale, dtype=float), x.shape)
    z = x[None, :] + 1j * eps[:, None] * sc[None, :]
    vals = np.asarray(gf(z), dtype=complex)
    for a in atoms:
        vals = vals - a.mass / (z - a.location)
    return _extrapolate_zero(eps, -np.imag(vals) / np.pi)


def recover_measure(
    g,
    lo: float,
    hi: float,
    n_nodes: int = 2000,
    atoms: Sequence[Atom] | None = None,
    eps_ladder=FINE_LADDER,
    n_scan: int = 2001,
    threshold: float = 1e-9,
) -> SpectralMeasure:
    """Stieltjes inversion on a Chebyshev grid fitted to the detected support.

    ``[lo, hi]`` must contain the support. The density support is located on
    a uniform scan and its outer edges refined by multisection, so the final
    grid carries the density edges at its endpoints. An edge singularity
    stronger than ``1/sqrt`` switches to a power-mapped Chebyshev grid.
    """
    gf = _g_callable(g)
    width = hi - lo
    scale = max(width, 1e-3)
    ladder = tuple(e * scale for e in eps_ladder)
    xs = lo + width * (np.arange(n_scan) + 0.5) / n_scan
    if atoms is None:
        atoms = detect_atoms(gf, xs, tuple(e * 1e5 for e in ladder))
    atoms = [a for a in atoms if a.mass > 0]
    dens = boundary_density(gf, xs, ladder, atoms)
    peak = float(np.max(dens)) if dens.size else 0.0
    atom_mass = sum(a.mass for a in atoms)
    if peak <= 0 or (atom_mass > 1 - 1e-9 and peak * width < 1e-9):
        if not atoms:
            raise InversionError("no mass found while recovering measure")
        return SpectralMeasure(tuple(atoms), None)
    thr = threshold * peak
    inside = np.nonzero(dens > thr)[0]

    def inside_at(t, shrink=1.0):
        return boundary_density(gf, np.asarray(t, dtype=float), ladder, atoms, shrink) > thr

    def section(a, b, rounds, k, shrink):
        # a outside, b inside; multisection keeps the evaluations vectorized
        for _ in range(rounds):
            ts = np.linspace(a, b, k + 1)
            hit = inside_at(ts[1:-1], shrink)
            j = int(np.argmax(hit)) + 1 if np.any(hit) else k
            a, b = ts[j - 1], ts[j]
        return a

    def edge(a, b):
        # four rounds resolve to well inside the re-location bracket
        a = section(a, b, 4, 32, 1.0)
        # the ladder smears a singular edge over ~eps; re-locate it with
        # heights 1e-3 smaller inside a bracket of a few eps
        h = 4 * ladder[0]
        lo_b, hi_b = (a - h, a + h) if b > a else (a + h, a - h)
        flags = inside_at([lo_b, hi_b], 1e-3)
        if not flags[0] and flags[1]:
            a = section(lo_b, hi_b, 4, 32, 1e-3)
        return a

    i0, i1 = inside[0], inside[-1]
    if i0 > 0 or not inside_at([lo])[0]:
        left = edge(xs[i0 - 1] if i0 > 0 else lo, xs[i0])
    else:
        left = lo
    if i1 < n_scan - 1 or not inside_at([hi])[0]:
        right = edge(xs[i1 + 1] if i1 < n_scan - 1 else hi, xs[i1])
    else:
        right = hi
    power, side = _edge_map(inside_at, lambda t: boundary_density(gf, t, ladder, atoms), left, right)
    if power == 1.0:
        nodes = chebyshev_nodes(left, right, n_nodes)
    else:
        nodes = mapped_nodes(left, right, n_nodes, power, side)
    # heights stay ~1e-3 of the distance to the nearer edge
    dist = np.minimum(nodes - left, right - nodes)
    near = np.minimum(1.0, np.maximum(dist, 1e-300) / (1e-6 * scale))
    values = np.maximum(boundary_density(gf, nodes, ladder, atoms, near), 0.0)
    return SpectralMeasure(tuple(atoms), DensityGrid(left, right, nodes, values))


def _edge_map(inside_at, density, left, right) -> tuple[float, str]:
    """Pick a power map for an edge the plain cosine rule handles poorly.

    The local exponent ``gamma`` in ``rho ~ d^-gamma`` is read off at
    distances ``1e-4`` and ``1e-5`` of the width. Square-root edges
    (``gamma = +-1/2``) are already smooth in the cosine variable; any other
    exponent gets the map ``x = lo + W s^p`` with ``p = 1/(2(1-gamma))``.
    Only one edge can be mapped; the one furthest from ``+-1/2`` wins.
    """
    w = right - left
    best = (0.0, 0.0, "left")
    for side, sgn, base in (("left", 1.0, left), ("right", -1.0, right)):
        d = base + sgn * w * np.array([1e-4, 1e-5])
        r = density(d)
        if np.all(r > 0):
            gamma = -math.log(r[1] / r[0]) / math.log(0.1)
            off = min(abs(gamma - 0.5), abs(gamma + 0.5))
            if off > best[0]:
                best = (off, gamma, side)
    off, gamma, side = best
    if off < 0.05:
        return 1.0, "left"
    if gamma > 0.5:
        # singular edge: make the integrand flat in the cosine variable
        gamma = min(gamma, 0.9)
        return _quantize_power(1.0 / (2.0 * (1.0 - gamma))), side
    # bounded edge: aim for a quadratic integrand, which tolerates a slightly
    # misread exponent far better than the flat target
    gamma = max(gamma, -2.0)
    return _quantize_power(3.0 / (2.0 * (1.0 - gamma))), side


# --- free cumulants ----------------------------------------------------------


def _series_powers(moments, n):
    one = moments[0] * 0 + 1 if moments else 1
    zero = one - one
    base = [one] + list(moments[:n])
    powers = [[one] + [zero] * n]
    for _ in range(n):
        prev = powers[-1]
        nxt = [zero] * (n + 1)
        for i, p in enumerate(prev):
            if p == 0:
                continue
            for j in range(n + 1 - i):
                nxt[i + j] = nxt[i + j] + p * base[j]
        powers.append(nxt)
    return powers, zero


def free_cumulants(moments: Sequence, n: int) -> list:
    """Free cumulants ``kappa_1..kappa_n`` from moments ``m_1..m_n``.

    Uses ``m_k = sum_s kappa_s [z^{k-s}] M(z)^s`` with ``M = 1 + sum m_j z^j``.
    Exact for ``Fraction``/``int`` input.
    """
    if len(moments) < n:
        raise ValueError(f"need {n} moments, got {len(moments)}")
    m = list(moments[:n])
    powers, zero = _series_powers(m, n)
    kappa = []
    for k in range(1, n + 1):
        acc = m[k - 1]
        for s in range(1, k):
            acc = acc - kappa[s - 1] * powers[s][k - s]
        kappa.append(acc)
    return kappa


def free_moments(cumulants: Sequence, n: int) -> list:
    """Inverse of :func:`free_cumulants`."""
    if len(cumulants) < n:
        raise ValueError(f"need {n} cumulants, got {len(cumulants)}")
    k = list(cumulants[:n])
    one = k[0] * 0 + 1 if k else 1
    m = []
    for j in range(1, n + 1):
        # powers of the partial moment series built so far
        trial = m + [one * 0]
        powers, zero = _series_powers(trial, j)
        acc = zero
        for s in range(1, j + 1):
            acc = acc + k[s - 1] * powers[s][j - s]
        m.append(acc)
    return m


# --- transform tables --------------------------------------------------------


def write_transform_table(path, kind: str, params: dict, z, values) -> None:
    """CSV with a JSON header line, then ``re_z,im_z,re_f,im_f`` rows."""
    z = np.asarray(z, dtype=complex).ravel()
    f = np.asarray(values, dtype=complex).ravel()
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps({"schema": "v1", "kind": kind, "params": params}) + "\n")
        wr = csv.writer(fh)
        wr.writerow(["re_z", "im_z", "re_f", "im_f"])
        for a, b in zip(z, f):
            wr.writerow([repr(float(v)) for v in (a.real, a.imag, b.real, b.imag)])


def read_transform_table(path):
    with open(path, newline="") as fh:
        header = json.loads(fh.readline())
        rows = list(csv.reader(fh))[1:]
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return header, arr[:, 0] + 1j * arr[:, 1], arr[:, 2] + 1j * arr[:, 3]
