"""Free additive/multiplicative, monotone and boolean convolutions.

Free convolutions are computed through their subordination functions:

* additive: ``G_{mu+nu}(z) = G_mu(w1(z)) = G_nu(w2(z))`` with
  ``w1 + w2 - z = L_{mu+nu}(z)``, found as the fixed point of
  ``w1 <- z + h_nu(z + h_mu(w1))``, ``h = L - z``;
* multiplicative: ``psi_{mu.nu}(z) = psi_mu(w1(z))`` with
  ``w1 <- z * k_nu(z * k_mu(w1))``, ``k(w) = eta(w)/w``, ``eta = psi/(1+psi)``.

Grid points far from the axis use the plain (damped) iteration; points near
the real axis are reached by continuation in ``Im z`` with Newton steps.
The returned handles are exact to solver tolerance; the gridded
:class:`SpectralMeasure` results come from Stieltjes inversion of them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InversionError, ParameterError
from .measure import Atom, SpectralMeasure
from .transforms import (
    SLIT_PLANE,
    UPPER_HALF_PLANE,
    AnalyticFunctionHandle,
    _law,
    cauchy_handle,
    recover_measure,
)

log = logging.getLogger(__name__)


def default_grid() -> np.ndarray:
    """``x + iy`` with ``x`` in {-2..2} and ``y`` in {0.5, 1, 2}."""
    x = np.arange(-2.0, 3.0)
    y = np.array([0.5, 1.0, 2.0])
    return (x[None, :] + 1j * y[:, None]).ravel()


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-13
    max_iter: int = 500
    verification_grid: tuple = field(default_factory=lambda: tuple(default_grid()))
    n_nodes: int = 2000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if any(complex(z).imag <= 0 for z in self.verification_grid):
            raise ValueError("verification grid must lie in the upper half-plane")

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.verification_grid, dtype=complex)


# --- generic solver ---------------------------------------------------------


def _newton_param(F, dF, x0, z, tol, max_iter, admissible):
    """Damped Newton for ``F(x, z) = 0`` pointwise, vectorized over ``z``."""
    x = np.array(x0, dtype=complex, copy=True)
    r = F(x, z)
    # residuals scale with |z| (L ~ z at infinity)
    tol = tol * np.maximum(1.0, np.abs(z))
    for _ in range(max_iter):
        active = ~(np.abs(r) <= tol)
        if not np.any(active):
            break
        xa, za, ra = x[active], z[active], r[active]
        step = ra / dF(xa, za)
        step = np.where(np.isfinite(step), step, 0.0)
        lam = np.ones(xa.shape)
        pending = np.ones(xa.shape, dtype=bool)
        new_x, new_r = xa.copy(), ra.copy()
        for _ in range(30):
            cand = xa[pending] - lam[pending] * step[pending]
            with np.errstate(all="ignore"):
                rc = F(cand, za[pending])
            ok = np.isfinite(rc) & admissible(cand, za[pending])
            ok &= np.abs(rc) < np.abs(ra[pending]) * (1 - 1e-4 * lam[pending]) + tol[active][pending]
            idx = np.nonzero(pending)[0]
            new_x[idx[ok]] = cand[ok]
            new_r[idx[ok]] = rc[ok]
            pending[idx[ok]] = False
            if not np.any(pending):
                break
            lam[pending] *= 0.5
        moved = new_x != xa
        x[active], r[active] = new_x, new_r
        if not np.any(moved):
            break
    return x, np.abs(r) <= tol


class _Subordination:
    """Shared machinery: fixed point far from the axis, Newton continuation near it."""

    #: height above which the plain fixed-point iteration is used
    safe_height = 0.5

    def __init__(self, cfg: FixedPointConfig, scale: float = 1.0):
        self.cfg = cfg
        self.scale = max(scale, 1e-6)

    # subclasses provide T (fixed-point map), F, dF and admissible
    def T(self, w, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def F(self, w, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def dF(self, w, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def admissible(self, w, z):
        return w.imag > 0

    def seed(self, z):
        return z.copy()

    def fixed_point(self, z, w0=None):
        """Plain iteration with halving damping when the residual grows."""
        w = self.seed(z) if w0 is None else w0.copy()
        res = np.abs(self.T(w, z) - w)
        trace = [float(np.max(res))]
        damp = np.ones(z.shape)
        for _ in range(self.cfg.max_iter):
            active = res > self.cfg.tol * np.maximum(1.0, np.abs(w))
            if not np.any(active):
                break
            tw = self.T(w[active], z[active])
            cand = w[active] + damp[active] * (tw - w[active])
            new_res = np.abs(self.T(cand, z[active]) - cand)
            grew = ~(new_res <= res[active])
            d = damp[active]
            d[grew] *= 0.5
            damp[active] = d
            ok = ~grew | (d < 1e-3)
            wa, ra = w[active], res[active]
            wa[ok], ra[ok] = cand[ok], new_res[ok]
            w[active], res[active] = wa, ra
            trace.append(float(np.max(res)))
        return w, trace

    def solve(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        out = np.empty(z.shape, dtype=complex)
        low = z.imag < 0
        zz = np.where(low, np.conj(z), z)
        far = zz.imag >= self.safe_height * self.scale
        if np.any(far):
            out[far] = self._solve_far(zz[far])
        if np.any(~far):
            out[~far] = self._solve_near(zz[~far])
        return np.where(low, np.conj(out), out)

    def _solve_far(self, z):
        w, trace = self.fixed_point(z)
        w, conv = _newton_param(self.F, self.dF, w, z, self.cfg.tol, 50, self.admissible)
        if not np.all(conv):
            raise InversionError(
                f"subordination fixed point did not converge at z={z[~conv][0]!r}", trace
            )
        return w

    def _solve_near(self, z):
        top = self.safe_height * self.scale
        w = self._solve_far(z.real + 1j * top)
        h = top
        floor = max(float(np.min(z.imag)), 0.0)
        while True:
            h = max(h * 0.5, floor) if h * 0.5 > floor * 1.0001 else floor
            zk = z.real + 1j * np.maximum(h, z.imag)
            w, conv = _newton_param(self.F, self.dF, w, zk, self.cfg.tol, 60, self._adm_near)
            if not np.all(conv):
                raise InversionError(
                    f"continuation lost the subordination branch at z={zk[~conv][0]!r}"
                )
            if h <= floor:
                break
        return w

    def _adm_near(self, w, z):
        return self.admissible(w, z)


# --- free additive convolution ------------------------------------------------


class _AdditiveSolver(_Subordination):
    def __init__(self, mu, nu, cfg, scale):
        super().__init__(cfg, scale)
        self.Gm, self.dGm, _ = _law(mu)
        self.Gn, self.dGn, _ = _law(nu)

    def Lm(self, w):
        return 1.0 / self.Gm(w)

    def Ln(self, w):
        return 1.0 / self.Gn(w)

    def T(self, w, z):
        w2 = z + self.Lm(w) - w
        return z + self.Ln(w2) - w2

    def F(self, w, z):
        lm = self.Lm(w)
        return lm - self.Ln(z + lm - w)

    def dF(self, w, z):
        gm = self.Gm(w)
        lm = 1.0 / gm
        dlm = -self.dGm(w) / (gm * gm)
        w2 = z + lm - w
        gn = self.Gn(w2)
        dln = -self.dGn(w2) / (gn * gn)
        return dlm - dln * (dlm - 1.0)

    def admissible(self, w, z):
        w2 = z + self.Lm(w) - w
        return (w.imag > 0) & (w2.imag > 0) if np.all(z.imag > 0) else np.isfinite(w2)

    def omegas(self, z):
        w1 = self.solve(z)
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        w2 = z + self.Lm(w1) - w1
        return w1, w2


@dataclass
class SubordinationPair:
    """Subordination functions of ``mu (+) nu`` and their diagnostics."""

    omega1: AnalyticFunctionHandle
    omega2: AnalyticFunctionHandle
    residual_sup: float
    grid: np.ndarray
    details: dict = field(default_factory=dict)
    cauchy: AnalyticFunctionHandle | None = None

    def to_dict(self) -> dict:
        return {
            "schema": "v1",
            "residual_sup": self.residual_sup,
            "grid": [[float(z.real), float(z.imag)] for z in self.grid],
            "details": self.details,
        }


def _span(law) -> tuple[float, float]:
    _, _, sup = _law(law)
    if sup is None:
        raise DomainError("law handle must declare its support")
    return float(sup[0]), float(sup[1])


def _atoms(law) -> tuple[Atom, ...] | None:
    if isinstance(law, SpectralMeasure):
        return law.atoms
    return getattr(law, "atoms", None)


def _handle(func, label, support=None, derivative=None, atoms=None, kind="G", domain=UPPER_HALF_PLANE):
    h = AnalyticFunctionHandle(func, domain, kind=kind, support=support,
                               derivative=derivative, label=label)
    h.atoms = atoms
    return h


def free_add_handle(mu, nu, cfg: FixedPointConfig | None = None):
    """Exact (solver-precision) handles for ``mu (+) nu``: ``(G, omega1, omega2)``."""
    cfg = cfg or FixedPointConfig()
    (l1, h1), (l2, h2) = _span(mu), _span(nu)
    support = (l1 + l2, h1 + h2)
    scale = max(support[1] - support[0], 1.0)
    solver = _AdditiveSolver(mu, nu, cfg, scale)
    atoms = _free_add_atoms(_atoms(mu), _atoms(nu))

    def G(z):
        w1 = solver.solve(z)
        return solver.Gm(w1).reshape(np.shape(z))

    def om1(z):
        return solver.solve(z).reshape(np.shape(z))

    def om2(z):
        return solver.omegas(z)[1].reshape(np.shape(z))

    g = _handle(G, "free_add", support, atoms=atoms)
    w1 = _handle(om1, "omega1", kind="generic")
    w2 = _handle(om2, "omega2", kind="generic")
    g._solver = solver
    return g, w1, w2


def _free_add_atoms(a1, a2):
    if a1 is None or a2 is None:
        return None
    out = []
    for x in a1:
        for y in a2:
            m = x.mass + y.mass - 1.0
            if m > 1e-14:
                out.append(Atom(x.location + y.location, m))
    return tuple(out)


def subordination_residual(pair: SubordinationPair, mu, nu, grid=None, G_sum=None) -> float:
    """``sup |G_{mu+nu}(z) - G_mu(omega1(z))|`` over ``grid``.

    Also checks ``Im omega_i >= Im z`` and ``omega1(iy)/(iy) -> 1`` at
    ``y = 1e3``; violations are recorded in ``pair.details``.
    """
    grid = pair.grid if grid is None else np.asarray(grid, dtype=complex)
    Gm, _, _ = _law(mu)
    Gn, _, _ = _law(nu)
    if G_sum is None:
        G_sum = pair.cauchy
    Gs = _law(G_sum)[0](grid)
    w1 = np.asarray(pair.omega1.raw(grid))
    w2 = np.asarray(pair.omega2.raw(grid))
    r1 = np.abs(Gs - Gm(w1))
    r2 = np.abs(Gs - Gn(w2))
    rl = np.abs(w1 + w2 - grid - 1.0 / Gs)
    y = 1e3
    slope = abs(complex(pair.omega1.raw(np.array([1j * y]))[0]) / (1j * y) - 1.0)
    growth = float(np.min(np.minimum(w1.imag, w2.imag) - grid.imag))
    pair.details.update(
        residual_G_mu=float(np.max(r1)),
        residual_G_nu=float(np.max(r2)),
        residual_L_sum=float(np.max(rl)),
        im_growth_min=growth,
        im_growth_ok=bool(growth >= -1e-12),
        slope_at_1e3i=slope,
        slope_ok=bool(slope < 0.01),
    )
    return float(max(np.max(r1), np.max(r2)))


def free_add(mu, nu, cfg: FixedPointConfig | None = None) -> tuple[SpectralMeasure, SubordinationPair]:
    """Free additive convolution via subordination.

    Returns the gridded law of ``mu (+) nu`` and the subordination pair with
    residuals measured against that gridded law on the verification grid.
    """
    cfg = cfg or FixedPointConfig()
    g, w1, w2 = free_add_handle(mu, nu, cfg)
    lo, hi = g.support
    pad = 1e-6 * max(hi - lo, 1.0)
    m = recover_measure(g, lo - pad, hi + pad, cfg.n_nodes, atoms=g.atoms)
    pair = SubordinationPair(w1, w2, 0.0, cfg.grid, cauchy=g)
    pair.residual_sup = subordination_residual(pair, mu, nu, G_sum=m)
    return m, pair


# --- free additive powers -------------------------------------------------------


class _PowerSolver(_Subordination):
    def __init__(self, mu, t, cfg, scale):
        super().__init__(cfg, scale)
        self.G, self.dG, _ = _law(mu)
        self.t = t

    def T(self, w, z):
        return z + (self.t - 1.0) * (1.0 / self.G(w) - w)

    def F(self, w, z):
        return w - self.T(w, z)

    def dF(self, w, z):
        g = self.G(w)
        dl = -self.dG(w) / (g * g)
        return self.t - (self.t - 1.0) * dl


def free_add_power_handle(mu, t: float, cfg: FixedPointConfig | None = None):
    """``G`` of ``mu^{(+)t}``: ``G_mu(w(z))`` with ``w = z + (t-1)(L_mu(w) - w)``."""
    if not t >= 1:
        raise ParameterError(f"free convolution power needs t >= 1, got {t}")
    cfg = cfg or FixedPointConfig()
    lo, hi = _span(mu)
    support = (t * lo, t * hi)
    solver = _PowerSolver(mu, t, cfg, max(support[1] - support[0], 1.0))
    a = _atoms(mu)
    atoms = None
    if a is not None:
        atoms = tuple(Atom(t * x.location, t * x.mass - (t - 1)) for x in a if t * x.mass - (t - 1) > 1e-14)

    def G(z):
        return solver.G(solver.solve(z)).reshape(np.shape(z))

    def om(z):
        return solver.solve(z).reshape(np.shape(z))

    return _handle(G, f"free_power(t={t})", support, atoms=atoms), _handle(om, "omega", kind="generic")


def free_add_power(mu, t: float, cfg: FixedPointConfig | None = None) -> SpectralMeasure:
    """Free additive convolution power ``mu^{(+)t}`` for ``t >= 1``."""
    if not t >= 1:
        raise ParameterError(f"free convolution power needs t >= 1, got {t}")
    if t == 1 and isinstance(mu, SpectralMeasure):
        return mu
    cfg = cfg or FixedPointConfig()
    g, _ = free_add_power_handle(mu, t, cfg)
    lo, hi = g.support
    pad = 1e-6 * max(hi - lo, 1.0)
    return recover_measure(g, lo - pad, hi + pad, cfg.n_nodes, atoms=g.atoms)


# --- boolean powers ---------------------------------------------------------------


def boolean_power_handle(mu, t: float):
    """``L = (1 - t) z + t L_mu(z)``; returned as the handle of ``G = 1/L``."""
    if not 0 < t <= 1:
        raise ParameterError(f"boolean power needs 0 < t <= 1, got {t}")
    G, dG, _ = _law(mu)
    lo, hi = _span(mu)
    support = (min(lo, 0.0), max(hi, 0.0))

    def Gt(z):
        z = np.asarray(z, dtype=complex)
        return 1.0 / ((1.0 - t) * z + t / G(z))

    def dGt(z):
        z = np.asarray(z, dtype=complex)
        g = G(z)
        L = (1.0 - t) * z + t / g
        dL = (1.0 - t) - t * dG(z) / (g * g)
        return -dL / (L * L)

    return _handle(Gt, f"boolean_power(t={t})", support, derivative=dGt)


def boolean_power(mu, t: float, cfg: FixedPointConfig | None = None) -> SpectralMeasure:
    """Boolean convolution power ``mu^{(u)t}`` for ``0 < t <= 1``.

    The law lives in the hull of ``supp(mu)`` and 0; atoms are detected as
    real poles of ``1/L``.
    """
    cfg = cfg or FixedPointConfig()
    if t == 1 and isinstance(mu, SpectralMeasure):
        return mu
    g = boolean_power_handle(mu, t)
    lo, hi = g.support
    pad = 1e-6 * max(hi - lo, 1.0)
    return recover_measure(g, lo - pad, hi + pad, cfg.n_nodes)


# --- monotone convolution ---------------------------------------------------------


def monotone_add_handle(mu, nu):
    """``G_{mu |> nu} = G_mu o L_nu`` (``mu`` is the earlier variable X)."""
    Gm, dGm, _ = _law(mu)
    Gn, dGn, _ = _law(nu)
    (l1, h1), (l2, h2) = _span(mu), _span(nu)

    def G(z):
        z = np.asarray(z, dtype=complex)
        return Gm(1.0 / Gn(z))

    def dG(z):
        z = np.asarray(z, dtype=complex)
        gn = Gn(z)
        return dGm(1.0 / gn) * (-dGn(z) / (gn * gn))

    return _handle(G, "monotone_add", (l1 + l2, h1 + h2), derivative=dG)


def monotone_add(mu, nu, cfg: FixedPointConfig | None = None) -> SpectralMeasure:
    """Monotone additive convolution ``mu |> nu`` with ``G = G_mu o L_nu``."""
    cfg = cfg or FixedPointConfig()
    g = monotone_add_handle(mu, nu)
    lo, hi = g.support
    pad = 1e-6 * max(hi - lo, 1.0)
    return recover_measure(g, lo - pad, hi + pad, cfg.n_nodes)


# --- free multiplicative convolution ------------------------------------------------


def _check_positive(law, name):
    lo, _ = _span(law)
    if lo < -1e-12:
        raise DomainError(f"{name} must be supported in [0, inf); support starts at {lo}")
    a = _atoms(law)
    if a and any(x.location == 0 and x.mass >= 1 - 1e-12 for x in a):
        raise DomainError(f"{name} is delta_0")


class _MultiplicativeSolver(_Subordination):
    """Solves ``eta_mu(w1) = eta_nu(z eta_mu(w1)/w1)`` for ``z`` off ``[0, inf)``."""

    safe_height = 0.25

    def __init__(self, mu, nu, cfg, scale):
        super().__init__(cfg, scale)
        self.Gm, self.dGm, _ = _law(mu)
        self.Gn, self.dGn, _ = _law(nu)

    @staticmethod
    def _eta(G, dG, w, derivative=False):
        u = 1.0 / w
        L = 1.0 / G(u)
        eta = 1.0 - w * L
        if not derivative:
            return eta
        dL = -dG(u) * L * L
        return eta, -L + dL * u

    def T(self, w, z):
        em = self._eta(self.Gm, self.dGm, w)
        w2 = z * em / w
        en = self._eta(self.Gn, self.dGn, w2)
        return z * en / w2

    def F(self, w, z):
        em = self._eta(self.Gm, self.dGm, w)
        w2 = z * em / w
        return em - self._eta(self.Gn, self.dGn, w2)

    def dF(self, w, z):
        em, dem = self._eta(self.Gm, self.dGm, w, True)
        w2 = z * em / w
        _, den = self._eta(self.Gn, self.dGn, w2, True)
        dw2 = z * (dem * w - em) / (w * w)
        return dem - den * dw2

    def admissible(self, w, z):
        up = z.imag > 0
        return np.where(up, w.imag > 0, (w.imag == 0) & (w.real < 0))

    def solve(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        real = z.imag == 0
        if np.any(real & (z.real >= 0)):
            raise DomainError("multiplicative subordination is defined off [0, inf)")
        out = np.empty(z.shape, dtype=complex)
        if np.any(real):
            zr = z[real]
            w, trace = self.fixed_point(zr)
            w, conv = _newton_param(self.F, self.dF, w, zr, self.cfg.tol, 50, self.admissible)
            if not np.all(conv):
                raise InversionError("multiplicative fixed point failed on the negative axis", trace)
            out[real] = w.real
        if np.any(~real):
            zc = z[~real]
            low = zc.imag < 0
            zz = np.where(low, np.conj(zc), zc)
            # near the positive axis use continuation in Im z
            far = (zz.imag >= self.safe_height * np.abs(zz)) | (zz.real < 0)
            w = np.empty(zz.shape, dtype=complex)
            if np.any(far):
                w[far] = self._solve_far(zz[far])
            if np.any(~far):
                w[~far] = self._solve_near_ray(zz[~far])
            out[~real] = np.where(low, np.conj(w), w)
        return out

    def _solve_near_ray(self, z):
        # move from z* = x + i*y_top down to the target along Im z
        top = self.safe_height * np.abs(z) + 1e-300
        start = z.real + 1j * np.maximum(top, z.imag)
        w = self._solve_far(start)
        h = np.maximum(top, z.imag)
        while True:
            h_new = np.maximum(h * 0.5, z.imag)
            h_new = np.where(h_new < z.imag * 1.0001, z.imag, h_new)
            zk = z.real + 1j * h_new
            w, conv = _newton_param(self.F, self.dF, w, zk, self.cfg.tol, 60, self.admissible)
            if not np.all(conv):
                raise InversionError(f"continuation failed at z={zk[~conv][0]!r}")
            h = h_new
            if np.all(h <= z.imag):
                break
        return w


def free_mult_handle(mu, nu, cfg: FixedPointConfig | None = None):
    """Handles ``(G, psi, omega1)`` for ``mu (x) nu`` on non-negative laws."""
    cfg = cfg or FixedPointConfig()
    _check_positive(mu, "mu")
    _check_positive(nu, "nu")
    (l1, h1), (l2, h2) = _span(mu), _span(nu)
    support = (l1 * l2, h1 * h2)
    solver = _MultiplicativeSolver(mu, nu, cfg, 1.0)
    atoms = _free_mult_atoms(_atoms(mu), _atoms(nu))

    def psi(z):
        z = np.asarray(z, dtype=complex)
        w = solver.solve(z)
        u = 1.0 / w
        return (u * solver.Gm(u) - 1.0).reshape(np.shape(z))

    def G(zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return ((1.0 + psi(1.0 / zeta)) / zeta).reshape(np.shape(zeta))

    def om(z):
        return solver.solve(z).reshape(np.shape(z))

    g = _handle(G, "free_mult", support, atoms=atoms)
    g.mass_at_zero = max((x.mass for x in (atoms or ()) if x.location == 0), default=0.0)
    return (g, _handle(psi, "psi", kind="generic", domain=SLIT_PLANE),
            _handle(om, "omega1", kind="generic", domain=SLIT_PLANE))


def _free_mult_atoms(a1, a2):
    if a1 is None or a2 is None:
        return None
    m0 = max(
        max((x.mass for x in a1 if x.location == 0), default=0.0),
        max((x.mass for x in a2 if x.location == 0), default=0.0),
    )
    out = {}
    if m0 > 0:
        out[0.0] = m0
    for x in a1:
        for y in a2:
            if x.location == 0 or y.location == 0:
                continue
            m = x.mass + y.mass - 1.0
            if m > 1e-14:
                loc = x.location * y.location
                out[loc] = out.get(loc, 0.0) + m
    return tuple(Atom(k, v) for k, v in sorted(out.items()))


def free_mult(mu, nu, cfg: FixedPointConfig | None = None) -> SpectralMeasure:
    """Free multiplicative convolution of laws on ``[0, inf)``."""
    cfg = cfg or FixedPointConfig()
    if isinstance(mu, SpectralMeasure) and _is_dirac_one(mu):
        return nu if isinstance(nu, SpectralMeasure) else None
    if isinstance(nu, SpectralMeasure) and _is_dirac_one(nu):
        return mu if isinstance(mu, SpectralMeasure) else None
    g, _, _ = free_mult_handle(mu, nu, cfg)
    lo, hi = g.support
    pad = 1e-6 * max(hi - lo, 1.0)
    return recover_measure(g, max(lo - pad, 0.0), hi + pad, cfg.n_nodes, atoms=g.atoms)


def _is_dirac_one(m: SpectralMeasure) -> bool:
    return m.ac is None and len(m.atoms) == 1 and m.atoms[0].location == 1.0


def psi_subordination_residual(mu, nu, z, cfg: FixedPointConfig | None = None, psi_ref=None) -> float:
    """``sup |psi_{mu.nu}(z) - psi_mu(omega1(z))|`` against a reference law."""
    from .transforms import psi_via_G

    _, psi, om = free_mult_handle(mu, nu, cfg)
    z = np.asarray(z, dtype=complex)
    ref = psi_via_G(psi_ref, z) if psi_ref is not None else psi(z)
    sub = psi_via_G(mu, om.raw(z))
    return float(np.max(np.abs(ref - sub)))
