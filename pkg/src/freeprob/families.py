"""Free Meixner, Marchenko-Pastur (free Poisson) and free binomial laws.

All square roots are taken on the branch fixed by the large-``z``
asymptotics (``G ~ 1/z``, ``phi -> 0``, ``R(0) = 0``). Products of two
principal roots ``sqrt(z - l) * sqrt(z - r)`` realize that branch with a cut
exactly on ``[l, r]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import BranchError, ParameterError
from .measure import Atom, SpectralMeasure, density_measure
from .transforms import BRANCH_TOL, UPPER_HALF_PLANE, AnalyticFunctionHandle


def _cut_sqrt(z, lo, hi):
    """Square root of ``(z - lo)(z - hi)`` with cut ``[lo, hi]`` and ``~ z`` at infinity."""
    z = np.asarray(z, dtype=complex)
    return np.sqrt(z - lo) * np.sqrt(z - hi)


def _real_cut_sqrt(x, lo, hi):
    """Boundary value of :func:`_cut_sqrt` at real ``x`` outside ``[lo, hi]``."""
    mid = 0.5 * (lo + hi)
    return math.copysign(math.sqrt((x - lo) * (x - hi)), x - mid)


# --- free Meixner -----------------------------------------------------------


@dataclass(frozen=True)
class MeixnerParams:
    """Free Meixner law ``mu_{a,b}`` (mean 0, variance 1)."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ParameterError("Meixner parameters must be finite")
        if self.b < -1:
            raise ParameterError(f"Meixner parameter b={self.b} must be >= -1")

    @property
    def radius(self) -> float:
        return 2.0 * math.sqrt(1.0 + self.b)

    @property
    def support(self) -> tuple[float, float]:
        return self.a - self.radius, self.a + self.radius


def meixner_G(p: MeixnerParams, z):
    """Closed-form Cauchy transform of ``mu_{a,b}``.

    Evaluated in the rationalized form ``2(1+b) / ((1+2b)z + a + s(z))``,
    which has no ``0/0`` at ``b = 0`` or at the roots of ``bz^2+az+1``.
    """
    z_arr = np.asarray(z, dtype=complex)
    a, b = p.a, p.b
    if b == -1.0:
        val = (z_arr - a) / (z_arr * z_arr - a * z_arr - 1.0)
    else:
        s = _cut_sqrt(z_arr, *p.support)
        val = 2.0 * (1.0 + b) / ((1.0 + 2.0 * b) * z_arr + a + s)
    up = z_arr.imag > 0
    if np.any(val.imag[up] > BRANCH_TOL * np.maximum(1.0, np.abs(val[up]))):
        raise BranchError("meixner_G left the Cauchy branch")
    return val if val.ndim else complex(val)


def meixner_dG(p: MeixnerParams, z):
    z = np.asarray(z, dtype=complex)
    a, b = p.a, p.b
    if b == -1.0:
        d = z * z - a * z - 1.0
        return (d - (z - a) * (2 * z - a)) / (d * d)
    s = _cut_sqrt(z, *p.support)
    q = (1.0 + 2.0 * b) * z + a + s
    dq = (1.0 + 2.0 * b) + (z - a) / s
    return -2.0 * (1.0 + b) * dq / (q * q)


def meixner_quadratic_residual(p: MeixnerParams, z, G=None):
    """``(1 + za + bz^2) G^2 - (z + a + 2bz) G + 1 + b``."""
    z = np.asarray(z, dtype=complex)
    G = meixner_G(p, z) if G is None else np.asarray(G)
    a, b = p.a, p.b
    return (1 + z * a + b * z * z) * G * G - (z + a + 2 * b * z) * G + 1 + b


def meixner_handle(p: MeixnerParams) -> AnalyticFunctionHandle:
    return AnalyticFunctionHandle(
        lambda z: np.asarray(meixner_G(p, z)),
        UPPER_HALF_PLANE,
        kind="G",
        derivative=lambda z: meixner_dG(p, z),
        support=(min(p.support[0], *(_meixner_roots(p) or [p.support[0]])),
                 max(p.support[1], *(_meixner_roots(p) or [p.support[1]]))),
        label=f"meixner(a={p.a}, b={p.b})",
    )


def _meixner_roots(p: MeixnerParams) -> list[float]:
    a, b = p.a, p.b
    if b == 0.0:
        return [] if a == 0.0 else [-1.0 / a]
    disc = a * a - 4 * b
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    # cancellation-free pair
    q = -0.5 * (a + math.copysign(sq, a)) if a != 0 else -0.5 * sq
    if q == 0:
        return []
    return sorted({q / b, 1.0 / q})


def meixner_atoms(p: MeixnerParams, floor: float = 1e-14) -> list[Atom]:
    """Atoms at the real roots of ``bx^2 + ax + 1`` off the density support.

    Weights are the residues of the closed-form G, ``N(x0) / (2 D'(x0))``
    with ``N = (1+2b)x + a - s(x)``.
    """
    a, b = p.a, p.b
    if b == -1.0:
        # G = (z - a)/(z^2 - az - 1): purely atomic
        disc = math.sqrt(a * a + 4)
        xs = ((a - disc) / 2, (a + disc) / 2)
        return [Atom(x, (x - a) / (2 * x - a)) for x in xs]
    lo, hi = p.support
    out = []
    for x0 in _meixner_roots(p):
        if lo <= x0 <= hi:
            continue
        dD = 2 * b * x0 + a
        if abs(dD) < 1e-12:
            continue
        num = (1 + 2 * b) * x0 + a - _real_cut_sqrt(x0, lo, hi)
        mass = num / (2 * dD)
        if mass > floor:
            out.append(Atom(x0, mass))
    return out


def _radicand(x, lo, hi, dlo, dhi):
    # factored radicand: no cancellation next to the edges
    if dlo is None:
        return np.maximum((x - lo) * (hi - x), 0.0)
    return np.asarray(dlo, dtype=float) * np.asarray(dhi, dtype=float)


def meixner_density(p: MeixnerParams, x, dlo=None, dhi=None):
    """Density of ``mu_{a,b}``; ``dlo, dhi`` are optional exact edge distances."""
    x = np.asarray(x, dtype=float)
    a, b = p.a, p.b
    lo, hi = p.support
    rad = _radicand(x, lo, hi, dlo, dhi)
    return np.sqrt(rad) / (2 * np.pi * (b * x * x + a * x + 1))


def meixner_measure(p: MeixnerParams, n_nodes: int = 2000) -> SpectralMeasure:
    atoms = meixner_atoms(p)
    if p.b == -1.0:
        return SpectralMeasure(tuple(atoms), None)
    lo, hi = p.support
    return density_measure(partial(meixner_density, p), lo, hi, n_nodes, atoms, edges=True)


def meixner_phi(p: MeixnerParams, z):
    """Voiculescu transform ``phi_{a,b}(z) = 2 / (z - a + sqrt((z-a)^2 - 4b))``.

    Equivalent to ``(z - a - sqrt((z-a)^2 - 4b)) / (2b)`` off ``b = 0``;
    reduces to ``1/(z - a)`` at ``b = 0``.
    """
    z = np.asarray(z, dtype=complex)
    u = z - p.a
    root = u * np.sqrt(1.0 - 4.0 * p.b / (u * u))
    val = 2.0 / (u + root)
    return val if val.ndim else complex(val)


def meixner_R(p: MeixnerParams, w):
    """R-transform ``R(w) = phi(1/w)``; ``R(w) = w + a w^2 + (a^2+b) w^3 + ...``."""
    w = np.asarray(w, dtype=complex)
    v = 1.0 - p.a * w
    val = 2.0 * w / (v * (1.0 + np.sqrt(1.0 - 4.0 * p.b * w * w / (v * v))))
    return val if val.ndim else complex(val)


def printed_phi_variants(p: MeixnerParams, z) -> dict[str, np.ndarray]:
    """Sign variants of the printed ``(z - a +/- sqrt((z +/- a)^2 - 4b)) / (2b)``.

    The root uses the continuity branch ``(z +/- a) sqrt(1 - 4b/(z +/- a)^2)``.
    """
    if p.b == 0:
        raise ParameterError("printed phi form is 0/0 at b = 0")
    z = np.asarray(z, dtype=complex)
    out = {}
    for inner, shift in (("z+a", p.a), ("z-a", -p.a)):
        u = z + shift
        root = u * np.sqrt(1.0 - 4.0 * p.b / (u * u))
        for sign, sgn in (("+", 1.0), ("-", -1.0)):
            out[f"(z-a{sign}sqrt(({inner})^2-4b))/(2b)"] = (z - p.a + sgn * root) / (2 * p.b)
    return out


def printed_R_variants(p: MeixnerParams, w) -> dict[str, np.ndarray]:
    """Sign variants of ``(1 -/+ aw +/- sqrt((1 +/- aw)^2 - 4bw^2)) / (2bw)``."""
    if p.b == 0:
        raise ParameterError("printed R form is 0/0 at b = 0")
    w = np.asarray(w, dtype=complex)
    out = {}
    for outer, so in (("1-aw", -1.0), ("1+aw", 1.0)):
        for inner, si in (("1+aw", 1.0), ("1-aw", -1.0)):
            u = 1.0 + si * p.a * w
            root = u * np.sqrt(1.0 - 4.0 * p.b * w * w / (u * u))
            for sign, sg in (("+", 1.0), ("-", -1.0)):
                key = f"({outer}{sign}sqrt(({inner})^2-4bw^2))/(2bw)"
                out[key] = (1.0 + so * p.a * w + sg * root) / (2 * p.b * w)
    return out


def audit_printed_forms(p: MeixnerParams, z=None) -> dict:
    """Compare printed sign variants of phi and R against the numeric phi.

    Returns the discrepancy of every variant and the names of those that
    agree with ``L^{-1}(z) - z`` of the closed-form G to 1e-8.
    """
    from .transforms import voiculescu_phi

    if z is None:
        z = np.array([6j, 1 + 8j, -2 + 10j, 15j])
    z = np.asarray(z, dtype=complex)
    h = meixner_handle(p)
    ref = np.asarray(voiculescu_phi(h, z))
    phi_err = {k: float(np.max(np.abs(v - ref))) for k, v in printed_phi_variants(p, z).items()}
    r_err = {k: float(np.max(np.abs(v - ref))) for k, v in printed_R_variants(p, 1.0 / z).items()}
    return {
        "params": {"a": p.a, "b": p.b},
        "phi": phi_err,
        "R": r_err,
        "phi_match": sorted(k for k, e in phi_err.items() if e < 1e-8),
        "R_match": sorted(k for k, e in r_err.items() if e < 1e-8),
        "closed_form_phi_error": float(np.max(np.abs(meixner_phi(p, z) - ref))),
    }


# --- Marchenko-Pastur -------------------------------------------------------


@dataclass(frozen=True)
class MarchenkoPasturParams:
    """Free Poisson law ``nu(lambda, alpha)``; ``lam`` is the rate, ``alpha`` the jump size."""

    lam: float
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ParameterError(f"rate lambda={self.lam} must be >= 0")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"jump size alpha={self.alpha} must be > 0")

    @property
    def support(self) -> tuple[float, float]:
        r = math.sqrt(self.lam)
        return self.alpha * (1 - r) ** 2, self.alpha * (1 + r) ** 2


def mp_density(p: MarchenkoPasturParams, x, dlo=None, dhi=None):
    x = np.asarray(x, dtype=float)
    al = p.alpha
    lo, hi = p.support
    rad = _radicand(x, lo, hi, dlo, dhi)
    if dlo is not None:
        x = lo + np.asarray(dlo, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, np.sqrt(rad) / (2 * np.pi * al * np.where(x > 0, x, 1.0)), 0.0)
    return out


def mp_measure(p: MarchenkoPasturParams, n_nodes: int = 2000) -> SpectralMeasure:
    """Atom ``max(0, 1-lambda)`` at 0 plus the density on ``alpha(1 +/- sqrt(lambda))^2``.

    The printed density already integrates to ``min(1, lambda)``, so it is
    used as the whole absolutely continuous part.
    """
    atoms = (Atom(0.0, 1.0 - p.lam),) if p.lam < 1 else ()
    if p.lam == 0:
        return SpectralMeasure(atoms, None)
    lo, hi = p.support
    return density_measure(partial(mp_density, p), lo, hi, n_nodes, atoms, edges=True)


def mp_G(p: MarchenkoPasturParams, z):
    """``G = 2 / (z + alpha(1 - lambda) + s(z))`` with ``s^2 = (z - x_-)(z - x_+)``."""
    z = np.asarray(z, dtype=complex)
    if p.lam == 0:
        return 1.0 / z
    s = _cut_sqrt(z, *p.support)
    val = 2.0 / (z + p.alpha * (1 - p.lam) + s)
    return val if val.ndim else complex(val)


def mp_handle(p: MarchenkoPasturParams) -> AnalyticFunctionHandle:
    lo, hi = p.support
    return AnalyticFunctionHandle(
        lambda z: np.asarray(mp_G(p, z)), UPPER_HALF_PLANE, kind="G",
        support=(min(0.0, lo), hi), label=f"mp(lambda={p.lam}, alpha={p.alpha})",
    )


def mp_S(p: MarchenkoPasturParams, w):
    """``S(w) = 1 / (alpha lambda + alpha w)``."""
    w = np.asarray(w, dtype=complex)
    den = p.alpha * (p.lam + w)
    if np.any(den == 0):
        raise ParameterError("mp_S has a pole at w = -lambda")
    val = 1.0 / den
    return val if val.ndim else complex(val)


# --- free binomial -----------------------------------------------------------


@dataclass(frozen=True)
class FreeBinomialParams:
    """Free binomial law ``beta(sigma, theta)`` on ``[0, 1]``.

    Only the branch ``sigma, theta > 0, sigma + theta > 1`` of the
    admissible set is accepted; the other branch gives negative weights.
    """

    sigma: float
    theta: float

    def __post_init__(self):
        s, t = self.sigma, self.theta
        if not (math.isfinite(s) and math.isfinite(t)):
            raise ParameterError("binomial parameters must be finite")
        bad = []
        if not s > 0:
            bad.append(f"sigma={s} must be > 0")
        if not t > 0:
            bad.append(f"theta={t} must be > 0")
        if not s + t > 1:
            bad.append(f"sigma+theta={s + t} must be > 1")
        if bad:
            raise ParameterError("inadmissible free binomial parameters: " + "; ".join(bad))

    @property
    def support(self) -> tuple[float, float]:
        s, t = self.sigma, self.theta
        n = s + t
        u = math.sqrt(s / n * (1 - 1 / n))
        v = math.sqrt(1 / n * (1 - s / n))
        return (u - v) ** 2, (u + v) ** 2


def binomial_density(p: FreeBinomialParams, x, dlo=None, dhi=None):
    x = np.asarray(x, dtype=float)
    lo, hi = p.support
    rad = _radicand(x, lo, hi, dlo, dhi)
    if dlo is None:
        den = 2 * np.pi * x * (1 - x)
    else:
        # x and 1 - x rebuilt from the edge distances
        den = 2 * np.pi * (lo + np.asarray(dlo)) * ((1 - hi) + np.asarray(dhi))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, (p.sigma + p.theta) * np.sqrt(rad) / np.where(den > 0, den, 1.0), 0.0)
    return out


def binomial_measure(p: FreeBinomialParams, n_nodes: int = 2000) -> SpectralMeasure:
    atoms = []
    if p.sigma < 1:
        atoms.append(Atom(0.0, 1 - p.sigma))
    if p.theta < 1:
        atoms.append(Atom(1.0, 1 - p.theta))
    lo, hi = p.support
    return density_measure(partial(binomial_density, p), lo, hi, n_nodes, tuple(atoms), edges=True)


def binomial_S(p: FreeBinomialParams, w):
    """``S(w) = 1 + 1 / (sigma/theta + w/theta) = 1 + theta / (sigma + w)``."""
    w = np.asarray(w, dtype=complex)
    if np.any(w == -p.sigma):
        raise ParameterError("binomial_S has a pole at w = -sigma")
    val = 1.0 + p.theta / (p.sigma + w)
    return val if val.ndim else complex(val)


def build_family(kind: str, params: dict, n_nodes: int = 2000) -> SpectralMeasure:
    """Dispatch used by the CLI: ``kind`` in {meixner, mp, binomial}."""
    try:
        if kind == "meixner":
            return meixner_measure(MeixnerParams(params["a"], params["b"]), n_nodes)
        if kind == "mp":
            return mp_measure(MarchenkoPasturParams(params["lam"], params["alpha"]), n_nodes)
        if kind == "binomial":
            return binomial_measure(FreeBinomialParams(params["sigma"], params["theta"]), n_nodes)
    except KeyError as exc:
        raise ParameterError(f"missing parameter {exc.args[0]!r} for family {kind!r}") from None
    raise ParameterError(f"unknown family {kind!r}")
