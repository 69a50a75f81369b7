"""Numerical certificates for the free, monotone and multiplicative
regression characterizations.

Each ``verify_*`` function builds the laws named by a characterization, runs
them through the convolution engine and reports the residuals of the
analytic identities the characterization rests on. Verification runs in the
forward direction: the stated laws are shown to satisfy the stated
identities on a finite grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import (
    FixedPointConfig,
    boolean_power,
    default_grid,
    free_add_handle,
    free_mult,
    free_mult_handle,
)
from .errors import ParameterError
from .families import (
    FreeBinomialParams,
    MarchenkoPasturParams,
    MeixnerParams,
    _cut_sqrt,
    binomial_measure,
    meixner_G,
    meixner_measure,
    meixner_quadratic_residual,
    mp_measure,
)
from .measure import SpectralMeasure, ks_distance, mean, moment
from .transforms import UPPER_HALF_PLANE, AnalyticFunctionHandle, cauchy_G, recover_measure, s_transform


def default_s_grid() -> np.ndarray:
    """Nine equispaced points of ``(-0.45, -0.05)`` for S-transform identities."""
    return np.linspace(-0.45, -0.05, 9)


# --- domain types -----------------------------------------------------------


@dataclass(frozen=True)
class RegressionSpec:
    """Regression weights ``alpha + beta = 1`` and variance coefficients ``a, b``."""

    alpha: float
    a: float
    b: float
    beta: float | None = None

    def __post_init__(self):
        al = self.alpha
        be = 1.0 - al if self.beta is None else self.beta
        object.__setattr__(self, "beta", be)
        bad = []
        if not (al > 0 and be > 0):
            bad.append(f"alpha={al} and beta={be} must both be > 0")
        if abs(al + be - 1.0) > 1e-12:
            bad.append(f"alpha + beta = {al + be} must equal 1")
        if not bad:
            if self.b / al < -1:
                bad.append(f"b/alpha = {self.b / al} < -1")
            if self.b / be < -1:
                bad.append(f"b/beta = {self.b / be} < -1")
        if bad:
            raise ParameterError("inadmissible regression spec: " + "; ".join(bad))

    def x_params(self) -> MeixnerParams:
        """Law of ``X / sqrt(alpha)``."""
        r = math.sqrt(self.alpha)
        return MeixnerParams(self.a / r, self.b / self.alpha)

    def y_params(self) -> MeixnerParams:
        """Law of ``Y / sqrt(beta)`` in the free case."""
        r = math.sqrt(self.beta)
        return MeixnerParams(self.a / r, self.b / self.beta)

    def sum_params(self) -> MeixnerParams:
        return MeixnerParams(self.a, self.b)


@dataclass(frozen=True)
class DualRegressionSpec:
    """Constants ``c, d`` of the multiplicative regressions plus mixed moments."""

    c: float
    d: float
    mixed_moments: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationReport:
    theorem_id: str
    grid: tuple
    residual_sup: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "v1",
            "theorem_id": self.theorem_id,
            "grid": [_jsonable(z) for z in self.grid],
            "residual_sup": self.residual_sup,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _report(theorem_id, grid, checks: dict, tol: float, extra: dict | None = None) -> VerificationReport:
    residuals = {k: float(v) for k, v in checks.items()}
    sup = max(residuals.values())
    details = dict(residuals)
    details.update(extra or {})
    return VerificationReport(str(theorem_id), tuple(np.asarray(grid).ravel().tolist()), sup, tol,
                              bool(sup <= tol), details)


def _sup(x) -> float:
    return float(np.max(np.abs(x)))


def _grid(grid):
    return default_grid() if grid is None else np.asarray(grid, dtype=complex).ravel()


# --- free Laha-Lukacs -------------------------------------------------------


def regression_laws(spec: RegressionSpec, n_nodes: int = 2000) -> tuple[SpectralMeasure, SpectralMeasure]:
    """Laws of ``X`` and ``Y`` in the free characterization (dilated Meixner laws)."""
    x = meixner_measure(spec.x_params(), n_nodes).dilate(math.sqrt(spec.alpha))
    y = meixner_measure(spec.y_params(), n_nodes).dilate(math.sqrt(spec.beta))
    return x, y


def verify_free_laha_lukacs(spec: RegressionSpec, grid=None, tol: float = 1e-7,
                            cfg: FixedPointConfig | None = None) -> VerificationReport:
    """Subordination system of the free regression with ``F = omega_1``.

    Checks, on ``grid``::

        alpha (z G - 1) = F G_X(F) - 1
        alpha beta ((1 + a z + b z^2) G - a - b z) / (b + 1) + alpha^2 (z^2 G - z)
            = F^2 G_X(F) - F
        G = G_{a,b}  and  (1 + a z + b z^2) G^2 - (z + a + 2 b z) G + 1 + b = 0

    where ``G`` is the Cauchy transform of ``X + Y`` computed by free
    convolution.
    """
    z = _grid(grid)
    al, be, a, b = spec.alpha, spec.beta, spec.a, spec.b
    x_law, y_law = regression_laws(spec)
    G, om1, om2 = free_add_handle(x_law, y_law, cfg)
    g = G.raw(z)
    F = om1.raw(z)
    gx = cauchy_G(x_law, F)
    pom1 = al * (z * g - 1.0) - (F * gx - 1.0)
    pom2 = (al * be * ((1 + a * z + b * z * z) * g - a - b * z) / (b + 1)
            + al * al * (z * z * g - z) - (F * F * gx - F))
    target = meixner_G(spec.sum_params(), z)
    checks = {
        "pom1": _sup(pom1),
        "pom2": _sup(pom2),
        "G_sum_vs_meixner": _sup(g - target),
        "meixner_quadratic": _sup(meixner_quadratic_residual(spec.sum_params(), z, g)),
    }
    extra = {"im_omega_minus_im_z_min": float(np.min(F.imag - z.imag)),
             "alpha": al, "beta": be, "a": a, "b": b}
    return _report("4", z, checks, tol, extra)


# --- monotone Laha-Lukacs ---------------------------------------------------


def monotone_L_Y(spec: RegressionSpec, z):
    """``L_Y(z) = alpha z + beta L_{a,b}(z)`` in closed form."""
    z = np.asarray(z, dtype=complex)
    a, b, al, be = spec.a, spec.b, spec.alpha, spec.beta
    r = 2 * math.sqrt(1 + b)
    s = _cut_sqrt(z, a - r, a + r)
    return ((1 + al + 2 * b) * z + be * a + be * s) / (2 * (1 + b))


def printed_G_Y(spec: RegressionSpec, z):
    """The closed form for ``G_Y`` exactly as printed, kept for auditing.

    It does not equal ``1 / L_Y``, whose rationalized form is
    ``((1+alpha+2b) z + beta a - beta s) / (2 ((alpha+b) z^2 + a beta z + beta^2))``;
    :func:`monotone_Y_measure` uses the reciprocal.
    """
    z = np.asarray(z, dtype=complex)
    a, b, al, be = spec.a, spec.b, spec.alpha, spec.beta
    r = 2 * math.sqrt(1 + b)
    s = _cut_sqrt(z, a - r, a + r)
    return ((1 + be + 2 * b) * z + be * a - be * s) / (4 * ((al + b) * z * z + a * be * z + 1))


def monotone_Y_handle(spec: RegressionSpec) -> AnalyticFunctionHandle:
    """``G_Y = 1 / L_Y`` as a Cauchy-transform handle."""
    lo, hi = meixner_measure(spec.sum_params(), 16).support
    h = AnalyticFunctionHandle(lambda z: 1.0 / monotone_L_Y(spec, z), UPPER_HALF_PLANE, kind="G",
                               support=(min(lo, 0.0), max(hi, 0.0)), label="monotone_Y")
    return h


def monotone_Y_measure(spec: RegressionSpec, n_nodes: int = 2000) -> SpectralMeasure:
    """Law of ``Y`` in the monotone characterization, by Stieltjes inversion of ``1/L_Y``."""
    h = monotone_Y_handle(spec)
    lo, hi = h.support
    pad = 1e-6 * max(hi - lo, 1.0)
    return recover_measure(h, lo - pad, hi + pad, n_nodes)


def verify_monotone_laha_lukacs(spec: RegressionSpec, grid=None, tol: float = 1e-7,
                                cfg: FixedPointConfig | None = None) -> VerificationReport:
    """``G_X o L_Y = G_{a,b}`` and ``L_Y = alpha z + beta L_{a,b}`` on ``grid``.

    ``L_Y`` is taken from the recovered law of ``Y``, so the report also
    certifies the inversion. The law of ``Y`` is compared with the boolean
    power ``mu_{a,b}^{(u) beta}`` in Kolmogorov distance.
    """
    cfg = cfg or FixedPointConfig()
    z = _grid(grid)
    al, be = spec.alpha, spec.beta
    x_law = meixner_measure(spec.x_params(), cfg.n_nodes).dilate(math.sqrt(al))
    y_law = monotone_Y_measure(spec, cfg.n_nodes)
    sum_law = meixner_measure(spec.sum_params(), cfg.n_nodes)
    L_y = 1.0 / cauchy_G(y_law, z)
    g_ab = meixner_G(spec.sum_params(), z)
    composed = cauchy_G(x_law, L_y)
    checks = {
        "composition": _sup(composed - g_ab),
        "L_Y_formula": _sup(L_y - (al * z + be / g_ab)),
    }
    bool_law = boolean_power(sum_law, be, cfg)
    ks = ks_distance(y_law, bool_law)
    pom1 = al * (z * g_ab - 1.0) - (L_y * composed - 1.0)
    extra = {
        "ks_Y_vs_boolean_power": ks,
        "ks_ok": bool(ks < 1e-3),
        "pom1": _sup(pom1),
        "printed_G_Y_deviation": _sup(printed_G_Y(spec, z) - 1.0 / monotone_L_Y(spec, z)),
        "Y_mass": float(moment(y_law, 0)),
        "Y_atoms": [[x.location, x.mass] for x in y_law.atoms],
    }
    rep = _report("5", z, checks, tol, extra)
    if not extra["ks_ok"]:
        rep = VerificationReport(rep.theorem_id, rep.grid, rep.residual_sup, rep.tolerance, False, rep.details)
    return rep


# --- free Poisson / free binomial -------------------------------------------


def thm6_params(c: float, d: float, lambda_total: float) -> tuple[float, float, float, float]:
    """``(lambda, alpha_jump, sigma, theta)`` from the regression constants.

    ``theta = c^2/(d - c^2)``, ``alpha = (d - c^2)/c`` and
    ``sigma = lambda - theta``.
    """
    if not d > c * c:
        raise ParameterError(f"need d > c^2, got c={c}, d={d}")
    if not c > 0:
        raise ParameterError(f"need c > 0 for a positive jump size, got c={c}")
    theta = c * c / (d - c * c)
    alpha = (d - c * c) / c
    sigma = lambda_total - theta
    if not sigma > 0:
        raise ParameterError(f"sigma = lambda - theta = {sigma} must be > 0")
    return float(lambda_total), alpha, sigma, theta


def poisson_binomial_constants(lam: float, alpha: float, sigma: float, theta: float) -> tuple[float, float]:
    """Inverse of :func:`thm6_params`: ``c = alpha theta``, ``d = c^2 + alpha c``."""
    c = alpha * theta
    return c, c * c + alpha * c


def verify_poisson_binomial(lam: float, alpha: float, sigma: float, theta: float, w_grid=None,
                            tol: float = 1e-5, cfg: FixedPointConfig | None = None) -> VerificationReport:
    """S-transform, moment identities and psi-quadratic for ``V^(1/2) U V^(1/2)``.

    ``V`` is free Poisson ``nu(lambda, alpha)`` and ``U`` is free binomial
    ``beta(sigma, theta)``; ``lambda = sigma + theta`` and ``V`` must have no
    atom at 0, so ``lambda >= 1``.
    """
    cfg = cfg or FixedPointConfig()
    if abs(lam - (sigma + theta)) > 1e-12 * max(1.0, lam):
        raise ParameterError(f"lambda={lam} must equal sigma + theta = {sigma + theta}")
    if lam < 1:
        raise ParameterError(f"V must be strictly positive: lambda={lam} < 1 puts an atom at 0")
    w = default_s_grid() if w_grid is None else np.asarray(w_grid, dtype=float)
    c, d = poisson_binomial_constants(lam, alpha, sigma, theta)
    v = mp_measure(MarchenkoPasturParams(lam, alpha), cfg.n_nodes)
    u = binomial_measure(FreeBinomialParams(sigma, theta), cfg.n_nodes)
    g_w, psi, _ = free_mult_handle(v, u, cfg)
    s_num = np.asarray(s_transform(g_w, w))
    s_ref = 1.0 / (alpha * lam - c + alpha * w)
    # moments by quadrature on the recovered law of V^(1/2) U V^(1/2)
    w_law = free_mult(v, u, cfg)
    t_uv = mean(w_law)
    t_uv_product = mean(v) * mean(u)
    m1 = mean(v) - t_uv - c
    m2 = moment(v, 2) - moment(w_law, 2) - (d + 2 * c * t_uv)
    zs = np.array([-2.0, -1.0, -0.5, -0.1, -1.0 + 1.0j, 0.5j, 1.0j])
    p = psi(zs)
    quad = alpha * zs * p * p - p * (1 + (c - alpha * (1 + lam)) * zs) - (c - alpha * lam) * zs
    sigma_formula = c * (t_uv + 2 * c - 2 * mean(v)) / (c * c - d)
    checks = {
        "S_W": _sup(s_num - s_ref),
        "tau_V_minus_tau_UV": abs(m1),
        "second_moment_identity": abs(m2),
        "psi_quadratic": _sup(quad),
    }
    extra = {
        "c": c, "d": d,
        "tau_UV_quadrature": t_uv,
        "tau_UV_mean_product": t_uv_product,
        "tau_UV_crosscheck": abs(t_uv - t_uv_product),
        "sigma_from_moments": sigma_formula,
        "W_mass": float(moment(w_law, 0)),
    }
    return _report("6", w, checks, tol, extra)


# --- free binomial Beta analogue --------------------------------------------


def thm7_params(c: float, d: float, alpha1: float) -> tuple[float, float, float, float]:
    """``(sigma_X, theta_X, sigma_Y, theta_Y)`` for ``alpha1 = psi_W(1)``."""
    if c * d == 1:
        raise ParameterError("c d = 1 is a pole of the parameter map")
    den = c * d - 1
    sx = (1 - c) * d * alpha1 / den
    tx = (c - 1) * (d - 1) / (1 - c * d)
    sy = (1 - c) * (d * (alpha1 + 1) - 1) / den
    ty = c * (1 - d) / (1 - c * d)
    names = {"sigma_X": sx, "theta_X": tx, "sigma_Y": sy, "theta_Y": ty}
    bad = [f"{k}={v:.6g}" for k, v in names.items() if not v > 0]
    if bad:
        raise ParameterError("inadmissible: non-positive " + ", ".join(bad))
    return sx, tx, sy, ty


def _psi_at_one(psi) -> float:
    # psi is real-analytic at 1 (outside the singular ray); Re psi(1 + i eps) = psi(1) + O(eps^2)
    return float(np.real(psi.raw(np.array([1.0 + 1e-8j]))[0]))


def solve_alpha1(c: float, d: float, alpha0: float = 1.0, tol: float = 1e-8, max_iter: int = 50,
                 cfg: FixedPointConfig | None = None) -> tuple[float, list[float]]:
    """Fixed point of ``alpha -> psi_W(1)`` for the laws built by :func:`thm7_params`."""
    n = (cfg or FixedPointConfig()).n_nodes
    trace = [float(alpha0)]
    alpha = float(alpha0)
    for _ in range(max_iter):
        sx, tx, sy, ty = thm7_params(c, d, alpha)
        x_law = binomial_measure(FreeBinomialParams(sx, tx), n)
        y_law = binomial_measure(FreeBinomialParams(sy, ty), n)
        _, psi, _ = free_mult_handle(y_law, x_law, cfg)
        new = _psi_at_one(psi)
        trace.append(new)
        if abs(new - alpha) <= tol * max(1.0, abs(alpha)):
            return new, trace
        alpha = new
    raise ParameterError(f"alpha1 fixed point did not converge: {trace[-3:]}")


def verify_beta_characterization(c: float, d: float, alpha1: float | None = None, w_grid=None,
                                 tol: float = 1e-5, cfg: FixedPointConfig | None = None) -> VerificationReport:
    """Four S-transform identities for ``W = Y^(1/2) X Y^(1/2)`` with free binomial ``X, Y``.

    ``alpha1 = psi_W(1)`` is closed self-consistently starting from
    ``alpha1`` (default 1).
    """
    cfg = cfg or FixedPointConfig()
    w = default_s_grid() if w_grid is None else np.asarray(w_grid, dtype=float)
    alpha, trace = solve_alpha1(c, d, 1.0 if alpha1 is None else alpha1, cfg=cfg)
    sx, tx, sy, ty = thm7_params(c, d, alpha)
    x_law = binomial_measure(FreeBinomialParams(sx, tx), cfg.n_nodes)
    y_law = binomial_measure(FreeBinomialParams(sy, ty), cfg.n_nodes)
    g_w, psi, _ = free_mult_handle(y_law, x_law, cfg)
    s_w = np.asarray(s_transform(g_w, w))
    s_x = np.asarray(s_transform(x_law, w))
    s_y = np.asarray(s_transform(y_law, w))
    k = 1 - c * d
    ref_w = 1 + (1 - d) / ((c - 1) * d * alpha + w * k)
    ref_x = 1 + (c - 1) * (d - 1) / ((c - 1) * d * alpha + w * k)
    ref_y = 1 + c * (1 - d) / ((c - 1) * (d * (1 + alpha) - 1) + w * k)
    checks = {
        "alpha1_consistency": abs(_psi_at_one(psi) - alpha),
        "S_XY": _sup(s_w - ref_w),
        "S_X": _sup(s_x - ref_x),
        "S_Y": _sup(s_y - ref_y),
        "S_product": _sup(s_w - s_x * s_y),
    }
    extra = {
        "alpha1": alpha,
        "alpha1_trace": trace,
        "sigma_X": sx, "theta_X": tx, "sigma_Y": sy, "theta_Y": ty,
    }
    return _report("7", w, checks, tol, extra)


# --- scalar identities ------------------------------------------------------


def _psi_scalar(x, z):
    return z * x / (1 - z * x)


def _samples(samples, rng, guard):
    if isinstance(samples, tuple):
        x, z = (np.asarray(v) for v in samples)
        return x, z
    n = int(samples)
    xs, zs = [], []
    while sum(v.size for v in xs) < n:
        x = rng.uniform(-2.0, 2.0, n)
        r = rng.uniform(0.25, 2.0, n)
        t = rng.uniform(-np.pi, np.pi, n)
        z = r * np.exp(1j * t)
        ok = guard(x, z)
        xs.append(x[ok])
        zs.append(z[ok])
    return np.concatenate(xs)[:n], np.concatenate(zs)[:n]


def lemma1_identity_check(n: int, samples=1000, seed: int = 0) -> float:
    """Max scaled residual of ``x^n psi(x, z) = z^-n (psi(x, z) - sum_{i=1..n} (z x)^i)``.

    ``samples`` is a count of random draws or an explicit ``(x, z)`` pair.
    Residuals are divided by the size of the largest term so that the
    unavoidable cancellation on the right is not counted against the identity.
    """
    if not 0 <= n <= 8:
        raise ParameterError(f"n must lie in 0..8, got {n}")
    rng = np.random.default_rng(seed)
    x, z = _samples(samples, rng, lambda x, z: np.abs(1 - z * x) > 0.1)
    if np.any(z * x == 1):
        raise ParameterError("z x = 1 is excluded")
    psi = _psi_scalar(x, z)
    terms = np.stack([(z * x) ** i for i in range(1, n + 1)]) if n else np.zeros((1,) + x.shape)
    lhs = x ** n * psi
    rhs = (psi - terms.sum(axis=0)) / z ** n
    scale = np.maximum.reduce([np.ones(x.shape), np.abs(lhs),
                               (np.abs(psi) + np.abs(terms).sum(axis=0)) / np.abs(z) ** n])
    return float(np.max(np.abs(lhs - rhs) / scale))


def psi_tr2_identity_check(samples=1000, seed: int = 0) -> float:
    """Max scaled residual of ``psi(x, z)/(1 - x) = z/(z - 1) (psi(x, z) - psi(x, 1))``."""
    rng = np.random.default_rng(seed)

    def guard(x, z):
        return (np.abs(1 - x) > 0.05) & (np.abs(1 - z * x) > 0.05) & (np.abs(z - 1) > 0.05)

    x, z = _samples(samples, rng, guard)
    if np.any((x == 1) | (z * x == 1) | (z == 1)):
        raise ParameterError("x = 1, z x = 1 and z = 1 are excluded")
    psi_z = _psi_scalar(x, z)
    psi_1 = _psi_scalar(x, 1.0)
    lhs = psi_z / (1 - x)
    factor = z / (z - 1)
    rhs = factor * (psi_z - psi_1)
    scale = np.maximum.reduce([np.ones(x.shape), np.abs(lhs), np.abs(factor) * (np.abs(psi_z) + np.abs(psi_1))])
    return float(np.max(np.abs(lhs - rhs) / scale))
