"""Acceptance criteria, each at its stated tolerance and time limit.

Every check records one PASS/FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from freeprob.characterizations import (
    RegressionSpec,
    default_s_grid,
    lemma1_identity_check,
    psi_tr2_identity_check,
    verify_beta_characterization,
    verify_free_laha_lukacs,
    verify_monotone_laha_lukacs,
    verify_poisson_binomial,
)
from freeprob.convolution import default_grid, free_add, free_mult, free_mult_handle
from freeprob.families import (
    FreeBinomialParams,
    MarchenkoPasturParams,
    MeixnerParams,
    binomial_measure,
    meixner_G,
    meixner_measure,
    meixner_quadratic_residual,
    mp_measure,
)
from freeprob.measure import ks_distance, mean, moment, variance
from freeprob.oracle import MatrixEnsembleConfig, conditional_regression_check, empirical_free_add, mismatched_control
from freeprob.transforms import cauchy_handle, recover_measure, s_transform

RESULTS: list[str] = []

MEIXNER_LATTICE = list(itertools.product((-1.0, 0.0, 1.0), (-0.5, 0.0, 1.0)))


def family_sanity():
    worst = 0.0
    for a, b in MEIXNER_LATTICE:
        m = meixner_measure(MeixnerParams(a, b))
        worst = max(worst, abs(m.total_mass - 1), abs(moment(m, 1)), abs(variance(m) - 1))
    return worst < 1e-6, f"max |mass-1|, |mean|, |var-1| = {worst:.2e} (tol 1e-6)"


def meixner_quadratic():
    rng = np.random.default_rng(2024)
    z = rng.uniform(-5, 5, 100) + 1j * rng.uniform(1e-3, 5, 100)
    worst = max(float(np.max(np.abs(meixner_quadratic_residual(MeixnerParams(a, b), z))))
                for a, b in MEIXNER_LATTICE + [(0.5, 0.2)])
    return worst < 1e-12, f"sup quadratic residual = {worst:.2e} (tol 1e-12)"


def subordination():
    mu = meixner_measure(MeixnerParams(0.5, 0.2))
    nu = meixner_measure(MeixnerParams(0.0, 0.0))
    _, pair = free_add(mu, nu)
    grid = default_grid()
    w1 = pair.omega1.raw(grid)
    growth = bool(np.all(w1.imag >= grid.imag))
    slope = abs(complex(pair.omega1.raw(np.array([1e3j]))[0]) / 1e3j - 1)
    ok = pair.residual_sup < 1e-8 and growth and slope < 0.01
    return ok, f"residual {pair.residual_sup:.2e} (tol 1e-8), Im growth {growth}, slope dev {slope:.1e}"


def boolean_subordination():
    sc = meixner_measure(MeixnerParams(0.0, 0.0))
    law, pair = free_add(sc, sc)
    grid = default_grid()
    L = 1.0 / law.cauchy(grid)
    dev = float(np.max(np.abs(pair.omega1.raw(grid) - (0.5 * L + 0.5 * grid))))
    return dev < 1e-8, f"sup |omega1 - (L/2 + z/2)| = {dev:.2e} (tol 1e-8)"


def free_regression_report():
    rep = verify_free_laha_lukacs(RegressionSpec(0.3, 0.5, 0.2), tol=1e-7)
    keys = ("pom1", "pom2", "G_sum_vs_meixner")
    worst = max(rep.details[k] for k in keys)
    return rep.passed and worst < 1e-7, f"pom1/pom2/G_sum residual {worst:.2e} (tol 1e-7)"


def monotone_regression_report():
    rep = verify_monotone_laha_lukacs(RegressionSpec(0.3, 0.5, 0.2), tol=1e-7)
    comp = rep.details["composition"]
    ly = rep.details["L_Y_formula"]
    ks = rep.details["ks_Y_vs_boolean_power"]
    ok = comp < 1e-7 and ly < 1e-9 and ks < 1e-3
    return ok, f"G_X(L_Y) {comp:.2e} (1e-7), L_Y {ly:.2e} (1e-9), KS {ks:.1e} (1e-3)"


def s_transforms():
    w = default_s_grid()
    v = mp_measure(MarchenkoPasturParams(1.0, 1.0))
    u = binomial_measure(FreeBinomialParams(1.0, 1.0))
    s_v = np.asarray(s_transform(v, w))
    s_u = np.asarray(s_transform(u, w))
    e_v = float(np.max(np.abs(s_v - 1 / (1 + w))))
    e_u = float(np.max(np.abs(s_u - (1 + 1 / (1 + w)))))
    g_w, _, _ = free_mult_handle(v, u)
    e_w = float(np.max(np.abs(np.asarray(s_transform(g_w, w)) - s_v * s_u)))
    ok = max(e_v, e_u, e_w) < 1e-6
    return ok, f"S_V {e_v:.1e}, S_U {e_u:.1e}, S_W - S_V S_U {e_w:.1e} (tol 1e-6)"


def poisson_binomial_report():
    rep = verify_poisson_binomial(2.0, 0.5, 1.0, 1.0, tol=1e-5)
    d = rep.details
    worst = max(d["S_W"], d["tau_V_minus_tau_UV"], d["second_moment_identity"])
    ok = rep.passed and abs(d["c"] - 0.5) < 1e-12 and abs(d["d"] - 0.5) < 1e-12
    return ok, f"S_W and moment identities {worst:.2e} (tol 1e-5), c={d['c']}, d={d['d']}"


def beta_report():
    rep = verify_beta_characterization(0.5, 3.0, tol=1e-5)
    d = rep.details
    worst = max(d["S_XY"], d["S_X"], d["S_Y"], d["S_product"])
    ok = rep.passed and d["alpha1_consistency"] < 1e-8
    return ok, f"S identities {worst:.2e} (tol 1e-5), alpha1 = {d['alpha1']:.10f}"


def scalar_identities():
    lem = max(lemma1_identity_check(n, samples=1000, seed=n) for n in range(0, 7))
    tr2 = psi_tr2_identity_check(samples=1000, seed=1)
    return max(lem, tr2) < 1e-12, f"lemma {lem:.1e}, psi identity {tr2:.1e} (tol 1e-12)"


def matrix_oracle():
    cfg = MatrixEnsembleConfig(dimension=1000, trials=25, seed=7)
    sc = meixner_measure(MeixnerParams(0.0, 0.0))
    ks = empirical_free_add(sc, sc, cfg).ks_distance
    matched = conditional_regression_check(RegressionSpec(0.5, 0.0, 0.0), cfg).regression_residual
    control = mismatched_control(cfg).regression_residual
    ok = ks < 0.05 and matched < 0.05 and control > 3 * matched
    return ok, f"KS {ks:.1e} (0.05), regression {matched:.1e} (0.05), control {control / matched:.0f}x (>3x)"


def round_trip():
    laws = [meixner_measure(MeixnerParams(a, b)) for a, b in MEIXNER_LATTICE + [(1.5, 0.25), (0.5, -0.9)]]
    laws += [mp_measure(MarchenkoPasturParams(lam, al)) for lam, al in ((1.0, 1.0), (0.5, 1.0), (2.0, 3.0))]
    laws += [binomial_measure(FreeBinomialParams(s, t)) for s, t in ((1.0, 1.0), (0.5, 2.0), (3.0, 2.0), (0.6, 0.7))]
    worst_ks, worst_atom = 0.0, 0.0
    for m in laws:
        lo, hi = m.support
        pad = 0.05 * (hi - lo)
        back = recover_measure(cauchy_handle(m), lo - pad, hi + pad)
        worst_ks = max(worst_ks, ks_distance(back, m))
        if len(back.atoms) != len(m.atoms):
            return False, f"atom count {len(back.atoms)} != {len(m.atoms)}"
        for a, b in zip(m.atoms, back.atoms):
            worst_atom = max(worst_atom, abs(a.location - b.location), abs(a.mass - b.mass))
    mp_half = recover_measure(cauchy_handle(mp_measure(MarchenkoPasturParams(0.5, 1.0))), -0.2, 3.2)
    atom0 = mp_half.atom_mass(0.0, tol=1e-9)
    ok = worst_ks < 1e-3 and worst_atom < 1e-4 and abs(atom0 - 0.5) < 1e-4
    return ok, f"{len(laws)} laws, KS {worst_ks:.1e} (1e-3), atoms {worst_atom:.1e} (1e-4), MP atom {atom0:.6f}"


CRITERIA = [
    (1, "family sanity", family_sanity, 5.0),
    (2, "Meixner quadratic", meixner_quadratic, 1.0),
    (3, "subordination", subordination, 5.0),
    (4, "boolean power subordination", boolean_subordination, 5.0),
    (5, "free regression report", free_regression_report, 10.0),
    (6, "monotone regression report", monotone_regression_report, 10.0),
    (7, "S-transforms", s_transforms, 10.0),
    (8, "free Poisson / binomial report", poisson_binomial_report, 15.0),
    (9, "free binomial Beta report", beta_report, 15.0),
    (10, "scalar psi identities", scalar_identities, 1.0),
    (11, "matrix oracle", matrix_oracle, 60.0),
    (12, "Stieltjes round trip", round_trip, 20.0),
]


def run_criterion(number, name, fn, limit):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    passed = bool(ok) and elapsed < limit
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d} {name}: {detail}; {elapsed:.2f}s (limit {limit:g}s)"
    RESULTS.append(line)
    return passed, line


@pytest.mark.parametrize("number,name,fn,limit", CRITERIA, ids=[f"criterion-{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, name, fn, limit):
    passed, line = run_criterion(number, name, fn, limit)
    print(line)
    assert passed, line


if __name__ == "__main__":
    for crit in CRITERIA:
        print(run_criterion(*crit)[1], flush=True)
