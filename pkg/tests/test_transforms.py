from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from freeprob.errors import BranchError, DomainError, PoleError
from freeprob.families import (
    FreeBinomialParams,
    MarchenkoPasturParams,
    MeixnerParams,
    binomial_measure,
    meixner_G,
    meixner_handle,
    meixner_measure,
    mp_handle,
    mp_measure,
)
from freeprob.measure import chebyshev_nodes, dirac, ks_distance, moment, validate
from freeprob.transforms import (
    FINE_LADDER,
    AnalyticFunctionHandle,
    InversionConfig,
    atom_mass_at,
    cauchy_G,
    cauchy_handle,
    chi_inverse,
    free_cumulants,
    free_moments,
    invert_L,
    psi_transform,
    psi_via_G,
    r_series,
    r_transform,
    read_transform_table,
    reciprocal_L,
    recover_measure,
    s_transform,
    stieltjes_invert,
    voiculescu_phi,
    write_transform_table,
)

# (z - sqrt(z^2 - 4))/2 at z = 2i, branch with G ~ 1/z
SC_2I = 1j * (1.0 - np.sqrt(2.0))
W_GRID = np.linspace(-0.45, -0.05, 9)


def _pole_handle():
    return AnalyticFunctionHandle(lambda z: 1.0 / z, kind="G", support=(0.0, 0.0))


def test_cauchy_of_dirac():
    assert cauchy_G(dirac(0.0), 1j) == pytest.approx(-1j)


def test_semicircle_cauchy_at_2i(semicircle):
    assert abs(cauchy_G(semicircle, 2j) - SC_2I) < 1e-12
    assert abs(meixner_G(MeixnerParams(0, 0), 2j) - SC_2I) < 1e-15


@pytest.mark.parametrize("a,b", [(0.5, 0.2), (-1.0, 1.0), (1.0, -0.5)])
def test_gridded_meixner_matches_closed_form(a, b):
    p = MeixnerParams(a, b)
    m = meixner_measure(p)
    x = np.linspace(-3, 3, 13)
    z = np.concatenate([x + 1j * y for y in (0.5, 1.0, 2.0)])
    assert np.max(np.abs(cauchy_G(m, z) - meixner_G(p, z))) < 1e-6


def test_cauchy_pole_on_support(semicircle):
    with pytest.raises(PoleError):
        cauchy_G(semicircle, 0.5)
    assert cauchy_G(semicircle, 3.0).imag == 0.0


def test_branch_rule_on_upper_half_plane(rng):
    z = rng.uniform(-4, 4, 200) + 1j * rng.uniform(1e-3, 4, 200)
    for m in (meixner_measure(MeixnerParams(1.0, -0.5)), mp_measure(MarchenkoPasturParams(0.5, 1.0))):
        assert np.all(np.imag(cauchy_G(m, z)) <= 0)
    h = cauchy_handle(dirac(0.0))
    assert np.all(np.imag(h(z)) <= 0)


def test_handle_rejects_out_of_domain():
    h = cauchy_handle(dirac(0.0))
    with pytest.raises(DomainError):
        h(-1j)


def test_handle_rejects_branch_violation():
    bad = AnalyticFunctionHandle(lambda z: -1.0 / z, kind="G")
    with pytest.raises(BranchError):
        bad(1j)


def test_reciprocal_of_dirac():
    assert reciprocal_L(dirac(0.0), 1j) == pytest.approx(1j)
    assert reciprocal_L(dirac(1.5), 2 + 1j) == pytest.approx(0.5 + 1j)


def test_reciprocal_of_semicircle(semicircle):
    assert abs(reciprocal_L(semicircle, 2j) - 1 / SC_2I) < 1e-10


def test_invert_L_trivial():
    w = np.array([3j, 1 + 5j])
    assert np.allclose(invert_L(dirac(0.0), w), w)
    assert np.allclose(invert_L(dirac(2.0), w), w + 2.0)


def test_invert_L_round_trip(semicircle):
    z = invert_L(semicircle, 5j)
    assert z.imag > 0
    assert abs(reciprocal_L(semicircle, z) - 5j) < 1e-12


def test_phi_of_shift_and_semicircle(semicircle):
    assert abs(voiculescu_phi(dirac(0.7), 4j) - 0.7) < 1e-12
    z = 50j
    assert abs(z * voiculescu_phi(semicircle, z) - 1.0) < 1e-3


def test_r_transform_small_w(semicircle):
    assert abs(r_transform(dirac(1.25), 0.1j) - 1.25) < 1e-12
    assert abs(r_transform(semicircle, 0.01) - 0.01) < 1e-3 * 0.01 + 1e-9


def test_r_transform_rejects_zero(semicircle):
    with pytest.raises(DomainError):
        r_transform(semicircle, 0.0)


@pytest.mark.parametrize("a,b", [(0.5, 0.2), (1.0, -0.5)])
def test_r_series_matches_cumulant_recursion(a, b):
    p = MeixnerParams(a, b)
    kappa = r_series(meixner_handle(p), 5)
    # R(w) = sum kappa_{n+1} w^n
    assert abs(kappa[0]) < 1e-8
    assert abs(kappa[1] - 1.0) < 1e-4
    assert abs(kappa[2] - a) < 1e-4
    assert abs(kappa[3] - (a * a + b)) < 1e-4
    m = meixner_measure(p)
    oracle = free_cumulants([moment(m, k) for k in range(1, 5)], 4)
    assert np.allclose(kappa[:4], oracle, atol=1e-4)


def test_psi_trivial():
    assert psi_transform(dirac(0.0), -0.3) == 0
    z = np.array([-0.5, 0.2 + 0.3j])
    assert np.allclose(psi_transform(dirac(1.0), z), z / (1 - z))


def test_psi_two_paths_agree(poisson11):
    assert abs(psi_transform(poisson11, -1.0) - psi_via_G(poisson11, -1.0)) < 1e-8


@pytest.mark.parametrize(
    "m",
    [
        meixner_measure(MeixnerParams(0.5, 0.2)),
        mp_measure(MarchenkoPasturParams(0.5, 1.0)),
        binomial_measure(FreeBinomialParams(0.5, 2.0)),
    ],
)
def test_psi_G_identity_on_negative_axis(m):
    # keep 1/z to the left of every support
    t = -np.linspace(0.05, 0.5, 10)
    assert np.max(np.abs(psi_transform(m, t) - psi_via_G(m, t))) < 1e-10


def test_psi_pole_on_atom():
    with pytest.raises(PoleError):
        psi_transform(dirac(2.0), 0.5)


def test_chi_of_dirac_one():
    w = np.array([-0.4, -0.1])
    assert np.allclose(chi_inverse(dirac(1.0), w), w / (1 + w))


def test_chi_round_trip(poisson11):
    w = np.linspace(-0.5, -0.01, 12)
    assert np.max(np.abs(psi_transform(poisson11, chi_inverse(poisson11, w)) - w)) < 1e-12


def test_chi_rejects_outside_domain():
    m = mp_measure(MarchenkoPasturParams(0.5, 1.0))
    with pytest.raises(DomainError):
        chi_inverse(m, -0.6)


def test_s_transform_families(poisson11):
    assert np.max(np.abs(s_transform(poisson11, W_GRID) - 1 / (1 + W_GRID))) < 1e-6
    u = binomial_measure(FreeBinomialParams(1.0, 1.0))
    assert np.max(np.abs(s_transform(u, W_GRID) - (1 + 1 / (1 + W_GRID)))) < 1e-6
    assert abs(s_transform(dirac(1.0), -0.3) - 1.0) < 1e-12


def test_s_transform_rejects_zero_and_dirac_zero(poisson11):
    with pytest.raises(DomainError):
        s_transform(poisson11, 0.0)
    with pytest.raises(DomainError):
        s_transform(dirac(0.0), -0.2)


def test_stieltjes_invert_pole():
    m = stieltjes_invert(_pole_handle(), np.linspace(-1, 1, 21))
    assert len(m.atoms) == 1
    assert abs(m.atoms[0].location) < 1e-12
    assert abs(m.total_mass - 1.0) < 1e-6


def test_stieltjes_invert_semicircle_density():
    x = chebyshev_nodes(-2.0, 2.0, 2000)
    m = stieltjes_invert(meixner_handle(MeixnerParams(0, 0)), x, eps_ladder=FINE_LADDER)
    exact = np.sqrt(np.maximum(4 - x * x, 0)) / (2 * np.pi)
    assert np.max(np.abs(m.ac.values - exact)) < 1e-4
    assert validate(m).passed


def test_stieltjes_invert_recovers_mp_atom():
    x = chebyshev_nodes(-0.1, 3.0, 400)
    grid = np.sort(np.append(x, 0.0))
    m = stieltjes_invert(mp_handle(MarchenkoPasturParams(0.5, 1.0)), grid, eps_ladder=FINE_LADDER)
    zero = [a for a in m.atoms if abs(a.location) < 1e-9]
    assert zero and abs(zero[0].mass - 0.5) < 1e-4


def test_atom_mass_calibration():
    assert abs(atom_mass_at(_pole_handle(), 0.0) - 1.0) < 1e-12
    two = AnalyticFunctionHandle(lambda z: 0.3 / (z - 1) + 0.7 / (z + 2), kind="G")
    assert abs(atom_mass_at(two, 1.0) - 0.3) < 1e-4
    assert abs(atom_mass_at(two, -2.0) - 0.7) < 1e-4


def test_atom_masses_of_families():
    assert abs(atom_mass_at(mp_handle(MarchenkoPasturParams(0.5, 1.0)), 0.0) - 0.5) < 1e-4
    assert atom_mass_at(meixner_handle(MeixnerParams(0, 0)), 0.0) < 1e-4


def test_recover_measure_ks(semicircle):
    back = recover_measure(meixner_handle(MeixnerParams(0, 0)), -3.0, 3.0)
    assert ks_distance(back, semicircle) < 1e-6


def test_free_cumulants_semicircle_exact():
    assert free_cumulants([0, 1, 0, 2, 0, 5], 6) == [0, 1, 0, 0, 0, 0]


def test_free_cumulants_dirac():
    c = Fraction(3, 2)
    assert free_cumulants([c ** k for k in range(1, 6)], 5) == [c, 0, 0, 0, 0]


def test_free_cumulant_moment_inverse_exact():
    kappa = [Fraction(1, 3), Fraction(2), Fraction(-1, 5), Fraction(7, 2), Fraction(0), Fraction(1, 9)]
    assert free_cumulants(free_moments(kappa, 6), 6) == kappa


def test_free_cumulants_of_poisson():
    # free Poisson with rate 2 has all cumulants equal to 2
    m = mp_measure(MarchenkoPasturParams(2.0, 1.0))
    kappa = free_cumulants([moment(m, k) for k in range(1, 6)], 5)
    assert np.allclose(kappa, 2.0, atol=1e-8)


def test_transform_table_round_trip(tmp_path):
    z = np.array([1j, 0.5 + 2j])
    vals = np.array([-1j, 0.25 - 0.5j])
    path = tmp_path / "g.csv"
    write_transform_table(path, "G", {"kind": "dirac"}, z, vals)
    header, z2, v2 = read_transform_table(path)
    assert header["schema"] == "v1" and header["kind"] == "G"
    assert np.array_equal(z, z2) and np.array_equal(vals, v2)


def test_inversion_config_validation():
    with pytest.raises(ValueError):
        InversionConfig(newton_tol=0.0)
    with pytest.raises(ValueError):
        InversionConfig(max_iter=0)
