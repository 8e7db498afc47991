import cmath
import itertools
import math

import numpy as np
import pytest

from mpasym.asympt import (
    CoincidentPositionError,
    MultipointSpec,
    assemble_terms_finiteL,
    assemble_terms_infiniteL,
    conformal_leading,
    decay_curve,
    enumerate_kappa,
    minimize_exponent,
    sigma_pm_patterns,
    terms_to_csv,
    terms_to_json,
    xxz_xxxx_general,
    xxz_xxxx_leading,
)


def _conv_count(r, box):
    # number of zero-sum vectors in [-box, box]^r by repeated convolution
    dist = np.array([1])
    for _ in range(r):
        dist = np.convolve(dist, np.ones(2 * box + 1, dtype=int))
    return int(dist[len(dist) // 2])


@pytest.mark.parametrize("r,box", [(2, 1), (3, 1), (4, 1), (3, 2), (5, 2)])
def test_enumerate_kappa_counts(r, box):
    ks = list(enumerate_kappa(r, box))
    assert len(ks) == len(set(ks)) == _conv_count(r, box)
    assert all(sum(k) == 0 and max(map(abs, k)) <= box for k in ks)


def test_enumerate_kappa_small_cases():
    assert set(enumerate_kappa(2, 1)) == {(0, 0), (1, -1), (-1, 1)}
    assert [len(list(enumerate_kappa(r, 1))) for r in (2, 3, 4)] == [3, 7, 19]
    with pytest.raises(ValueError):
        list(enumerate_kappa(3, 0))


def test_minimize_exponent_trivial_and_xxz():
    m = minimize_exponent(MultipointSpec((0, 1, 2), (0, 0, 0), 1.0, 0.8))
    assert m.kappa_star == (0, 0, 0) and m.min_power == 0 and m.unique
    for Z in (0.6, 1.0, 1.7):
        for eps in sigma_pm_patterns(4):
            m = minimize_exponent(MultipointSpec((0, 1, 2, 3), eps, 1.0, Z))
            assert m.kappa_star == (0, 0, 0, 0)
            assert m.min_power == pytest.approx(2 / Z ** 2, rel=1e-14)


def test_minimize_exponent_brute_force():
    spec = MultipointSpec((0.0, 1.0), (2, -2), 1.0, 1.0)
    best = min((spec.exponent_sum(k), k) for k in [(i, -i) for i in range(-3, 4)])
    m = minimize_exponent(spec, 3)
    assert m.min_power == pytest.approx(best[0]) and m.kappa_star == best[1]


def test_ties_are_reported_as_data():
    # Z = 1/sqrt(2), o = (1, -1): kappa = 0 and kappa = (1, -1) share the same sum
    spec = MultipointSpec((0.0, 1.0), (1, -1), 1.0, 1 / math.sqrt(2))
    vals = {k: spec.exponent_sum(k) for k in enumerate_kappa(2, 2)}
    best = min(vals.values())
    expected = {k for k, v in vals.items() if abs(v - best) < 1e-12}
    m = minimize_exponent(spec)
    assert set(m.ties) == expected


def test_hand_composed_two_point_term():
    x1, x2 = 1.0, 4.5
    spec = MultipointSpec((x1, x2), (1, -1), 0.7, 1.0)
    term = next(t for t in assemble_terms_infiniteL(spec, 1) if t.kappa == (0, 0))
    assert term.theta_plus == (-0.5, 0.5) and term.theta_minus == (0.5, -0.5)
    d = x2 - x1
    ref = (1j * d) ** (-0.25) * (-1j * d) ** (-0.25)
    assert term.coefficient == pytest.approx(ref, rel=1e-14)
    assert abs(term.coefficient) == pytest.approx(d ** -0.5, rel=1e-14)
    assert term.decay_power == pytest.approx(0.5)


def test_neutral_levels_and_constant_term():
    spec = MultipointSpec((0.0, 2.0, 5.0), (0, 0, 0), 1.0, 1.3)
    lead = conformal_leading(spec)
    assert lead.exponent_sum == 0 and len(lead.terms) == 1
    assert lead.terms[0].coefficient == 1
    with pytest.raises(ValueError):
        assemble_terms_infiniteL(MultipointSpec((0.0, 1.0), (1, 0), 1.0, 1.0))
    with pytest.raises(CoincidentPositionError):
        MultipointSpec((1.0, 1.0), (1, -1), 1.0, 1.0)


def _multiset(terms):
    return sorted((round(t.decay_power, 10), round(t.value.real, 10), round(t.value.imag, 10)) for t in terms)


def test_permutation_symmetry():
    x, o = (0.3, 5.0, 2.2, 7.1), (1, -1, 2, -2)
    base = assemble_terms_infiniteL(MultipointSpec(x, o, 0.9, 1.1), 1)
    for perm in itertools.permutations(range(4)):
        spec = MultipointSpec(tuple(x[i] for i in perm), tuple(o[i] for i in perm), 0.9, 1.1)
        assert _multiset(assemble_terms_infiniteL(spec, 1)) == _multiset(base)


def test_terms_sorted_and_sum_rule():
    spec = MultipointSpec((0.0, 1.0, 3.0), (1, 1, -2), 1.0, 0.9)
    terms = assemble_terms_infiniteL(spec, 2)
    keys = [(round(t.decay_power, 12), t.kappa) for t in terms]
    assert keys == sorted(keys)
    for t in terms:
        assert abs(sum(t.theta_plus)) < 1e-12 and abs(sum(t.theta_minus)) < 1e-12
        assert t.decay_power >= 0


def test_finite_volume_limit():
    spec = MultipointSpec((100.0, 150.0, 190.0), (1, 0, -1), 1.2, 0.85)
    inf = {t.kappa: t for t in assemble_terms_infiniteL(spec, 1)}
    for t in assemble_terms_finiteL(spec, 1, 1e6):
        assert abs(t.coefficient / inf[t.kappa].coefficient - 1) <= 1e-3
        assert t.phase == inf[t.kappa].phase
    with pytest.raises(ValueError):
        assemble_terms_finiteL(spec, 1, 150.0)


def test_chord_factor_ordering():
    # |1 - e^{2 i pi d / L}| = 2 sin(pi d / L) increases with d for d < L / 2
    L = 100.0
    mods = []
    for d in (5.0, 10.0, 30.0):
        spec = MultipointSpec((1.0, 1.0 + d), (1, -1), 1.0, 1.0)
        t = next(t for t in assemble_terms_finiteL(spec, 1, L) if t.kappa == (0, 0))
        mods.append(abs(t.coefficient))
        chord = 2 * math.sin(math.pi * d / L)
        assert abs(t.coefficient) == pytest.approx((2 * math.pi / L) ** 0.5 * chord ** -0.5, rel=1e-12)
    assert mods[0] > mods[1] > mods[2]


def test_xxz_closed_form_equals_general_path():
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = tuple(rng.uniform(-20, 20, 4))
        Z = rng.uniform(0.5, 2.0)
        a = xxz_xxxx_leading(x, Z, 0.8 + 0.1j, 1.2)
        b, per = xxz_xxxx_general(x, Z, 0.8 + 0.1j, 1.2)
        assert abs(a - b) <= 1e-10 * abs(a)
        assert all(g.exponent_sum == pytest.approx(2 / Z ** 2) for g in per.values())


def test_xxz_equally_spaced_and_large_Z():
    x = (0.0, 1.0, 2.0, 3.0)
    ref = 2 * ((1 * 1 / (2 * 3 * 1 * 2)) ** 0.5 + (2 * 2 / (1 * 3 * 1 * 1)) ** 0.5 + (3 * 1 / (2 * 1 * 2 * 1)) ** 0.5)
    assert xxz_xxxx_leading(x, 1.0) == pytest.approx(ref, rel=1e-12)
    assert xxz_xxxx_leading(x, 1e8, 1.3, 0.7) == pytest.approx(6 * 1.3 ** 2 * 0.7 ** 2, rel=1e-12)
    for perm in itertools.permutations(x):
        assert xxz_xxxx_leading(perm, 0.9) == pytest.approx(xxz_xxxx_leading(x, 0.9), rel=1e-13)
    with pytest.raises(CoincidentPositionError):
        xxz_xxxx_leading((0, 1, 1, 2), 1.0)


def test_conformal_leading_matches_full_assembly():
    spec = MultipointSpec((0.0, 1.5, 4.0), (1, -2, 1), 0.8, 1.2)
    lead = conformal_leading(spec, 2)
    full = assemble_terms_infiniteL(spec, 3)
    mn = min(t.exponent_sum for t in full)
    assert lead.exponent_sum == pytest.approx(mn)
    assert {t.kappa for t in lead.terms} == {t.kappa for t in full if abs(t.exponent_sum - mn) < 1e-12}


def test_exports_and_decay_curve():
    spec = MultipointSpec((0.0, 1.0), (1, -1), 1.0, 1.0)
    terms = assemble_terms_infiniteL(spec, 1)
    rec = terms_to_json(terms)[0]
    assert set(rec) >= {"kappa", "power", "phase", "coeff_re", "coeff_im"}
    assert terms_to_csv(terms).splitlines()[0].startswith("kappa,power")
    rows = decay_curve(spec, [10.0, 100.0])
    assert rows[1]["abs"] < rows[0]["abs"]
