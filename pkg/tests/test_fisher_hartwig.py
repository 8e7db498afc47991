import cmath
import math

import mpmath
import numpy as np
import pytest

from mpasym.fisher_hartwig import (
    DegeneracyError,
    FHSymbol,
    ToeplitzSpec,
    fh_asymptotics,
    fourier_coeff,
    fourier_coeffs,
    induction_kernel_check,
    kappa_maximizer,
    log_det_lu,
    model_sum_direct,
    model_sum_toeplitz,
    ph_expansion_terms,
    sequence_records,
    toeplitz_matrix,
)
from mpasym.restricted_sum import TruncationPolicy
from oracles import fourier_coeff_quad


@pytest.mark.parametrize("nu", [0.3, -0.37 + 0.1j, 1.2])
def test_single_jump_coefficients_closed_form(nu):
    sym = FHSymbol(((nu, 0.0),))
    j = np.arange(-100, 101)
    ref = np.array([cmath.sin(math.pi * nu) / (math.pi * (nu - k)) for k in j])
    assert np.max(np.abs(fourier_coeffs(sym, j) - ref)) <= 1e-14


def test_multi_jump_coefficients_against_quadrature():
    sym = ToeplitzSpec((0.2 + 0.1j, -0.3, 0.15), (1.3, 2.2), 4).symbol()
    for k in (-7, -1, 0, 2, 9):
        assert abs(fourier_coeff(sym, k) - fourier_coeff_quad(sym, k)) <= 1e-10


def test_symbol_values_match_definition():
    sym = FHSymbol(((0.3, 0.0), (-0.2, 2.0)))
    th = 2.5
    ref = cmath.exp(1j * (th + math.pi) * 0.3) * cmath.exp(-2j * math.pi * 0.3)
    ref *= cmath.exp(1j * (th - 2.0 + math.pi) * -0.2) * cmath.exp(-2j * math.pi * -0.2)
    assert sym(th) == pytest.approx(ref, rel=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        ToeplitzSpec((0.5, 0.1), (1.0,), 4)
    with pytest.raises(ValueError):
        ToeplitzSpec((0.1, 0.1, 0.1), (1.0, 0.0), 4)
    with pytest.raises(ValueError):
        ToeplitzSpec((0.1, 0.1), (7.0,), 4)


def test_log_det_matches_mpmath():
    A = toeplitz_matrix(ToeplitzSpec((0.3, -0.2 + 0.1j), (2.0,), 10))
    ref = complex(mpmath.det(mpmath.matrix(A.tolist())))
    assert abs(log_det_lu(A).exp() - ref) <= 1e-12 * abs(ref)


def test_zero_shifts_give_unit_ratio():
    spec = ToeplitzSpec((0.0, 0.0), (1.5,), 16)
    assert model_sum_toeplitz(spec) == 1
    assert fh_asymptotics(spec) == 1


@pytest.mark.parametrize("nu,t,N", [((0.2, -0.3), (1.4,), 1), ((0.25, 0.1), (2.1,), 2)])
def test_direct_sum_matches_toeplitz(nu, t, N):
    spec = ToeplitzSpec(nu, t, N)
    value, tail = model_sum_direct(spec, 200)
    ref = model_sum_toeplitz(spec)
    assert abs(value - ref) <= max(5 * tail, 1e-5) * abs(ref)


def test_particle_hole_expansion_approaches_toeplitz():
    spec = ToeplitzSpec((0.2, 0.15), (1.0,), 12)
    ref = model_sum_toeplitz(spec)
    errs = [abs(ph_expansion_terms(spec, TruncationPolicy(n, 40)) / ref - 1) for n in (0, 1, 2)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


@pytest.mark.parametrize("a,b,nu,tb", [(1, 1, 0.2, 1.0), (2, -3, -0.3 + 0.1j, 4.0)])
def test_induction_kernel(a, b, nu, tb):
    sym = ToeplitzSpec((0.3,), (), 1).symbol()
    res, tail = induction_kernel_check(sym, a, b, tb, nu, 20000)
    assert res <= 1e-5


def test_kappa_maximizer():
    assert kappa_maximizer((0.2, 0.1)) == (0, 0)
    assert kappa_maximizer((0.7, -0.7)) == (-1, 1)
    # (0.7 + k)^2 + (-0.3 - k)^2 ties between k = 0 and k = -1
    with pytest.raises(DegeneracyError):
        kappa_maximizer((0.7, -0.3))


def test_kappa_maximizer_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(30):
        nu = rng.uniform(-1.4, 1.4, 3)
        nu = tuple(nu)
        best = min(((sum((x + k) ** 2 for x, k in zip(nu, kk)), kk)
                    for kk in [(i, j, -i - j) for i in range(-4, 5) for j in range(-4, 5)]))
        assert kappa_maximizer(nu) == best[1]


def test_asymptotic_ratio_tends_to_one():
    spec = ToeplitzSpec((0.3, -0.2), (2.0,), 8)
    rows = sequence_records(spec, [8, 16, 32, 64])
    dev = [abs(complex(r["ratio_re"], r["ratio_im"]) - 1) for r in rows]
    assert dev[-1] < dev[0] and dev[-1] < 1e-2
