"""Long-distance asymptotics of multi-point correlators from critical-class exponents."""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from .bethe import critical_exponents

DEFAULT_BOX = 2
TIE_TOL = 1e-12

Amplitudes = Union[None, Mapping[tuple, complex], Callable[[tuple, tuple], complex]]


class CoincidentPositionError(ValueError):
    """Two insertion points coincide."""


@dataclass(frozen=True)
class MultipointSpec:
    """Insertion points, operator levels o_s and the model data entering the exponents.

    ``amplitudes`` is either ``None`` (constant 1), a mapping kappa -> complex,
    or a callable ``(kappa, levels) -> complex``; kappa and levels are always
    given in the caller's labelling of the points.
    """

    positions: tuple
    levels: tuple
    p_F: float
    Z_q: float
    amplitudes: Amplitudes = field(default=None, compare=False)

    def __post_init__(self):
        pos = tuple(float(x) for x in self.positions)
        lev = tuple(int(o) for o in self.levels)
        if len(pos) != len(lev) or len(pos) < 2:
            raise ValueError("need at least two points and one level per point")
        if len(set(pos)) != len(pos):
            raise CoincidentPositionError(f"positions must be pairwise distinct: {pos}")
        if not self.Z_q > 0:
            raise ValueError("Z_q must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "levels", lev)

    @property
    def r(self) -> int:
        return len(self.positions)

    @property
    def neutral(self) -> bool:
        """Whether the product of operators conserves the particle number."""
        return sum(self.levels) == 0

    def amplitude(self, kappa: tuple) -> complex:
        a = self.amplitudes
        if a is None:
            return 1.0 + 0j
        if callable(a):
            return complex(a(tuple(kappa), self.levels))
        return complex(a[tuple(kappa)])

    def exponents(self, kappa: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        pairs = [critical_exponents(self.Z_q, k, o) for k, o in zip(kappa, self.levels)]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def exponent_sum(self, kappa: Sequence[int]) -> float:
        tp, tm = self.exponents(kappa)
        return math.fsum(np.concatenate([tp * tp, tm * tm]))

    def scaled(self, R: float) -> "MultipointSpec":
        return MultipointSpec(tuple(R * x for x in self.positions), self.levels, self.p_F,
                              self.Z_q, self.amplitudes)

    def to_dict(self) -> dict:
        return {"positions": list(self.positions), "levels": list(self.levels),
                "p_F": self.p_F, "Z_q": self.Z_q}


@dataclass(frozen=True)
class AsymptoticTerm:
    """One kappa-term: exp(i phase) * coefficient * scale^(-decay_power)."""

    kappa: tuple
    theta_plus: tuple
    theta_minus: tuple
    exponent_sum: float
    decay_power: float
    phase: float
    coefficient: complex

    @property
    def value(self) -> complex:
        return cmath.exp(1j * self.phase) * self.coefficient

    def to_dict(self) -> dict:
        return {
            "kappa": list(self.kappa),
            "power": self.decay_power,
            "exponent_sum": self.exponent_sum,
            "phase": self.phase,
            "coeff_re": self.coefficient.real,
            "coeff_im": self.coefficient.imag,
            "theta_plus": list(self.theta_plus),
            "theta_minus": list(self.theta_minus),
        }


def enumerate_kappa(r: int, box: int) -> Iterator[tuple]:
    """All integer r-vectors with entries in [-box, box] and zero sum, in lexicographic order."""
    if box < 1:
        raise ValueError("box must be >= 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    rng = range(-box, box + 1)
    for head in itertools.product(rng, repeat=r - 1):
        last = -sum(head)
        if -box <= last <= box:
            yield head + (last,)


@dataclass(frozen=True)
class ExponentMinimum:
    kappa_star: tuple
    min_power: float
    ties: tuple
    box: int

    @property
    def unique(self) -> bool:
        return len(self.ties) == 1


def _minimum_in_box(spec: MultipointSpec, box: int) -> ExponentMinimum:
    vals = [(spec.exponent_sum(k), k) for k in enumerate_kappa(spec.r, box)]
    best = min(v for v, _ in vals)
    ties = tuple(k for v, k in vals if v - best <= TIE_TOL * max(1.0, abs(best)))
    return ExponentMinimum(ties[0], best, ties, box)


def minimize_exponent(spec: MultipointSpec, box: int = DEFAULT_BOX, max_box: int = 12) -> ExponentMinimum:
    """Minimise sum_s [theta_s^+(kappa_s)^2 + theta_s^-(kappa_s)^2] over zero-sum kappa.

    The minimum found in the box is certified by re-running at box + 1; the
    box grows until the two agree. Ties are returned in ``ties``.
    """
    cur = _minimum_in_box(spec, box)
    while box < max_box:
        nxt = _minimum_in_box(spec, box + 1)
        if nxt.min_power >= cur.min_power - TIE_TOL * max(1.0, abs(cur.min_power)) and nxt.ties == cur.ties:
            return cur
        cur, box = nxt, box + 1
    return cur


def _sorted_view(spec: MultipointSpec):
    order = sorted(range(spec.r), key=lambda i: spec.positions[i])
    return order, np.array([spec.positions[i] for i in order])


def _check_sum_rule(tp: np.ndarray, tm: np.ndarray, kappa) -> None:
    for th in (tp, tm):
        if abs(math.fsum(th)) > 1e-12 * max(1.0, float(np.max(np.abs(th)))):
            raise AssertionError(f"exponent sum rule violated at kappa={kappa}")


def _require_neutral(spec: MultipointSpec) -> None:
    if not spec.neutral:
        raise ValueError(f"levels {spec.levels} do not sum to zero; the correlator vanishes identically")


def _build_term(spec: MultipointSpec, kappa: tuple, pair_factor: Callable, scale_factor: Callable) -> AsymptoticTerm:
    tp, tm = spec.exponents(kappa)
    _check_sum_rule(tp, tm, kappa)
    order, xs = _sorted_view(spec)
    sp, sm = tp[order], tm[order]
    log_c = complex(cmath.log(spec.amplitude(kappa))) if spec.amplitude(kappa) != 0 else None
    esum = math.fsum(np.concatenate([tp * tp, tm * tm]))
    phase = 2.0 * spec.p_F * math.fsum(k * x for k, x in zip(kappa, spec.positions))
    if log_c is None:
        coeff = 0j
    else:
        acc = [log_c, scale_factor(tp, tm)]
        for a in range(spec.r):
            for b in range(a + 1, spec.r):
                acc.append(pair_factor(xs[b] - xs[a], sp[b] * sp[a], sm[b] * sm[a]))
        s = sum(acc[1:], acc[0])
        coeff = cmath.exp(s)
    return AsymptoticTerm(tuple(kappa), tuple(tp.tolist()), tuple(tm.tolist()), esum, esum / 2,
                          phase, coeff)


def _assemble(spec, box, pair_factor, scale_factor, threads):
    _require_neutral(spec)
    kappas = list(enumerate_kappa(spec.r, box))
    build = lambda k: _build_term(spec, k, pair_factor, scale_factor)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            terms = list(ex.map(build, kappas))
    else:
        terms = [build(k) for k in kappas]
    return sorted(terms, key=lambda t: (round(t.decay_power, 12), t.kappa))


def _infinite_pair(d, e_plus, e_minus):
    # [i d]^{theta^- theta^-} [-i d]^{theta^+ theta^+}, principal branch, d > 0
    return e_minus * cmath.log(1j * d) + e_plus * cmath.log(-1j * d)


def assemble_terms_infiniteL(spec: MultipointSpec, box: int = DEFAULT_BOX, threads: int = 1) -> list[AsymptoticTerm]:
    """All kappa-terms of the infinite-volume expansion, sorted by decay power then kappa."""
    return _assemble(spec, box, _infinite_pair, lambda tp, tm: 0j, threads)


def assemble_terms_finiteL(spec: MultipointSpec, box: int, L: float, threads: int = 1) -> list[AsymptoticTerm]:
    """Kappa-terms at finite volume L with chord factors 1 - exp(+-2 i pi (x_b - x_a) / L)."""
    xs = spec.positions
    if not all(0 < x < L for x in xs):
        raise ValueError("positions must lie in (0, L)")
    if not L > max(xs) - min(xs):
        raise ValueError("L must exceed the largest separation")
    log_scale = math.log(2 * math.pi / L)

    def pair(d, e_plus, e_minus):
        w = 2j * math.pi * d / L
        return e_plus * cmath.log(1 - cmath.exp(w)) + e_minus * cmath.log(1 - cmath.exp(-w))

    def scale(tp, tm):
        return log_scale * 0.5 * math.fsum(np.concatenate([tp * tp, tm * tm]))

    return _assemble(spec, box, pair, scale, threads)


@dataclass(frozen=True)
class ConformalLeading:
    """Minimal-power terms in the regime x = R z with the R-power factored out."""

    exponent_sum: float
    decay_power: float
    R: float
    terms: tuple

    def value(self) -> complex:
        """sum of exp(i phase) * coefficient, i.e. the leading amplitude at scale R times R^decay_power."""
        vals = [t.value for t in self.terms]
        return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def conformal_leading(spec_z: MultipointSpec, box: int = DEFAULT_BOX, R: float = 1.0) -> ConformalLeading:
    """Leading group of terms for x = R z; coefficients are built from the z's, phases from R z."""
    m = minimize_exponent(spec_z, box)
    terms = assemble_terms_infiniteL(spec_z, m.box)
    lead = [t for t in terms if t.exponent_sum - m.min_power <= TIE_TOL * max(1.0, m.min_power)]
    if R != 1.0:
        lead = [AsymptoticTerm(t.kappa, t.theta_plus, t.theta_minus, t.exponent_sum, t.decay_power,
                               R * t.phase, t.coefficient) for t in lead]
    return ConformalLeading(m.min_power, m.min_power / 2, R, tuple(lead))


def sigma_pm_patterns(r: int) -> list[tuple]:
    """Sign patterns epsilon in {+1,-1}^r with zero sum."""
    return [e for e in itertools.product((1, -1), repeat=r) if sum(e) == 0]


def xxz_xxxx_leading(positions: Sequence[float], Z_q: float, amp_plus: complex = 1.0,
                     amp_minus: complex = 1.0) -> complex:
    """Three-pairing closed form of the leading four-point sigma^x correlator."""
    x = [float(v) for v in positions]
    if len(x) != 4:
        raise ValueError("need exactly four positions")
    if len(set(x)) != 4:
        raise CoincidentPositionError(f"positions must be pairwise distinct: {x}")
    if not Z_q > 0:
        raise ValueError("Z_q must be positive")
    e = 1.0 / (2.0 * Z_q * Z_q)

    def pairing(a, b, c, d):
        # points (a, b) and (c, d) paired
        num = (x[b] - x[a]) * (x[d] - x[c])
        den = (x[c] - x[a]) * (x[d] - x[a]) * (x[c] - x[b]) * (x[d] - x[b])
        return abs(num / den) ** e

    s = math.fsum([pairing(0, 1, 2, 3), pairing(0, 2, 1, 3), pairing(0, 3, 2, 1)])
    return 2.0 * complex(amp_plus) ** 2 * complex(amp_minus) ** 2 * s


def xxz_xxxx_general(positions: Sequence[float], Z_q: float, amp_plus: complex = 1.0,
                     amp_minus: complex = 1.0, p_F: float = 1.0, box: int = DEFAULT_BOX):
    """Same quantity through the generic assembler, summed over the six sign patterns.

    Returns (value, per_pattern) where per_pattern maps each epsilon to its
    ConformalLeading group.
    """
    per = {}
    for eps in sigma_pm_patterns(4):
        amp = lambda k, o: np.prod([amp_plus if s > 0 else amp_minus for s in o])
        spec = MultipointSpec(tuple(positions), eps, p_F, Z_q, amp)
        per[eps] = conformal_leading(spec, box)
    vals = [g.value() for g in per.values()]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals)), per


def terms_to_json(terms: Sequence[AsymptoticTerm]) -> list[dict]:
    return [t.to_dict() for t in terms]


def terms_to_csv(terms: Sequence[AsymptoticTerm]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kappa", "power", "exponent_sum", "phase", "coeff_re", "coeff_im"])
    for t in terms:
        w.writerow([" ".join(map(str, t.kappa)), repr(t.decay_power), repr(t.exponent_sum),
                    repr(t.phase), repr(t.coefficient.real), repr(t.coefficient.imag)])
    return buf.getvalue()


def decay_curve(spec_z: MultipointSpec, R_values: Sequence[float], box: int = DEFAULT_BOX) -> list[dict]:
    """Truncated sum over all kappa-terms of the correlator at x = R z, one row per R."""
    terms = assemble_terms_infiniteL(spec_z, box)
    rows = []
    for R in R_values:
        vals = [R ** (-t.decay_power) * cmath.exp(1j * R * t.phase) * t.coefficient for t in terms]
        v = complex(math.fsum(u.real for u in vals), math.fsum(u.imag for u in vals))
        rows.append({"R": float(R), "re": v.real, "im": v.imag, "abs": abs(v)})
    return rows
