"""Critical-class excitations and the per-state form factor building blocks."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .specfun import LogComplex, barnes_ratio, gamma_ratio


class CollisionError(ValueError):
    """A denominator factor between two particle/hole labels vanishes."""


def _strictly_increasing_positive(values: Sequence[int], name: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in values)
    if any(v < 1 for v in vals):
        raise ValueError(f"{name} must be positive integers, got {vals}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be strictly increasing, got {vals}")
    return vals


@dataclass(frozen=True)
class ParticleHoleSet:
    """Particle and hole labels living on one Fermi boundary."""

    particles: tuple[int, ...] = ()
    holes: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "particles", _strictly_increasing_positive(self.particles, "particles"))
        object.__setattr__(self, "holes", _strictly_increasing_positive(self.holes, "holes"))

    @property
    def n_p(self) -> int:
        return len(self.particles)

    @property
    def n_h(self) -> int:
        return len(self.holes)

    @property
    def charge(self) -> int:
        return self.n_p - self.n_h

    @property
    def level(self) -> int:
        return sum(self.particles) + sum(self.holes)

    def to_dict(self) -> dict:
        return {"particles": list(self.particles), "holes": list(self.holes)}


EMPTY = ParticleHoleSet()


@dataclass(frozen=True)
class CriticalClassVector:
    """Umklapp labels l_1..l_{r-1}; l_0 = l_r = 0 are implicit."""

    ell: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ell", tuple(int(v) for v in self.ell))

    @property
    def r(self) -> int:
        return len(self.ell) + 1

    @property
    def padded(self) -> tuple[int, ...]:
        """(l_0, l_1, ..., l_r)."""
        return (0,) + self.ell + (0,)

    def kappa(self) -> tuple[int, ...]:
        lp = self.padded
        return tuple(lp[s - 1] - lp[s] for s in range(1, self.r + 1))

    @classmethod
    def from_kappa(cls, kappa: Sequence[int]) -> "CriticalClassVector":
        kappa = [int(k) for k in kappa]
        if sum(kappa) != 0:
            raise ValueError(f"kappa must sum to zero, got {kappa}")
        r = len(kappa)
        return cls(tuple(sum(kappa[s:]) for s in range(1, r)))


def _is_half_odd(x: float) -> bool:
    return abs((x - 0.5) - round(x - 0.5)) < 1e-14


@dataclass(frozen=True)
class ShiftParams:
    """Shift values nu_1..nu_r and the separations t_1..t_{r-1}."""

    nu: tuple[complex, ...]
    t: tuple[complex, ...] = ()

    def __post_init__(self):
        nu = tuple(complex(v) for v in self.nu)
        t = tuple(complex(v) for v in self.t)
        if len(t) != len(nu) - 1:
            raise ValueError(f"need len(t) == len(nu) - 1, got {len(t)} and {len(nu)}")
        bad = [v for v in nu if _is_half_odd(v.real)]
        if bad:
            raise ValueError(f"Re(nu) must avoid 1/2 + Z, got {bad}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "t", t)

    @property
    def r(self) -> int:
        return len(self.nu)

    def t_bar(self) -> tuple[complex, ...]:
        """Partial sums tbar_0 = 0, tbar_1, ..., tbar_{r-1}."""
        out = [0j]
        for v in self.t:
            out.append(out[-1] + v)
        return tuple(out)


@dataclass(frozen=True)
class FundamentalRepresentative:
    """Lowest representative of an l-critical class, split by boundary."""

    ell_s: int
    right: ParticleHoleSet = field(init=False)
    left: ParticleHoleSet = field(init=False)

    def __post_init__(self):
        n = abs(self.ell_s)
        ladder = tuple(range(1, n + 1))
        if self.ell_s >= 0:
            right, left = ParticleHoleSet(particles=ladder), ParticleHoleSet(holes=ladder)
        else:
            right, left = ParticleHoleSet(holes=ladder), ParticleHoleSet(particles=ladder)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "left", left)


def varpi(J_prev: ParticleHoleSet, J_next: ParticleHoleSet, nu: complex) -> complex:
    """Coupling between the label sets of neighbouring sectors."""
    nu = complex(nu)
    val = 1 + 0j
    for h in J_prev.holes:
        for k in J_next.particles:
            val *= 1 - k - h + nu
        for t in J_next.holes:
            d = t - h + nu
            if d == 0:
                raise CollisionError(f"hole {h} collides with hole {t} at nu={nu}")
            val /= d
    for p in J_prev.particles:
        for t in J_next.holes:
            val *= p + t + nu - 1
        for k in J_next.particles:
            d = p - k + nu
            if d == 0:
                raise CollisionError(f"particle {p} collides with particle {k} at nu={nu}")
            val /= d
    return val


def rho(ell_s: int, ell_prev: int, nu: complex) -> complex:
    """Scaling dimension as displayed: D^2/2 + nu^2/2 - D nu, D = l_s - l_{s-1}."""
    d = ell_s - ell_prev
    nu = complex(nu)
    return 0.5 * d * d + 0.5 * nu * nu - d * nu


def rho_completed(ell_s: int, ell_prev: int, nu: complex) -> complex:
    """Same quantity written as (D - nu)^2 / 2."""
    return 0.5 * ((ell_s - ell_prev) - complex(nu)) ** 2


def _log_cauchy(J: ParticleHoleSet, power: int) -> LogComplex:
    """log of [prod_{a>b}(p_a-p_b) prod_{a<b}(h_a-h_b) / prod(p_a+h_b-1)]^power."""
    acc = 0j
    for a, b in combinations(J.particles, 2):
        acc += cmath.log(b - a)
    for a, b in combinations(J.holes, 2):
        acc += cmath.log(a - b)
    for p in J.particles:
        for h in J.holes:
            acc -= cmath.log(p + h - 1)
    acc *= power
    return LogComplex(acc.real, acc.imag)


def r_factor(sign: int, J: ParticleHoleSet, nu: complex, eta: complex, t: complex) -> complex:
    """Single-segment weight of the restricted sums (R^+ for sign=+1, R^- for -1)."""
    return log_r_factor(sign, J, nu, eta, t).exp()


def log_r_factor(sign: int, J: ParticleHoleSet, nu: complex, eta: complex, t: complex) -> LogComplex:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    nu, eta, t = complex(nu), complex(eta), complex(t)
    acc = _log_cauchy(J, 2)
    if J.n_h:
        s = -math.pi ** -2 * cmath.sin(math.pi * nu) * cmath.sin(math.pi * eta)
        if s == 0:
            return LogComplex.zero()
        acc = acc + LogComplex.from_complex(s).scale(J.n_h)
    phase = 0j
    num: list[complex] = []
    den: list[complex] = []
    for p in J.particles:
        if sign > 0:
            phase += 1j * t * p
            num += [p - nu, p + eta]
        else:
            phase += 1j * t * (1 - p)
            num += [p + nu, p - eta]
        den += [p, p]
    for h in J.holes:
        if sign > 0:
            phase += 1j * t * (h - 1)
            num += [h + nu, h - eta]
        else:
            phase += -1j * t * h
            num += [h - nu, h + eta]
        den += [h, h]
    acc = acc + gamma_ratio(num, den) + LogComplex(phase.real, phase.imag)
    return acc


def ff_critical(
    sign: int,
    J_prev: ParticleHoleSet,
    J_next: ParticleHoleSet,
    nu: complex,
    rho_val: complex,
    L: int,
) -> complex:
    """Right (sign=+1) or left (sign=-1) boundary critical form factor."""
    if L < 1:
        raise ValueError("L must be >= 1")
    nu = complex(nu)
    n_h, n_t = J_prev.n_h, J_next.n_h
    acc = LogComplex.from_complex(2 * math.pi / L).scale(rho_val)
    acc = acc + _log_cauchy(J_prev, 1) + _log_cauchy(J_next, 1)
    s = cmath.sin(math.pi * nu) / math.pi
    if n_h + n_t:
        if s == 0:
            return 0j
        acc = acc + LogComplex.from_complex(s).scale(n_h + n_t)
    if sign > 0:
        prefactor = (-1) ** n_t
        coupling = varpi(J_prev, J_next, nu)
        num = [p + nu for p in J_prev.particles] + [h - nu for h in J_prev.holes]
        num += [k - nu for k in J_next.particles] + [t + nu for t in J_next.holes]
    elif sign < 0:
        prefactor = (-1) ** n_h
        coupling = varpi(J_prev, J_next, -nu)
        num = [p - nu for p in J_prev.particles] + [h + nu for h in J_prev.holes]
        num += [k + nu for k in J_next.particles] + [t - nu for t in J_next.holes]
    else:
        raise ValueError("sign must be +1 or -1")
    den = list(J_prev.particles) + list(J_prev.holes) + list(J_next.particles) + list(J_next.holes)
    if coupling == 0:
        return 0j
    acc = acc + gamma_ratio(num, den) + LogComplex.from_complex(coupling)
    return prefactor * acc.exp()


def c_norm(ell_prev: int, ell_s: int, nu_plus: complex, nu_minus: complex) -> complex:
    """Barnes-G normalisation constant of the critical form factor."""
    return log_c_norm(ell_prev, ell_s, nu_plus, nu_minus).exp()


def log_c_norm(ell_prev: int, ell_s: int, nu_plus: complex, nu_minus: complex) -> LogComplex:
    vp, vm = complex(nu_plus), complex(nu_minus)
    lp, ls = ell_prev, ell_s
    num = [1 + vm, 1 - vp, 1 + ls - vm, 1 - ls + vp]
    den = [1 - ls + vm, 1 + ls - vp, 1 - lp + ls - vm, 1 + lp - ls + vp]
    return barnes_ratio(num, den)


def theta_exponent(cls: CriticalClassVector, nu_plus: Sequence[complex], nu_minus: Sequence[complex]) -> complex:
    """L-power exponent of a fixed-l summand, in the displayed (l-form) layout."""
    r = cls.r
    if len(nu_plus) != r or len(nu_minus) != r:
        raise ValueError(f"need {r} values of nu_plus and nu_minus")
    vp = [complex(v) for v in nu_plus]
    vm = [complex(v) for v in nu_minus]
    ell = cls.padded
    val = 0.5 * sum(a * a + b * b for a, b in zip(vp, vm))
    for s in range(1, r):
        val -= (vp[s - 1] + vm[s - 1] - vp[s] - vm[s]) * ell[s] - 2 * ell[s] ** 2
    for s in range(2, r):
        val -= 2 * ell[s] * ell[s - 1]
    return val


def theta_exponent_kappa(cls: CriticalClassVector, nu_plus: Sequence[complex], nu_minus: Sequence[complex]) -> complex:
    """Same exponent as 1/2 sum_s [(nu_s^+ + kappa_s)^2 + (nu_s^- + kappa_s)^2]."""
    kap = cls.kappa()
    return 0.5 * sum((complex(a) + k) ** 2 + (complex(b) + k) ** 2 for a, b, k in zip(nu_plus, nu_minus, kap))


def momentum_offset(ell_s: int, p_F: float) -> float:
    """Leading Umklapp momentum 2 l_s p_F of an l_s-critical state."""
    if p_F <= 0:
        raise ValueError("p_F must be positive")
    return 2 * ell_s * p_F


def momentum_identity_sides(cls: CriticalClassVector, t: Sequence[float]) -> tuple[float, float]:
    """(sum_s l_s t_s, sum_{s>=2} tbar_{s-1} kappa_s); the two agree identically."""
    kap = cls.kappa()
    lhs = sum(l * ts for l, ts in zip(cls.ell, t))
    tbar = [0.0]
    for v in t:
        tbar.append(tbar[-1] + v)
    rhs = sum(tbar[s - 1] * kap[s - 1] for s in range(2, cls.r + 1))
    return lhs, rhs


def exponent_identity_sides(cls: CriticalClassVector, nu: Sequence[complex]) -> tuple[complex, complex]:
    """Both sides of the l -> kappa rewriting of the quadratic exponent."""
    r = cls.r
    ell = cls.padded
    nu = [complex(v) for v in nu]
    lhs = 2 * sum(ell[s] ** 2 for s in range(1, r + 1))
    lhs -= 2 * sum(ell[s] * ell[s - 1] for s in range(2, r))
    lhs += 2 * sum((nu[s] - nu[s - 1]) * ell[s] for s in range(1, r))
    lhs += sum(v * v for v in nu)
    rhs = sum((v + k) ** 2 for v, k in zip(nu, cls.kappa()))
    return lhs, rhs
