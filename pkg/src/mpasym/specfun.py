"""Complex special functions in log-domain form.

Products of many Gamma / Barnes G factors overflow quickly, so every
routine here returns a :class:`LogComplex` (log-modulus plus accumulated
phase) and exponentiation is left to the caller.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import bernoulli, loggamma

# zeta'(-1) = 1/12 - log(Glaisher constant)
ZETA_PRIME_M1 = -0.16542114370045092921391966024278064
LOG_2PI = math.log(2.0 * math.pi)

# Barnes G is evaluated from its large-argument expansion once Re(z) >= this.
G_SHIFT_THRESHOLD = 15.0
_G_SERIES_TERMS = 12
_BERNOULLI = bernoulli(2 * _G_SERIES_TERMS + 2)


class PoleError(ValueError):
    """An argument sits on a pole of Gamma (or an uncancelled pole in a ratio)."""

    def __init__(self, message: str, args_at_pole: Sequence[complex] = ()):
        super().__init__(message)
        self.args_at_pole = tuple(args_at_pole)


@dataclass(frozen=True)
class LogComplex:
    """``exp(re + i*im)`` with the phase kept unreduced.

    Adding two values multiplies the underlying numbers, subtracting divides.
    ``re == -inf`` encodes an exact zero (used for the zeros of Barnes G).
    """

    re: float
    im: float = 0.0

    @classmethod
    def from_complex(cls, z: complex) -> "LogComplex":
        z = complex(z)
        if z == 0:
            return cls.zero()
        w = cmath.log(z)
        return cls(w.real, w.imag)

    @classmethod
    def zero(cls) -> "LogComplex":
        return cls(-math.inf, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.re == -math.inf

    @property
    def log(self) -> complex:
        return complex(self.re, self.im)

    def exp(self) -> complex:
        if self.is_zero:
            return 0j
        return cmath.exp(complex(self.re, self.im))

    def __complex__(self) -> complex:
        return self.exp()

    def __add__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero or other.is_zero:
            return LogComplex.zero()
        return LogComplex(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "LogComplex") -> "LogComplex":
        if other.is_zero:
            raise ZeroDivisionError("division by an exact zero in log domain")
        if self.is_zero:
            return self
        return LogComplex(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "LogComplex":
        if self.is_zero:
            raise ZeroDivisionError("reciprocal of an exact zero")
        return LogComplex(-self.re, -self.im)

    def scale(self, c: complex) -> "LogComplex":
        """Log of the c-th power, i.e. ``exp(c * log)`` on this branch."""
        if self.is_zero:
            return self
        w = complex(c) * complex(self.re, self.im)
        return LogComplex(w.real, w.imag)

    def phase_mod(self) -> float:
        """Phase reduced to (-pi, pi]."""
        return math.remainder(self.im, 2.0 * math.pi)


def _is_nonpositive_integer(z: complex) -> bool:
    z = complex(z)
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def log_gamma(z: complex) -> LogComplex:
    """log Gamma(z) on the branch continuous off the negative real axis."""
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at z={z}", (z,))
    w = complex(loggamma(complex(z)))
    return LogComplex(w.real, w.imag)


def _log_g_series(u: complex) -> complex:
    """Asymptotic expansion of log G(1+u) for large |u|, Re(u) > 0."""
    lu = cmath.log(u)
    s = 0.5 * u * u * lu - 0.75 * u * u + 0.5 * u * LOG_2PI - lu / 12.0 + ZETA_PRIME_M1
    inv2 = 1.0 / (u * u)
    p = inv2
    for k in range(1, _G_SERIES_TERMS + 1):
        s += _BERNOULLI[2 * k + 2] / (4.0 * k * (k + 1)) * p
        p *= inv2
    return s


def log_barnes_g(z: complex, shift_threshold: float = G_SHIFT_THRESHOLD) -> LogComplex:
    """log G(z) for the Barnes G-function.

    Uses the Glaisher-form large argument series at ``z + n`` with
    ``Re(z + n) >= shift_threshold`` and walks back with
    ``G(z) = G(z + n) / prod_k Gamma(z + k)``. Non-positive integers return
    :meth:`LogComplex.zero`.
    """
    z = complex(z)
    if _is_nonpositive_integer(z):
        return LogComplex.zero()
    if z.imag == 0.0 and z.real == math.floor(z.real) and z.real <= 64:
        # G(n) = prod_{k=1}^{n-2} k!, exact at n = 1, 2
        return LogComplex(math.fsum(math.lgamma(k + 1) for k in range(1, int(z.real) - 1)))
    n = max(0, math.ceil(shift_threshold - z.real))
    w = z + n
    acc = _log_g_series(w - 1.0)
    for k in range(n):
        acc -= complex(loggamma(z + k))
    return LogComplex(acc.real, acc.imag)


def _cancel(numerators: Iterable[complex], denominators: Iterable[complex]):
    num = [complex(v) for v in numerators]
    den = [complex(v) for v in denominators]
    rest = []
    for d in den:
        try:
            num.remove(d)
        except ValueError:
            rest.append(d)
    return num, rest


def gamma_ratio(numerators: Sequence[complex], denominators: Sequence[complex]) -> LogComplex:
    """log of prod Gamma(numerators) / prod Gamma(denominators).

    Identical entries are cancelled before anything is evaluated, so a pole
    appearing on both sides is harmless.
    """
    num, den = _cancel(numerators, denominators)
    bad = [v for v in num + den if _is_nonpositive_integer(v)]
    if bad:
        raise PoleError(f"uncancelled Gamma poles at {bad}", bad)
    acc = 0j
    for v in num:
        acc += complex(loggamma(v))
    for v in den:
        acc -= complex(loggamma(v))
    return LogComplex(acc.real, acc.imag)


def barnes_ratio(numerators: Sequence[complex], denominators: Sequence[complex]) -> LogComplex:
    """log of prod G(numerators) / prod G(denominators), with pairwise cancellation.

    Raises :class:`PoleError` when a denominator G vanishes; a vanishing
    numerator gives :meth:`LogComplex.zero`.
    """
    num, den = _cancel(numerators, denominators)
    bad = [v for v in den if _is_nonpositive_integer(v)]
    if bad:
        raise PoleError(f"Barnes G vanishes in the denominator at {bad}", bad)
    acc = LogComplex(0.0)
    for v in num:
        acc = acc + log_barnes_g(v)
    for v in den:
        acc = acc - log_barnes_g(v)
    return acc


def lattice_sum(t: float, a: complex) -> complex:
    """Closed form of sum_{l in Z} e^{i t l} / (l + a) for 0 < t < 2 pi."""
    a = complex(a)
    if not 0.0 < t < 2.0 * math.pi:
        raise ValueError(f"t={t} must lie strictly inside (0, 2*pi)")
    if a.imag == 0.0 and a.real == math.floor(a.real):
        raise PoleError(f"lattice sum has a pole at integer a={a}", (a,))
    return 2j * math.pi * cmath.exp(-1j * a * t) / (1.0 - cmath.exp(-2j * math.pi * a))


def log_gamma_array(z: np.ndarray) -> np.ndarray:
    """Vectorised log Gamma on complex arrays; raises on poles."""
    z = np.asarray(z, dtype=complex)
    bad = (z.imag == 0) & (z.real <= 0) & (z.real == np.floor(z.real))
    if np.any(bad):
        raise PoleError("Gamma has poles in the requested table", tuple(z[bad].tolist()))
    return loggamma(z)
