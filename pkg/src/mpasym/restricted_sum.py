"""Multi-point restricted sums S^+ and S^-: truncated enumeration and closed form.

The truncated sums are organised by *level* E = sum(p) + sum(h) inside each
particle/hole class (n_p, n_h). On a convergent contour every weight carries a
factor exp(-|Im t| E), so classes are walked shell by shell and abandoned once
their shell mass is negligible. Segments are coupled by the varpi factor,
which only links neighbours, so the nested sum collapses to a chain of
matrix-vector contractions.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.special import loggamma

from .excitations import CollisionError, CriticalClassVector, ParticleHoleSet, ShiftParams
from .specfun import LogComplex, PoleError, barnes_ratio

TAIL_MODES = ("raw", "abel-damped")


class BranchCutWarning(UserWarning):
    """A complex power base sits on (or next to) the negative real axis."""


@dataclass(frozen=True)
class TruncationPolicy:
    """How far the infinite particle/hole sums are followed.

    ``M`` caps the level of each configuration (and therefore every entry).
    A class is abandoned early once a shell mass falls below ``shell_tol``
    while decreasing. Before segments are coupled, the smallest weights
    whose combined modulus is below ``prune_rel`` times the segment mass are
    dropped; the dropped mass is added to the tail estimate. In
    ``abel-damped`` mode the separations are moved off the real axis by
    ``delta`` in the convergent direction.
    """

    n_max: int = 4
    M: int = 40
    tail_mode: str = "raw"
    delta: float = 0.0
    shell_tol: float = 1e-13
    prune_rel: float = 1e-10

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.M < self.n_max:
            raise ValueError("M must be >= n_max")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
        if self.tail_mode == "abel-damped" and not self.delta > 0:
            raise ValueError("abel-damped mode needs delta > 0")
        if self.shell_tol < 0:
            raise ValueError("shell_tol must be >= 0")
        if not 0 <= self.prune_rel < 1:
            raise ValueError("prune_rel must lie in [0, 1)")

    def with_M(self, M: int) -> "TruncationPolicy":
        return TruncationPolicy(self.n_max, M, self.tail_mode, self.delta, self.shell_tol, self.prune_rel)

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "M": self.M,
            "tail_mode": self.tail_mode,
            "delta": self.delta,
            "shell_tol": self.shell_tol,
            "prune_rel": self.prune_rel,
        }


def _classes(charge: int, n_max: int) -> list[tuple[int, int]]:
    """(n_p, n_h) pairs with n_p - n_h = charge, both <= n_max."""
    out = []
    for n_h in range(n_max + 1):
        n_p = n_h + charge
        if 0 <= n_p <= n_max:
            out.append((n_p, n_h))
    return out


def enumerate_configs(ell: int, n_max: int, M: int) -> Iterator[ParticleHoleSet]:
    """All sets with n_p - n_h = ell, entries <= M and n_p, n_h <= n_max.

    Ordered by hole count, then particles lexicographically, then holes.
    """
    if M < n_max:
        raise ValueError("M must be >= n_max")
    for n_p, n_h in _classes(ell, n_max):
        for P in combinations(range(1, M + 1), n_p):
            for H in combinations(range(1, M + 1), n_h):
                yield ParticleHoleSet(P, H)


def config_count(ell: int, n_max: int, M: int) -> int:
    return sum(math.comb(M, n_p) * math.comb(M, n_h) for n_p, n_h in _classes(ell, n_max))


@lru_cache(maxsize=None)
def _strict_parts(k: int, total: int, lo: int = 1) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing k-tuples of integers >= lo summing to total."""
    if k == 0:
        return ((),) if total == 0 else ()
    out = []
    x = lo
    # the remaining k-1 entries are at least x+1, x+2, ...
    while k * x + k * (k - 1) // 2 <= total:
        for rest in _strict_parts(k - 1, total - x, x + 1):
            out.append((x,) + rest)
        x += 1
    return tuple(out)


def _parts_array(k: int, total: int) -> np.ndarray:
    parts = _strict_parts(k, total)
    if not parts:
        return np.zeros((0, k), dtype=np.int64)
    return np.array(parts, dtype=np.int64).reshape(len(parts), k)


def _min_level(k: int) -> int:
    return k * (k + 1) // 2


class _SegmentWeights:
    """Log-domain lookup tables for the single-segment weight at fixed (nu, eta, t)."""

    def __init__(self, sign: int, nu: complex, eta: complex, t: complex, top: int):
        self.sign = sign
        x = np.arange(1, top + 1, dtype=float)
        if sign > 0:
            pa, pb = x - nu, x + eta
            ha, hb = x + nu, x - eta
            ph_p, ph_h = 1j * t * x, 1j * t * (x - 1)
        else:
            pa, pb = x + nu, x - eta
            ha, hb = x - nu, x + eta
            ph_p, ph_h = 1j * t * (1 - x), -1j * t * x
        for arr in (pa, pb, ha, hb):
            bad = (arr.imag == 0) & (arr.real <= 0) & (arr.real == np.floor(arr.real))
            if np.any(bad):
                raise PoleError("Gamma pole in a segment weight", tuple(arr[bad].tolist()))
        lgx = loggamma(x)
        # index 0 unused so that tables are addressed by the integer label itself
        self.lp = np.concatenate([[0j], ph_p + loggamma(pa) + loggamma(pb) - 2 * lgx])
        self.lh = np.concatenate([[0j], ph_h + loggamma(ha) + loggamma(hb) - 2 * lgx])
        self.log_int = np.concatenate([[0.0], np.log(np.arange(1, 2 * top + 2, dtype=float))])
        s = -math.pi ** -2 * cmath.sin(math.pi * nu) * cmath.sin(math.pi * eta)
        self.hole_factor = s
        self.log_s = cmath.log(s) if s != 0 else None

    def _self_part(self, A: np.ndarray, table: np.ndarray) -> np.ndarray:
        out = table[A].sum(axis=1) if A.shape[1] else np.zeros(A.shape[0], dtype=complex)
        k = A.shape[1]
        for a in range(k):
            for b in range(a + 1, k):
                out = out + 2 * self.log_int[A[:, b] - A[:, a]]
        return out

    def shell(self, n_p: int, n_h: int, level: int):
        """Configurations of one class at one level and their complex weights."""
        if n_h and self.log_s is None:
            return None
        blocks_P, blocks_H, blocks_w = [], [], []
        for e1 in range(_min_level(n_p), level - _min_level(n_h) + 1):
            P = _parts_array(n_p, e1)
            H = _parts_array(n_h, level - e1)
            if len(P) == 0 or len(H) == 0:
                continue
            sp = self._self_part(P, self.lp)
            sh = self._self_part(H, self.lh)
            lw = sp[:, None] + sh[None, :]
            if n_p and n_h:
                cross = self.log_int[P[:, None, :, None] + H[None, :, None, :] - 1].sum(axis=(2, 3))
                lw = lw - 2 * cross
            if n_h:
                lw = lw + n_h * self.log_s
            mP, mH = len(P), len(H)
            blocks_P.append(np.repeat(P, mH, axis=0))
            blocks_H.append(np.tile(H, (mP, 1)))
            blocks_w.append(np.exp(lw).ravel())
        if not blocks_w:
            return None
        return np.concatenate(blocks_P), np.concatenate(blocks_H), np.concatenate(blocks_w)


@dataclass
class _SegmentConfigs:
    n_max: int
    P: list = field(default_factory=list)
    H: list = field(default_factory=list)
    w: list = field(default_factory=list)
    mass: float = 0.0
    tail: float = 0.0
    capped: bool = False

    def add(self, P: np.ndarray, H: np.ndarray, w: np.ndarray):
        pad = lambda A: np.pad(A, ((0, 0), (0, self.n_max - A.shape[1])))
        self.P.append(pad(P))
        self.H.append(pad(H))
        self.w.append(w)

    def finish(self, prune_rel: float = 0.0):
        if self.w:
            self.P = np.concatenate(self.P)
            self.H = np.concatenate(self.H)
            self.w = np.concatenate(self.w)
            if prune_rel > 0:
                a = np.abs(self.w)
                order = np.argsort(a, kind="stable")
                cum = np.cumsum(a[order])
                n_drop = int(np.searchsorted(cum, prune_rel * self.mass, side="right"))
                if n_drop:
                    keep = np.ones(len(a), dtype=bool)
                    keep[order[:n_drop]] = False
                    self.tail += float(cum[n_drop - 1])
                    self.P, self.H, self.w = self.P[keep], self.H[keep], self.w[keep]
        else:
            self.P = np.zeros((0, self.n_max), dtype=np.int64)
            self.H = np.zeros((0, self.n_max), dtype=np.int64)
            self.w = np.zeros(0, dtype=complex)
        return self


def _geometric_tail(masses: list[float]) -> float:
    if len(masses) < 2 or masses[-1] == 0.0:
        return 0.0
    last, prev = masses[-1], masses[-2]
    if prev == 0.0:
        return math.inf
    q = last / prev
    if q >= 1.0:
        return math.inf
    return last * q / (1.0 - q)


def _collect_segment(sign: int, charge: int, nu, eta, t, policy: TruncationPolicy) -> _SegmentConfigs:
    table = _SegmentWeights(sign, nu, eta, t, policy.M)
    seg = _SegmentConfigs(policy.n_max)
    for n_p, n_h in _classes(charge, policy.n_max):
        start = _min_level(n_p) + _min_level(n_h)
        masses: list[float] = []
        stopped = False
        for level in range(start, policy.M + 1):
            got = table.shell(n_p, n_h, level)
            if got is None:
                if n_h and table.log_s is None:
                    stopped = True
                    break
                masses.append(0.0)
                continue
            P, H, w = got
            m = float(np.abs(w).sum())
            masses.append(m)
            seg.mass += m
            seg.add(P, H, w)
            if (
                level >= start + 3
                and m <= policy.shell_tol
                and masses[-2] >= m
                and masses[-3] >= masses[-2]
            ):
                stopped = True
                break
        if start > policy.M:
            continue
        seg.tail += _geometric_tail(masses)
        if not stopped:
            seg.capped = True
    return seg.finish(policy.prune_rel)


def _coupling_tables(seg: _SegmentConfigs, nu: complex, top: int):
    """Per-label varpi factors g_h(x), g_p(x) for every configuration of the next segment.

    varpi(J_prev; J_next) = prod_{h in H_prev} g_h(h) * prod_{p in P_prev} g_p(p).
    """
    x = np.arange(0, top + 1, dtype=float)[:, None]
    x[0] = np.nan  # padding row, reset to 1 below
    c = len(seg.w)
    gh = np.ones((top + 1, c), dtype=complex)
    gp = np.ones((top + 1, c), dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        gh, gp = _fill_coupling(gh, gp, seg, x, nu)
    gh[0, :] = 1.0
    gp[0, :] = 1.0
    return gh, gp


def _fill_coupling(gh, gp, seg, x, nu):
    for col in range(seg.n_max):
        K = seg.P[:, col][None, :]
        T = seg.H[:, col][None, :]
        k_on = K > 0
        t_on = T > 0
        gh = gh * np.where(k_on, 1 - K - x + nu, 1.0)
        gp = gp * np.where(t_on, x + T + nu - 1, 1.0)
        den_h = np.where(t_on, T - x + nu, 1.0)
        den_p = np.where(k_on, x - K + nu, 1.0)
        if np.any(den_h[1:] == 0) or np.any(den_p[1:] == 0):
            raise CollisionError(f"varpi denominator vanishes at nu={nu}")
        gh = gh / den_h
        gp = gp / den_p
    return gh, gp


def _set_products(table: np.ndarray, sets: np.ndarray) -> np.ndarray:
    """prod_{x in set} table[x, :] for each row of ``sets`` (0 = padding, a unit row)."""
    out = np.ones((len(sets), table.shape[1]), dtype=complex)
    for col in range(sets.shape[1]):
        out *= table[sets[:, col]]
    return out


def _contract(v_prev: np.ndarray, prev: _SegmentConfigs, nxt: _SegmentConfigs, nu: complex, top: int,
              block: int = 1024) -> np.ndarray:
    """sum_i v_prev[i] * varpi(J_i; J_j | nu) for every configuration J_j of ``nxt``.

    varpi factorises into a hole part and a particle part of J_i, so the
    previous weights are folded into a sparse (hole set x particle set)
    matrix V and the contraction becomes sum_u GH[u, j] (V @ GP)[u, j].
    """
    c2 = len(nxt.w)
    out = np.zeros(c2, dtype=complex)
    if c2 == 0 or len(v_prev) == 0:
        return out
    gh, gp = _coupling_tables(nxt, nu, top)
    Pu, ip = np.unique(prev.P, axis=0, return_inverse=True)
    Hu, ih = np.unique(prev.H, axis=0, return_inverse=True)
    V = sparse.csr_matrix((v_prev, (ih.ravel(), ip.ravel())), shape=(len(Hu), len(Pu)))
    for j0 in range(0, c2, block):
        j1 = min(c2, j0 + block)
        GP = _set_products(gp[:, j0:j1], Pu)
        GH = _set_products(gh[:, j0:j1], Hu)
        out[j0:j1] = (GH * (V @ GP)).sum(axis=0)
    if not np.all(np.isfinite(out)):
        raise CollisionError("non-finite coupling encountered in contraction")
    return out


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real.tolist()), math.fsum(z.imag.tolist()))


def _effective_t(sign: int, t: Sequence[complex], policy: TruncationPolicy) -> list[complex]:
    if policy.tail_mode == "abel-damped":
        return [complex(v) + sign * 1j * policy.delta for v in t]
    return [complex(v) for v in t]


def _check_sign(sign: int):
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")


def restricted_sum_truncated(sign: int, cls: CriticalClassVector, shifts: ShiftParams,
                             policy: TruncationPolicy) -> tuple[complex, float]:
    """Truncated S^sign and an extrapolated estimate of the neglected remainder."""
    _check_sign(sign)
    r = shifts.r
    if cls.r != r:
        raise ValueError(f"class has r={cls.r} but shifts have r={r}")
    if r == 1:
        return 1 + 0j, 0.0
    t = _effective_t(sign, shifts.t, policy)
    if policy.tail_mode == "raw" and any(sign * v.imag <= 0 for v in t):
        raise ValueError("raw mode needs sign*Im(t_s) > 0 for every separation")
    nu = shifts.nu
    segs = [
        _collect_segment(sign, sign * cls.ell[s], nu[s], nu[s + 1], t[s], policy)
        for s in range(r - 1)
    ]
    v = segs[0].w
    for s in range(1, r - 1):
        v = segs[s].w * _contract(v, segs[s - 1], segs[s], sign * nu[s], policy.M)
    value = _fsum_complex(v)
    tail = 0.0
    for s, seg in enumerate(segs):
        others = math.prod(o.mass for j, o in enumerate(segs) if j != s)
        tail += seg.tail * others
    return value, tail


def restricted_sum_converged(sign: int, cls: CriticalClassVector, shifts: ShiftParams,
                             policy: TruncationPolicy, tail_target: float = 1e-8,
                             growth: float = 1.5, M_max: int = 400) -> tuple[complex, float, TruncationPolicy]:
    """Grow the level cap until the tail estimate is below ``tail_target``."""
    pol = policy
    while True:
        value, tail = restricted_sum_truncated(sign, cls, shifts, pol)
        if tail < tail_target or pol.M >= M_max:
            return value, tail, pol
        pol = pol.with_M(min(M_max, max(pol.M + 1, int(math.ceil(pol.M * growth)))))


def _power(base: complex, expo: complex) -> LogComplex:
    if base.real < 0 and abs(base.imag) <= 1e-12 * abs(base):
        warnings.warn(f"power base {base} touches the branch cut", BranchCutWarning, stacklevel=3)
    return LogComplex.from_complex(base).scale(expo)


def log_restricted_sum_closed(sign: int, cls: CriticalClassVector, shifts: ShiftParams) -> LogComplex:
    _check_sign(sign)
    r = shifts.r
    if cls.r != r:
        raise ValueError(f"class has r={cls.r} but shifts have r={r}")
    nu, t = shifts.nu, shifts.t
    ell = cls.padded
    kap = cls.kappa()
    sg = sign
    acc = LogComplex(0.0)
    num: list[complex] = []
    den: list[complex] = []
    phase = 0j
    for s in range(1, r):
        ls, a, b = ell[s], nu[s - 1], nu[s]
        phase += sg * 1j * t[s - 1] * ls * (ls + 1) / 2
        num += [1 + sg * (ls - a), 1 + sg * (ls + b)]
        den += [1 - sg * a, 1 + sg * b]
    for s in range(2, r):
        ls, lp, a = ell[s], ell[s - 1], nu[s - 1]
        num += [1 + sg * a, 1 + sg * (lp - ls + a)]
        den += [1 - sg * (ls - a), 1 + sg * (lp + a)]
    acc = acc + barnes_ratio(num, den) + LogComplex(phase.real, phase.imag)
    for a in range(1, r + 1):
        for b in range(a + 1, r + 1):
            tau = sum(t[a - 1:b - 1])
            expo = (nu[a - 1] + kap[a - 1]) * (nu[b - 1] + kap[b - 1])
            if expo == 0:
                continue
            acc = acc + _power(1 - cmath.exp(sg * 1j * tau), expo)
    return acc


def restricted_sum_closed(sign: int, cls: CriticalClassVector, shifts: ShiftParams) -> complex:
    """Barnes-G closed form of S^sign."""
    return log_restricted_sum_closed(sign, cls, shifts).exp()


def product_identity_rhs(cls: CriticalClassVector, nu: Sequence[complex], t_plus: Sequence[complex],
                         t_minus: Sequence[complex] | None = None, umklapp_phase: bool = True) -> complex:
    """Right-hand side of S^- * S^+ = G-ratio * prod_{a != b}(1 - e^{i(tbar_{a-1} - tbar_{b-1})})^{...}.

    Factors with a > b carry a positive separation and are evaluated at
    ``t_plus``; those with a < b at ``t_minus``. With real t both coincide.
    When S^+ and S^- are taken at different separations their Umklapp
    phases no longer cancel; ``umklapp_phase`` restores the leftover
    exp(i sum_s (t^+_s - t^-_s) l_s (l_s + 1) / 2), which is 1 for real t.
    """
    r = len(nu)
    t_minus = t_plus if t_minus is None else t_minus
    kap = cls.kappa()
    nu = [complex(v) for v in nu]
    num, den = [], []
    for v, k in zip(nu, kap):
        num += [1 - v - k, 1 + v + k]
        den += [1 - v, 1 + v]
    acc = barnes_ratio(num, den)
    tb_p = np.concatenate([[0j], np.cumsum(np.asarray(t_plus, dtype=complex))])
    tb_m = np.concatenate([[0j], np.cumsum(np.asarray(t_minus, dtype=complex))])
    for a in range(r):
        for b in range(r):
            if a == b:
                continue
            expo = (nu[a] + kap[a]) * (nu[b] + kap[b])
            if expo == 0:
                continue
            tb = tb_p if a > b else tb_m
            acc = acc + _power(1 - cmath.exp(1j * (tb[a] - tb[b])), expo)
    if umklapp_phase:
        ph = sum(1j * (complex(tp) - complex(tm)) * l * (l + 1) / 2
                 for tp, tm, l in zip(t_plus, t_minus, cls.ell))
        acc = acc + LogComplex(ph.real, ph.imag)
    return acc.exp()


@dataclass(frozen=True)
class IdentityReport:
    value_plus: complex
    value_minus: complex
    closed_plus: complex
    closed_minus: complex
    tail_plus: float
    tail_minus: float
    residual_plus: float
    residual_minus: float
    product_residual: float
    M_plus: int
    M_minus: int

    @property
    def residual(self) -> float:
        return max(self.residual_plus, self.residual_minus)

    @property
    def tail(self) -> float:
        return max(self.tail_plus, self.tail_minus)


def _rel(a: complex, b: complex) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / abs(b) if b != 0 else math.inf


def identity_residual(cls: CriticalClassVector, shifts: ShiftParams, policy: TruncationPolicy,
                      tail_target: float | None = None) -> IdentityReport:
    """Compare truncated and closed S^+ and S^-, then check their product.

    S^+ is evaluated at the separations of ``shifts`` (Im t > 0 in raw mode)
    and S^- at the complex-conjugate separations. When ``tail_target`` is
    given the level cap is grown until the tail estimate drops below it.
    """
    t_plus = _effective_t(1, shifts.t, policy)
    t_minus = [v.conjugate() for v in t_plus]
    raw = TruncationPolicy(policy.n_max, policy.M, "raw", 0.0, policy.shell_tol, policy.prune_rel)
    sp = ShiftParams(shifts.nu, t_plus)
    sm = ShiftParams(shifts.nu, t_minus)
    results = {}
    for sign, sh in ((1, sp), (-1, sm)):
        if tail_target is None:
            value, tail = restricted_sum_truncated(sign, cls, sh, raw)
            M = raw.M
        else:
            value, tail, pol = restricted_sum_converged(sign, cls, sh, raw, tail_target)
            M = pol.M
        closed = restricted_sum_closed(sign, cls, sh)
        results[sign] = (value, closed, tail, M)
    (vp, cp, tp, Mp), (vm, cm, tm, Mm) = results[1], results[-1]
    rhs = product_identity_rhs(cls, shifts.nu, t_plus, t_minus)
    return IdentityReport(
        value_plus=vp,
        value_minus=vm,
        closed_plus=cp,
        closed_minus=cm,
        tail_plus=tp,
        tail_minus=tm,
        residual_plus=_rel(vp, cp),
        residual_minus=_rel(vm, cm),
        product_residual=_rel(vm * vp, rhs),
        M_plus=Mp,
        M_minus=Mm,
    )


def to_record(sign: int, cls: CriticalClassVector, shifts: ShiftParams, policy: TruncationPolicy,
              value: complex, tail: float, residual: float | None = None) -> dict:
    """JSON-ready record of one evaluation."""
    return {
        "sign": "+" if sign > 0 else "-",
        "ell": list(cls.ell),
        "nu": [[v.real, v.imag] for v in shifts.nu],
        "t": [[v.real, v.imag] for v in shifts.t],
        "policy": policy.to_dict(),
        "value_re": value.real,
        "value_im": value.imag,
        "tail": tail,
        "residual": residual,
    }


def random_shifts(rng: np.random.Generator, r: int, re_nu: float = 0.4, im_nu: float = 0.1,
                  re_t: tuple[float, float] = (0.5, 2.0), im_t: tuple[float, float] = (0.3, 1.0)) -> ShiftParams:
    """Random shift values and complex separations in the ranges used by the identity sweeps."""
    nu = rng.uniform(-re_nu, re_nu, r) + 1j * rng.uniform(-im_nu, im_nu, r)
    t = rng.uniform(*re_t, r - 1) + 1j * rng.uniform(*im_t, r - 1)
    return ShiftParams(tuple(nu.tolist()), tuple(t.tolist()))
