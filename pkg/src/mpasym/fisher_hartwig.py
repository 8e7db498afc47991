"""Toeplitz-determinant oracle for the model sum with jump-type Fisher-Hartwig symbols."""

from __future__ import annotations

import cmath
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor
from scipy.special import loggamma

from .excitations import CollisionError
from .restricted_sum import TruncationPolicy
from .specfun import LogComplex, log_barnes_g

TWO_PI = 2.0 * math.pi


class DegeneracyError(ValueError):
    """Two integer vectors realise the optimum of the Fisher-Hartwig criterion."""


class IllConditionedWarning(UserWarning):
    """The Toeplitz matrix is close to singular in double precision."""


def _check_nu(nu: Sequence[complex]) -> tuple[complex, ...]:
    nu = tuple(complex(v) for v in nu)
    for v in nu:
        x = v.real - 0.5
        if abs(x - round(x)) < 1e-14:
            raise ValueError(f"Re(nu)={v.real} lies on 1/2 + Z")
    return nu


@dataclass(frozen=True)
class FHSymbol:
    """Product of elementary jump symbols chi_{delta, phi}.

    chi_{delta,phi}(theta) = exp(i(theta - phi + pi) delta) on [0, phi) and the
    same times exp(-2 i pi delta) on [phi, 2 pi).
    """

    jumps: tuple[tuple[complex, float], ...]

    def __post_init__(self):
        jumps = tuple((complex(d), float(p)) for d, p in self.jumps)
        phis = [p for _, p in jumps]
        if any(not 0.0 <= p < TWO_PI for p in phis):
            raise ValueError(f"jump positions must lie in [0, 2 pi), got {phis}")
        if len(set(phis)) != len(phis):
            raise ValueError(f"jump positions must be distinct, got {phis}")
        object.__setattr__(self, "jumps", jumps)

    @property
    def mu(self) -> complex:
        return sum((d for d, _ in self.jumps), 0j)

    def arcs(self) -> list[tuple[float, float, complex]]:
        """(start, end, constant) with symbol = constant * exp(i mu theta) on [start, end)."""
        pts = sorted({0.0, TWO_PI, *[p for d, p in self.jumps if d != 0]})
        out = []
        for a, b in zip(pts[:-1], pts[1:]):
            const = 1 + 0j
            for d, p in self.jumps:
                const *= cmath.exp(1j * (math.pi - p) * d)
                if a >= p:
                    const *= cmath.exp(-2j * math.pi * d)
            out.append((a, b, const))
        return out

    def __call__(self, theta: float) -> complex:
        theta = float(theta) % TWO_PI
        val = 1 + 0j
        for d, p in self.jumps:
            val *= cmath.exp(1j * (theta - p + math.pi) * d)
            if theta >= p:
                val *= cmath.exp(-2j * math.pi * d)
        return val

    def times(self, delta: complex, phi: float) -> "FHSymbol":
        return FHSymbol(self.jumps + ((delta, phi),))


def fourier_coeffs(symbol: FHSymbol, k) -> np.ndarray:
    """c_k = int_0^{2pi} e^{-ik theta} symbol(theta) dtheta / 2pi, exactly, for an array of k.

    On an arc [a, b) the integral of e^{i x theta} is
    e^{i x m} sin(x h) / (pi x) with midpoint m and half-length h.
    """
    k = np.asarray(k)
    x = symbol.mu - k.astype(float)
    out = np.zeros(k.shape, dtype=complex)
    small = np.abs(x) < 1e-300
    xs = np.where(small, 1.0, x)
    arcs = symbol.arcs()
    if len(arcs) == 1 and symbol.mu == round(symbol.mu.real):
        # smooth symbol exp(i mu theta) with integer mu: a single exact coefficient
        return np.where(x == 0, arcs[0][2], 0j)
    for a, b, const in arcs:
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        arc = np.where(small, h / math.pi, np.sin(xs * h) / (math.pi * xs))
        out += const * np.exp(1j * x * m) * arc
    return out


def fourier_coeff(symbol: FHSymbol, k: int) -> complex:
    return complex(fourier_coeffs(symbol, np.array([int(k)]))[0])


@dataclass(frozen=True)
class ToeplitzSpec:
    nu: tuple[complex, ...]
    t: tuple[float, ...]
    N: int

    def __post_init__(self):
        nu = _check_nu(self.nu)
        t = tuple(float(v) for v in self.t)
        if len(t) != len(nu) - 1:
            raise ValueError("need len(t) == len(nu) - 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        tb = np.cumsum(t)
        if any(not 0.0 < v < TWO_PI for v in tb):
            raise ValueError(f"partial sums of t must lie in (0, 2 pi), got {tb.tolist()}")
        if len(set(tb.tolist())) != len(tb):
            raise ValueError("partial sums of t must be pairwise distinct")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "t", t)

    @property
    def r(self) -> int:
        return len(self.nu)

    def t_bar(self) -> np.ndarray:
        """(0, tbar_1, ..., tbar_{r-1})."""
        return np.concatenate([[0.0], np.cumsum(self.t)])

    def nu_bar(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.nu, dtype=complex))

    def symbol(self) -> FHSymbol:
        tb = self.t_bar()
        return FHSymbol(((self.nu[0], 0.0),) + tuple((self.nu[s], tb[s]) for s in range(1, self.r)))

    def with_N(self, N: int) -> "ToeplitzSpec":
        return ToeplitzSpec(self.nu, self.t, N)


def _phase_prefactor(spec: ToeplitzSpec) -> complex:
    nub = spec.nu_bar()
    return sum((-1j * spec.N * spec.t[s] * nub[s] for s in range(spec.r - 1)), 0j)


def log_det_lu(A: np.ndarray, cond_limit: float = 1e12) -> LogComplex:
    """log det A from a partially pivoted LU, with a conditioning warning."""
    lu, piv = lu_factor(A, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        return LogComplex.zero()
    swaps = int(np.sum(piv != np.arange(len(piv))))
    logs = np.log(d.astype(complex))
    acc = complex(logs.sum()) + (1j * math.pi if swaps % 2 else 0)
    cond = np.linalg.cond(A)
    if not cond < cond_limit:
        warnings.warn(f"Toeplitz matrix condition number {cond:.3e}", IllConditionedWarning, stacklevel=3)
    return LogComplex(acc.real, acc.imag)


def toeplitz_matrix(spec: ToeplitzSpec) -> np.ndarray:
    N = spec.N
    c = fourier_coeffs(spec.symbol(), np.arange(-(N - 1), N))
    idx = np.arange(N)
    return c[(idx[:, None] - idx[None, :]) + N - 1]


def log_model_sum_toeplitz(spec: ToeplitzSpec, N_max: int = 64) -> LogComplex:
    if spec.N > N_max:
        raise ValueError(f"N={spec.N} exceeds N_max={N_max}")
    ph = _phase_prefactor(spec)
    return log_det_lu(toeplitz_matrix(spec)) + LogComplex(ph.real, ph.imag)


def model_sum_toeplitz(spec: ToeplitzSpec, N_max: int = 64) -> complex:
    """Model sum as the phase prefactor times det_N[c_{a-b}[chi_r]]."""
    return log_model_sum_toeplitz(spec, N_max).exp()


def _increasing_tuples(N: int, cutoff: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(-cutoff, cutoff + 1), N)), dtype=float).reshape(-1, N)


def _cauchy_dets(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """det[1/(x_a - y_b)] for every pair of rows of X (m x N) and Y (n x N)."""
    D = X[:, None, :, None] - Y[None, :, None, :]
    if np.any(D == 0):
        raise CollisionError("coinciding nodes in a Cauchy determinant")
    return np.linalg.det(1.0 / D)


def _direct_value(spec: ToeplitzSpec, cutoff: int, block: int = 512) -> complex:
    N, r = spec.N, spec.r
    nub = np.concatenate([[0j], spec.nu_bar()])
    shift = (N + 1) / 2
    base = np.arange(1, N + 1, dtype=float)[None, :]
    tuples = _increasing_tuples(N, cutoff)
    s_nu = [cmath.sin(math.pi * v) / math.pi for v in spec.nu]
    # level k nodes: lambda^{(k)}_l = l - (N+1)/2 - nubar_k
    prev_nodes = base - shift
    v = np.ones(1, dtype=complex)
    for k in range(1, r):
        nodes = tuples - shift - nub[k]
        w = (s_nu[k - 1] ** N) * np.exp(1j * spec.t[k - 1] * nodes.sum(axis=1))
        nxt = np.zeros(len(nodes), dtype=complex)
        for j0 in range(0, len(nodes), block):
            j1 = min(len(nodes), j0 + block)
            dets = _cauchy_dets(prev_nodes, nodes[j0:j1])
            nxt[j0:j1] = v @ dets
        v = nxt * w
        prev_nodes = nodes
    last = base - shift - nub[r]
    dets = _cauchy_dets(prev_nodes, last)[:, 0]
    return complex((v * dets).sum()) * s_nu[r - 1] ** N


def model_sum_direct(spec: ToeplitzSpec, cutoff: int) -> tuple[complex, float]:
    """Literal nested sum over increasing integer tuples in [-cutoff, cutoff].

    The separations are real; the summand decays like an inverse square in
    each free integer, so the symmetric cutoff converges without deformation.
    The tail estimate is the change from half the cutoff.
    """
    if spec.N > 3:
        raise ValueError("direct evaluation is limited to N <= 3")
    if cutoff < spec.N:
        raise ValueError("cutoff too small")
    full = _direct_value(spec, cutoff)
    half = _direct_value(spec, max(spec.N, cutoff // 2))
    return full, abs(full - half)


def induction_kernel_check(symbol: FHSymbol, a: int, b: int, t_bar: float, nu_next: complex,
                           cutoff: int = 100_000) -> tuple[float, float]:
    """Residual of sum_l (sin pi nu / pi) e^{i tbar (l-a)} c_{l-b}[chi] / (l - a + nu) = c_{a-b}[chi * chi_{nu,tbar}].

    Partial sums over |l - a| <= K are averaged over K in [cutoff/2, cutoff]
    (windowed Cesaro mean). Returns (residual, tail) with the tail taken as
    the spread between the averaged and the plain partial sum.
    """
    if not 0.0 < t_bar < TWO_PI:
        raise ValueError("t_bar must lie in (0, 2 pi)")
    nu = complex(nu_next)
    target = fourier_coeff(symbol.times(nu, t_bar), a - b)
    d = np.arange(-cutoff, cutoff + 1)
    ell = a + d
    terms = cmath.sin(math.pi * nu) / math.pi * np.exp(1j * t_bar * d) * fourier_coeffs(symbol, ell - b) / (d + nu)
    # symmetric partial sums S_K for K = 0..cutoff
    centre = terms[cutoff]
    pair = terms[cutoff + 1:] + terms[:cutoff][::-1]
    S = centre + np.concatenate([[0j], np.cumsum(pair)])
    window = S[cutoff // 2:]
    mean = complex(window.mean())
    return abs(mean - target), abs(mean - complex(S[-1]))


def kappa_box_search(re_nu: Sequence[float], box: int) -> tuple[tuple[int, ...], float, float]:
    """Best and runner-up of sum (Re nu_s + kappa_s)^2 over |kappa_s| <= box, sum kappa = 0."""
    r = len(re_nu)
    best: list[tuple[float, tuple[int, ...]]] = []
    rng = range(-box, box + 1)
    for head in itertools.product(rng, repeat=r - 1):
        last = -sum(head)
        if abs(last) > box:
            continue
        k = head + (last,)
        val = sum((x + kk) ** 2 for x, kk in zip(re_nu, k))
        best.append((val, k))
    best.sort()
    second = best[1][0] if len(best) > 1 else math.inf
    return best[0][1], best[0][0], second


def kappa_maximizer(nu: Sequence[complex]) -> tuple[int, ...]:
    """Integer kappa with zero sum maximising -sum Re (nu_s + kappa_s)^2."""
    nu = _check_nu(nu)
    re = [v.real for v in nu]
    if len(re) == 1:
        return (0,)
    box = math.ceil(max(abs(x) for x in re)) + 1
    k, val, second = kappa_box_search(re, box)
    if second - val <= 1e-12:
        raise DegeneracyError(f"kappa maximiser not unique for nu={nu}")
    k_wide, val_wide, _ = kappa_box_search(re, box + 2)
    if k_wide != k:
        raise RuntimeError(f"kappa search box {box} too narrow for nu={nu}")
    return k


def log_fh_asymptotics(spec: ToeplitzSpec, kappa: Sequence[int] | None = None) -> LogComplex:
    kap = kappa_maximizer(spec.nu) if kappa is None else tuple(int(k) for k in kappa)
    if sum(kap) != 0:
        raise ValueError("kappa must sum to zero")
    N, r = spec.N, spec.r
    tb = spec.t_bar()
    ph = _phase_prefactor(spec) + sum(1j * N * kap[s] * tb[s] for s in range(1, r))
    acc = LogComplex(ph.real, ph.imag)
    logN = math.log(N)
    for v, k in zip(spec.nu, kap):
        b = v + k
        acc = acc + log_barnes_g(1 + b) + log_barnes_g(1 - b) + LogComplex(-(b * b * logN).real, -(b * b * logN).imag)
    for a in range(r):
        for b in range(r):
            if a == b:
                continue
            expo = (spec.nu[a] + kap[a]) * (spec.nu[b] + kap[b])
            if expo == 0:
                continue
            acc = acc + LogComplex.from_complex(1 - cmath.exp(1j * (tb[a] - tb[b]))).scale(expo)
    return acc


def fh_asymptotics(spec: ToeplitzSpec, kappa: Sequence[int] | None = None) -> complex:
    """Leading large-N term of the model sum on the maximiser branch."""
    return log_fh_asymptotics(spec, kappa).exp()


def log_background(spec: ToeplitzSpec) -> LogComplex:
    """G_N: phase prefactor times prod_s G(1+nu,1-nu) G(N+1)^2 / G(N+1-nu, N+1+nu)."""
    N = spec.N
    ph = _phase_prefactor(spec)
    acc = LogComplex(ph.real, ph.imag)
    gN = log_barnes_g(N + 1)
    for v in spec.nu:
        acc = acc + log_barnes_g(1 + v) + log_barnes_g(1 - v) + gN + gN
        acc = acc - log_barnes_g(N + 1 - v) - log_barnes_g(N + 1 + v)
    return acc


def _ph_configs(N: int, n: int, M: int):
    """Particle tuples in [1-M, 0] u [N+1, N+M] and hole tuples in [1, N], both of size n."""
    plabels = list(range(1 - M, 1)) + list(range(N + 1, N + M + 1))
    P = np.array(list(itertools.combinations(plabels, n)), dtype=float).reshape(-1, n)
    H = np.array(list(itertools.combinations(range(1, N + 1), n)), dtype=float).reshape(-1, n)
    return P, H


def _ph_segment(N: int, n: int, M: int, nu: complex, eta: complex, t: float):
    """Configurations and H_N weights of one segment with n particle-hole pairs."""
    if n == 0:
        return np.zeros((1, 0)), np.zeros((1, 0)), np.ones(1, dtype=complex)
    P, H = _ph_configs(N, n, M)
    k = np.arange(1, N + 1, dtype=float)

    def part_log(p):
        # Gamma(N+1-p+i0)/Gamma(1-p+i0) resolves to prod_k (k - p), squared over both blocks
        d = k[None, :] - p[:, None]
        return (2 * np.log(np.abs(d)).sum(axis=1)
                - (loggamma(N + 1 - p + nu) - loggamma(1 - p + nu))
                - (loggamma(N + 1 - p - eta) - loggamma(1 - p - eta))
                + 1j * t * p)

    def hole_log(h):
        return (loggamma(N + 1 - h + nu) + loggamma(h - nu) + loggamma(N + 1 - h - eta) + loggamma(h + eta)
                - 2 * loggamma(N + 1 - h) - 2 * loggamma(h) - 1j * t * h)

    lp = part_log(P.ravel()).reshape(P.shape).sum(axis=1)
    lh = hole_log(H.ravel()).reshape(H.shape).sum(axis=1)
    # squared Cauchy determinant det[1/(p_a - h_b)]
    cp = np.zeros(len(P))
    for a in range(n):
        for b in range(a + 1, n):
            cp += 2 * np.log(np.abs(P[:, b] - P[:, a]))
    ch = np.zeros(len(H))
    for a in range(n):
        for b in range(a + 1, n):
            ch += 2 * np.log(np.abs(H[:, b] - H[:, a]))
    cross = 2 * np.log(np.abs(P[:, None, :, None] - H[None, :, None, :])).sum(axis=(2, 3))
    s = cmath.sin(math.pi * nu) * cmath.sin(math.pi * eta) / math.pi ** 2
    pref = (-1) ** n * s ** n
    lw = (lp + cp)[:, None] + (lh + ch)[None, :] - cross
    w = pref * np.exp(lw)
    Pr = np.repeat(P, len(H), axis=0)
    Hr = np.tile(H, (len(P), 1))
    return Pr, Hr, w.ravel()


def _ph_coupling(Pp, Hp, Pn, Hn, nu: complex) -> np.ndarray:
    """prod over prev b, next a of (p_b-h_a+nu)(h_b-p_a+nu)/((h_b-h_a+nu)(p_b-p_a+nu))."""
    W = np.ones((len(Pp), len(Pn)), dtype=complex)
    for b in range(Pp.shape[1]):
        pb, hb = Pp[:, b][:, None], Hp[:, b][:, None]
        for a in range(Pn.shape[1]):
            pa, ha = Pn[:, a][None, :], Hn[:, a][None, :]
            W *= (pb - ha + nu) * (hb - pa + nu) / ((hb - ha + nu) * (pb - pa + nu))
    return W


def ph_expansion_terms(spec: ToeplitzSpec, policy: TruncationPolicy) -> complex:
    """Finite-N particle-hole expansion of the model sum, truncated.

    Each segment carries n <= policy.n_max particle-hole pairs, holes in
    [1, N] and particles within distance policy.M of the hole block.
    """
    N, r = spec.N, spec.r
    if N > 24:
        raise ValueError("ph expansion limited to N <= 24")
    nu = spec.nu
    segs = []
    for s in range(r - 1):
        blocks = [_ph_segment(N, n, policy.M, nu[s], nu[s + 1], spec.t[s]) for n in range(min(policy.n_max, N) + 1)]
        segs.append(blocks)
    # contract adjacent segments class by class
    v = [w for _, _, w in segs[0]]
    for s in range(1, r - 1):
        nv = []
        for Pn, Hn, wn in segs[s]:
            acc = np.zeros(len(wn), dtype=complex)
            rows = max(1, (1 << 21) // max(1, len(wn)))
            for (Pp, Hp, _), vp in zip(segs[s - 1], v):
                for i0 in range(0, len(vp), rows):
                    i1 = i0 + rows
                    acc += vp[i0:i1] @ _ph_coupling(Pp[i0:i1], Hp[i0:i1], Pn, Hn, nu[s])
            nv.append(acc * wn)
        v = nv
    flat = np.concatenate(v)
    total = complex(math.fsum(flat.real.tolist()), math.fsum(flat.imag.tolist()))
    return log_background(spec).exp() * total


def sequence_records(spec: ToeplitzSpec, N_list: Sequence[int], kappa: Sequence[int] | None = None) -> list[dict]:
    """Rows {N, det, asymptotic, ratio} for a convergence study."""
    rows = []
    for N in N_list:
        sp = spec.with_N(int(N))
        det = model_sum_toeplitz(sp)
        asym = fh_asymptotics(sp, kappa)
        ratio = det / asym
        rows.append({
            "N": int(N),
            "det_re": det.real, "det_im": det.imag,
            "asymptotic_re": asym.real, "asymptotic_im": asym.imag,
            "ratio_re": ratio.real, "ratio_im": ratio.imag,
        })
    return rows


def fh_branch_sum(spec: ToeplitzSpec, box: int = 2) -> complex:
    """Sum of the leading-form terms over every zero-sum kappa with |kappa_s| <= box.

    Neighbouring branches carry relative size N^{-(sum (nu+kappa')^2 - sum (nu+kappa*)^2)}
    with oscillating phases; they dominate the 1/N correction to the single
    maximiser term whenever the shifts are well separated.
    """
    r = spec.r
    terms = []
    for head in itertools.product(range(-box, box + 1), repeat=r - 1):
        last = -sum(head)
        if abs(last) <= box:
            terms.append(fh_asymptotics(spec, head + (last,)))
    return complex(math.fsum(z.real for z in terms), math.fsum(z.imag for z in terms))
