"""Dressed charge, dressed phase and dressed momentum by Gauss-Legendre Nystrom solves."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_NODES = 64
ZETA_MARGIN = 1e-3
COND_LIMIT = 1e10


class IllConditionedOperatorError(RuntimeError):
    """The discretised operator id - upsilon K is numerically singular."""


def _cos_exact(z: float) -> float:
    # keeps the free-fermion point zeta = pi/2 exactly kernel-free
    return 0.0 if z == math.pi / 2 else math.cos(z)


@dataclass(frozen=True)
class ModelKernel:
    """Bare phase, its derivative and the bare momentum of one of the two models."""

    model: str
    param: float
    upsilon: int = field(init=False)

    def __post_init__(self):
        if self.model == "XXZ":
            if not ZETA_MARGIN <= self.param <= math.pi - ZETA_MARGIN:
                raise ValueError(f"zeta must lie in [{ZETA_MARGIN}, pi - {ZETA_MARGIN}]")
            object.__setattr__(self, "upsilon", -1)
        elif self.model == "NLSM":
            if not self.param > 0:
                raise ValueError("c must be positive")
            object.__setattr__(self, "upsilon", 1)
        else:
            raise ValueError(f"unknown model {self.model!r}; use 'XXZ' or 'NLSM'")

    @classmethod
    def xxz(cls, zeta: float) -> "ModelKernel":
        return cls("XXZ", float(zeta))

    @classmethod
    def nlsm(cls, c: float) -> "ModelKernel":
        return cls("NLSM", float(c))

    @staticmethod
    def _xxz_phase(lam, z):
        # i ln[sinh(iz + lam) / sinh(iz - lam)], continuous and odd on the real line
        return math.pi - 2.0 * np.arctan2(np.cosh(lam) * math.sin(z), np.sinh(lam) * _cos_exact(z))

    @staticmethod
    def _xxz_dphase(lam, z):
        return 2.0 * math.sin(z) * _cos_exact(z) / (np.sinh(lam) ** 2 + math.sin(z) ** 2)

    def theta(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.model == "XXZ":
            return self._xxz_phase(lam, self.param)
        return 2.0 * np.arctan(lam / self.param)

    def dtheta(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.model == "XXZ":
            return self._xxz_dphase(lam, self.param)
        c = self.param
        return 2.0 * c / (c * c + lam * lam)

    def p0(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.model == "XXZ":
            return self._xxz_phase(lam, self.param / 2)
        return lam.copy()

    def dp0(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.model == "XXZ":
            return self._xxz_dphase(lam, self.param / 2)
        return np.ones_like(lam)

    def to_dict(self) -> dict:
        key = "zeta" if self.model == "XXZ" else "c"
        return {"model": self.model, key: self.param, "upsilon": self.upsilon}


class _Nystrom:
    """Gauss-Legendre discretisation of f - upsilon int_{-q}^{q} theta'(l - m) f(m) dm / 2pi = g."""

    def __init__(self, kernel: ModelKernel, q: float, n_nodes: int):
        if n_nodes < 16:
            raise ValueError("n_nodes must be >= 16")
        if not q > 0:
            raise ValueError("q must be positive")
        self.kernel, self.q = kernel, float(q)
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        self.nodes, self.weights = q * x, q * w
        K = kernel.dtheta(self.nodes[:, None] - self.nodes[None, :]) / (2 * math.pi)
        self.A = np.eye(n_nodes) - kernel.upsilon * K * self.weights[None, :]
        cond = np.linalg.cond(self.A)
        if not cond < COND_LIMIT:
            raise IllConditionedOperatorError(f"condition number {cond:.3e} at q={q}")

    def solve(self, g: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.A, g)

    def extend(self, f: np.ndarray, g_at: Callable, lam) -> np.ndarray:
        """Nystrom interpolation f(lam) = g(lam) + upsilon sum_j theta'(lam - x_j) w_j f_j / 2pi."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        K = self.kernel.dtheta(lam[:, None] - self.nodes[None, :]) / (2 * math.pi)
        return g_at(lam) + self.kernel.upsilon * (K * self.weights[None, :]) @ f


@dataclass(frozen=True)
class DressedCharge:
    nodes: np.ndarray
    values: np.ndarray
    Z_q: float
    Z_minus_q: float


def solve_dressed_charge(kernel: ModelKernel, q: float, n_nodes: int = DEFAULT_NODES) -> DressedCharge:
    """Z - upsilon int theta' Z / 2pi = 1 on [-q, q]."""
    ny = _Nystrom(kernel, q, n_nodes)
    one = lambda lam: np.ones_like(lam)
    Z = ny.solve(np.ones(n_nodes))
    zq, zmq = ny.extend(Z, one, [q, -q])
    return DressedCharge(ny.nodes, Z, float(zq), float(zmq))


def _phase_source(kernel: ModelKernel, source: float):
    return lambda lam: kernel.theta(np.asarray(lam) - source) / (2 * math.pi)


def solve_dressed_phase(kernel: ModelKernel, q: float, n_nodes: int = DEFAULT_NODES,
                        source_point: float = 0.0):
    """phi(., nu) - upsilon int theta' phi / 2pi = theta(. - nu) / 2pi; returns (nodes, values, evaluator)."""
    ny = _Nystrom(kernel, q, n_nodes)
    g = _phase_source(kernel, source_point)
    phi = ny.solve(g(ny.nodes))
    return ny.nodes, phi, (lambda lam: ny.extend(phi, g, lam))


def solve_dressed_momentum(kernel: ModelKernel, q: float, n_nodes: int = DEFAULT_NODES):
    """Odd solution of p - upsilon int theta(. - m) p'(m) dm / 2pi = p0.

    The derivative p' solves the Lieb equation with source p0'; p itself then
    follows by one quadrature. Returns (nodes, p, p', p_F).
    """
    ny = _Nystrom(kernel, q, n_nodes)
    dp = ny.solve(kernel.dp0(ny.nodes))

    def p_at(lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        T = kernel.theta(lam[:, None] - ny.nodes[None, :]) / (2 * math.pi)
        return kernel.p0(lam) + kernel.upsilon * (T * ny.weights[None, :]) @ dp

    p = p_at(ny.nodes)
    p_F = float(p_at([q])[0])
    return ny.nodes, p, dp, p_F


@dataclass(frozen=True)
class DressedFunctions:
    """All dressed quantities on one Gauss-Legendre grid."""

    kernel: ModelKernel
    q: float
    nodes: np.ndarray
    weights: np.ndarray
    Z: np.ndarray
    phi_q_plus: np.ndarray
    phi_q_minus: np.ndarray
    p: np.ndarray
    p_F: float
    Z_q: float
    Z_minus_q: float
    phi_endpoints: dict
    _ny: _Nystrom = field(repr=False, compare=False)

    def phi(self, source: float) -> np.ndarray:
        """phi(nodes, source) for an arbitrary source rapidity."""
        return self._ny.solve(_phase_source(self.kernel, source)(self.nodes))

    def phi_at(self, lam, source: float) -> np.ndarray:
        g = _phase_source(self.kernel, source)
        return self._ny.extend(self.phi(source), g, lam)

    def Z_at(self, lam) -> np.ndarray:
        return self._ny.extend(self.Z, lambda x: np.ones_like(x), lam)

    def summary(self) -> dict:
        out = self.kernel.to_dict()
        out.update({"q": self.q, "n_nodes": len(self.nodes), "Z_q": self.Z_q, "p_F": self.p_F})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "weight", "Z", "p", "phi_q", "phi_minus_q"])
        for row in zip(self.nodes, self.weights, self.Z, self.p, self.phi_q_plus, self.phi_q_minus):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def solve_all(kernel: ModelKernel, q: float, n_nodes: int = DEFAULT_NODES) -> DressedFunctions:
    ny = _Nystrom(kernel, q, n_nodes)
    one = lambda lam: np.ones_like(lam)
    Z = ny.solve(np.ones(n_nodes))
    zq, zmq = ny.extend(Z, one, [q, -q])
    g_plus, g_minus = _phase_source(kernel, q), _phase_source(kernel, -q)
    phi_p = ny.solve(g_plus(ny.nodes))
    phi_m = ny.solve(g_minus(ny.nodes))
    ends_p = ny.extend(phi_p, g_plus, [q, -q])
    ends_m = ny.extend(phi_m, g_minus, [q, -q])
    nodes, p, _, p_F = solve_dressed_momentum(kernel, q, n_nodes)
    return DressedFunctions(
        kernel=kernel, q=float(q), nodes=ny.nodes, weights=ny.weights, Z=Z,
        phi_q_plus=phi_p, phi_q_minus=phi_m, p=p, p_F=p_F,
        Z_q=float(zq), Z_minus_q=float(zmq),
        phi_endpoints={
            "phi(q,q)": float(ends_p[0]), "phi(-q,q)": float(ends_p[1]),
            "phi(q,-q)": float(ends_m[0]), "phi(-q,-q)": float(ends_m[1]),
        },
        _ny=ny,
    )


def shift_function(dressed: DressedFunctions, o_bar: int, particle_rapidities: Sequence[float] = (),
                   hole_rapidities: Sequence[float] = ()) -> np.ndarray:
    """F = -o_bar (Z/2 + upsilon phi(., q)) - upsilon sum [phi(., mu_p) - phi(., mu_h)] on the grid."""
    q = dressed.q
    if any(abs(h) > q for h in hole_rapidities):
        raise ValueError("hole rapidities must lie in [-q, q]")
    ups = dressed.kernel.upsilon
    F = -o_bar * (dressed.Z / 2 + ups * dressed.phi_q_plus)
    for mu in particle_rapidities:
        F = F - ups * dressed.phi(mu)
    for mu in hole_rapidities:
        F = F + ups * dressed.phi(mu)
    return F


def relative_shift_at(dressed: DressedFunctions, o_s: int, ell_prev: int, ell_s: int, lam) -> np.ndarray:
    """nu_s(lam) = o_s (Z/2 + upsilon phi(lam, q)) + (l_{s-1} - l_s)(Z - 1)."""
    ups = dressed.kernel.upsilon
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    Z = dressed.Z_at(lam)
    phi = dressed.phi_at(lam, dressed.q)
    return o_s * (Z / 2 + ups * phi) + (ell_prev - ell_s) * (Z - 1)


def relative_shift(dressed: DressedFunctions, o_s: int, ell_prev: int, ell_s: int) -> tuple[float, float]:
    """(nu_s(q) - o_s, nu_s(-q))."""
    q = dressed.q
    up, um = relative_shift_at(dressed, o_s, ell_prev, ell_s, [q, -q])
    return float(up) - o_s, float(um)


def critical_exponents(Z_q: float, kappa: int, o_s: int) -> tuple[float, float]:
    """theta^{+/-} = kappa Z(q) -/+ o_s / (2 Z(q))."""
    if Z_q == 0:
        raise ValueError("Z_q must be nonzero")
    return kappa * Z_q - o_s / (2 * Z_q), kappa * Z_q + o_s / (2 * Z_q)


def endpoint_identities(dressed: DressedFunctions) -> dict:
    """Residuals of the two endpoint relations tying phi(+-q, q) to Z(q).

    They are exactly what makes nu_s^{+/-} + kappa_s coincide with the
    closed-form exponents theta^{+/-}(kappa).
    """
    ups = dressed.kernel.upsilon
    Z = dressed.Z_q
    a = dressed.phi_endpoints["phi(q,q)"]
    b = dressed.phi_endpoints["phi(-q,q)"]
    return {
        "difference": ups * (a - b) - (1 - 1 / Z),
        "sum": Z + ups * (a + b) - 1,
    }
