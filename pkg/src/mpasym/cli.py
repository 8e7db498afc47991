"""Batch command-line interface: identity checks, Toeplitz studies, dressed solves, multipoint terms."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from typing import Callable

import numpy as np

from . import __version__
from .asympt import (
    MultipointSpec,
    assemble_terms_finiteL,
    assemble_terms_infiniteL,
    conformal_leading,
    xxz_xxxx_general,
    xxz_xxxx_leading,
)
from .bethe import ModelKernel, solve_all
from .excitations import CriticalClassVector, ShiftParams
from .fisher_hartwig import ToeplitzSpec, kappa_maximizer, sequence_records
from .restricted_sum import TruncationPolicy, identity_residual, random_shifts

SCHEMA_VERSION = 1
EXIT_OK, EXIT_THRESHOLD, EXIT_VALIDATION = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or out-of-range configuration value."""


# ---------------------------------------------------------------- config parsing

def read_config(path: str | None, overrides: list[str]) -> dict[str, str]:
    """Flat ``key = value`` file plus ``--set key=value`` overrides; later entries win."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    text = ""
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    cfg = dict(cp["run"])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def _list(cfg, key, conv: Callable, default=None):
    raw = cfg.get(key)
    if raw is None or raw == "":
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return list(default)
    try:
        return [conv(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _scalar(cfg, key, conv: Callable, default=None):
    raw = cfg.get(key)
    if raw is None or raw == "":
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _cplx(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _pair(z: complex) -> list[float]:
    return [z.real, z.imag]


# ---------------------------------------------------------------- output

def _flatten(rec: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def render(doc: dict, fmt: str) -> str:
    """JSON document, or CSV of its ``records`` list (metadata as leading comment lines)."""
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    meta = {k: v for k, v in doc.items() if k != "records"}
    for k in sorted(meta):
        buf.write(f"# {k}: {json.dumps(meta[k], sort_keys=True)}\n")
    rows = [_flatten(r) for r in doc.get("records", [])]
    cols = []
    for r in rows:
        cols.extend(c for c in r if c not in cols)
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------- commands

def cmd_identity(cfg: dict, seed: int, threads: int) -> tuple[dict, int]:
    """Restricted-sum identity residuals for one explicit case or a seeded random sweep.

    Keys: ell (comma list, r-1 entries), nu and t (comma lists of complex
    numbers), or r + sweep (number of random cases); n_max, M, tail_mode,
    delta, tail_target, threshold.
    """
    policy = TruncationPolicy(
        n_max=_scalar(cfg, "n_max", int, 4),
        M=_scalar(cfg, "M", int, 40),
        tail_mode=_scalar(cfg, "tail_mode", str, "raw"),
        delta=_scalar(cfg, "delta", float, 0.0),
    )
    tail_target = _scalar(cfg, "tail_target", float, 1e-8)
    threshold = _scalar(cfg, "threshold", float, 1e-6)
    if "nu" in cfg:
        nu = _list(cfg, "nu", _cplx)
        t = _list(cfg, "t", _cplx, [])
        ell = _list(cfg, "ell", int, [0] * (len(nu) - 1))
        cases = [(CriticalClassVector(tuple(ell)), ShiftParams(tuple(nu), tuple(t)))]
    else:
        r = _scalar(cfg, "r", int, 2)
        n = _scalar(cfg, "sweep", int, 5)
        if r < 2 or n < 1:
            raise ConfigError("need r >= 2 and sweep >= 1")
        ell = _list(cfg, "ell", int, [0] * (r - 1))
        rng = np.random.default_rng(seed)
        cases = [(CriticalClassVector(tuple(ell)), random_shifts(rng, r)) for _ in range(n)]
    for cls, sh in cases:
        if cls.r != sh.r:
            raise ConfigError(f"ell has {len(cls.ell)} entries but nu has {sh.r}")
        if policy.tail_mode == "raw" and any(v.imag <= 0 for v in sh.t):
            raise ConfigError("raw tail mode needs Im t > 0")

    def run(case):
        cls, sh = case
        rep = identity_residual(cls, sh, policy, tail_target)
        return {
            "ell": list(cls.ell),
            "nu": [_pair(v) for v in sh.nu],
            "t": [_pair(v) for v in sh.t],
            "value_plus": _pair(rep.value_plus), "closed_plus": _pair(rep.closed_plus),
            "value_minus": _pair(rep.value_minus), "closed_minus": _pair(rep.closed_minus),
            "tail_plus": rep.tail_plus, "tail_minus": rep.tail_minus,
            "residual_plus": rep.residual_plus, "residual_minus": rep.residual_minus,
            "product_residual": rep.product_residual,
            "M_plus": rep.M_plus, "M_minus": rep.M_minus,
            "pass": rep.residual <= threshold,
        }

    records = _map(run, cases, threads)
    ok = all(r["pass"] for r in records)
    doc = {"command": "identity", "policy": policy.to_dict(), "tail_target": tail_target,
           "threshold": threshold, "seed": seed, "records": records, "pass": ok}
    return doc, EXIT_OK if ok else EXIT_THRESHOLD


def cmd_toeplitz(cfg: dict, seed: int, threads: int) -> tuple[dict, int]:
    """Toeplitz model sum against its large-N asymptotics. Keys: nu, t (real), N_list, kappa."""
    nu = _list(cfg, "nu", _cplx)
    t = _list(cfg, "t", float, [])
    N_list = _list(cfg, "N_list", int, [8, 16, 24, 32, 48, 64])
    if any(N < 1 for N in N_list):
        raise ConfigError("N_list entries must be positive")
    spec = ToeplitzSpec(tuple(nu), tuple(t), N_list[0])
    kraw = cfg.get("kappa", "auto")
    kappa = kappa_maximizer(spec.nu) if kraw == "auto" else tuple(_list(cfg, "kappa", int))
    records = [r for chunk in _map(lambda N: sequence_records(spec, [N], kappa), N_list, threads)
               for r in chunk]
    doc = {"command": "toeplitz", "nu": [_pair(v) for v in spec.nu], "t": list(spec.t),
           "kappa": list(kappa), "records": records}
    return doc, EXIT_OK


def _kernel(cfg) -> ModelKernel:
    model = _scalar(cfg, "model", str, "XXZ").upper()
    if model == "XXZ":
        return ModelKernel.xxz(_scalar(cfg, "zeta", float, math.pi / 3))
    if model == "NLSM":
        return ModelKernel.nlsm(_scalar(cfg, "c", float, 1.0))
    raise ConfigError(f"unknown model {model!r}")


def cmd_dressed(cfg: dict, seed: int, threads: int) -> tuple[dict, int]:
    """Nystrom solve of Z, phi, p. Keys: model, zeta or c, q, nodes, refine, tolerance."""
    kernel = _kernel(cfg)
    q = _scalar(cfg, "q", float, 1.2)
    nodes = _scalar(cfg, "nodes", int, 64)
    d = solve_all(kernel, q, nodes)
    records = [{"lambda": float(x), "weight": float(w), "Z": float(z), "p": float(p),
                "phi_q": float(a), "phi_minus_q": float(b)}
               for x, w, z, p, a, b in zip(d.nodes, d.weights, d.Z, d.p, d.phi_q_plus, d.phi_q_minus)]
    doc = {"command": "dressed", "summary": d.summary(), "phi_endpoints": d.phi_endpoints,
           "records": records}
    code = EXIT_OK
    if _scalar(cfg, "refine", _bool, False):
        tol = _scalar(cfg, "tolerance", float, 1e-9)
        d2 = solve_all(kernel, q, 2 * nodes)
        deltas = {"Z_q": abs(d2.Z_q - d.Z_q), "p_F": abs(d2.p_F - d.p_F)}
        for k, v in d.phi_endpoints.items():
            deltas[k] = abs(d2.phi_endpoints[k] - v)
        doc["refinement"] = {"nodes": [nodes, 2 * nodes], "deltas": deltas, "tolerance": tol,
                             "pass": max(deltas.values()) <= tol}
        code = EXIT_OK if doc["refinement"]["pass"] else EXIT_THRESHOLD
    return doc, code


def _term_record(t) -> dict:
    return t.to_dict()


def cmd_multipoint(cfg: dict, seed: int, threads: int) -> tuple[dict, int]:
    """Asymptotic terms of a multipoint correlator.

    Keys: positions; levels or operator = sigma_x (four points); Z_q and p_F,
    or model parameters to solve for them; box; L for finite volume; leading
    to keep only the minimal-power group.
    """
    positions = tuple(_list(cfg, "positions", float))
    if "Z_q" in cfg:
        Z_q = _scalar(cfg, "Z_q", float)
        p_F = _scalar(cfg, "p_F", float, 1.0)
        model = None
    else:
        kernel = _kernel(cfg)
        d = solve_all(kernel, _scalar(cfg, "q", float, 1.2), _scalar(cfg, "nodes", int, 64))
        Z_q, p_F, model = d.Z_q, d.p_F, d.summary()
    box = _scalar(cfg, "box", int, 2)
    doc = {"command": "multipoint", "positions": list(positions), "Z_q": Z_q, "p_F": p_F,
           "box": box}
    if model is not None:
        doc["model"] = model
    operator = cfg.get("operator", "")
    if operator == "sigma_x":
        ap = _scalar(cfg, "amp_plus", _cplx, 1 + 0j)
        am = _scalar(cfg, "amp_minus", _cplx, 1 + 0j)
        value, per = xxz_xxxx_general(positions, Z_q, ap, am, p_F, box)
        closed = xxz_xxxx_leading(positions, Z_q, ap, am)
        pairings = {}
        for eps, grp in per.items():
            key = tuple(eps) if eps[0] > 0 else tuple(-e for e in eps)
            entry = pairings.setdefault(key, {"pairing": [i + 1 for i, e in enumerate(key) if e > 0],
                                              "exponent_sum": grp.exponent_sum,
                                              "power": grp.decay_power, "value": 0j})
            entry["value"] += grp.value()
        records = []
        for key in sorted(pairings, reverse=True):
            e = dict(pairings[key])
            e["value"] = _pair(e["value"])
            records.append(e)
        doc.update({"operator": "sigma_x", "leading_value": _pair(value),
                    "closed_form": _pair(closed), "records": records})
        return doc, EXIT_OK
    levels = tuple(_list(cfg, "levels", int))
    spec = MultipointSpec(positions, levels, p_F, Z_q)
    if "L" in cfg:
        terms = assemble_terms_finiteL(spec, box, _scalar(cfg, "L", float), threads)
    elif _scalar(cfg, "leading", _bool, False):
        terms = list(conformal_leading(spec, box).terms)
    else:
        terms = assemble_terms_infiniteL(spec, box, threads)
    doc.update({"levels": list(levels), "records": [_term_record(t) for t in terms]})
    return doc, EXIT_OK


def cmd_selftest(cfg: dict, seed: int, threads: int) -> tuple[dict, int]:
    """Fast smoke checks across all modules."""
    checks = []

    def check(name, value, tol):
        checks.append({"check": name, "value": value, "tolerance": tol, "pass": bool(value <= tol)})

    rng = np.random.default_rng(seed)
    rep = identity_residual(CriticalClassVector((0,)), random_shifts(rng, 2),
                            TruncationPolicy(4, 40), 1e-8)
    check("restricted_sum_r2", rep.residual, 1e-6)
    check("product_identity_r2", rep.product_residual, 1e-4)
    spec = ToeplitzSpec((0.2, -0.2), (2.0,), 32)
    row = sequence_records(spec, [32])[0]
    check("toeplitz_ratio_N32", abs(complex(row["ratio_re"], row["ratio_im"]) - 1), 0.05)
    d = solve_all(ModelKernel.xxz(math.pi / 2), 1.0, 32)
    check("free_fermion_Z", float(np.max(np.abs(d.Z - 1))), 0.0)
    x = tuple(rng.uniform(0, 10, 4))
    a = xxz_xxxx_leading(x, 0.9)
    b, _ = xxz_xxxx_general(x, 0.9)
    check("xxz_four_point", abs(a - b) / abs(a), 1e-10)
    ok = all(c["pass"] for c in checks)
    return {"command": "selftest", "seed": seed, "records": checks, "pass": ok}, \
        EXIT_OK if ok else EXIT_THRESHOLD


COMMANDS = {
    "identity": cmd_identity,
    "toeplitz": cmd_toeplitz,
    "dressed": cmd_dressed,
    "multipoint": cmd_multipoint,
    "selftest": cmd_selftest,
}


def example_config(name: str) -> str:
    """Text of a bundled example configuration."""
    return resources.files("mpasym").joinpath("data", name).read_text(encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpasym", description=__doc__)
    p.add_argument("--version", action="version", version=f"mpasym {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = read_config(args.config, args.set)
        doc, code = COMMANDS[args.command](cfg, args.seed, args.threads)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    text = render(doc, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
