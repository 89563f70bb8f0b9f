"""Command-line front end: ``trimoment <module> <verb> [--flags]``.

Exit codes: 0 success, 2 validation error (bad flag, malformed file,
budget exceeded), 1 numerical failure or a failed ``verify`` criterion.

Every verb accepts ``--config FILE`` (flat ``key=value`` lines whose keys
are the verb's long flags), ``--out`` (``csv``, ``json`` or a file path
whose extension selects the format) and ``--report FILE`` (full JSON report).
Flags given on the command line win over the config file.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import re
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import densities as dn
from . import ensembles as en
from . import fluctuations as fl
from . import moments as mo
from . import paths as pa

__all__ = ["main", "run", "ExperimentConfig", "parse_config", "serialize_config", "Report", "DEFAULT_SEED"]

DEFAULT_SEED = 20240531


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration and report
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` lines; ``#`` starts a comment line."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("_", "-")
        if not key:
            raise ValidationError(f"config line {lineno}: empty key")
        if key in out:
            raise ValidationError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def serialize_config(cfg: dict[str, str]) -> str:
    return "".join(f"{k}={cfg[k]}\n" for k in sorted(cfg))


@dataclass
class ExperimentConfig:
    """A fully resolved invocation: command, flat parameters, seed and output."""

    module: str
    verb: str
    params: dict[str, str] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    output: tuple[str | None, str] = (None, "csv")

    def to_text(self) -> str:
        cfg = dict(self.params)
        cfg["seed"] = str(self.seed)
        return serialize_config(cfg)


def _version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class Report:
    command: str
    inputs: dict
    results: Any = None
    deltas: Any = None
    version: str = ""
    wall_time_s: float = 0.0

    def payload(self) -> dict:
        """Everything except timing; reproducible bit for bit."""
        return {"command": self.command, "inputs": self.inputs, "results": self.results, "deltas": self.deltas}

    def to_json(self) -> str:
        obj = {"tool": "trimoment", "version": self.version, **self.payload(), "wall_time_s": self.wall_time_s}
        return dumps(obj, indent=1)


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------


def _fmt_json_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj, indent: int | None = None) -> str:
    """JSON with floats at 17 significant digits and non-finite values as strings."""

    def enc(o, depth):
        pad = "" if indent is None else "\n" + " " * (indent * (depth + 1))
        end = "" if indent is None else "\n" + " " * (indent * depth)
        sep = "," if indent is None else ","
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _fmt_json_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, depth + 1)}" for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, depth + 1) for v in o) + "]"
            return "[" + sep.join(f"{pad}{enc(v, depth + 1)}" for v in o) + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(_to_plain(obj), 0)


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    return str(v)


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    return buf.getvalue()


@dataclass
class Table:
    header: list[str]
    rows: list[list]
    as_json: Any = None  # JSON payload, defaults to a list of row objects

    def render(self, fmt: str) -> str:
        if fmt == "json":
            payload = self.as_json
            if payload is None:
                payload = [dict(zip(self.header, r)) for r in self.rows]
            return dumps(payload, indent=1) + "\n"
        return to_csv(self.header, self.rows)


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from None


def _seq_from_json(obj, what: str, default0: float | None = None) -> list[float]:
    """A list ``[v0, v1, ...]`` or a map ``{"k": v}`` as a dense list."""
    if isinstance(obj, list):
        vals = obj
    elif isinstance(obj, dict):
        try:
            items = {int(k): v for k, v in obj.items()}
        except ValueError:
            raise ValidationError(f"{what}: keys must be integers") from None
        if not items or min(items) < 0:
            raise ValidationError(f"{what}: keys must be nonnegative integers")
        vals = [items.get(k, 0.0) for k in range(max(items) + 1)]
        if default0 is not None and 0 not in items:
            vals[0] = default0
    else:
        raise ValidationError(f"{what}: expected a JSON list or object")
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ValidationError(f"{what}: entries must be numbers") from None


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated integers, got {text!r}") from None


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"--grid expects lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"--grid expects lo:hi:n, got {text!r}") from None
    if n < 1 or not lo <= hi:
        raise ValidationError("--grid needs n >= 1 and lo <= hi")
    return np.linspace(lo, hi, n)


def _moment_sequence(args, K: int) -> mo.MomentSequence:
    if args.m_file:
        vals = _seq_from_json(_read_json(args.m_file), "--m-file", default0=1.0)
        if len(vals) < K + 1:
            vals = vals + [0.0] * (K + 1 - len(vals))
        return mo.MomentSequence(tuple(vals), args.alpha)
    if args.m == "ones":
        return mo.MomentSequence.ones(K, args.alpha)
    if args.m.startswith("bernoulli:"):
        return mo.MomentSequence.bernoulli(float(args.m.split(":", 1)[1]), K, args.alpha)
    raise ValidationError(f"--m must be 'ones' or 'bernoulli:THETA', got {args.m!r}")


def _spec_from_args(args) -> en.EnsembleSpec:
    model = args.model
    if model == "beta-hermite":
        return en.EnsembleSpec.beta_hermite(args.beta)
    if model == "power-perturbed":
        return en.EnsembleSpec.power_perturbed(args.alpha, args.epsilon, args.z_dist, args.sigma_z, args.diag_scale)
    if model == "bernoulli":
        return en.EnsembleSpec.bernoulli_scaled(args.alpha, args.theta, args.diag_scale)
    raise ValidationError(f"unknown model {model!r}")


def _budget(args) -> en.Budget:
    return en.Budget(max_n=args.max_n, max_reps=args.max_reps, max_k=args.max_k)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------


def cmd_paths_enumerate(args):
    fam, k = args.family, args.k
    if k < 1:
        raise ValidationError("--k must be >= 1")
    if fam == "gamma":
        items = pa.enumerate_gamma(k)
    elif fam == "gamma-minus":
        items = pa.enumerate_gamma_minus(k)
    elif fam == "gamma-2flat":
        items = pa.enumerate_gamma_2flat(k)
    elif fam == "band":
        if args.w is None:
            raise ValidationError("--family band requires --w")
        items = pa.enumerate_gamma_band(k, args.w)
    else:
        if args.l is None:
            raise ValidationError("--family pairs requires --l")
        items = pa.enumerate_gamma_pairs(k, args.l)
    if fam == "pairs":
        l = args.l
        header = [f"a{j}" for j in range(1, k + 2)] + [f"b{j}" for j in range(1, l + 2)]
        rows = [list(p) + list(q) for p, q in items]
        payload = [[list(p), list(q)] for p, q in items]
    else:
        header = [f"j{j}" for j in range(1, k + 2)]
        rows = [list(p) for p in items]
        payload = [list(p) for p in items]
    return Table(header, rows, payload), {"count": len(items)}, None


def cmd_moments_limit(args):
    K = args.k_max
    if K < 0:
        raise ValidationError("--k-max must be >= 0")
    ms = _moment_sequence(args, K)
    vals = mo.limit_moments(K, ms)
    rows = [[k, v] for k, v in vals.items()]
    return Table(["k", "value"], rows, {str(k): v for k, v in vals.items()}), vals, None


def cmd_moments_invert(args):
    M = _seq_from_json(_read_json(args.M_file), "--M-file", default0=1.0)
    K = args.k_max if args.k_max is not None else (len(M) - 1) - ((len(M) - 1) % 2)
    if K < 2:
        raise ValidationError("need M_k up to at least k = 2")
    if len(M) <= K:
        raise ValidationError(f"--M-file covers k <= {len(M) - 1}, need {K}")
    ms = mo.invert_system({k: M[k] for k in range(0, K + 1, 2)}, K, args.alpha)
    rows = [[k, ms[k]] for k in range(0, K + 1, 2)]
    return Table(["k", "m"], rows, {str(k): ms[k] for k in range(0, K + 1, 2)}), {"m": list(ms.values)}, None


def cmd_moments_deviation(args):
    K = args.k_max
    ms = _moment_sequence(args, K)
    if args.model == "beta-hermite":
        if args.alpha != 0.5:
            raise ValidationError("the beta-Hermite model has alpha = 0.5")
        dev = en.deviation_input_of(en.EnsembleSpec.beta_hermite(args.beta), K)
    else:
        if not args.xi_file:
            raise ValidationError("give --xi-file or --model beta-hermite")
        xi = _seq_from_json(_read_json(args.xi_file), "--xi-file", default0=0.0)
        xi = xi + [0.0] * max(0, K + 1 - len(xi))
        dev = mo.DeviationInput(args.upsilon, tuple(xi), args.sigma_d2)
    regime = mo.deviation_regime(ms.alpha, dev.upsilon)
    vals = {k: mo.first_order_deviation(k, ms, dev) for k in range(0, K + 1)}
    rows = [[k, v] for k, v in vals.items()]
    return Table(["k", "value"], rows, {str(k): v for k, v in vals.items()}), {"regime": regime, "values": vals}, None


def cmd_moments_mixed(args):
    obj = _read_json(args.table)
    if not isinstance(obj, dict) or "alphas" not in obj or "moments" not in obj:
        raise ValidationError("--table must be a JSON object with 'alphas' and 'moments'")
    table = mo.MultiMomentTable(tuple(tuple(float(v) for v in row) for row in obj["moments"]),
                                tuple(float(a) for a in obj["alphas"]))
    word = _int_list(args.word, "--word")
    val = mo.mixed_moment(word, table)
    raw = mo.mixed_path_sum(word, table)
    return (Table(["word", "value", "path_sum"], [[" ".join(map(str, word)), val, raw]],
                  {"word": word, "value": val, "path_sum": raw}), {"value": val, "path_sum": raw}, None)


def cmd_moments_band(args):
    obj = _read_json(args.spec_file)
    if not isinstance(obj, list) or not all(isinstance(d, dict) and "alpha" in d and "m" in d for d in obj):
        raise ValidationError("--spec-file must be a JSON list of {\"alpha\": a, \"m\": [...]} per offset")
    per = [(float(d["alpha"]), tuple(float(x) for x in d["m"])) for d in obj]
    w = len(per) - 1
    if w < 1:
        raise ValidationError("need at least offsets 0 and 1")
    vals = {k: mo.band_limit_moment(k, w, per) for k in range(0, args.k_max + 1)}
    return Table(["k", "value"], [[k, v] for k, v in vals.items()], {str(k): v for k, v in vals.items()}), vals, None


def _fluct_model(args, K: int):
    if args.sigma_z2 is not None and args.C_file:
        raise ValidationError("give either --sigma-z2 or --C-file, not both")
    if args.sigma_z2 is not None:
        return fl.perturbative_model(args.alpha, args.epsilon, args.sigma_z2, args.sigma_d2, K), True
    ms = _moment_sequence(args, K)
    C = None
    if args.C_file:
        obj = _read_json(args.C_file)
        table: dict[tuple[int, int], float] = {}
        if isinstance(obj, dict):
            for key, v in obj.items():
                try:
                    a, b = (int(t) for t in key.split(","))
                except ValueError:
                    raise ValidationError("--C-file keys must look like \"a,b\"") from None
                table[(a, b)] = table[(b, a)] = float(v)
        elif isinstance(obj, list):
            for a, row in enumerate(obj):
                for b, v in enumerate(row):
                    table[(a, b)] = float(v)
        else:
            raise ValidationError("--C-file must be a JSON object or nested list")

        def C(a, b):
            if (a, b) not in table:
                raise ValidationError(f"--C-file lacks C({a},{b})")
            return table[(a, b)]

    return fl.FluctuationModel(ms, args.epsilon, C, args.sigma_d2), False


def cmd_fluct_D(args):
    model, pert = _fluct_model(args, args.k + args.l)
    val = fl.cov_trace(args.k, args.l, model)
    res = {"value": val}
    row = [args.k, args.l, val]
    header = ["k", "l", "value"]
    if pert:
        with_s = fl.corollary_D(args.k, args.l, args.alpha, args.epsilon, args.sigma_z2, args.sigma_d2)
        unit = fl.corollary_D(args.k, args.l, args.alpha, args.epsilon, 1.0, 1.0 if args.sigma_d2 else 0.0)
        res.update(corollary=with_s, corollary_unit_variance=unit)
        row += [with_s, unit]
        header += ["corollary", "corollary_unit_variance"]
    return Table(header, [row], res), res, None


def cmd_fluct_sigma(args):
    coeffs = _float_list(args.poly, "--poly")
    model, _ = _fluct_model(args, 2 * max(1, len(coeffs) - 1))
    val = fl.sigma_poly(coeffs, model)
    return Table(["poly", "value"], [[" ".join(_csv_cell(c) for c in coeffs), val]],
                 {"poly": coeffs, "value": val}), {"value": val}, None


def cmd_fluct_matrix(args):
    ks = _int_list(args.ks, "--ks")
    model, _ = _fluct_model(args, 2 * max(ks))
    D = fl.cov_matrix(ks, model)
    rows = [[k, l, D[i, j]] for i, k in enumerate(ks) for j, l in enumerate(ks)]
    return Table(["k", "l", "value"], rows, {"ks": ks, "D": D}), {"D": D}, None


def _measure(args) -> dn.SpectralMeasure:
    if args.law == "ullman":
        return dn.ullman_measure(args.alpha)
    if args.theta is None:
        raise ValidationError("--law bernoulli requires --theta")
    return dn.bernoulli_measure(args.theta, args.alpha, args.n_max, args.tail_closure)


def cmd_density_eval(args):
    x = _grid(args.grid)
    mu = _measure(args)
    pdf = mu.pdf(x)
    info = {"atoms": [list(a) for a in mu.atoms], "truncation_error": mu.truncation_error}
    return Table(["x", "pdf"], [[a, b] for a, b in zip(x, pdf)], {"x": x, "pdf": pdf, **info}), info, None


def cmd_density_sample(args):
    if args.n < 1:
        raise ValidationError("--n must be >= 1")
    rng = np.random.default_rng(args.seed)
    xs = dn.ullman_sample(args.alpha, rng, args.n)
    return Table(["x"], [[v] for v in xs], {"samples": xs}), {"n": args.n}, None


def cmd_density_moments(args):
    mu = _measure(args)
    K = args.k_max
    if args.law == "ullman":
        ms = mo.MomentSequence.ones(K, args.alpha)
    else:
        ms = mo.MomentSequence.bernoulli(args.theta, K, args.alpha)
    rows, deltas = [], {}
    for k in range(K + 1):
        q = dn.measure_moment(mu, k)
        p = mo.limit_moment(k, ms)
        rows.append([k, q, p, q - p])
        deltas[k] = q - p
    return Table(["k", "quadrature", "predicted", "delta"], rows), {"truncation_error": mu.truncation_error}, deltas


def _mc_table(ks, mean, se, pred):
    rows, deltas = [], {}
    for k, m, s, p in zip(ks, mean, se, pred):
        z = (m - p) / s if s > 0 else (0.0 if m == p else math.inf)
        rows.append([k, m, s, p, z])
        deltas[k] = m - p
    return Table(["k", "estimate", "stderr", "predicted", "z_score"], rows), deltas


def cmd_sim_moments(args):
    spec = _spec_from_args(args)
    res = en.mc_moments(spec, args.n, args.k_max, args.reps, args.seed, args.threads, _budget(args))
    ms = en.limit_moments_of(spec, args.k_max)
    pred = [mo.limit_moment(k, ms) for k in res.ks]
    table, deltas = _mc_table(res.ks, res.mean, res.stderr, pred)
    return table, {"mean": res.mean, "stderr": res.stderr, "predicted": pred}, deltas


def cmd_sim_fluct(args):
    spec = _spec_from_args(args)
    ks = _int_list(args.ks, "--ks")
    res = en.mc_fluctuations(spec, args.n, ks, args.reps, args.seed, args.threads, _budget(args))
    D = fl.cov_matrix(ks, en.fluctuation_model_of(spec, 2 * max(ks) + 2))
    rows, deltas = [], {}
    for i, k in enumerate(ks):
        for j, l in enumerate(ks):
            if j < i:
                continue
            se = math.sqrt((res.cov[i, i] * res.cov[j, j] + res.cov[i, j] ** 2) / args.reps)
            z = (res.cov[i, j] - D[i, j]) / se if se > 0 else 0.0
            rows.append([k, l, res.cov[i, j], se, D[i, j], z])
            deltas[f"{k},{l}"] = res.cov[i, j] - D[i, j]
    results = {"cov": res.cov, "predicted": D, "skewness": res.skewness, "excess_kurtosis": res.excess_kurtosis}
    return Table(["k", "l", "estimate", "stderr", "predicted", "z_score"], rows), results, deltas


def cmd_sim_band(args):
    per = [en.BandDiagonalSpec(args.alpha, args.family, args.beta)] * (args.w + 1)
    res = en.mc_band_moments(per, args.n, args.w, args.k_max, args.reps, args.seed, args.threads, _budget(args))
    mlist = [(s.alpha, s.limit_moments(args.k_max)) for s in per]
    pred = [mo.band_limit_moment(k, args.w, mlist) for k in res.ks]
    table, deltas = _mc_table(res.ks, res.mean, res.stderr, pred)
    return table, {"mean": res.mean, "stderr": res.stderr, "predicted": pred}, deltas


def cmd_sim_export(args):
    spec = _spec_from_args(args)
    _budget(args).check(n=args.n)
    T = en.sample(spec, args.n, np.random.default_rng(args.seed))
    payload = {"diag": T.diag, "offdiag": T.offdiag}
    rows = [[i + 1, T.diag[i], T.offdiag[i] if i < T.n - 1 else ""] for i in range(T.n)]
    return Table(["i", "d_i", "b_i"], rows, payload), payload, None


def cmd_verify(args):
    from .acceptance import CRITERIA, run_all

    only = _int_list(args.only, "--only") if args.only else None
    if only and any(i not in CRITERIA for i in only):
        raise ValidationError(f"--only: criteria are numbered {min(CRITERIA)}..{max(CRITERIA)}")
    results = run_all(args.scale, only=only, threads=args.threads)
    stream = sys.stderr if args.quiet else (getattr(args, "_stdout", None) or sys.stdout)
    for r in results:
        print(r.line(), file=stream)
        for c in r.failures():
            print(f"    {c.name}: value={c.value:.12g} target={c.target:.12g} delta={c.delta:.6g} tol={c.tol:.3g}"
                  + (f"  ({c.note})" if c.note else ""), file=stream)
    rows = [[r.id, "pass" if r.passed else "fail", r.title, len(r.failures()), r.seconds] for r in results]
    table = Table(["criterion", "status", "title", "failed_checks", "seconds"], rows,
                  [r.to_dict() for r in results])
    failed = [r.id for r in results if not r.passed]
    deltas = {str(r.id): [dict(name=c.name, delta=c.delta, tol=c.tol) for c in r.failures()] for r in results}
    out = {"criteria": [r.to_dict() for r in results], "failed": failed}
    if failed:
        raise _VerifyFailed(table, out, deltas)
    return None if not args.table else table, out, deltas


class _VerifyFailed(Exception):
    def __init__(self, table, results, deltas):
        super().__init__("criteria failed")
        self.table, self.results, self.deltas = table, results, deltas


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, seed: bool = False) -> None:
    p.add_argument("--config", help="flat key=value file; keys are this verb's long flags")
    p.add_argument("--out", default="csv", help="csv, json, or an output path (.json selects JSON)")
    p.add_argument("--report", help="write the full JSON report here")
    if seed:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")


def _moment_flags(p, alpha_default: float = 0.5) -> None:
    p.add_argument("--alpha", type=float, default=alpha_default)
    p.add_argument("--m", default="ones", help="'ones' or 'bernoulli:THETA'")
    p.add_argument("--m-file", help="JSON list [m0, m1, ...] or map {k: m_k}")


def _model_flags(p) -> None:
    p.add_argument("--model", choices=["beta-hermite", "power-perturbed", "bernoulli"], default="beta-hermite")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--z-dist", choices=["normal", "rademacher", "zero"], default="normal")
    p.add_argument("--sigma-z", type=float, default=1.0)
    p.add_argument("--diag-scale", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=None, help="worker cap (also TRIMOMENT_THREADS)")
    p.add_argument("--max-n", type=int, default=en.DEFAULT_BUDGET.max_n)
    p.add_argument("--max-reps", type=int, default=en.DEFAULT_BUDGET.max_reps)
    p.add_argument("--max-k", type=int, default=en.DEFAULT_BUDGET.max_k)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="trimoment", description=__doc__.splitlines()[0])
    root.add_argument("--version", action="version", version=f"trimoment {__version__}")
    mods = root.add_subparsers(dest="module", required=True, parser_class=_Parser)

    # paths
    m = mods.add_parser("paths", help="enumerate lattice path families")
    v = m.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = v.add_parser("enumerate")
    p.add_argument("--family", choices=["gamma", "gamma-minus", "gamma-2flat", "pairs", "band"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int)
    p.add_argument("--w", type=int)
    _common(p)
    p.set_defaults(func=cmd_paths_enumerate)

    # moments
    m = mods.add_parser("moments", help="limit moments, inversion, deviations, mixed and band moments")
    v = m.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = v.add_parser("limit")
    p.add_argument("--k-max", type=int, required=True)
    _moment_flags(p)
    _common(p)
    p.set_defaults(func=cmd_moments_limit)
    p = v.add_parser("invert")
    p.add_argument("--M-file", dest="M_file", required=True, help="JSON list or map of M_k = (alpha k + 1) L_k")
    p.add_argument("--k-max", type=int)
    p.add_argument("--alpha", type=float, default=0.5)
    _common(p)
    p.set_defaults(func=cmd_moments_invert)
    p = v.add_parser("deviation")
    p.add_argument("--k-max", type=int, required=True)
    _moment_flags(p)
    p.add_argument("--upsilon", type=float, default=1.0)
    p.add_argument("--xi-file", help="JSON list or map of xi_k")
    p.add_argument("--sigma-d2", type=float, default=0.0)
    p.add_argument("--model", choices=["beta-hermite"], help="use tabulated model inputs")
    p.add_argument("--beta", type=float, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_moments_deviation)
    p = v.add_parser("mixed")
    p.add_argument("--word", required=True, help='comma-separated colors, e.g. "1,2,1,2"')
    p.add_argument("--table", required=True, help='JSON {"alphas": [...], "moments": [[...], ...]}')
    _common(p)
    p.set_defaults(func=cmd_moments_mixed)
    p = v.add_parser("band")
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--spec-file", required=True, help='JSON [{"alpha": a_v, "m": [...]}, ...] for v = 0..w')
    _common(p)
    p.set_defaults(func=cmd_moments_band)

    # fluctuations
    m = mods.add_parser("fluct", help="limiting covariances of traces")
    v = m.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name, func in (("D", cmd_fluct_D), ("sigma", cmd_fluct_sigma), ("matrix", cmd_fluct_matrix)):
        p = v.add_parser(name)
        if name == "D":
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--l", type=int, required=True)
        elif name == "sigma":
            p.add_argument("--poly", required=True, help='coefficients w_0,w_1,... of P(x)')
        else:
            p.add_argument("--ks", required=True, help='comma-separated powers')
        _moment_flags(p)
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--sigma-z2", type=float)
        p.add_argument("--C-file", dest="C_file")
        p.add_argument("--sigma-d2", type=float, default=0.0)
        _common(p)
        p.set_defaults(func=func)

    # densities
    m = mods.add_parser("density", help="limiting spectral laws")
    v = m.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name, func in (("eval", cmd_density_eval), ("moments", cmd_density_moments)):
        p = v.add_parser(name)
        p.add_argument("--law", choices=["ullman", "bernoulli"], default="ullman")
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--theta", type=float)
        p.add_argument("--n-max", type=int)
        p.add_argument("--tail-closure", action="store_true")
        if name == "eval":
            p.add_argument("--grid", default="-2:2:401", help="lo:hi:n")
        else:
            p.add_argument("--k-max", type=int, default=8)
        _common(p)
        p.set_defaults(func=func)
    p = v.add_parser("sample")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    _common(p, seed=True)
    p.set_defaults(func=cmd_density_sample)

    # simulation
    m = mods.add_parser("sim", help="Monte Carlo experiments")
    v = m.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    p = v.add_parser("moments")
    _model_flags(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--reps", type=int, default=200)
    _common(p, seed=True)
    p.set_defaults(func=cmd_sim_moments)
    p = v.add_parser("fluct")
    _model_flags(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--ks", default="2,3,4")
    p.add_argument("--reps", type=int, default=2000)
    _common(p, seed=True)
    p.set_defaults(func=cmd_sim_fluct)
    p = v.add_parser("band")
    p.add_argument("--w", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--family", choices=["chi", "const", "normal", "zero"], default="chi")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--max-n", type=int, default=en.DEFAULT_BUDGET.max_n)
    p.add_argument("--max-reps", type=int, default=en.DEFAULT_BUDGET.max_reps)
    p.add_argument("--max-k", type=int, default=en.DEFAULT_BUDGET.max_k)
    _common(p, seed=True)
    p.set_defaults(func=cmd_sim_band)
    p = v.add_parser("export")
    _model_flags(p)
    p.add_argument("--n", type=int, default=10)
    _common(p, seed=True)
    p.set_defaults(func=cmd_sim_export)

    # verify
    m = mods.add_parser("verify", help="run the acceptance suite")
    m.add_argument("--scale", choices=["quick", "default"], default="default")
    m.add_argument("--only", help="comma-separated criterion ids")
    m.add_argument("--threads", type=int, default=None)
    m.add_argument("--table", action="store_true", help="also emit the summary table")
    m.add_argument("--quiet", action="store_true", help="send per-criterion lines to stderr")
    _common(m)
    m.set_defaults(func=cmd_verify, verb="run")
    return root


def _subparser(root: argparse.ArgumentParser, module: str, verb: str) -> argparse.ArgumentParser:
    def children(p):
        for a in p._actions:
            if isinstance(a, argparse._SubParsersAction):
                return a.choices
        return {}

    mod = children(root)[module]
    sub = children(mod)
    return sub[verb] if sub else mod


_RESERVED = {"config", "help", "version"}


def _config_path(argv: Sequence[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _inject_config(argv: list[str], root: argparse.ArgumentParser) -> tuple[list[str], dict[str, str]]:
    """Splice config entries in as flags right after ``<module> <verb>``.

    argparse keeps the last occurrence of a flag, so explicit command-line
    flags override the file.
    """
    path = _config_path(argv)
    if path is None:
        return argv, {}
    npos = 0
    while npos < len(argv) and not argv[npos].startswith("-") and npos < 2:
        npos += 1
    try:
        module = argv[0]
        sub = _subparser(root, module, argv[1] if module != "verify" and npos > 1 else "")
    except (IndexError, KeyError):
        return argv, {}  # let argparse report the bad command
    if module == "verify":
        npos = 1
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text)
    by_flag = {s[2:]: a for a in sub._actions for s in a.option_strings if s.startswith("--")}
    tokens = []
    for key, raw in cfg.items():
        action = by_flag.get(key)
        if action is None or key in _RESERVED:
            raise ValidationError(f"unknown config key {key!r} for this command")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValidationError(f"config key {key!r} expects a boolean")
            if low in ("true", "1", "yes"):
                tokens.append(f"--{key}")
        else:
            tokens.append(f"--{key}={raw}")
    return argv[:npos] + tokens + argv[npos:], cfg


def _resolve_output(out: str) -> tuple[str | None, str]:
    if out in ("csv", "json"):
        return None, out
    return out, ("json" if out.lower().endswith(".json") else "csv")


def _inputs_echo(args) -> dict:
    skip = {"func", "config", "report", "_stdout"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-2:2:5" as an option; glue such values to their flag
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEG.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


_NEG = re.compile(r"^-[0-9.]")


def run(argv: Sequence[str] | None = None, stdout=None) -> tuple[int, Report | None]:
    """Parse, dispatch and emit.  Returns the exit code and the report."""
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    stdout = stdout or sys.stdout
    t0 = time.perf_counter()
    parser = build_parser()
    try:
        argv, _ = _inject_config(argv, parser)
        args = parser.parse_args(argv)
        args._stdout = stdout
        path, fmt = _resolve_output(args.out)
        report = Report(f"{args.module} {args.verb}", _inputs_echo(args), version=_version())
        code = 0
        try:
            table, results, deltas = args.func(args)
        except _VerifyFailed as exc:
            table, results, deltas, code = (exc.table if args.table else None), exc.results, exc.deltas, 1
        report.results, report.deltas = results, deltas
        if table is not None:
            text = table.render(fmt)
            if path:
                Path(path).write_text(text)
            else:
                stdout.write(text)
        report.wall_time_s = time.perf_counter() - t0
        if args.report:
            Path(args.report).write_text(report.to_json() + "\n")
        return code, report
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0), None
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"trimoment: numerical failure: {exc}", file=sys.stderr)
        return 1, None
    except (ValueError, OSError, KeyError) as exc:
        print(f"trimoment: error: {exc}", file=sys.stderr)
        return 2, None


def main(argv: Sequence[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
