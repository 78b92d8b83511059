"""Batch driver: run verification suites on a model and stream JSON-lines records.

Configuration is layered: built-in defaults, then a JSON config file
(``--config``), then ``CONTACTLAB_*`` environment variables, then flags.
Exit status is 0 when every checked family passes, 1 on any violation and
2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import calculus, integrals, jets, spectral
from .connection import TOL_POINT, geometry_tables, structure_residuals
from .geometry import build_frame, make_model, verify_contact_axioms
from .jets import EXACT, FLOAT

SUITES = ("axioms", "structure", "commutation", "bochner", "integrals", "spectral")
VERB_SUITES = {
    "verify": ("axioms", "structure", "commutation", "bochner"),
    "bochner": ("bochner",),
    "integrals": ("integrals",),
    "spectral": ("spectral",),
}
ABLATE_FLAGS = {"drop-q-terms": "q-terms", "drop-torsion-terms": "torsion-terms"}
CSV_COLUMNS = ("suite", "family", "model", "n", "trials", "max_residual", "tolerance", "pass")
ENV_PREFIX = "CONTACTLAB_"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "heisenberg"
    n: int = 2
    eps: str = "1/10"
    mode: str = "auto"
    jet_order: int = 3
    poly_degree: int = 3
    quad_order: int = 7
    envelope: float = 0.5
    degree: int = 3
    points: int = 10
    trials: int = 5
    samples: int = 200
    seed: int = 0
    tol_point: float = TOL_POINT
    tol_int: float = integrals.TOL_INT
    tol_spec: float = spectral.TOL_SPEC
    tol_eq: float = spectral.TOL_EQ
    suites: list = field(default_factory=list)
    ablate: list = field(default_factory=list)
    out: str | None = None
    csv: str | None = None
    timing: bool = False

    def resolved_mode(self) -> str:
        if self.mode == "auto":
            return FLOAT if self.model == "sphere" else EXACT
        return self.mode


def _coerce(name: str, raw):
    default = getattr(RunConfig(), name)
    if isinstance(default, bool):
        if isinstance(raw, str):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return bool(raw)
    if isinstance(default, list):
        if isinstance(raw, str):
            return [s.strip() for s in raw.split(",") if s.strip()]
        return list(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return None if raw is None else str(raw)


def load_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    names = [f.name for f in dataclasses.fields(RunConfig)]
    cfg = RunConfig()
    path = getattr(args, "config", None) or environ.get(ENV_PREFIX + "CONFIG")
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, _coerce(k, v))
    for k in names:
        env = environ.get(ENV_PREFIX + k.upper())
        if env is not None:
            setattr(cfg, k, _coerce(k, env))
    for k in names:
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, _coerce(k, v))
    if not cfg.suites and getattr(args, "suites", None) is None:
        cfg.suites = list(VERB_SUITES.get(args.verb, ()))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.model not in ("heisenberg", "perturbed_heisenberg", "sphere"):
        raise ConfigError(f"unknown model {cfg.model!r}")
    if cfg.mode not in ("auto", EXACT, FLOAT):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.model == "sphere" and cfg.resolved_mode() == EXACT:
        raise ConfigError("the sphere model is analytic; exact mode needs a polynomial model")
    if not cfg.suites:
        raise ConfigError("empty suite selection")
    bad = [s for s in cfg.suites if s not in SUITES]
    if bad:
        raise ConfigError(f"unknown suites {bad}")
    bad = [a for a in cfg.ablate if a not in ABLATE_FLAGS]
    if bad:
        raise ConfigError(f"unknown ablation {bad}; choose from {sorted(ABLATE_FLAGS)}")
    if cfg.n < 1 or (cfg.model == "sphere" and cfg.n < 2):
        raise ConfigError("n must be >= 1 (>= 2 for the sphere)")
    if "spectral" in cfg.suites and cfg.n < 2:
        raise ConfigError("the spectral suite needs n >= 2")
    if cfg.jet_order < 3:
        raise ConfigError("jet order must be >= 3")
    if cfg.points < 1 or cfg.trials < 1 or cfg.samples < 1 or cfg.degree < 1:
        raise ConfigError("points, trials, samples and degree must be positive")
    try:
        Fraction(cfg.eps)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad eps {cfg.eps!r}") from exc


# ---------------------------------------------------------------------------
# records

class Recorder:
    """Serializes records through one writer, in emission order."""

    def __init__(self, cfg: RunConfig, stream):
        self.cfg, self.stream, self.records = cfg, stream, []

    def emit(self, suite, family, residual=None, tolerance=None, trial=0, status=None,
             provenance=None, exact=False, wall=None, **extra):
        res = None if residual is None else float(residual)
        if status is None:
            ok = (residual == 0) if exact else (res <= tolerance)
            status = "PASS" if ok else "FAIL"
        rec = {"suite": suite, "family": family, "model": self.cfg.model, "n": self.cfg.n,
               "mode": self.cfg.resolved_mode(), "trial": trial, "residual": res,
               "exact_zero": (residual == 0) if exact else None,
               "tolerance": 0.0 if exact else tolerance, "pass": status == "PASS", "status": status,
               "provenance": provenance or {}}
        rec.update(extra)
        if self.cfg.timing and wall is not None:
            rec["wall_time"] = round(wall, 3)
        self.records.append(rec)
        self.stream.write(json.dumps(rec, sort_keys=True) + "\n")
        self.stream.flush()

    def not_applicable(self, suite, reason):
        self.emit(suite, "*", status="NOT-APPLICABLE", reason=reason)


def _eps(cfg: RunConfig):
    e = Fraction(cfg.eps)
    return e if cfg.resolved_mode() == EXACT else float(e)


def _model(cfg: RunConfig):
    return make_model(cfg.model, cfg.n, _eps(cfg))


def _test_field(model, rng, mode, degree):
    if model.name == "sphere":
        N = 2 * model.n + 2
        coeffs = {a: float(rng.integers(-4, 5)) / int(rng.integers(1, 4)) for a in jets.monomials(N, degree)}
        return calculus.ambient_polynomial(coeffs)
    return calculus.random_polynomial(model.chart_dim, degree, rng, mode)


def _point_list(P):
    return [str(x) if not isinstance(x, float) else repr(x) for x in np.ravel(P)]


# ---------------------------------------------------------------------------
# suites

def run_axioms(cfg, model, rng, rec):
    mode = cfg.resolved_mode()
    for i, p in enumerate(model.sample_points(rng, cfg.points, mode)):
        t0 = time.perf_counter()
        res = verify_contact_axioms(model, p, mode)
        wall = time.perf_counter() - t0
        for fam, r in res.items():
            rec.emit("axioms", fam, r, cfg.tol_point, i, exact=mode == EXACT,
                     provenance={"point": _point_list(p)}, wall=wall)


def run_structure(cfg, model, rng, rec):
    mode = cfg.resolved_mode()
    for i, p in enumerate(model.sample_points(rng, cfg.points, mode)):
        t0 = time.perf_counter()
        tb = geometry_tables(build_frame(model, p, cfg.jet_order, mode), check=False)
        res = structure_residuals(tb)
        wall = time.perf_counter() - t0
        for fam, r in res.items():
            rec.emit("structure", fam, r, cfg.tol_point, i, exact=mode == EXACT,
                     provenance={"point": _point_list(p)}, wall=wall)


def _frames(cfg, model, rng):
    mode = cfg.resolved_mode()
    P = model.sample_points(rng, cfg.points, mode)
    fr = build_frame(model, P, cfg.jet_order, mode)
    return fr, geometry_tables(fr, check=False)


def run_commutation(cfg, model, rng, rec, geo=None):
    mode = cfg.resolved_mode()
    fr, tb = geo or _frames(cfg, model, rng)
    ablate = frozenset(ABLATE_FLAGS[a] for a in cfg.ablate)
    for t in range(cfg.trials):
        u = _test_field(model, rng, mode, cfg.poly_degree)
        t0 = time.perf_counter()
        res = calculus.check_commutations(u, fr, tb, ablate)
        wall = time.perf_counter() - t0
        for fam, r in res.items():
            rec.emit("commutation", fam, r, cfg.tol_point, t, exact=mode == EXACT,
                     provenance={"points": cfg.points, "ablate": sorted(cfg.ablate)}, wall=wall)


def run_bochner(cfg, model, rng, rec, geo=None):
    if model.n < 2:
        rec.not_applicable("bochner", "the Bochner-type formula is certified for n >= 2")
        return
    mode = cfg.resolved_mode()
    fr, tb = geo or _frames(cfg, model, rng)
    ablate = frozenset(ABLATE_FLAGS[a] for a in cfg.ablate)
    for t in range(cfg.trials):
        u = _test_field(model, rng, mode, cfg.poly_degree)
        t0 = time.perf_counter()
        rep = calculus.bochner(u, fr, tb)
        res = calculus.bochner_families(rep, ablate)
        wall = time.perf_counter() - t0
        for fam, r in res.items():
            rec.emit("bochner", fam, r, cfg.tol_point, t, exact=mode == EXACT,
                     provenance={"points": cfg.points, "ablate": sorted(cfg.ablate)}, wall=wall)
        rec.emit("bochner", "cr-truncated", rep.residuals["cr_truncated"].max_abs(), trial=t, status="INFO",
                 provenance={"points": cfg.points, "note": "size of the Q-terms; nonzero iff they are live"})


def run_integrals(cfg, model, rng, rec):
    if model.integration_profile != "gauss_hermite_weighted":
        rec.not_applicable("integrals", "identity integrands are only set up for Gauss-Hermite "
                                        "quadrature on Heisenberg-type models")
        return
    if model.n < 2:
        rec.not_applicable("integrals", "the global identities are certified for n >= 2")
        return
    quad = integrals.QuadratureSpec(order=cfg.quad_order, weight=2 * cfg.envelope, seed=cfg.seed)
    fields_ = integrals.enveloped_fields(model, cfg.trials, rng, cfg.poly_degree, cfg.envelope)
    pairs = [(i, (i + 1) % cfg.trials) for i in range(cfg.trials)]
    t0 = time.perf_counter()
    rep = integrals.check_integral_identities(model, quad, fields_, pairs, cfg.tol_int)
    wall = time.perf_counter() - t0
    fams = dict(rep.families)
    if "drop-q-terms" in cfg.ablate:
        fams["reeb-hessian"] = rep.diagnostics["reeb-hessian-without-q"]
    prov = {"quad_order": cfg.quad_order, "envelope": cfg.envelope, "ablate": sorted(cfg.ablate)}
    for fam, vals in fams.items():
        for t, r in enumerate(vals):
            rec.emit("integrals", fam, r, cfg.tol_int, t, provenance=prov, wall=wall)
    for fam, vals in rep.diagnostics.items():
        for t, r in enumerate(vals):
            rec.emit("integrals", fam, r, cfg.tol_int, t, status="INFO", provenance=prov)


def run_spectral(cfg, model, rng, rec):
    t0 = time.perf_counter()
    rep = spectral.lichnerowicz_report(model, cfg.degree, cfg.samples, cfg.seed, cfg.tol_spec, cfg.tol_eq)
    wall = time.perf_counter() - t0
    info = rep.to_dict()
    if rep.status == "NOT-APPLICABLE":
        rec.emit("spectral", "lichnerowicz-bound", status="NOT-APPLICABLE",
                 reason="kappa <= 0 or the model is not compact", report=info)
        return
    rec.emit("spectral", "kappa-spread", rep.kappa_spread, 1e-8, provenance={"samples": cfg.samples},
             wall=wall, report=info)
    rec.emit("spectral", "lichnerowicz-bound", max(0.0, 1.0 - rep.ratio), cfg.tol_spec,
             provenance={"degree": cfg.degree}, report=info)
    rec.emit("spectral", "equality-case", abs(rep.ratio - 1.0), cfg.tol_eq,
             provenance={"degree": cfg.degree}, report=info)


def run(cfg: RunConfig, stream) -> int:
    """Execute the configured suites in dependency order; returns the exit status."""
    model = _model(cfg)
    rec = Recorder(cfg, stream)
    order = [s for s in SUITES if s in cfg.suites]
    rngs = {s: np.random.default_rng([cfg.seed, i]) for i, s in enumerate(SUITES)}
    geo = None
    for s in order:
        rng = rngs[s]
        if s == "axioms":
            run_axioms(cfg, model, rng, rec)
        elif s == "structure":
            run_structure(cfg, model, rng, rec)
        elif s in ("commutation", "bochner"):
            if geo is None:
                geo = _frames(cfg, model, np.random.default_rng([cfg.seed, 99]))
            (run_commutation if s == "commutation" else run_bochner)(cfg, model, rng, rec, geo)
        elif s == "integrals":
            run_integrals(cfg, model, rng, rec)
        else:
            run_spectral(cfg, model, rng, rec)
    summary = report_summary(rec.records)
    sys.stderr.write(pretty(summary))
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            fh.write(summary_csv(summary))
    return 1 if any(r["status"] == "FAIL" for r in rec.records) else 0


# ---------------------------------------------------------------------------
# summary

def report_summary(records) -> list:
    """One row per (suite, family, model, n): failing rows first, then by
    residual / tolerance descending, then by residual."""
    groups: dict = {}
    for r in records:
        if r["status"] == "INFO":
            continue
        key = (r["suite"], r["family"], r["model"], r["n"])
        g = groups.setdefault(key, {"trials": 0, "max_residual": None, "tolerance": r["tolerance"],
                                    "statuses": set()})
        g["trials"] += 1
        g["statuses"].add(r["status"])
        if r["residual"] is not None:
            g["max_residual"] = r["residual"] if g["max_residual"] is None else max(g["max_residual"], r["residual"])
    rows = []
    for (suite, fam, model, n), g in groups.items():
        st = g["statuses"]
        verdict = "FAIL" if "FAIL" in st else ("NOT-APPLICABLE" if st == {"NOT-APPLICABLE"} else "PASS")
        rows.append({"suite": suite, "family": fam, "model": model, "n": n, "trials": g["trials"],
                     "max_residual": g["max_residual"], "tolerance": g["tolerance"], "pass": verdict})

    def ratio(row):
        res, tol = row["max_residual"] or 0.0, row["tolerance"]
        if tol:
            return res / tol
        return float("inf") if res else 0.0
    # exact-mode rows have tolerance 0; their ties break on the residual
    rows.sort(key=lambda r: (r["pass"] != "FAIL", -ratio(r), -(r["max_residual"] or 0.0)))
    return rows


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def pretty(rows) -> str:
    lines = [f"{'suite':<12} {'family':<40} {'trials':>6} {'max_residual':>13} {'tol':>9}  verdict"]
    for r in rows:
        res = "-" if r["max_residual"] is None else f"{r['max_residual']:.3e}"
        lines.append(f"{r['suite']:<12} {r['family']:<40} {r['trials']:>6} {res:>13} "
                     f"{r['tolerance'] or 0:>9.1e}  {r['pass']}")
    return "\n".join(lines) + "\n"


def read_records(path: str) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contactlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("verify", "bochner", "integrals", "spectral"):
        p = sub.add_parser(verb)
        p.add_argument("--config")
        p.add_argument("--model", choices=["heisenberg", "perturbed_heisenberg", "sphere"])
        p.add_argument("--n", type=int)
        p.add_argument("--eps")
        p.add_argument("--mode", choices=["auto", EXACT, FLOAT])
        p.add_argument("--jet-order", dest="jet_order", type=int)
        p.add_argument("--poly-degree", dest="poly_degree", type=int)
        p.add_argument("--quad-order", dest="quad_order", type=int)
        p.add_argument("--degree", type=int)
        p.add_argument("--points", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol-point", dest="tol_point", type=float)
        p.add_argument("--tol-int", dest="tol_int", type=float)
        p.add_argument("--tol-spec", dest="tol_spec", type=float)
        p.add_argument("--tol-eq", dest="tol_eq", type=float)
        p.add_argument("--suites", help="comma-separated subset of " + ",".join(SUITES))
        p.add_argument("--ablate", help="comma-separated term sets: " + ",".join(ABLATE_FLAGS))
        p.add_argument("--out", help="JSON-lines output path (default stdout)")
        p.add_argument("--csv", help="write the CSV summary here")
        p.add_argument("--timing", action="store_const", const=True, help="add wall times to records")
    p = sub.add_parser("summary")
    p.add_argument("records", help="JSON-lines file written by a previous run")
    p.add_argument("--out", help="CSV path (default stdout)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.verb == "summary":
        try:
            records = read_records(args.records)
        except (OSError, json.JSONDecodeError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return 2
        if not records:
            sys.stderr.write("error: no records\n")
            return 2
        rows = report_summary(records)
        text = summary_csv(rows)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        sys.stderr.write(pretty(rows))
        return 1 if any(r["pass"] == "FAIL" for r in rows) else 0
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    if cfg.out:
        with open(cfg.out, "w") as fh:
            return run(cfg, fh)
    return run(cfg, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
