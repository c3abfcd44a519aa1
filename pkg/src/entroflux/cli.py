"""Command line front end: CSV curves, JSON reports and run manifests.

Exit codes: 0 success, 2 invalid flags, 3 numerical failure (or a failed
verification check).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import classical as cl
from . import dynsys as ds
from . import modular as md
from . import quasifree as qf
from . import states as st
from .numerics import (DomainError, QuadratureFailure, StepSelectionFailure, is_infinite,
                       random_hermitian)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SCHEMA = "entroflux-csv/1"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None
    version: str = __version__
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or is_infinite(x) or (isinstance(x, float) and np.isinf(x)):
        return "inf" if (x is not None and x > 0) else "-inf" if x is not None else ""
    return f"{float(x):.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out, manifest: RunManifest):
    data = text.encode()
    if out is None or out == "-":
        sys.stdout.write(text)
        manifest.outputs["-"] = hashlib.sha256(data).hexdigest()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    manifest.outputs[str(path)] = hashlib.sha256(data).hexdigest()


def _write_manifest(manifest: RunManifest, out):
    if out is None or out == "-":
        return
    Path(str(out) + ".manifest.json").write_text(manifest.to_json() + "\n")


def _floats(s: str):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma separated numbers, got {s!r}") from exc


def _positive(name, *vals):
    for v in vals:
        if not v > 0:
            raise UsageError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# built-in models


def ebb2_document() -> qf.ModelDocument:
    """One-site sample between two half-infinite chains, beta = (1, 0.5), mu = 0."""
    return qf.load_model({"sample": {"chain": 1},
                          "leads": [{"beta": 1.0, "mu": 0.0}, {"beta": 0.5, "mu": 0.0}],
                          "lambda": -0.5})


def _model_document(args) -> qf.ModelDocument:
    if getattr(args, "model_file", None):
        try:
            return qf.load_model(json.loads(Path(args.model_file).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read model file: {exc}") from exc
    if args.model != "ebb2":
        raise UsageError(f"model {args.model!r} has no scattering description")
    return ebb2_document()


def _qubit_toy(seed):
    return ds.random_open_toy(np.random.default_rng(seed)).sys


def _fock_model(args):
    if args.model == "qubit-toy":
        return _qubit_toy(args.seed)
    if args.model == "xy":
        if args.size < 2 or args.size % 2 or args.size > qf.FOCK_DMAX:
            raise UsageError(f"--size must be even and at most {qf.FOCK_DMAX}")
        return qf.xy_partitioned(args.size, args.J, args.field, args.beta_l, args.beta_r).to_fock()
    if args.model == "ebb2" or args.model_file:
        doc = _model_document(args)
        return doc.build(args.lead_sites).to_fock()
    raise UsageError(f"model {args.model!r} has no finite quantum version")


# ---------------------------------------------------------------------------
# commands


def cmd_chain_sigma(args, man):
    _positive("beta", args.beta_l, args.beta_r)
    if args.dt <= 0 or args.t_max <= 0:
        raise UsageError("t-max and dt must be positive")
    cfg = _chain_config(args)
    ops = cl.chain_build(cfg)
    t = np.arange(1, int(round(args.t_max / args.dt)) + 1) * args.dt
    ep = cl.chain_mean_ep(ops, t)
    ref = cl.chain_steady(args.beta_l, args.beta_r).entropy_production
    return csv_text(["t", "mean_ep", "steady_ref"], [(a, b, ref) for a, b in zip(t, ep)])


def _chain_config(args) -> cl.ChainConfig:
    if not args.m > args.n >= 0:
        raise UsageError("need m > n >= 0")
    return cl.ChainConfig(N=args.n, M=args.m, beta=_beta(args), beta_L=args.beta_l, beta_R=args.beta_r)


def _beta(args):
    return args.beta if args.beta is not None else 2.0 / (1.0 / args.beta_l + 1.0 / args.beta_r)


def cmd_chain_eofalpha(args, man):
    _positive("beta", args.beta_l, args.beta_r)
    cfg = _chain_config(args)
    ops = cl.chain_build(cfg)
    times = _floats(args.times)
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.points)
    TL, TR = 1 / args.beta_l, 1 / args.beta_r
    rows = []
    for a in alphas:
        row = [a]
        for t in times:
            # e_t(0) = e_t(1) = 0 identically (normalization of omega and omega_t)
            row.append(0.0 if a in (0.0, 1.0) else cl.chain_et(ops, t, a) / t)
        row.append(cl.chain_e_closed(TL, TR, a))
        rows.append(row)
    return csv_text(["alpha"] + [f"e_t/t@{t:g}" for t in times] + ["e_closed"], rows)


def cmd_chain_rate(args, man):
    _positive("beta", args.beta_l, args.beta_r)
    beta = _beta(args)
    X = np.array([beta - args.beta_l, beta - args.beta_r])
    s = np.linspace(args.s_min, args.s_max, args.points)

    def rate(Xv):
        b0 = beta - 0.5 * (Xv[0] + Xv[1])
        th = np.arcsinh(s * b0 / cl.KAPPA)
        return cl.chain_rate(beta, Xv, th)[2]

    return csv_text(["s", "I_X", "I_eq"], zip(s, rate(X), rate(np.zeros(2))))


def _curve(alphas, f):
    rows = []
    for a in alphas:
        try:
            v = f(a)
            rows.append((a, v, int(np.isfinite(v))))
        except DomainError:
            rows.append((a, "inf", 0))
    return rows


def cmd_ebb_e2plus(args, man):
    doc = _model_document(args)
    sc = doc.scattering()
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.points)
    rows = _curve(alphas, lambda a: qf.ebb_e2plus(doc.leads, sc, a, p=args.p))
    return csv_text(["alpha", "e_plus", "in_domain"], rows)


def cmd_xy_eplus(args, man):
    _positive("beta", args.beta_l, args.beta_r)
    if args.J == 0:
        raise UsageError("J must be nonzero")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.points)
    rows = _curve(alphas, lambda a: qf.xy_eplus(args.beta_l, args.beta_r, args.J, args.field, a, p=args.p))
    return csv_text(["alpha", "e_plus", "in_domain"], rows)


def cmd_fcs(args, man):
    if args.t <= 0:
        raise UsageError("t must be positive")
    sysm = _fock_model(args)
    return md.fcs_spectral_measure(sysm, args.t).to_csv()


def property_suite(seed=0, n=10) -> dict:
    """Compact run of the finite-dimensional identities; returns name -> record."""
    rng = np.random.default_rng(seed)
    rep = {}

    def record(name, value, tol):
        rep[name] = {"value": float(value), "tol": tol, "pass": bool(value <= tol)}

    es = fcs = tr = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 7))
        s = ds.random_system(d, rng, tri=True)
        for p in (1.0, 2.0, 4.0, np.inf):
            for a in (0.2, 0.35):
                es = max(es, abs(ds.e_pt(s, 2.0, a, p) - ds.e_pt(s, 2.0, 1 - a, p)))
        u = ds.random_system(d, rng)
        H = u.H.entries
        w = u.omega.matrix
        Pt = md.two_time_distribution(w, H, 1.5, [-u.log_omega])
        fcs = max(fcs, Pt.total_variation(md.fcs_spectral_measure(u, -1.5).reflected()))
        tr = max(tr, md.transfer_functional_check(u, 1.0, 0.3, 2.0)[2])
    record("es_symmetry", es, 1e-10)
    record("fcs_two_time", fcs, 1e-10)
    record("transfer_operator", tr, 1e-9)

    qfd = 0.0
    for _ in range(3):
        d = 4
        h = random_hermitian(d, rng)
        T = qf.fermi_density(random_hermitian(d, rng))
        m = qf.OnePartModel(h=h, T=T)
        fs = m.to_fock()
        qfd = max(qfd, abs(qf.qf_e_pt(m, 1.0, 0.4) - ds.e_pt(fs, 1.0, 0.4)))
    record("quasifree_fock", qfd, 1e-9)
    A = random_hermitian(5, rng) + 1j * random_hermitian(5, rng)
    record("trace_gamma_det", qf.fock_trace_identity(A), 1e-9)
    record("xy_spectrum", qf.xy_spectrum_defect(4, 1.0, 0.3), 1e-9)

    worst = np.inf
    for _ in range(n):
        a = random_hermitian(4, rng)
        b = random_hermitian(4, rng)
        g = st.trace_inequality_gaps(a, b)
        worst = min(worst, g.PB, g.Klein, g.GT, st.holder_gap(a, b, 3.0), st.minkowski_gap(a, b, 3.0))
    record("trace_inequalities", max(0.0, -worst), 1e-11)
    return rep


def cmd_qsys_verify(args, man):
    rep = property_suite(args.seed, args.n_systems)
    man.params["all_pass"] = all(r["pass"] for r in rep.values())
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"


COMMANDS = {
    "chain-sigma": cmd_chain_sigma,
    "chain-eofalpha": cmd_chain_eofalpha,
    "chain-rate": cmd_chain_rate,
    "qsys-verify": cmd_qsys_verify,
    "ebb-e2plus": cmd_ebb_e2plus,
    "xy-eplus": cmd_xy_eplus,
    "fcs": cmd_fcs,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="entroflux", description="Entropic fluctuation curves and checks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def temps(sp, bl=0.5, br=1.0):
        sp.add_argument("--beta-l", type=float, default=bl)
        sp.add_argument("--beta-r", type=float, default=br)

    def chain(sp):
        sp.add_argument("--n", type=int, default=20, help="half-width of the central chain")
        sp.add_argument("--m", type=int, default=300, help="half-width of the whole lattice")
        temps(sp)
        sp.add_argument("--beta", type=float, default=None, help="reference inverse temperature")

    def alphas(sp, lo=0.0, hi=1.0, n=21):
        sp.add_argument("--alpha-min", type=float, default=lo)
        sp.add_argument("--alpha-max", type=float, default=hi)
        sp.add_argument("--points", type=int, default=n)

    def common(sp):
        sp.add_argument("--out", default=None, help="output file (stdout when omitted)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("chain-sigma", help="mean entropy production of the finite chain")
    chain(sp)
    sp.add_argument("--t-max", type=float, default=1000.0)
    sp.add_argument("--dt", type=float, default=2.0)
    common(sp)

    sp = sub.add_parser("chain-eofalpha", help="e_t(alpha)/t against the large-time limit")
    chain(sp)
    sp.add_argument("--times", default="10,30,100")
    alphas(sp)
    common(sp)

    sp = sub.add_parser("chain-rate", help="rate function I_X(s, -s) and its equilibrium counterpart")
    temps(sp)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--s-min", type=float, default=-0.6)
    sp.add_argument("--s-max", type=float, default=0.6)
    sp.add_argument("--points", type=int, default=121)
    common(sp)

    sp = sub.add_parser("qsys-verify", help="JSON pass/fail report of the finite-dimensional identities")
    sp.add_argument("--n-systems", type=int, default=10)
    common(sp)

    for name, helptext in (("ebb-e2plus", "large-time e_{p,+}(alpha) of an electronic black box"),
                           ("xy-eplus", "large-time e_{p,+}(alpha) of the open XY chain")):
        sp = sub.add_parser(name, help=helptext)
        if name == "ebb-e2plus":
            sp.add_argument("--model", default="ebb2", choices=["ebb2"])
            sp.add_argument("--model-file", default=None)
        else:
            temps(sp, 1.0, 0.5)
            sp.add_argument("--J", type=float, default=1.0)
            sp.add_argument("--field", type=float, default=0.3)
        sp.add_argument("--p", type=float, default=2.0)
        alphas(sp, -0.5, 1.5, 41)
        common(sp)

    sp = sub.add_parser("fcs", help="full counting statistics of a finite model as atoms")
    sp.add_argument("--model", default="qubit-toy", choices=["qubit-toy", "ebb2", "xy"])
    sp.add_argument("--model-file", default=None)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--lead-sites", type=int, default=3)
    sp.add_argument("--size", type=int, default=6)
    sp.add_argument("--J", type=float, default=1.0)
    sp.add_argument("--field", type=float, default=0.3)
    temps(sp, 1.0, 0.5)
    common(sp)
    return p


def _thread_limit():
    n = os.environ.get("ENTROFLUX_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=max(1, int(n)))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"entroflux: {exc}", file=sys.stderr)
        return EXIT_USAGE
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "seed")}
    man = RunManifest(args.command, params, args.seed)
    t0 = time.perf_counter()
    try:
        with _thread_limit():
            text = COMMANDS[args.command](args, man)
    except UsageError as exc:
        print(f"entroflux: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, QuadratureFailure, StepSelectionFailure, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"entroflux: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man.wall_time = time.perf_counter() - t0
    _emit(text, args.out, man)
    _write_manifest(man, args.out)
    if man.params.get("all_pass") is False:
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
