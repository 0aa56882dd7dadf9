"""Command-line interface: ``ffu optimize | curve | release | compare | oracle | compose``.

Exit status is 0 on success, 1 on a usage or configuration error and 2 when
the optimizer stops before converging (its partial output is still written).
"""

from __future__ import annotations

import os

# BLAS reads its thread count at load time, so this must run before numpy loads
_THREADS = os.environ.get("FFU_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _THREADS

import argparse  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import baselines, oracles  # noqa: E402
from .errors import FFUError  # noqa: E402
from .linalg import read_matrix, write_matrix  # noqa: E402
from .mechanism import ingest_histogram, release  # noqa: E402
from .optimizer import OptimizerConfig, solve  # noqa: E402
from .privacy import Covariance, curve, epsilon_for_delta, kron_compose, privacy_report  # noqa: E402
from .workloads import (  # noqa: E402
    BASIS_KINDS,
    Decomposition,
    VarianceTargets,
    Workload,
    decompose,
    read_targets,
    targets_random,
    targets_uniform,
    workload_from_spec,
)

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

SIGMA_FILE = "sigma.csv"
BASIS_FILE = "basis.csv"
REP_FILE = "representation.csv"
REPORT_FILE = "report.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- argument helpers


def load_workload(arg: str, seed: int | None = None) -> Workload:
    """A matrix CSV path, a JSON spec file, or an inline JSON spec."""
    text = arg.strip()
    if text.startswith("{"):
        spec, base = json.loads(text), None
    else:
        path = Path(arg)
        if not path.is_file():
            raise UsageError(f"workload file not found: {arg}")
        if path.suffix.lower() == ".csv":
            return Workload.explicit(read_matrix(path), source=path)
        spec, base = json.loads(path.read_text()), path.parent
    if seed is not None and "seed" not in spec:
        spec = {**spec, "seed": seed}
    return workload_from_spec(spec, base_dir=base)


def load_targets(arg: str, m: int, seed: int | None) -> VarianceTargets:
    """``uniform:V``, ``random:LO:HI`` (needs ``--seed``) or a one-column CSV."""
    if arg.startswith("uniform"):
        _, _, value = arg.partition(":")
        return targets_uniform(m, float(value or 1.0))
    if arg.startswith("random:"):
        if seed is None:
            raise UsageError("random targets need --seed")
        _, lo, hi = arg.split(":")
        return targets_random(m, float(lo), float(hi), seed)
    path = Path(arg)
    if not path.is_file():
        raise UsageError(f"targets file not found: {arg}")
    c = read_targets(path)
    if len(c) != m:
        raise UsageError(f"{len(c)} targets for {m} queries")
    return c


def load_config(arg: str | None) -> OptimizerConfig:
    if arg is None:
        return OptimizerConfig()
    text = Path(arg).read_text() if not arg.strip().startswith("{") else arg
    return OptimizerConfig.from_json(text)


def make_decomposition(w: Workload, kind: str, basis_path: str | None) -> Decomposition:
    basis = read_matrix(basis_path) if basis_path else None
    if kind == "explicit" and basis is None:
        raise UsageError("--basis explicit needs --basis-matrix")
    return decompose(w, kind, basis)


def parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise UsageError(f"expected LO:HI:N, got {text!r}") from None


def write_run(out: Path, dec: Decomposition, sigma: np.ndarray, report: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / SIGMA_FILE, sigma)
    write_matrix(out / BASIS_FILE, dec.basis)
    write_matrix(out / REP_FILE, dec.representation)
    (out / REPORT_FILE).write_text(json.dumps(report, indent=2) + "\n")


def read_run(path: Path) -> tuple[Decomposition, Covariance, dict]:
    missing = [f for f in (SIGMA_FILE, BASIS_FILE, REP_FILE) if not (path / f).is_file()]
    if missing:
        raise UsageError(f"{path} is missing {missing}")
    report = json.loads((path / REPORT_FILE).read_text()) if (path / REPORT_FILE).is_file() else {}
    dec = Decomposition("explicit", read_matrix(path / BASIS_FILE), read_matrix(path / REP_FILE))
    return dec, Covariance(read_matrix(path / SIGMA_FILE)), report


# ---------------------------------------------------------------- commands


def cmd_optimize(args) -> int:
    w = load_workload(args.workload, args.seed)
    c = load_targets(args.targets, w.m, args.seed)
    dec = make_decomposition(w, args.basis, args.basis_matrix)
    config = load_config(args.config)
    q = read_matrix(args.q_init) if args.q_init else None
    res = solve(dec, c, config, q_init=q)
    report = privacy_report(dec, res.sigma, c, w.labels).to_dict()
    report.update(res.summary())
    report["basis"] = dec.basis_kind
    report["workload"] = w.provenance
    write_run(Path(args.out), dec, res.sigma.sigma, report)
    print(f"squared cost {res.alpha:.6g}  cost {res.cost:.6g}  iterations {res.iterations}  "
          f"converged {res.converged}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_curve(args) -> int:
    if args.cost is not None:
        cost = args.cost
        if cost < 0:
            raise UsageError("--cost must be non-negative")
    elif args.sigma and args.workload:
        w = load_workload(args.workload, args.seed)
        dec = make_decomposition(w, args.basis, args.basis_matrix)
        cost = privacy_report(dec, read_matrix(args.sigma)).cost
    else:
        raise UsageError("give --cost or both --sigma and --workload")
    if args.delta is not None:
        if cost == 0:
            raise UsageError("--delta needs a positive cost")
        print(repr(epsilon_for_delta(cost, args.delta)))
        return EXIT_OK
    eps = parse_grid(args.eps)
    lines = ["epsilon,delta"] + [f"{p['epsilon']!r},{p['delta']!r}" for p in curve(cost, eps)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_release(args) -> int:
    w = load_workload(args.workload, args.seed)
    dec = make_decomposition(w, args.basis, args.basis_matrix)
    if not Path(args.data).is_file():
        raise UsageError(f"data file not found: {args.data}")
    x = ingest_histogram(args.data)
    if x.size != w.d:
        raise UsageError(f"data has {x.size} cells, workload has {w.d}")
    rel = release(dec, Covariance(read_matrix(args.sigma)), x, args.seed, w.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "answers.csv").write_text(rel.to_csv())
    (out / "release.json").write_text(rel.to_json() + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in baselines.METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; valid methods: {', '.join(baselines.METHODS)}")
    config = load_config(args.config)
    jobs = []
    for spec in args.workload:
        w = load_workload(spec, args.seed)
        jobs.append((w, load_targets(args.targets, w.m, args.seed), make_decomposition(w, args.basis, None)))
    results = {}
    for i, (w, c, dec) in enumerate(jobs):
        name = w.provenance.get("kind", "workload")
        params = w.provenance.get("params", {})
        if "d" in params:
            name += f"-d{params['d']}"
        if name in results:
            name += f"-{i}"
        results[name] = baselines.compare(w, c, methods, dec, config)
    table = baselines.comparison_csv(results)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.csv").write_text(table)
        (out / "compare.json").write_text(baselines.comparison_json(results) + "\n")
    sys.stdout.write(table)
    return EXIT_OK


def _oracle_report(kind: str, args) -> tuple[dict, Decomposition, np.ndarray]:
    if kind == "twod-fitness":
        sol = oracles.twod_fitness(args.gamma)
        targets = np.full(2, args.gamma)
    elif kind == "twod-sum-squared":
        sol = oracles.twod_sum_squared(args.beta)
        targets = None
    elif kind == "idsum-fitness":
        sol = oracles.idsum_fitness(args.d, args.gamma, args.k)
        targets = np.r_[np.full(args.d, args.gamma), args.k * args.gamma]
    else:
        sol = oracles.idsum_sum_squared(args.d, args.beta, args.w)
        targets = None
    dec = sol.decomposition()
    report = privacy_report(dec, sol.sigma, targets).to_dict()
    fields = {k: v for k, v in vars(sol).items() if isinstance(v, (int, float, str, dict))}
    report["oracle"] = {"kind": kind, **fields}
    return report, dec, sol.sigma


def cmd_oracle(args) -> int:
    if args.kind == "idsum-ratio":
        d_list = [int(v) for v in args.d_list.split(",")]
        text = json.dumps(oracles.idsum_ratio_curve(d_list, args.gamma), indent=2)
    else:
        if args.kind.startswith("idsum") and args.d is None:
            raise UsageError(f"{args.kind} needs --d")
        report, dec, sigma = _oracle_report(args.kind, args)
        text = json.dumps(report, indent=2)
        if args.out:
            write_run(Path(args.out), dec, sigma, report)
    sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_compose(args) -> int:
    dec1, cov1, rep1 = read_run(Path(args.first))
    dec2, cov2, rep2 = read_run(Path(args.second))
    dec, cov = kron_compose(dec1, cov1, dec2, cov2)
    t1, t2 = _run_targets(rep1), _run_targets(rep2)
    targets = np.outer(t1, t2).ravel() if t1 is not None and t2 is not None else None
    labels = None
    l1, l2 = _run_labels(rep1), _run_labels(rep2)
    if l1 and l2:
        labels = [f"{a}|{b}" for a in l1 for b in l2]
    report = privacy_report(dec, cov, targets, labels).to_dict()
    write_run(Path(args.out), dec, cov.sigma, report)
    print(f"composed squared cost {report['squared_cost']:.6g}")
    return EXIT_OK


def _run_targets(report: dict):
    rows = report.get("per_query", [])
    if rows and all("target" in r for r in rows):
        return np.array([r["target"] for r in rows])
    return None


def _run_labels(report: dict):
    return [r["label"] for r in report.get("per_query", [])] or None


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ffu", description="Fitness-for-use covariance optimization for private linear queries.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def workload_args(sp, required=True):
        sp.add_argument("--workload", required=required,
                        help="matrix CSV, JSON spec file, or inline JSON spec")
        sp.add_argument("--basis", choices=BASIS_KINDS, default="identity")
        sp.add_argument("--basis-matrix", help="CSV basis for --basis explicit")
        sp.add_argument("--seed", type=int, help="seed for generated workloads")

    o = sub.add_parser("optimize", help="solve for the covariance and write sigma.csv + report.json")
    workload_args(o)
    o.add_argument("--targets", default="uniform:1", help="uniform:V, random:LO:HI or a CSV path")
    o.add_argument("--config", help="optimizer settings as a JSON file or inline JSON")
    o.add_argument("--q-init", help="CSV matrix Q for the initial covariance")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("curve", help="(epsilon, delta) samples or epsilon for one delta")
    c.add_argument("--cost", type=float)
    c.add_argument("--sigma")
    workload_args(c, required=False)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--eps", help="LO:HI:N grid of epsilons")
    g.add_argument("--delta", type=float)
    c.add_argument("--out")
    c.set_defaults(func=cmd_curve)

    r = sub.add_parser("release", help="noisy workload answers for a histogram")
    r.add_argument("--sigma", required=True)
    r.add_argument("--workload", required=True)
    r.add_argument("--basis", choices=BASIS_KINDS, default="identity")
    r.add_argument("--basis-matrix")
    r.add_argument("--data", required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_release)

    m = sub.add_parser("compare", help="max variance ratios of each method at the solver's cost")
    m.add_argument("--workload", action="append", required=True)
    m.add_argument("--targets", default="uniform:1")
    m.add_argument("--methods", default=",".join(baselines.METHODS))
    m.add_argument("--basis", choices=("identity", "prefix"), default="identity")
    m.add_argument("--config")
    m.add_argument("--seed", type=int)
    m.add_argument("--out")
    m.set_defaults(func=cmd_compare)

    k = sub.add_parser("oracle", help="closed-form optima")
    k.add_argument("kind", choices=("twod-fitness", "twod-sum-squared", "idsum-fitness",
                                    "idsum-sum-squared", "idsum-ratio"))
    k.add_argument("--gamma", type=float, default=1.0)
    k.add_argument("--beta", type=float, default=1.0)
    k.add_argument("--k", type=float, default=1.0)
    k.add_argument("--w", type=float, default=1.0)
    k.add_argument("--d", type=int)
    k.add_argument("--d-list", default="16,64,256,1024")
    k.add_argument("--out")
    k.set_defaults(func=cmd_oracle)

    x = sub.add_parser("compose", help="Kronecker product of two optimize output directories")
    x.add_argument("first")
    x.add_argument("second")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_compose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, FFUError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ffu: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
