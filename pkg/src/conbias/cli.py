"""Command-line front end: theory queries, single trials, sweeps and inference."""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, stats
from .core import bias_type
from .engine import SWEEP_COLUMNS, SweepSpec, TrialConfig, monte_carlo, run_trial
from .network import LABELS, BENCHMARK_NETWORKS, from_label, mixing_matrix, stationary
from .theory import (
    bias_decomposition,
    classify_region,
    less_biased_side,
    limiting_opinions,
    mean_gamma,
    network_consensus,
)

log = logging.getLogger("conbias")

CSV_HEADER = "# conbias-sweep v1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0

    def write(self, path: Path):
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


# ---------------------------------------------------------------- parsing helpers

def _unit(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in [0, 1], got {v}")
        return v
    return parse


def _floats(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError(f"values must lie in [0, 1], got {text!r}")
    return vals


def _ints(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _labels(text):
    out = tuple(x.strip().upper() for x in text.split(","))
    bad = [x for x in out if x not in LABELS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown network(s) {bad}; choose from {sorted(LABELS)}")
    return out


def _net(text):
    return _labels(text)[0]


def _resolve_seed(args) -> int:
    env = os.environ.get("CONBIAS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"CONBIAS_SEED must be an integer, got {env!r}") from None
    return args.seed


def write_sweep_csv(table: pd.DataFrame, path) -> None:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    table.to_csv(buf, index=False, lineterminator="\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_sweep_csv(path) -> pd.DataFrame:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if first.startswith("#") and first != CSV_HEADER:
        raise stats.SchemaError(f"unsupported sweep format {first!r}; expected {CSV_HEADER!r}")
    df = pd.read_csv(path, comment="#")
    for col in ("om", "pca", "deg_left", "deg_right", "node_left", "node_right"):
        if col in df:
            df[col] = df[col].astype("Int64")
    return df


# ---------------------------------------------------------------- commands

def cmd_theory(args) -> int:
    gamma = args.gamma
    lp = limiting_opinions(args.theta, args.mu, gamma)
    left, right = bias_decomposition(args.theta, args.mu, gamma)
    print(f"bias type        {bias_type(gamma)}")
    print(f"y_l              {lp.y_left:.6g}")
    print(f"y_r              {lp.y_right:.6g}")
    print(f"bias (left)      {left:.6g}")
    print(f"bias (right)     {right:.6g}")
    if gamma >= 0.5:
        print(f"region           {classify_region(args.theta, args.mu, gamma).value}")
    print(f"less biased side {less_biased_side(args.theta).value}")
    if args.net:
        net = from_label(args.net)
        gammas = np.asarray(args.gammas if args.gammas else (gamma,) * net.n)
        if gammas.size == 1:
            gammas = np.full(net.n, gammas[0])
        if gammas.size != net.n:
            raise UsageError(f"--gammas has {gammas.size} values for {net.n} agents")
        pi = stationary(mixing_matrix(net, args.b))
        pair = network_consensus(args.theta, args.mu, gammas, pi)
        print(f"network          {net.label} (n={net.n}, b={args.b})")
        print("pi               " + " ".join(f"{p:.6g}" for p in pi))
        print(f"mean gamma       {mean_gamma(gammas, pi):.6g}")
        print(f"network y_l      {pair.y_left:.6g}")
        print(f"network y_r      {pair.y_right:.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    seed = _resolve_seed(args)
    gammas = args.gammas if args.gammas else args.gamma
    tl = args.tau if args.tau is not None else args.tau_left
    tr = args.tau if args.tau is not None else args.tau_right
    cfg = TrialConfig(network=args.net, theta=args.theta, mu=args.mu, b=args.b, gammas=gammas,
                      tau_left=tl, tau_right=tr, horizon=args.horizon, seed=seed,
                      trial=args.trial, epsilon=args.epsilon, per_agent_u=args.per_agent_u)
    t0 = time.perf_counter()
    res = run_trial(cfg, trace=args.trace is not None)
    out = res.outcome
    outputs = []
    if args.trace is not None:
        path = res.trajectory
        df = pd.DataFrame(path, columns=[f"y{i}" for i in range(path.shape[1])])
        df.insert(0, "t", np.arange(path.shape[0]))
        df.insert(1, "signal", np.concatenate([[-1], res.signals]))
        df.to_csv(args.trace, index=False, lineterminator="\n")
        outputs.append(str(args.trace))
    print("final opinions   " + " ".join(f"{y:.6f}" for y in out.opinions))
    print(f"mean opinion     {out.mean_opinion:.6f}")
    print(f"spread           {out.spread:.3g}")
    if out.targets is not None:
        print(f"targets          y_l={out.targets.y_left:.6g} y_r={out.targets.y_right:.6g}")
        print(f"epsilon          {out.epsilon:.6g}")
        print(f"classification   {out.classification.value}")
        print(f"distance         {out.distance:.6g}")
    if out.placement.left is not None:
        print(f"partisans        left={out.placement.left} right={out.placement.right}")
        print(f"covariates       FI={out.fi} OM={out.om} PCA={out.pca}")
    else:
        print(f"covariates       FI={out.fi}")
    if args.manifest:
        m = RunManifest("run", _jsonable(dataclasses.asdict(cfg)), seed, outputs=outputs,
                        duration_s=round(time.perf_counter() - t0, 3))
        m.write(Path(args.manifest))
    return EXIT_OK


def _sweep_spec(args, seed) -> SweepSpec:
    kw = dict(trials=args.trials, seed=seed, epsilon=args.epsilon, per_agent_u=args.per_agent_u)
    if args.paper_table2 or args.paper_table4:
        spec = SweepSpec.benchmark(**kw)
        if args.paper_table4 and not args.paper_table2:
            spec = dataclasses.replace(spec, networks=("B", "D", "E", "F", "H"))
    else:
        spec = SweepSpec(networks=args.nets, taus=args.taus, thetas=args.thetas, mu=args.mu,
                         b=args.b, gamma=args.gamma, horizon=args.horizon, **kw)
    return spec


def cmd_sweep(args) -> int:
    seed = _resolve_seed(args)
    spec = _sweep_spec(args, seed)
    t0 = time.perf_counter()
    table = monte_carlo(spec, threads=args.threads)
    out = Path(args.out)
    stem = out.with_suffix("")
    write_sweep_csv(table, out)
    phat = stats.phat_table(table)
    phat.to_csv(f"{stem}_phat.csv", float_format="%.4f", lineterminator="\n")
    outputs = [str(out), f"{stem}_phat.csv"]
    print(f"wrote {len(table)} rows to {out}")
    print("\np-hat (less biased share) by network and tau")
    print(phat.round(3).to_string())
    unresolved = (table["classification"] == "unresolved").mean()
    print(f"\nunresolved share {unresolved:.4%}")
    split_nets = [n for n in ("B", "D", "E", "F", "H") if n in set(table["network"])]
    if split_nets and any(t > 0 for t in spec.taus):
        split = stats.open_narrow_table(table, split_nets)
        split.to_csv(f"{stem}_open_narrow.csv", float_format="%.4f", lineterminator="\n")
        outputs.append(f"{stem}_open_narrow.csv")
        print("\nopen- vs narrow-minded partisans")
        print(split.round(3).to_string())
    m = RunManifest("sweep", _jsonable(dataclasses.asdict(spec)), seed, outputs=outputs,
                    duration_s=round(time.perf_counter() - t0, 3))
    m.config["threads"] = args.threads
    m.write(Path(f"{stem}_manifest.json"))
    return EXIT_OK


def cmd_analyze(args) -> int:
    table = read_sweep_csv(args.table)
    stats.check_schema(table, tuple(c for c in SWEEP_COLUMNS if c not in ("mu", "b", "seed")))
    nets = args.net or tuple(n for n in BENCHMARK_NETWORKS if n in set(table["network"]))
    if not (args.probit or args.proptest):
        raise UsageError("choose at least one of --probit or --proptest")
    if args.probit:
        fits = {}
        for net in nets:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", UserWarning)
                X, y, names = stats.build_design(table, net)
            for w in caught:
                log.info("%s", w.message)
            fits[net] = stats.probit_fit(X, y, names)
        print(stats.format_probit_table(fits))
        if args.coef_out:
            stats.coefficients_frame(fits).to_csv(args.coef_out, index=False, lineterminator="\n")
    if args.proptest:
        taus = args.tau or (0, 1)
        for net in nets:
            d = table[table["network"] == net]
            xs, ns = [], []
            for tau in taus:
                cell = d[d["tau"] == tau]["less_biased"]
                if cell.empty:
                    raise UsageError(f"no rows for network {net} at tau={tau}")
                xs.append(int(cell.sum()))
                ns.append(int(cell.size))
            if len(taus) == 2:
                r = stats.two_proportion_test(xs[0], ns[0], xs[1], ns[1])
                print(f"{net} tau {taus[0]} vs {taus[1]}: p1={xs[0] / ns[0]:.4f} p2={xs[1] / ns[1]:.4f} "
                      f"diff={r.diff:+.4f} CI95=[{r.ci_low:+.4f}, {r.ci_high:+.4f}] "
                      f"chi2={r.chi2:.3f} p={r.p_value:.3g}")
            else:
                chi2, p, df = stats.proportions_chi2(xs, ns)
                shares = " ".join(f"{x / n:.4f}" for x, n in zip(xs, ns))
                print(f"{net} tau {','.join(map(str, taus))}: p={shares} chi2={chi2:.3f} df={df} p={p:.3g}")
    return EXIT_OK


def _jsonable(d):
    return json.loads(json.dumps(d, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conbias", description=__doc__)
    p.add_argument("--version", action="version", version=f"conbias {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("theory", help="closed-form limits, regions and network consensus")
    t.add_argument("--theta", type=_unit("--theta"), required=True)
    t.add_argument("--mu", type=_unit("--mu"), required=True)
    t.add_argument("--gamma", type=_unit("--gamma"), default=1.0)
    t.add_argument("--gammas", type=_floats, help="per-agent gammas, comma separated")
    t.add_argument("--net", type=_net)
    t.add_argument("--b", type=_unit("--b"), default=0.5)
    t.set_defaults(func=cmd_theory)

    r = sub.add_parser("run", help="simulate one society")
    r.add_argument("--net", type=_net, default="SA")
    r.add_argument("--theta", type=_unit("--theta"), required=True)
    r.add_argument("--mu", type=_unit("--mu"), required=True)
    r.add_argument("--b", type=_unit("--b"), default=0.5)
    r.add_argument("--gamma", type=_unit("--gamma"), default=1.0)
    r.add_argument("--gammas", type=_floats)
    r.add_argument("--tau", type=int, help="sets both partisan shifts")
    r.add_argument("--tau-left", type=int, default=0)
    r.add_argument("--tau-right", type=int, default=0)
    r.add_argument("--horizon", "-T", type=int, default=700)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trial", type=int, default=0)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--per-agent-u", action="store_true")
    r.add_argument("--trace", metavar="CSV", help="write per-period opinions here")
    r.add_argument("--manifest", metavar="JSON")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="Monte Carlo grid over networks and partisanship")
    s.add_argument("--paper-table2", action="store_true", help="benchmark grid: all networks, tau in {0,1,10,30}")
    s.add_argument("--paper-table4", action="store_true", help="benchmark grid on networks where partisans may or may not be adjacent")
    s.add_argument("--trials", type=int, default=21040)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--nets", type=_labels, default=("SA",) + BENCHMARK_NETWORKS)
    s.add_argument("--taus", type=_ints, default=(0, 1, 10, 30))
    s.add_argument("--thetas", type=_floats, default=(0.2, 0.8))
    s.add_argument("--mu", type=_unit("--mu"), default=0.6)
    s.add_argument("--b", type=_unit("--b"), default=0.5)
    s.add_argument("--gamma", type=_unit("--gamma"), default=1.0)
    s.add_argument("--horizon", "-T", type=int, default=700)
    s.add_argument("--per-agent-u", action="store_true")
    s.add_argument("--out", "-o", default="sweep.csv")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="probit fits and proportion tests on a sweep CSV")
    a.add_argument("table")
    a.add_argument("--probit", action="store_true")
    a.add_argument("--proptest", action="store_true")
    a.add_argument("--net", type=_labels)
    a.add_argument("--tau", type=_ints, help="tau levels to compare (default 0,1)")
    a.add_argument("--coef-out", metavar="CSV")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"conbias: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"conbias: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
