"""Command-line harness.

Subcommands
-----------
analyze    exact disagreement + chain analytics for one graph, JSON out
sweep      scaling table over a size list, CSV out
simulate   Monte Carlo consensus run, trace CSV + summary JSON
formation  formation-control run, trajectory CSV + summary JSON
selftest   quick invariant checks, pass/fail lines

Exit codes: 0 ok; 2 bad configuration (arguments, files, graph/spec
validation); 3 numerical failure (non-convergence, singular systems,
violated chain preconditions).

Every output file embeds the tool version, the fully resolved config, and
the seed, so reruns are reproducible byte for byte.  CSV floats use 17
significant digits; metadata rides in ``#`` comment lines above the header.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .disagreement import (
    NoiseCovariance,
    delta_oracle,
    delta_ss_kemeny,
    delta_ss_resistance,
    delta_ss_spectral,
    delta_ss_theorem,
    delta_uni_bounds,
)
from .errors import (
    AsymmetricWeights,
    ConsensusError,
    DimensionMismatch,
    DisconnectedGraph,
    EigSolverFailure,
    GenerationFailed,
    InconsistentFormation,
    InvalidParam,
    NoConvergence,
    NotIrreducible,
    NotReversible,
    NotSymmetric,
    RandomTargetViolation,
    SingularSystem,
    StepSizeViolation,
)
from .graphs import Graph, build_graph, builtin_families, load_edge_list
from .markov import (
    StochasticMatrix,
    effective_resistance,
    hitting_times,
    kemeny_constant_combinatorial,
    lazy_walk_matrix,
    simple_walk_matrix,
    square_chain,
    uniform_edge_matrix,
)
from .simulate import SimConfig, estimate_delta_ss, simulate_consensus
from .formation import (
    form_exact,
    load_formation_spec,
    ring_demo_spec,
    simulate_formation,
    spec_from_graph,
    write_trajectory_csv,
)

__all__ = ["main"]

_CONFIG_ERRORS = (
    InvalidParam,
    DimensionMismatch,
    DisconnectedGraph,
    StepSizeViolation,
    AsymmetricWeights,
    InconsistentFormation,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    json.JSONDecodeError,
)
_NUMERICAL_ERRORS = (
    NotIrreducible,
    NotReversible,
    NotSymmetric,
    RandomTargetViolation,
    EigSolverFailure,
    SingularSystem,
    NoConvergence,
    GenerationFailed,
)

_SWEEP_COLUMNS = (
    "family",
    "n",
    "delta_ss",
    "delta_uni_lower",
    "delta_uni_upper",
    "kemeny_p2",
    "max_resistance",
    "error",
)


# ---------------------------------------------------------------------
# shared argument plumbing
# ---------------------------------------------------------------------

def _add_graph_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--family",
        required=False,
        help=f"graph family: {', '.join(builtin_families())}, or custom",
    )
    sub.add_argument("--n", type=int, help="node count")
    sub.add_argument("--edges", help="edge-list file (family=custom)")
    sub.add_argument("--p", type=float, help="edge probability (erdos-renyi)")
    sub.add_argument("--degree", type=int, help="degree (random-regular)")
    sub.add_argument("--grid-dim", type=int, default=2, help="grid dimension (default 2)")
    sub.add_argument("--seed", type=int, default=0, help="seed (graph sampling and simulation)")


def _add_chain_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--chain",
        choices=("lazy", "simple", "uniform"),
        default="lazy",
        help="random-walk matrix on the graph (default lazy)",
    )
    sub.add_argument(
        "--eps",
        type=float,
        default=None,
        help="edge weight for --chain uniform (default 1/(2 max degree))",
    )


def _add_noise_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--sigma2", type=float, default=1.0, help="shared noise variance (default 1)")
    sub.add_argument("--sigma2-vec", help="file of per-node variances, one per line")
    sub.add_argument(
        "--sigma2-node",
        action="append",
        default=[],
        metavar="I=V",
        help="override one node's variance; repeatable",
    )


def _build_graph(args) -> Graph:
    if not args.family:
        raise InvalidParam("--family is required")
    fam = args.family.lower()
    if fam == "custom":
        if not args.edges:
            raise InvalidParam("--family custom needs --edges FILE")
        return load_edge_list(args.edges)
    if args.n is None:
        raise InvalidParam("--n is required for built-in families")
    return build_graph(
        fam, args.n, seed=args.seed, p=args.p, degree=args.degree, dim=args.grid_dim
    )


def _build_chain(g: Graph, args) -> StochasticMatrix:
    if args.chain == "simple":
        return simple_walk_matrix(g)
    if args.chain == "uniform":
        return uniform_edge_matrix(g, eps=args.eps)
    return lazy_walk_matrix(g)


def _parse_node_overrides(pairs) -> dict[int, float]:
    out: dict[int, float] = {}
    for pair in pairs:
        try:
            node, value = pair.split("=", 1)
            out[int(node)] = float(value)
        except ValueError as exc:
            raise InvalidParam(f"--sigma2-node expects I=V, got {pair!r}") from exc
    return out


def _build_noise(n: int, args) -> NoiseCovariance:
    """Resolve the noise grammar: scalar base, optional vector, overrides."""
    overrides = _parse_node_overrides(args.sigma2_node)
    if args.sigma2_vec:
        v = np.loadtxt(args.sigma2_vec, dtype=float, ndmin=1)
        if v.shape != (n,):
            raise InvalidParam(
                f"--sigma2-vec {args.sigma2_vec} has {v.size} entries, graph has {n} nodes"
            )
    elif overrides:
        v = np.full(n, float(args.sigma2))
    else:
        return NoiseCovariance.scalar(n, float(args.sigma2))
    for node, value in overrides.items():
        if not 0 <= node < n:
            raise InvalidParam(f"--sigma2-node index {node} out of range for n={n}")
        v[node] = value
    return NoiseCovariance.diagonal(v)


def _noise_config(args) -> dict:
    return {
        "sigma2": args.sigma2,
        "sigma2_vec": args.sigma2_vec,
        "sigma2_node": _parse_node_overrides(args.sigma2_node),
    }


def _graph_config(args) -> dict:
    return {
        "family": args.family,
        "n": args.n,
        "edges": args.edges,
        "p": args.p,
        "degree": args.degree,
        "grid_dim": args.grid_dim,
        "chain": getattr(args, "chain", None),
        "eps": getattr(args, "eps", None),
    }


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _meta_lines(doc: dict) -> str:
    """Metadata comment block for CSV outputs."""
    return (
        f"# version={__version__}\n"
        f"# seed={doc.get('seed')}\n"
        f"# config={json.dumps(doc, sort_keys=True)}\n"
    )


# ---------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------

def cmd_analyze(args) -> int:
    g = _build_graph(args)
    P = _build_chain(g, args)
    noise = _build_noise(g.n, args)
    pi = P.stationary()

    H = hitting_times(P)
    kemeny_p = kemeny_constant_combinatorial(P, hitting=H)
    P2 = square_chain(P)
    H2 = hitting_times(P2)
    kemeny_p2 = kemeny_constant_combinatorial(P2, hitting=H2)

    eq = noise.equal_variance()
    selected = ["theorem1"]
    if P.symmetric and eq is not None:
        selected += ["kemeny", "spectral", "resistance"]
    if g.n <= args.oracle_cap:
        selected.append("oracle")

    methods: dict[str, object] = {}
    report = None
    for name in selected:
        try:
            if name == "theorem1":
                report = delta_ss_theorem(P, noise, hitting_sq=H2)
                methods[name] = report.delta_ss
            elif name == "kemeny":
                methods[name] = delta_ss_kemeny(P, eq)
            elif name == "spectral":
                methods[name] = delta_ss_spectral(P, eq)
            elif name == "resistance":
                methods[name] = delta_ss_resistance(P, eq)
            elif name == "oracle":
                _, orep = delta_oracle(P, noise)
                methods[name] = orep.delta_ss
                methods["oracle_delta_uni"] = orep.delta_uni_exact
        except ConsensusError as exc:
            methods[name] = {"error": f"{type(exc).__name__}: {exc}"}

    uni_lo, uni_hi = delta_uni_bounds(P, noise)
    doc = {
        "version": __version__,
        "command": "analyze",
        "config": {**_graph_config(args), **_noise_config(args), "oracle_cap": args.oracle_cap},
        "seed": args.seed,
        "n": g.n,
        "graph_family": g.family,
        "chain_flags": {"symmetric": bool(P.symmetric), "reversible": bool(P.reversible)},
        "pi": pi.tolist(),
        "kemeny_p": kemeny_p,
        "kemeny_p2": kemeny_p2,
        "method_selection": selected,
        "methods": methods,
        "delta_ss": report.delta_ss if report is not None else None,
        "delta_uni_lower": uni_lo,
        "delta_uni_upper": uni_hi,
    }
    _emit_json(doc, args.out)
    return 0


# ---------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------

def _sweep_row(fam: str, n: int, args) -> dict:
    row: dict[str, object] = {c: "" for c in _SWEEP_COLUMNS}
    row["family"], row["n"], row["error"] = fam, n, ""
    try:
        g = build_graph(fam, n, seed=args.seed, p=args.p, degree=args.degree, dim=args.grid_dim)
        P = _build_chain(g, args)
        noise = _build_noise(g.n, args)
        P2 = square_chain(P)
        H2 = hitting_times(P2)
        rep = delta_ss_theorem(P, noise, hitting_sq=H2)
        row["delta_ss"] = rep.delta_ss
        row["delta_uni_lower"] = rep.delta_uni_lower
        row["delta_uni_upper"] = rep.delta_uni_upper
        row["kemeny_p2"] = kemeny_constant_combinatorial(P2, hitting=H2)
        if P2.reversible:
            row["max_resistance"] = float(effective_resistance(P2, hitting=H2).max())
    except ConsensusError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args) -> int:
    try:
        sizes = [int(tok) for tok in args.n_list.replace(",", " ").split()]
    except ValueError as exc:
        raise InvalidParam(f"--n-list must be integers, got {args.n_list!r}") from exc
    if not sizes:
        raise InvalidParam("--n-list is empty")
    if not args.family:
        raise InvalidParam("--family is required")
    fam = args.family.lower()

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(lambda n: _sweep_row(fam, n, args), sizes))
    else:
        rows = [_sweep_row(fam, n, args) for n in sizes]

    config = {**_graph_config(args), **_noise_config(args), "n_list": sizes, "jobs": args.jobs}
    meta = {"version": __version__, "command": "sweep", "seed": args.seed, "config": config}

    def fmt(v) -> str:
        return f"{v:.16e}" if isinstance(v, float) else str(v)

    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in _SWEEP_COLUMNS])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    g = _build_graph(args)
    P = _build_chain(g, args)
    noise = _build_noise(g.n, args)
    cfg = SimConfig(
        horizon=args.horizon,
        trials=args.trials,
        burn_in=args.burn_in,
        seed=args.seed,
        record_every=args.record_every,
        noise=args.noise,
    )
    trace = simulate_consensus(P, noise, np.zeros(g.n), cfg)
    est, se = estimate_delta_ss(P, noise, cfg)

    try:
        exact: float | None = delta_ss_theorem(P, noise).delta_ss
    except ConsensusError:
        exact = None

    config = {
        **_graph_config(args),
        **_noise_config(args),
        "horizon": args.horizon,
        "trials": args.trials,
        "burn_in": args.burn_in,
        "record_every": args.record_every,
        "noise": args.noise,
    }
    summary = {
        "version": __version__,
        "command": "simulate",
        "seed": args.seed,
        "config": config,
        "n": g.n,
        "delta_hat": est,
        "stderr": se,
        "delta_ss_exact": exact,
    }
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(_meta_lines(summary))
            fh.write(trace.to_csv())
    _emit_json(summary, args.summary)
    return 0


# ---------------------------------------------------------------------
# formation
# ---------------------------------------------------------------------

def cmd_formation(args) -> int:
    if args.demo:
        spec = ring_demo_spec(args.lambda2 if args.lambda2 is not None else 4e-4)
    elif args.spec:
        spec = load_formation_spec(args.spec)
    else:
        if args.lambda2 is None:
            raise InvalidParam("--lambda2 is required without --spec/--demo")
        g = _build_graph(args)
        spec = spec_from_graph(g, args.lambda2)

    report = form_exact(spec)
    config = {
        **_graph_config(args),
        "spec": args.spec,
        "demo": args.demo,
        "lambda2": args.lambda2,
        "horizon": args.horizon,
        "trials": args.trials,
        "burn_in": args.burn_in,
        "record_every": args.record_every,
        "skip_sim": args.skip_sim,
    }
    if not args.skip_sim:
        cfg = SimConfig(
            horizon=args.horizon,
            trials=args.trials,
            burn_in=args.burn_in,
            seed=args.seed,
            record_every=args.record_every,
        )
        trace, (est, se) = simulate_formation(spec, cfg)
        report.form_simulated, report.stderr = est, se
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(
                    _meta_lines({"version": __version__, "command": "formation",
                                 "seed": args.seed, "config": config})
                )
            _append_trajectory(args.out, trace)

    summary = {
        "version": __version__,
        "command": "formation",
        "seed": args.seed,
        "config": config,
        **report.to_json_dict(),
    }
    _emit_json(summary, args.summary)
    return 0


def _append_trajectory(path: str, trace) -> None:
    import os

    tmp = path + ".body"
    write_trajectory_csv(tmp, trace)
    with open(tmp) as src, open(path, "a") as dst:
        dst.write(src.read())
    os.remove(tmp)


# ---------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------

def cmd_selftest(args) -> int:
    """A handful of fast end-to-end invariants; prints one line each."""
    from .disagreement import check_j_properties, sigma_hat
    from .graphs import ring_graph, star_graph, custom_graph
    from .formation import build_formation_spec, form_via_delta

    checks: list[tuple[str, object]] = []

    def check(name: str):
        def deco(fn):
            checks.append((name, fn))
            return fn
        return deco

    @check("two-node chain: delta_ss = sigma^2 / 2")
    def _two_node():
        P = StochasticMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
        rep = delta_ss_theorem(P, NoiseCovariance.scalar(2, 1.0))
        assert abs(rep.delta_ss - 0.5) < 1e-12, rep.delta_ss

    @check("four formulas agree on lazy ring n=8")
    def _four_way():
        P = lazy_walk_matrix(ring_graph(8))
        vals = [
            delta_ss_theorem(P, NoiseCovariance.scalar(8, 1.0)).delta_ss,
            delta_ss_kemeny(P, 1.0),
            delta_ss_spectral(P, 1.0),
            delta_ss_resistance(P, 1.0),
        ]
        assert max(vals) - min(vals) < 1e-9 * max(vals), vals

    @check("oracle matches closed form on lazy star n=6")
    def _oracle():
        P = lazy_walk_matrix(star_graph(6))
        rng = np.random.default_rng(args.seed)
        v = rng.uniform(0.5, 2.0, 6)
        noise = NoiseCovariance.diagonal(v)
        rep = delta_ss_theorem(P, noise)
        _, orep = delta_oracle(P, noise)
        assert abs(rep.delta_ss - orep.delta_ss) <= 1e-8 * (1 + orep.delta_ss)

    @check("projection identities hold on lazy star n=6")
    def _jprops():
        P = lazy_walk_matrix(star_graph(6))
        rep = check_j_properties(P)
        assert rep.ok(), rep.violations

    @check("steady-state covariance identities hold on lazy ring n=6")
    def _sigma_hat():
        P = lazy_walk_matrix(ring_graph(6))
        noise = NoiseCovariance.scalar(6, 1.0)
        S = sigma_hat(P, noise)
        rep = delta_ss_theorem(P, noise)
        assert abs(np.trace(S) - rep.delta_ss) < 1e-10 * (1 + rep.delta_ss)
        pi = P.stationary()
        assert np.abs(np.outer(np.ones(6), pi) @ S).max() < 1e-10

    @check("formation: two agents at unit offset give Form = 1")
    def _formation():
        g = custom_graph(2, [(0, 1)], family="line(n=2)")
        spec = build_formation_spec(g, 2, {(0, 1): [1.0, 0.0]}, "default", 1.0)
        rep = form_exact(spec)
        assert abs(rep.form_exact - 1.0) < 1e-12, rep.form_exact
        assert abs(form_via_delta(spec) - 1.0) < 1e-10

    @check("simulation is reproducible per seed")
    def _repro():
        P = lazy_walk_matrix(ring_graph(5))
        noise = NoiseCovariance.scalar(5, 1.0)
        cfg = SimConfig(horizon=200, trials=3, burn_in=50, seed=args.seed)
        a = simulate_consensus(P, noise, np.zeros(5), cfg)
        b = simulate_consensus(P, noise, np.zeros(5), cfg)
        assert np.array_equal(a.delta_hat, b.delta_hat)

    failures = 0
    for name, fn in checks:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and keep going
            failures += 1
            print(f"FAIL  {name}: {exc}")
        else:
            print(f"ok    {name}")
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 3


# ---------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="consensuslab",
        description="Steady-state disagreement of noisy consensus on graphs.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="exact analytics for one graph (JSON)")
    _add_graph_args(a)
    _add_chain_args(a)
    _add_noise_args(a)
    a.add_argument("--oracle-cap", type=int, default=64,
                   help="run the iterative oracle when n <= cap (default 64)")
    a.add_argument("--out", help="write JSON here instead of stdout")
    a.set_defaults(fn=cmd_analyze)

    s = sub.add_parser("sweep", help="scaling table over sizes (CSV)")
    _add_graph_args(s)
    _add_chain_args(s)
    _add_noise_args(s)
    s.add_argument("--n-list", required=True, help="comma-separated sizes")
    s.add_argument("--jobs", type=int, default=1, help="parallel rows (default 1)")
    s.add_argument("--out", help="write CSV here instead of stdout")
    s.set_defaults(fn=cmd_sweep)

    m = sub.add_parser("simulate", help="Monte Carlo consensus run")
    _add_graph_args(m)
    _add_chain_args(m)
    _add_noise_args(m)
    m.add_argument("--horizon", type=int, default=5000)
    m.add_argument("--trials", type=int, default=8)
    m.add_argument("--burn-in", type=int, default=None)
    m.add_argument("--record-every", type=int, default=1)
    m.add_argument("--noise", choices=("gaussian", "rademacher"), default="gaussian")
    m.add_argument("--out", help="trace CSV path")
    m.add_argument("--summary", help="summary JSON path (default stdout)")
    m.set_defaults(fn=cmd_simulate)

    f = sub.add_parser("formation", help="formation-control run")
    _add_graph_args(f)
    f.add_argument("--spec", help="formation spec JSON")
    f.add_argument("--demo", action="store_true", help="built-in 4-agent square demo")
    f.add_argument("--lambda2", type=float, default=None, help="per-node noise variance")
    f.add_argument("--horizon", type=int, default=2000)
    f.add_argument("--trials", type=int, default=4)
    f.add_argument("--burn-in", type=int, default=None)
    f.add_argument("--record-every", type=int, default=1)
    f.add_argument("--skip-sim", action="store_true", help="closed form only")
    f.add_argument("--out", help="trajectory CSV path")
    f.add_argument("--summary", help="summary JSON path (default stdout)")
    f.set_defaults(fn=cmd_formation)

    t = sub.add_parser("selftest", help="fast invariant checks")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
