"""Command-line front end.

Subcommands: ``validate``, ``gen-ring``, ``analyze``, ``compare``, ``oracle``.
``analyze`` and ``compare`` exit with 0 when every run converged, 2 when some
run diverged and 3 when some run hit the iteration limit.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

from tfa import generators
from tfa.calculus import global_map, with_line_shaping
from tfa.cuts import find_cut, parse_cut
from tfa.model import Network, NetworkError, edge_label
from tfa.netfile import dumps_network, load_network
from tfa.oracle import NotAffine, exact_fixpoint, linearize, policy_fixpoint
from tfa.solvers import (
    ALGORITHMS,
    EXIT_CODES,
    Schedule,
    SolveOptions,
    SolverOutcome,
    Status,
    run_alt,
    run_async,
    run_fptfa,
    run_sync,
    write_trace_csv,
)

WORK_NOTE = (
    "work_node_updates counts per-node delay evaluations; it is a machine-independent "
    "work measure and replaces wall-clock timing"
)


def _sci_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    return int(value)


def _algos(text: str) -> list[str]:
    items = [a.strip() for a in text.split(",") if a.strip()]
    if "all" in items:
        return list(ALGORITHMS)
    bad = [a for a in items if a not in ALGORITHMS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS} or all")
    return items


@dataclass
class RunConfig:
    network: Network
    name: str
    algorithms: list[str]
    options: SolveOptions
    cuts: list = field(default_factory=lambda: ["dfs"])
    schedules: list[Schedule] = field(default_factory=lambda: [Schedule()])
    out: Path | None = None
    trace: Path | None = None


# -- argument plumbing -----------------------------------------------------------


def _ring_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ring parameters")
    g.add_argument("--T", type=float, default=generators.RING_T, help="service latency (s)")
    g.add_argument("--R", type=float, default=generators.RING_R, help="service rate (bits/s)")
    g.add_argument("--r", type=float, default=None, help="flow rate (bits/s), default 0.7 R / n")
    g.add_argument("--b", type=float, default=generators.RING_B, help="flow burst (bits)")
    g.add_argument("--line-shaping", action="store_true", help="add line-shaping delay bounds")
    g.add_argument("--line-rate", type=float, default=None, help="line rate for --line-shaping, default R")
    g.add_argument("--max-packet", type=float, default=None, help="max packet for --line-shaping, default b")


def _solver_args(p: argparse.ArgumentParser) -> None:
    d = SolveOptions()
    p.add_argument("--algo", type=_algos, default=list(ALGORITHMS), help="sync,async,alt,fptfa or all")
    p.add_argument("--eps-rel", type=float, default=d.eps_rel)
    p.add_argument("--eps-abs", type=float, default=d.eps_abs)
    p.add_argument("--max-iters", type=_sci_int, default=d.max_iters)
    p.add_argument("--divergence-cap", type=float, default=d.divergence_cap)


def _make_ring(args, n: int) -> Network:
    net = generators.ring(n, args.T, args.R, args.r, args.b)
    if args.line_shaping:
        rate = args.line_rate if args.line_rate is not None else args.R
        packet = args.max_packet if args.max_packet is not None else args.b
        net = with_line_shaping(net, rate, packet)
    return net


def _options(args) -> SolveOptions:
    return SolveOptions(args.eps_rel, args.eps_abs, args.max_iters, args.divergence_cap)


def _cuts(args, net: Network) -> list:
    cuts = [parse_cut(c) for c in (args.cut or [])]
    strategies = list(args.cut_strategy or [])
    if "user" in strategies:
        if not cuts:
            raise NetworkError("--cut-strategy user needs --cut")
        strategies.remove("user")
    found = [find_cut(net, s) for s in strategies]
    found += [find_cut(net, "user", c) for c in cuts]
    return found or [find_cut(net, "dfs")]


def _writer(dest: Path | None, stdout: TextIO):
    if dest is None:
        return None, csv.writer(stdout, lineterminator="\n")
    fh = open(dest, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _exit_code(outcomes: Sequence[SolverOutcome]) -> int:
    statuses = {o.status for o in outcomes}
    if Status.DIVERGED in statuses:
        return EXIT_CODES[Status.DIVERGED]
    if Status.ITERATION_LIMIT in statuses:
        return EXIT_CODES[Status.ITERATION_LIMIT]
    return 0


def _suffixed(path: Path, tag: str) -> Path:
    tag = tag.replace(">", "-").replace(",", "_").replace("[", ".").replace("]", "").replace(":", "-")
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def _run_all(cfg: RunConfig, trace: bool) -> list[SolverOutcome]:
    outcomes = []
    for algo in cfg.algorithms:
        if algo == "sync":
            outcomes.append(run_sync(cfg.network, cfg.options, trace))
        elif algo == "alt":
            outcomes.append(run_alt(cfg.network, cfg.options, trace))
        elif algo == "async":
            outcomes += [run_async(cfg.network, s, cfg.options, trace) for s in cfg.schedules]
        elif algo == "fptfa":
            outcomes += [run_fptfa(cfg.network, c, cfg.options, trace) for c in cfg.cuts]
    return outcomes


# -- commands ------------------------------------------------------------------


def cmd_validate(path: str, stdout: TextIO = sys.stdout) -> int:
    net = load_network(path)
    print(f"nodes: {len(net.node_ids)}", file=stdout)
    print(f"flows: {len(net.flows)}", file=stdout)
    print(f"transit_edges: {len(net.edges)}", file=stdout)
    print(f"cyclic: {str(net.is_cyclic()).lower()}", file=stdout)
    print("node,utilization,stable", file=stdout)
    for entry in net.check_local_stability():
        print(f"{entry.node},{entry.utilization:.6g},{str(entry.stable).lower()}", file=stdout)
    return 0


def cmd_gen_ring(args, stdout: TextIO = sys.stdout) -> int:
    net = _make_ring(args, args.n)
    text = dumps_network(net)
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    return 0


def write_results(outcomes: Sequence[SolverOutcome], net: Network, w) -> None:
    w.writerow(("algorithm", "kind", "id", "flow_id", "value"))
    for o in outcomes:
        w.writerow((o.label, "status", "", "", o.status.value))
        w.writerow((o.label, "iterations", "", "", o.iterations))
        w.writerow((o.label, "node_updates", "", "", o.node_updates))
        for n, v in zip(net.node_ids, o.state.d.tolist()):
            w.writerow((o.label, "d", n, "", repr(v)))
        for (e, f), v in zip(net.pairs, o.state.z.tolist()):
            w.writerow((o.label, "z", edge_label(e), f, repr(v)))
        if o.converged:
            for f, v in o.end_to_end(net).items():
                w.writerow((o.label, "e2e", f, f, repr(v)))


def cmd_analyze(cfg: RunConfig, stdout: TextIO = sys.stdout) -> int:
    outcomes = _run_all(cfg, trace=cfg.trace is not None)
    split = len(outcomes) > 1 and cfg.out is not None
    if split:
        for o in outcomes:
            with open(_suffixed(cfg.out, o.label), "w", newline="") as fh:
                write_results([o], cfg.network, csv.writer(fh, lineterminator="\n"))
    else:
        fh, w = _writer(cfg.out, stdout)
        write_results(outcomes, cfg.network, w)
        if fh:
            fh.close()
    if cfg.trace is not None:
        for o in outcomes:
            dest = _suffixed(cfg.trace, o.label) if len(outcomes) > 1 else cfg.trace
            write_trace_csv(o.trace, dest)
    return _exit_code(outcomes)


TABLE_COLUMNS = (
    "network",
    "n_nodes",
    "run",
    "algorithm",
    "status",
    "max_e2e_bound_s",
    "iterations",
    "work_node_updates",
)
PLOT_COLUMNS = ("network", "run", "iteration", "max_e2e_bound_s")


def cmd_compare(
    configs: Sequence[RunConfig],
    table: Path | None,
    plot_data: Path | None,
    stdout: TextIO = sys.stdout,
    stderr: TextIO = sys.stderr,
) -> int:
    all_outcomes = []
    fh, w = _writer(table, stdout)
    pfh, pw = (None, None)
    if plot_data is not None:
        pfh, pw = _writer(plot_data, stdout)
        pw.writerow(PLOT_COLUMNS)
    w.writerow(TABLE_COLUMNS)
    for cfg in configs:
        outcomes = _run_all(cfg, trace=pw is not None)
        all_outcomes += outcomes
        gm = global_map(cfg.network)
        for o in outcomes:
            e2e = o.end_to_end(cfg.network) if o.converged else {}
            bound = repr(max(e2e.values())) if e2e else ""
            w.writerow((cfg.name, len(cfg.network), o.label, o.algorithm, o.status.value, bound, o.iterations, o.node_updates))
            if pw is not None:
                for k, st in enumerate(o.trace):
                    values = gm.end_to_end(st.d).values()
                    pw.writerow((cfg.name, o.label, k, repr(max(values)) if values else ""))
    for handle in (fh, pfh):
        if handle:
            handle.close()
    print(WORK_NOTE, file=stderr)
    return _exit_code(all_outcomes)


def cmd_oracle(net: Network, out: Path | None, stdout: TextIO = sys.stdout) -> int:
    try:
        fp = exact_fixpoint(linearize(net))
        method = "linear-solve"
    except NotAffine:
        fp = policy_fixpoint(net)
        method = "policy-iteration"
    fh, w = _writer(out, stdout)
    w.writerow(("kind", "id", "flow_id", "value"))
    w.writerow(("method", "", "", method))
    w.writerow(("rho", "", "", repr(fp.rho)))
    if fp.unique:
        w.writerow(("residual", "", "", repr(fp.residual)))
        n = len(net.node_ids)
        x = fp.x.tolist()
        for k, node in enumerate(net.node_ids):
            w.writerow(("d", node, "", repr(x[k])))
        for k, (e, f) in enumerate(net.pairs):
            w.writerow(("z", edge_label(e), f, repr(x[n + k])))
    else:
        w.writerow(("fixpoint", "", "", "none"))
    if fh:
        fh.close()
    return 0 if fp.unique else 2


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file and report its structure")
    p.add_argument("file")

    p = sub.add_parser("gen-ring", help="write the ring benchmark network")
    p.add_argument("--n", type=_sci_int, required=True)
    _ring_args(p)
    p.add_argument("--out", default=None)

    for name, helptext in (("analyze", "run solvers on one network"), ("compare", "compare solvers across networks")):
        p = sub.add_parser(name, help=helptext)
        if name == "analyze":
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("file", nargs="?")
            src.add_argument("--ring", type=_sci_int, help="generate a ring of this size instead of reading a file")
        else:
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("files", nargs="*", default=[])
            src.add_argument("--rings", help="comma-separated ring sizes, e.g. 5,10,15,20,25")
        _ring_args(p)
        _solver_args(p)
        p.add_argument("--cut", action="append", help="cut edges as tail>head,...; repeatable")
        p.add_argument("--cut-strategy", action="append", choices=["dfs", "min", "user"], help="repeatable")
        p.add_argument("--schedule", action="append", help="rr, all, random:<seed> or user:<A+B,C>; repeatable")
        p.add_argument("--out", type=Path, default=None)
        if name == "analyze":
            p.add_argument("--trace", type=Path, default=None)
        else:
            p.add_argument("--plot-data", type=Path, default=None)

    p = sub.add_parser("oracle", help="exact fixpoint, spectral radius and residual")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("file", nargs="?")
    src.add_argument("--ring", type=_sci_int)
    _ring_args(p)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _config(args, net: Network, name: str) -> RunConfig:
    schedules = [Schedule.parse(s) for s in (args.schedule or ["rr"])]
    return RunConfig(net, name, args.algo, _options(args), _cuts(args, net), schedules, args.out, getattr(args, "trace", None))


def main(argv: Sequence[str] | None = None, stdout: TextIO = sys.stdout, stderr: TextIO = sys.stderr) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.file, stdout)
        if args.command == "gen-ring":
            return cmd_gen_ring(args, stdout)
        if args.command == "analyze":
            if args.ring is not None:
                net, name = _make_ring(args, args.ring), f"ring{args.ring}"
            else:
                net, name = load_network(args.file), Path(args.file).stem
            return cmd_analyze(_config(args, net, name), stdout)
        if args.command == "compare":
            if args.rings:
                nets = [(_make_ring(args, int(n)), f"ring{int(n)}") for n in args.rings.split(",") if n.strip()]
            else:
                nets = [(load_network(f), Path(f).stem) for f in args.files]
            configs = [_config(args, net, name) for net, name in nets]
            return cmd_compare(configs, args.out, args.plot_data, stdout, stderr)
        if args.command == "oracle":
            net = _make_ring(args, args.ring) if args.ring is not None else load_network(args.file)
            return cmd_oracle(net, args.out, stdout)
    except (NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    return 1
