"""Command-line entry point: simulate | scalability | qbd | balance | replay.

Every subcommand writes its CSV/JSON outputs plus a run manifest into the
output directory (--out, default $ALLPATH_OUTDIR or the working
directory).  Replaying a manifest with `allpath replay` reproduces the
output files byte for byte.  Numeric CSV fields carry 12 significant
digits.  Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time

from . import __version__, balance, qbd, scalability, simnet, topology

MANIFEST_NAME = "manifest.json"


def _fmt(x):
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(outdir, subcommand, params, outputs, started):
    doc = {
        "subcommand": subcommand,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "outputs": sorted(outputs),
        "wall_clock_s": time.time() - started,
    }
    with open(os.path.join(outdir, MANIFEST_NAME), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args):
    out = args.out or os.environ.get("ALLPATH_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_topology(spec):
    if spec.startswith("grid:"):
        return topology.make_simple_grid(int(spec.split(":", 1)[1]))
    if spec.startswith("crossed:"):
        return topology.make_crossed_grid(int(spec.split(":", 1)[1]))
    if spec == "diamond":
        return topology.make_diamond()
    if os.path.exists(spec):
        return topology.Topology.load_json(spec)
    raise ValueError("unknown topology %r (use grid:N, crossed:N, diamond or a JSON file)" % spec)


def _parse_float_list(text):
    return [float(x) for x in text.split(",") if x]


def _parse_range(text):
    lo, hi = text.split("..")
    return list(range(int(lo), int(hi) + 1))


# -- subcommands ----------------------------------------------------------


def cmd_simulate(args):
    started = time.time()
    outdir = _outdir(args)
    params = {
        "topology": args.topology, "protocol": args.protocol, "seed": args.seed,
        "duration": args.duration, "flows": args.flows, "scenario": args.scenario,
    }
    if args.scenario:
        with open(args.scenario) as fh:
            doc = json.load(fh)
        topo_spec = doc.get("topology", args.topology)
        t = topology.Topology.from_json_dict(topo_spec) if isinstance(topo_spec, dict) \
            else _parse_topology(topo_spec)
        protocol = doc.get("protocol", args.protocol).replace("-", "_")
        seed = doc.get("seed", args.seed)
        duration = doc.get("duration", args.duration)
        workload = [simnet.FlowSpec(f["src"], f["dst"], f["size_bits"], f["start_time"])
                    for f in doc["flows"]]
    else:
        t = _parse_topology(args.topology)
        protocol = args.protocol.replace("-", "_")
        seed = args.seed
        duration = args.duration
        rng = random.Random(seed)
        hosts = sorted(t.hosts)
        if len(hosts) < 2:
            raise ValueError("topology has fewer than two hosts")
        workload = []
        for k in range(args.flows):
            src, dst = rng.sample(hosts, 2)
            workload.append(simnet.FlowSpec(src, dst, 12000, 0.3 * k))

    eng = simnet.Engine(t, protocol, seed=seed)
    for spec in workload:
        eng.add_flow(spec)
    report = eng.run(until=duration)

    outputs = ["report.json", "report.csv", "tables.csv"]
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(outdir, "report.csv"), "w") as fh:
        for line in report.utilization_csv_rows():
            fh.write(line + "\n")
    from .protocol import dump_tables_csv

    with open(os.path.join(outdir, "tables.csv"), "w") as fh:
        dump_tables_csv(eng.bridges.values(), fh)
    _write_manifest(outdir, "simulate", params, outputs, started)
    return 0


def cmd_scalability(args):
    started = time.time()
    outdir = _outdir(args)
    params = {"grid": args.grid, "n_range": args.n_range, "hosts": args.hosts}
    n_values = _parse_range(args.n_range)
    hosts = [int(h) for h in args.hosts.split(",")]
    if args.grid == "simple":
        factory, criterion = topology.make_simple_grid, topology.SHORTEST_ONLY
        if min(n_values) < 2:
            raise ValueError("n-range must start at 2")
    else:
        factory, criterion = topology.make_crossed_grid, topology.SHORTEST_PLUS_ONE
        if min(n_values) < 2:
            raise ValueError("crossed grid needs n >= 2")
    header = ["n", "H", "P_FP", "P_AP", "P_BP", "T_FP", "T_AP", "T_BP",
              "R_FA", "R_AB", "psi_paths"]
    rows = [[r[k] for k in header]
            for r in scalability.sweep_rows(factory, n_values, hosts, criterion)]
    _write_csv(os.path.join(outdir, "scalability.csv"), header, rows)
    _write_manifest(outdir, "scalability", params, ["scalability.csv"], started)
    return 0


def cmd_qbd(args):
    started = time.time()
    outdir = _outdir(args)
    if args.c1 < 1 or args.c2 < 1:
        raise ValueError("capacities must be positive")
    params = {"c1": args.c1, "c2": args.c2, "rho": args.rho, "mu": args.mu,
              "method": args.method}
    summary = []
    gaps = []
    for rho in _parse_float_list(args.rho):
        lam = rho * args.mu  # offered load rho = lambda / mu
        _, u1, u2, lp, gap = qbd.solve_model(args.c1, args.c2, lam, args.mu,
                                             method=args.method)
        summary.append([rho, u1, u2, lp])
        for psi in sorted(gap):
            gaps.append([rho, psi, gap[psi]])
    _write_csv(os.path.join(outdir, "qbd_summary.csv"), ["rho", "u1", "u2", "lp"], summary)
    _write_csv(os.path.join(outdir, "qbd_gap.csv"), ["rho", "psi", "probability"], gaps)
    _write_manifest(outdir, "qbd", params, ["qbd_summary.csv", "qbd_gap.csv"], started)
    return 0


def cmd_balance(args):
    started = time.time()
    outdir = _outdir(args)
    params = {"paths": args.paths, "capacity": args.capacity, "traffic": args.traffic,
              "rho": args.rho, "replications": args.replications, "seed": args.seed,
              "duration": args.duration}
    capacities = [args.capacity] * args.paths
    rows = []
    for rho in _parse_float_list(args.rho):
        if args.traffic == "dcmix":
            rep = balance.simulate_dc(capacities, rho, duration=args.duration,
                                      replications=args.replications, seed=args.seed)
        else:
            lam = balance.arrival_rate_for_load(rho, capacities, 1.0)
            rep = balance.simulate(capacities, lam, ("exp", 1.0), args.duration,
                                   args.replications, args.seed)
        for i, u in enumerate(rep.u):
            ci = rep.u_ci[i]
            rows.append([rho, i + 1, u, rep.loss_probability, rep.fairness_index,
                         "" if ci is None else _fmt(u - ci),
                         "" if ci is None else _fmt(u + ci)])
    _write_csv(os.path.join(outdir, "balance.csv"),
               ["rho", "path_id", "u", "lp", "fi", "ci_low", "ci_high"], rows)
    _write_manifest(outdir, "balance", params, ["balance.csv"], started)
    return 0


def cmd_replay(args):
    with open(args.manifest) as fh:
        doc = json.load(fh)
    sub = doc["subcommand"]
    params = doc["params"]
    argv = [sub]
    for key, val in params.items():
        if val is None:
            continue
        argv += ["--" + key.replace("_", "-"), str(val)]
    if args.out:
        argv += ["--out", args.out]
    return main(argv)


# -- parser ---------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="allpath", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run a protocol traffic scenario")
    p.add_argument("--topology", default="grid:3")
    p.add_argument("--protocol", default="arp-path",
                   choices=["arp-path", "flow-path", "bridge-path",
                            "arp_path", "flow_path", "bridge_path"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--flows", type=int, default=4)
    p.add_argument("--scenario", default=None, help="scenario JSON file")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("scalability", help="table-size and path-count sweep")
    p.add_argument("--grid", choices=["simple", "crossed"], default="simple")
    p.add_argument("--n-range", default="2..6")
    p.add_argument("--hosts", default="4,8,12")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_scalability)

    p = sub.add_parser("qbd", help="two-path CTMC stationary analysis")
    p.add_argument("--c1", type=int, required=True)
    p.add_argument("--c2", type=int, required=True)
    p.add_argument("--rho", default="0.5,1,2", help="offered load lambda/mu, comma list")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--method", choices=["dense", "block_tridiagonal"], default="dense")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_qbd)

    p = sub.add_parser("balance", help="flow-level load-balance simulation")
    p.add_argument("--paths", type=int, default=6)
    p.add_argument("--capacity", type=int, default=20)
    p.add_argument("--traffic", choices=["exp", "dcmix"], default="exp")
    p.add_argument("--rho", default="0.5,1", help="offered load per unit of total capacity")
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_balance)

    p = sub.add_parser("replay", help="re-run a manifest, reproducing outputs")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print("allpath: error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
