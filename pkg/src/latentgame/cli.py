"""Command line: train, exploit, surgery, bounds, solve-matrix, plot.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
Every command writes a JSON run manifest next to its outputs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, nnet
from .bounds import BoundDomainError, BoundInputs, capacity_split
from .exploit import sample_strategies, suboptimality
from .games import ConfigError, LatentGameSpec
from .matrixsolve import CapExceeded, MatrixGame, antisymmetrized, build_blotto_matrix, mw_solve
from .surgery import average_net, mixture_net
from .svgplot import line_chart_svg, ternary_scatter_svg
from .training import TRACE_HEADER, TrainConfig, TrainingAborted, TrainTrace, train

log = logging.getLogger("latentgame")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    outputs: list[str] = field(default_factory=list)
    wall_clock: dict = field(default_factory=dict)

    def write(self, path: Path, started: float):
        self.wall_clock = {"started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
                           "seconds": round(time.time() - started, 3)}
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise RuntimeError(f"manifest names missing outputs: {missing}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")


def _write_json(path: Path, obj) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")
    return str(path)


def _parse_seeds(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _load_config(path: str, overrides: dict) -> TrainConfig:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"config is not valid JSON: {e}") from e
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.from_dict(doc)
    except (ConfigError, TypeError, ValueError) as e:
        raise UsageError(f"invalid config: {e}") from e


def run_training(cfg: TrainConfig, out: Path) -> list[str]:
    """Train one configuration and write its trace, checkpoints and initial evaluation under ``out``."""
    f, g, trace = train(cfg, out_dir=out)
    outputs = [_write_json(out / "config.json", cfg.to_dict())]
    (out / "trace.csv").write_text(trace.to_csv())
    outputs.append(str(out / "trace.csv"))
    init = None if trace.initial is None else {"step": 0, "subopt_f": trace.initial[0], "subopt_g": trace.initial[1]}
    outputs.append(_write_json(out / "initial_eval.json", init))
    outputs += sorted(str(p) for p in out.glob("[fg]_step*.json"))
    return outputs


def _train_one(args):
    cfg_dict, out = args
    return run_training(TrainConfig.from_dict(cfg_dict), Path(out))


def cmd_train(args) -> int:
    cfg = _load_config(args.config, {"seed": args.seed, "steps": args.steps})
    if args.dry_run:
        print(json.dumps(cfg.to_dict(), indent=2))
        return EXIT_OK
    started = time.time()
    out = Path(args.out)
    seeds = _parse_seeds(args.seeds) if args.seeds else None
    if seeds is None:
        outputs = run_training(cfg, out)
    else:
        jobs = []
        for s in seeds:
            d = cfg.to_dict()
            d["seed"] = s
            jobs.append((d, str(out / f"seed{s}")))
        if args.parallel > 1:
            with ProcessPoolExecutor(args.parallel) as ex:
                results = list(ex.map(_train_one, jobs))
        else:
            results = [_train_one(j) for j in jobs]
        outputs = [p for r in results for p in r]
        outputs.append(_write_json(out / "sweep_summary.json", _sweep_summary(out, seeds)))
    RunManifest("train", cfg.to_dict(), cfg.seed if seeds is None else None, outputs=outputs,
                ).write(out / "manifest.json", started)
    return EXIT_OK


def _sweep_summary(out: Path, seeds: list[int]) -> dict:
    per_seed = {}
    for s in seeds:
        d = out / f"seed{s}"
        trace = TrainTrace.from_csv((d / "trace.csv").read_text())
        init = json.loads((d / "initial_eval.json").read_text())
        evals = {0: (init["subopt_f"] + init["subopt_g"]) if init else None}
        for r in trace.rows:
            if r.subopt_f is not None:
                evals[r.step] = r.subopt_f + r.subopt_g
        per_seed[s] = evals
    steps = sorted({k for v in per_seed.values() for k in v})
    medians = {st: float(np.median([v[st] for v in per_seed.values() if v.get(st) is not None])) for st in steps}
    return {"seeds": seeds, "median_total_subopt": medians,
            "per_seed_total_subopt": {str(s): v for s, v in per_seed.items()}}


def _spec_from_net(net: nnet.NetParams, latent_dist: str) -> LatentGameSpec:
    return LatentGameSpec(net.arch.d_out, net.arch.d_in, latent_dist, "diff_blotto")


def _load_net(path: str) -> nnet.NetParams:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return nnet.load(p)
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"bad checkpoint {path}: {e}") from e


def _samples_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(points.shape[1])])
    w.writerows([[repr(float(v)) for v in row] for row in points])
    return buf.getvalue()


def cmd_exploit(args) -> int:
    f = _load_net(args.f)
    g = _load_net(args.g)
    try:
        spec = _spec_from_net(f, args.latent_dist)
        if g.arch.d_out != spec.battlefields or g.arch.d_in != spec.latent_dim:
            raise ConfigError("f and g disagree on battlefields or latent dimension")
    except ConfigError as e:
        raise UsageError(str(e)) from e
    if args.dry_run:
        return EXIT_OK
    started = time.time()
    cert = suboptimality(f, g, spec, args.n, args.seed, args.iters, args.step_size, args.restarts)
    out = Path(args.out)
    outputs = [_write_json(out, cert.to_dict())]
    if args.samples_prefix:
        for name, net in (("f", f), ("g", g)):
            pts = sample_strategies(net, spec, args.n, args.seed).points
            p = Path(f"{args.samples_prefix}_{name}.csv")
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(_samples_csv(pts))
            outputs.append(str(p))
            if spec.battlefields == 3:
                s = Path(f"{args.samples_prefix}_{name}.svg")
                s.write_text(ternary_scatter_svg(pts, title=f"{name}: {args.n} samples"))
                outputs.append(str(s))
    RunManifest("exploit", vars_clean(args), args.seed, outputs=outputs).write(_manifest_path(out), started)
    print(json.dumps(cert.to_dict()))
    return EXIT_OK


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def cmd_surgery(args) -> int:
    nets = [_load_net(p) for p in args.nets]
    if args.dry_run:
        return EXIT_OK
    started = time.time()
    try:
        if args.kind == "avg":
            weights = [float(w) for w in args.weights.split(",")] if args.weights else None
            net, report = average_net(nets, weights)
        else:
            net, report = mixture_net(nets, args.R, tv_samples=args.tv_samples, seed=args.seed)
    except ConfigError as e:
        raise UsageError(str(e)) from e
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    nnet.save(net, out)
    rep = Path(args.report) if args.report else out.with_name(out.stem + ".report.json")
    outputs = [str(out), _write_json(rep, report.to_dict())]
    RunManifest(f"surgery {args.kind}", vars_clean(args), args.seed, outputs=outputs).write(_manifest_path(out), started)
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.json:
        p = Path(args.json)
        if not p.is_file():
            raise UsageError(f"bounds file not found: {args.json}")
        doc = json.loads(p.read_text())
    else:
        doc = {k: getattr(args, k) for k in ("D_w", "D_theta", "L", "L_tilde", "R", "p", "d", "epsilon")}
        missing = [k for k, v in doc.items() if v is None]
        if missing:
            raise UsageError(f"missing bound inputs: {missing}")
    started = time.time()
    try:
        inp = BoundInputs(**doc)
    except TypeError as e:
        raise UsageError(f"bad bound inputs: {e}") from e
    report = capacity_split(inp)
    doc = {"inputs": asdict(inp), "report": report.to_dict()}
    if args.dry_run:
        return EXIT_OK
    print(json.dumps(doc, indent=2))
    if args.out:
        out = Path(args.out)
        RunManifest("bounds", asdict(inp), None, outputs=[_write_json(out, doc)]).write(_manifest_path(out), started)
    return EXIT_OK


def _read_matrix_csv(path: str) -> MatrixGame:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"matrix file not found: {path}")
    try:
        rows = [[float(v) for v in r] for r in csv.reader(p.read_text().splitlines()) if r]
        return MatrixGame(np.array(rows))
    except ValueError as e:
        raise UsageError(f"bad matrix file: {e}") from e


def cmd_solve_matrix(args) -> int:
    if bool(args.blotto) == bool(args.matrix):
        raise UsageError("give exactly one of --blotto S K or --matrix FILE")
    try:
        if args.blotto:
            S, K = args.blotto
            game = build_blotto_matrix(S, args.S2 if args.S2 is not None else S, K)
        else:
            game = _read_matrix_csv(args.matrix)
        if args.antisymmetrize:
            game = antisymmetrized(game)
    except (CapExceeded, ValueError) as e:
        raise UsageError(str(e)) from e
    if args.dry_run:
        return EXIT_OK
    started = time.time()
    res = mw_solve(game, args.iterations, args.eta)
    out = Path(args.out)
    doc = res.to_dict()
    doc["shape"] = list(game.shape)
    outputs = [_write_json(out, doc)]
    if args.strategies_prefix:
        for name, strat, labels in (("row", res.row_strategy, game.row_labels), ("col", res.col_strategy, game.col_labels)):
            p = Path(f"{args.strategies_prefix}_{name}.csv")
            p.parent.mkdir(parents=True, exist_ok=True)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["strategy", "weight"])
            w.writerows([[str(lab), repr(float(v))] for lab, v in zip(labels, strat)])
            p.write_text(buf.getvalue())
            outputs.append(str(p))
    RunManifest("solve-matrix", vars_clean(args), None, outputs=outputs).write(_manifest_path(out), started)
    print(json.dumps({k: doc[k] for k in ("value_lower", "value_upper", "duality_gap", "shape")}))
    return EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise UsageError(f"input not found: {args.input}")
    text = src.read_text()
    header = next(csv.reader(text.splitlines()[:1]), [])
    if header == TRACE_HEADER:
        initial = None
        init_path = src.with_name("initial_eval.json")
        if init_path.is_file():
            d = json.loads(init_path.read_text())
            initial = None if d is None else (d["subopt_f"], d["subopt_g"])
        svg = trace_svg(TrainTrace.from_csv(text, initial))
    elif header and all(h == f"x{i + 1}" for i, h in enumerate(header)):
        if len(header) != 3:
            raise UsageError(f"barycentric scatter needs K = 3 battlefields, got K = {len(header)}")
        pts = np.array([[float(v) for v in r] for r in list(csv.reader(text.splitlines()))[1:] if r]).reshape(-1, 3)
        svg = ternary_scatter_svg(pts, title=args.title or src.stem)
    else:
        raise UsageError("input is neither a training trace nor a simplex sample CSV")
    if args.dry_run:
        return EXIT_OK
    started = time.time()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    RunManifest("plot", vars_clean(args), None, outputs=[str(out)]).write(_manifest_path(out), started)
    return EXIT_OK


def trace_svg(trace: TrainTrace, title: str = "suboptimality and gradient norm") -> str:
    evals = [(0, *trace.initial)] if trace.initial is not None else []
    evals += [(r.step, r.subopt_f, r.subopt_g) for r in trace.rows if r.subopt_f is not None]
    series = {}
    if evals:
        e = np.array(evals, dtype=np.float64)
        series["subopt_f"] = (e[:, 0], e[:, 1])
        series["subopt_g"] = (e[:, 0], e[:, 2])
    if trace.rows:
        steps = np.array([r.step for r in trace.rows], dtype=np.float64)
        series["grad_norm_f"] = (steps, np.array([r.grad_norm_f for r in trace.rows]))
    return line_chart_svg(series, title=title, log_y=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latentgame", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="GDA training of two latent Blotto players")
    t.add_argument("config")
    t.add_argument("--out", default="runs/train")
    t.add_argument("--seed", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--seeds", help="multi-seed sweep, e.g. 0-39; runs go to OUT/seed{N}")
    t.add_argument("--parallel", type=int, default=1)
    t.add_argument("--dry-run", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("exploit", help="exploitability certificate for two checkpoints")
    e.add_argument("f")
    e.add_argument("g")
    e.add_argument("--out", default="certificate.json")
    e.add_argument("--n", type=int, default=5000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--iters", type=int, default=500)
    e.add_argument("--step-size", type=float, default=0.1)
    e.add_argument("--restarts", type=int, default=10)
    e.add_argument("--latent-dist", default="standard_normal", choices=["standard_normal", "uniform01"])
    e.add_argument("--samples-prefix", help="also write PREFIX_f.csv / PREFIX_g.csv (and SVG scatters for K = 3)")
    e.add_argument("--dry-run", action="store_true")
    e.set_defaults(func=cmd_exploit)

    s = sub.add_parser("surgery", help="compose checkpoints into one network")
    s.add_argument("kind", choices=["avg", "mix"])
    s.add_argument("nets", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--weights", help="comma-separated averaging weights (avg only)")
    s.add_argument("--R", type=float, default=10.0, help="parameter radius (mix only)")
    s.add_argument("--tv-samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dry-run", action="store_true")
    s.set_defaults(func=cmd_surgery)

    b = sub.add_parser("bounds", help="capacity bound calculator")
    b.add_argument("--json", help="file with BoundInputs fields")
    for name, typ in (("D_w", float), ("D_theta", float), ("L", float), ("L_tilde", float), ("R", float),
                      ("p", int), ("d", int), ("epsilon", float)):
        b.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    b.add_argument("--out")
    b.add_argument("--dry-run", action="store_true")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("solve-matrix", help="multiplicative-weights solver for small matrix games")
    m.add_argument("--blotto", nargs=2, type=int, metavar=("S", "K"))
    m.add_argument("--S2", type=int, help="second player's troops (defaults to S)")
    m.add_argument("--matrix")
    m.add_argument("--antisymmetrize", action="store_true")
    m.add_argument("--iterations", type=int, default=100_000)
    m.add_argument("--eta", type=float)
    m.add_argument("--out", default="solve.json")
    m.add_argument("--strategies-prefix")
    m.add_argument("--dry-run", action="store_true")
    m.set_defaults(func=cmd_solve_matrix)

    pl = sub.add_parser("plot", help="SVG from a trace CSV or a simplex sample CSV")
    pl.add_argument("input")
    pl.add_argument("out")
    pl.add_argument("--title")
    pl.add_argument("--dry-run", action="store_true")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingAborted, BoundDomainError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
