"""40-seed latent Blotto sweep: median exploitability curves and strategy scatters.

Usage:
    python scripts/seed_sweep.py --out runs/sweep40 [--seeds 0-39] [--parallel 4] [--reuse]

Writes, under --out:
    sweep/seed{N}/...          per-seed traces and checkpoints (via the ``train`` command)
    medians.csv                step, median eps_f, eps_g, total and median grad norms
    curves.svg                 median suboptimality and gradient norm against step
    samples_step{S}.svg        f's 5000-sample scatter for --show-seed at each evaluated step
"""
import argparse
import csv
import json
from pathlib import Path

import numpy as np

from latentgame import cli, nnet
from latentgame.exploit import sample_strategies
from latentgame.svgplot import line_chart_svg, ternary_scatter_svg
from latentgame.training import TrainConfig, TrainTrace


def load_seed(d: Path):
    trace = TrainTrace.from_csv((d / "trace.csv").read_text())
    init = json.loads((d / "initial_eval.json").read_text())
    evals = {0: (init["subopt_f"], init["subopt_g"])}
    evals.update({r.step: (r.subopt_f, r.subopt_g) for r in trace.rows if r.subopt_f is not None})
    return trace, evals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/sweep40")
    ap.add_argument("--seeds", default="0-39")
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--steps", type=int, default=800)
    ap.add_argument("--eval-every", type=int, default=400)
    ap.add_argument("--show-seed", type=int, default=0)
    ap.add_argument("--reuse", action="store_true", help="skip training if the sweep directory exists")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep = out / "sweep"
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps({"steps": args.steps, "eval_every": args.eval_every, "eval_samples": 5000}))
    if not (args.reuse and (sweep / "sweep_summary.json").exists()):
        code = cli.main(["train", str(cfg_path), "--out", str(sweep), "--seeds", args.seeds,
                         "--parallel", str(args.parallel)])
        if code:
            raise SystemExit(code)

    seeds = cli._parse_seeds(args.seeds)
    runs = [load_seed(sweep / f"seed{s}") for s in seeds]
    steps = sorted(runs[0][1])
    rows = []
    for st in steps:
        ef = np.median([e[st][0] for _, e in runs])
        eg = np.median([e[st][1] for _, e in runs])
        tot = np.median([sum(e[st]) for _, e in runs])
        rows.append((st, ef, eg, tot))
    gn = np.median(np.array([[r.grad_norm_f for r in t.rows] for t, _ in runs]), axis=0)
    with open(out / "medians.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "median_subopt_f", "median_subopt_g", "median_total", "median_grad_norm_f"])
        for st, ef, eg, tot in rows:
            w.writerow([st, repr(ef), repr(eg), repr(tot), repr(float(gn[st - 1])) if st else ""])

    r = np.array(rows)
    steps_all = np.arange(1, len(gn) + 1)
    series = {"median subopt f": (r[:, 0], r[:, 1]), "median subopt g": (r[:, 0], r[:, 2]),
              "median grad norm f": (steps_all, gn)}
    (out / "curves.svg").write_text(line_chart_svg(series, title=f"median over {len(seeds)} seeds"))

    cfg = TrainConfig(steps=args.steps)
    d = sweep / f"seed{args.show_seed}"
    for st in steps:
        f = nnet.load(d / f"f_step{st}.json")
        pts = sample_strategies(f, cfg.spec, 5000, seed=0).points
        (out / f"samples_step{st}.svg").write_text(
            ternary_scatter_svg(pts, title=f"f after {st} steps, eps_f+eps_g = {sum(load_seed(d)[1][st]):.2e}"))

    for st, ef, eg, tot in rows:
        print(f"step {st:4d}  median eps_f {ef:.3e}  eps_g {eg:.3e}  total {tot:.3e}")
    print(f"ratio step {steps[-1]} / step 0: {rows[-1][3] / rows[0][3]:.3f}")


if __name__ == "__main__":
    main()
