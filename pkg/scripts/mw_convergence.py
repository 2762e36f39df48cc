"""Duality gap of multiplicative weights against iteration count on small reference games.

Usage:
    python scripts/mw_convergence.py [--out runs/mw] [--max-iters 20000]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from latentgame.matrixsolve import MatrixGame, antisymmetrized, build_blotto_matrix, mw_solve
from latentgame.svgplot import line_chart_svg


def games():
    return {
        "rps": MatrixGame(np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], float)),
        "2x2": MatrixGame(np.array([[2, -1], [-1, 1]], float)),
        "blotto S=5 K=3 antisym": antisymmetrized(build_blotto_matrix(5, 5, 3)),
        "blotto S=5 K=3": build_blotto_matrix(5, 5, 3),
        "random 20x30": MatrixGame(np.random.default_rng(0).uniform(-1, 1, (20, 30))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/mw")
    ap.add_argument("--max-iters", type=int, default=20_000)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    Ts = np.unique(np.geomspace(args.max_iters / 20, args.max_iters, 6).astype(int))
    series = {}
    with open(out / "gaps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["game", "iterations", "value_lower", "value_upper", "duality_gap"])
        for name, g in games().items():
            gaps = []
            for T in Ts:
                r = mw_solve(g, int(T))
                w.writerow([name, int(T), repr(r.value_lower), repr(r.value_upper), repr(r.duality_gap)])
                gaps.append(r.duality_gap)
            gaps = np.array(gaps)
            pos = gaps > 0
            slope = np.polyfit(np.log(Ts[pos]), np.log(gaps[pos]), 1)[0] if pos.sum() > 1 else float("nan")
            print(f"{name:24s} shape {g.shape}  final bracket [{r.value_lower:+.4f}, {r.value_upper:+.4f}]  "
                  f"log-log slope {slope:+.3f}")
            series[name] = (Ts, gaps)
    (out / "gaps.svg").write_text(line_chart_svg(series, title="duality gap vs iterations"))


if __name__ == "__main__":
    main()
