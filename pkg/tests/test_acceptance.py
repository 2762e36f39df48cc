"""End-to-end acceptance checks, one test per criterion; each prints a PASS/FAIL line."""
import json
import math
import os
import time

import numpy as np
import pytest

from conftest import record_criterion
from latentgame import cli, nnet
from latentgame.bounds import BoundInputs, capacity_split, k_epsilon_bounds
from latentgame.games import LatentGameSpec, diff_blotto_payoff, latent_payoff_estimate
from latentgame.matrixsolve import MatrixGame, antisymmetrized, build_blotto_matrix, mw_solve
from latentgame.surgery import average_net, mixture_net
from test_nnet import fd_grad, gradcheck_pairs, rel_err
from test_surgery import pl_generator

SWEEP_SEEDS = range(40)


def test_criterion_1_gradients():
    t0 = time.perf_counter()
    errs = [rel_err(nnet.backward(net, x, u)[0].flat(), fd_grad(net, x, u))
            for net, x, u in gradcheck_pairs(nnet.default_architecture(), 20, seed=1)]
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-4 and dt < 10
    record_criterion(1, "backward vs central differences", ok,
                     f"max rel err {max(errs):.2e} (<= 1e-4) over 20 pairs, {dt:.1f}s (< 10s)")
    assert ok


def test_criterion_2_antisymmetry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    X = rng.dirichlet(np.ones(3), 10_000)
    Y = rng.dirichlet(np.ones(3), 10_000)
    worst = max(abs(diff_blotto_payoff(x, y) + diff_blotto_payoff(y, x)) for x, y in zip(X, Y))
    spec = LatentGameSpec()
    swap = 0.0
    for s in range(10):
        f = nnet.init(nnet.default_architecture(), 2 * s, 2.5)
        g = nnet.init(nnet.default_architecture(), 2 * s + 1, 2.5)
        a = latent_payoff_estimate(f, g, spec, 1000, s).value
        b = latent_payoff_estimate(g, f, spec, 1000, s, swap_streams=True).value
        swap = max(swap, abs(a + b))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and swap <= 1e-12 and dt < 5
    record_criterion(2, "payoff antisymmetry", ok,
                     f"pairwise max {worst:.1e}, estimator swap max {swap:.1e} (<= 1e-12), {dt:.1f}s (< 5s)")
    assert ok


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep40")
    cfg = out / "sweep.json"
    cfg.write_text(json.dumps({"steps": 800, "eval_every": 400, "eval_samples": 5000}))
    parallel = max(1, min(os.cpu_count() or 1, 8))
    t0 = time.perf_counter()
    code = cli.main(["train", str(cfg), "--out", str(out / "sweep"), "--seeds", "0-39",
                     "--parallel", str(parallel)])
    return out, code, parallel, time.perf_counter() - t0


def test_criterion_3_suboptimality_halves(sweep):
    out, code, parallel, dt = sweep
    assert code == 0
    summary = json.loads((out / "sweep" / "sweep_summary.json").read_text())
    per = summary["per_seed_total_subopt"]
    start = np.median([per[str(s)]["0"] for s in SWEEP_SEEDS])
    mid = np.median([per[str(s)]["400"] for s in SWEEP_SEEDS])
    end = np.median([per[str(s)]["800"] for s in SWEEP_SEEDS])
    decreased = sum(per[str(s)]["800"] < per[str(s)]["0"] for s in SWEEP_SEEDS)
    ok = end <= 0.5 * start
    record_criterion(3, "median suboptimality at 800 <= 0.5 x step 0 (40 seeds)", ok,
                     f"median eps_f+eps_g {start:.3e} -> {mid:.3e} -> {end:.3e} (ratio {end / start:.3f}); "
                     f"{decreased}/40 seeds decreased; {dt:.0f}s with --parallel {parallel}")
    assert ok


def test_criterion_4_average_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst, counts_ok = 0.0, True
    for k in (1, 2, 3, 5):
        for widths in ((3, 2), (4, 32, 3), (2, 8, 16, 1), (5, 32, 32, 32, 2), (3, 7, 9, 11, 13, 4)):
            arch = nnet.Architecture(widths, output_head="linear")
            nets = [nnet.init(arch, int(rng.integers(2**31)), 2.0) for _ in range(k)]
            lam = rng.dirichlet(np.ones(k))
            out, rep = average_net(nets, lam)
            X = rng.uniform(-3, 3, (1000, widths[0]))
            ref = sum(l * nnet.forward(n, X) for l, n in zip(lam, nets))
            worst = max(worst, float(np.max(np.abs(nnet.forward(out, X) - ref))))
            counts_ok &= rep.output_params == k * arch.n_params
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and counts_ok and dt < 30
    record_criterion(4, "average net equals weighted average", ok,
                     f"max deviation {worst:.1e} (<= 1e-6), param count K*p {'ok' if counts_ok else 'WRONG'}, "
                     f"{dt:.1f}s (< 30s)")
    assert ok


def test_criterion_5_mixture_tv():
    t0 = time.perf_counter()
    R, K = 10.0, 3
    nets = [pl_generator([0, 0.4, 1], [0.1, 0.8, 0.5]),
            pl_generator([0, 1], [0.9, 0.2]),
            pl_generator([0, 0.3, 0.7, 1], [0.5, 0.6, 0.0, 0.3])]
    mix, rep = mixture_net(nets, R, tv_samples=1_000_000, seed=5, bins=200)
    xs = np.linspace(0, 1, 10_000)
    bks = np.arange(K + 1) / K
    away = np.min(np.abs(xs[:, None] - bks[None, :]), axis=1) > rep.delta
    seg = np.minimum((xs * K).astype(int), K - 1)
    ref = np.empty_like(xs)
    for s in range(K):
        sel = seg == s
        ref[sel] = nnet.forward(nets[s], (K * (xs[sel] - bks[s]))[:, None])[:, 0]
    interior = float(np.max(np.abs(nnet.forward(mix, xs[:, None])[:, 0] - ref)[away]))
    dt = time.perf_counter() - t0
    ok = rep.measured_tv <= 1 / R + 0.05 and interior <= 1e-9 and dt < 60 and rep.delta == 1 / (K * R)
    record_criterion(5, "mixture net TV and interior exactness", ok,
                     f"TV {rep.measured_tv:.4f} (<= {1 / R + 0.05:.2f}), interior max err {interior:.1e} "
                     f"(<= 1e-9), {dt:.1f}s (< 60s)")
    assert ok


def test_criterion_6_bound_calculators():
    t0 = time.perf_counter()
    k = k_epsilon_bounds(BoundInputs(1, 1, 1, 1, 1, 16, 16, 0.5))
    split = capacity_split(BoundInputs(1, 1, 1, 1, 1, 10**6, 10**6, 1.0))
    vac = capacity_split(BoundInputs(1, 1, 10, 10, 10, 100, 100, 0.05))
    sig6 = lambda a, b: float(f"{a:.6g}") == float(f"{b:.6g}")
    checks = {
        "813.6": sig6(k.k_eps_omega, 256 * math.log(24)) and round(k.k_eps_omega, 1) == 813.6,
        "16 log 32": sig6(k.log_covering_theta, 16 * math.log(32)),
        "p_eps 167": split.p_eps == 167 and not split.vacuous,
        "vacuous": vac.vacuous and vac.eps_sqrt_p_below_one,
    }
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 1
    record_criterion(6, "bound calculator anchors", ok,
                     f"K={k.k_eps_omega:.6g}, log N={k.log_covering_theta:.6g}, p_eps={split.p_eps}, "
                     f"vacuous={vac.vacuous}; {', '.join(n for n, v in checks.items() if not v) or 'all anchors match'}")
    assert ok


def test_criterion_7_matrix_baseline():
    t0 = time.perf_counter()
    rps = MatrixGame(np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], float))
    two = MatrixGame(np.array([[2, -1], [-1, 1]], float))
    blotto = antisymmetrized(build_blotto_matrix(5, 5, 3))
    brackets = {}
    for name, game, v in (("rps", rps, 0.0), ("blotto56", blotto, 0.0), ("2x2", two, 0.2)):
        r = mw_solve(game, 100_000)
        brackets[name] = (r.value_lower, r.value_upper, r.value_lower - 1e-2 <= v <= r.value_upper + 1e-2)
    Ts = np.array([1_000, 2_000, 5_000, 10_000])
    slopes = {}
    for name, game in (("2x2", two), ("blotto56", blotto)):
        gaps = [mw_solve(game, int(T)).duality_gap for T in Ts]
        slopes[name] = float(np.polyfit(np.log(Ts), np.log(gaps), 1)[0])
    dt = time.perf_counter() - t0
    ok = (all(b[2] for b in brackets.values()) and all(-0.6 <= s <= -0.4 for s in slopes.values())
          and blotto.shape == (56, 56) and dt < 60)
    detail = ", ".join(f"{n} [{lo:.4f}, {hi:.4f}]" for n, (lo, hi, _) in brackets.items())
    detail += ", slopes " + ", ".join(f"{n} {s:.3f}" for n, s in slopes.items()) + f", {dt:.1f}s (< 60s)"
    record_criterion(7, "multiplicative-weights brackets and gap rate", ok, detail)
    assert ok


def test_criterion_8_determinism(sweep, tmp_path):
    out, code, parallel, _ = sweep
    assert code == 0
    seed = 7
    cfg = out / "sweep.json"
    other = 2 if parallel == 1 else 1
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "again"), "--seeds", f"{seed}-{seed}",
                     "--parallel", str(other)]) == 0
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "single"), "--seed", str(seed)]) == 0
    ref = (out / "sweep" / f"seed{seed}" / "trace.csv").read_bytes()
    same_sweep = (tmp_path / "again" / f"seed{seed}" / "trace.csv").read_bytes() == ref
    same_single = (tmp_path / "single" / "trace.csv").read_bytes() == ref
    ok = same_sweep and same_single
    record_criterion(8, "byte-identical trace across --parallel", ok,
                     f"seed {seed}: --parallel {parallel} vs {other} {'identical' if same_sweep else 'DIFFER'}, "
                     f"single run {'identical' if same_single else 'DIFFER'} ({len(ref)} bytes)")
    assert ok
