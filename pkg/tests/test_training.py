import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from latentgame import nnet
from latentgame.games import ConfigError, LatentGameSpec, latent_streams, payoff_on_latents
from latentgame.nnet import GradBuffer, ShapeError
from latentgame.seeding import derived_seed
from latentgame.training import (TRACE_HEADER, AdamState, TrainConfig, TrainTrace, adam_update, gda_step,
                                 init_players, train)


def small_cfg(**kw):
    base = dict(steps=30, eval_every=10, eval_samples=200, br_iters=60, br_restarts=2, seed=4)
    base.update(kw)
    return TrainConfig(**base)


def const_grad(net, value):
    return GradBuffer([np.full_like(w, value) for w in net.weights], [np.full_like(b, value) for b in net.biases])


class TestAdam:
    def test_zero_grad_leaves_params(self):
        net = nnet.init(nnet.default_architecture(), 0, 2.0)
        out, st = adam_update(net, GradBuffer.zeros_like(net), AdamState.fresh(net), 1e-3, 0.5, 0.99, 1e-8)
        np.testing.assert_array_equal(out.flat(), net.flat())
        assert st.t == 1

    @pytest.mark.parametrize("g", [1e-3, 0.2, -3.0])
    @pytest.mark.parametrize("direction", ["ascent", "descent"])
    def test_first_step_magnitude(self, g, direction):
        net = nnet.init(nnet.default_architecture(), 0, 2.0)
        lr, eps = 1e-3, 1e-8
        out, _ = adam_update(net, const_grad(net, g), AdamState.fresh(net), lr, 0.5, 0.99, eps, direction)
        step = out.flat() - net.flat()
        sign = np.sign(g) * (1 if direction == "ascent" else -1)
        np.testing.assert_allclose(step, sign * lr * abs(g) / (abs(g) + eps), rtol=1e-12)
        # folding eps into the uncorrected second moment gives the same step to within 1e-5 relative
        np.testing.assert_allclose(np.abs(step), lr * abs(g) / (abs(g) + eps * np.sqrt(0.01)), rtol=1e-5)

    def test_deterministic_and_shape_checked(self):
        net = nnet.init(nnet.default_architecture(), 0, 2.0)
        grads = const_grad(net, 0.1)
        a = adam_update(net, grads, AdamState.fresh(net), 1e-3, 0.5, 0.99, 1e-8)
        b = adam_update(net, grads, AdamState.fresh(net), 1e-3, 0.5, 0.99, 1e-8)
        np.testing.assert_array_equal(a[0].flat(), b[0].flat())
        other = nnet.init(nnet.Architecture((16, 4, 3)), 0)
        with pytest.raises(ShapeError):
            adam_update(net, GradBuffer.zeros_like(other), AdamState.fresh(net), 1e-3, 0.5, 0.99, 1e-8)

    def test_second_moment_nonnegative(self, rng):
        net = nnet.init(nnet.default_architecture(), 0, 2.0)
        st = AdamState.fresh(net)
        for _ in range(5):
            g = GradBuffer([rng.standard_normal(w.shape) for w in net.weights],
                           [rng.standard_normal(b.shape) for b in net.biases])
            net, st = adam_update(net, g, st, 1e-2, 0.5, 0.99, 1e-8)
        assert np.all(st.v.flat() >= 0) and st.t == 5


class TestConfig:
    def test_round_trip_json(self):
        cfg = small_cfg(lr=3e-4)
        back = TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg

    @pytest.mark.parametrize("bad", [dict(beta1=1.0), dict(batch_size=0), dict(update="jacobi"),
                                     dict(spec={"payoff": "indicator_blotto"}), dict(maximizer="h")])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            small_cfg(**bad)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"stepz": 3})


class TestGdaStep:
    def test_zero_nets_payoff_zero(self):
        cfg = small_cfg(init_scale=0.0)
        f, g = init_players(cfg)
        *_, row = gda_step(f, g, (AdamState.fresh(f), AdamState.fresh(g)), cfg, 1)
        assert row.payoff_est == 0.0

    def test_zero_lr_keeps_nets(self):
        cfg = small_cfg(lr=0.0)
        f, g = init_players(cfg)
        f2, g2, _, row = gda_step(f, g, (AdamState.fresh(f), AdamState.fresh(g)), cfg, 1)
        assert f2.equals(f) and g2.equals(g)
        assert row.grad_norm_f > 0 and row.grad_norm_g > 0

    def test_simultaneous_uses_pre_step_pair(self):
        cfg = small_cfg()
        f, g = init_players(cfg)
        states = (AdamState.fresh(f), AdamState.fresh(g))
        f2, g2, _, row = gda_step(f, g, states, cfg, 7)
        zf, zg = latent_streams(derived_seed(cfg.seed, "batch", 7), cfg.batch_size, cfg.spec)
        est = payoff_on_latents(f, g, zf, zg)
        adam = dict(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
        ef, _ = adam_update(f, est.grad_f, states[0], direction="ascent", **adam)
        eg, _ = adam_update(g, est.grad_g, states[1], direction="descent", **adam)
        np.testing.assert_array_equal(f2.flat(), ef.flat())
        np.testing.assert_array_equal(g2.flat(), eg.flat())
        assert row.payoff_est == est.value

    def test_alternating_changes_only_the_minimizer_update(self):
        cfg = small_cfg()
        alt = small_cfg(update="alternating")
        f, g = init_players(cfg)
        states = (AdamState.fresh(f), AdamState.fresh(g))
        fs, gs, _, rs = gda_step(f, g, states, cfg, 3)
        fa, ga, _, ra = gda_step(f, g, states, alt, 3)
        np.testing.assert_array_equal(fs.flat(), fa.flat())
        assert not gs.equals(ga)
        assert rs.grad_norm_f == ra.grad_norm_f

    def test_abort_on_nonfinite(self):
        cfg = small_cfg()
        f, g = init_players(cfg)
        bad = f.copy()
        bad.weights[0] = bad.weights[0] * 1e308
        from latentgame.training import TrainingAborted
        with np.errstate(all="ignore"), pytest.raises(TrainingAborted):
            gda_step(bad, g, (AdamState.fresh(f), AdamState.fresh(g)), cfg, 1)


class TestTrain:
    def test_zero_steps(self, tmp_path):
        cfg = small_cfg(steps=0)
        f, g, trace = train(cfg, out_dir=tmp_path)
        f0, g0 = init_players(cfg)
        assert f.equals(f0) and g.equals(g0)
        assert trace.rows == [] and trace.to_csv() == ",".join(TRACE_HEADER) + "\n"

    def test_trace_layout_and_checkpoints(self, tmp_path):
        cfg = small_cfg()
        f, g, trace = train(cfg, out_dir=tmp_path)
        assert [r.step for r in trace.rows] == list(range(1, 31))
        assert trace.eval_steps() == [0, 10, 20, 30]
        assert all(abs(r.payoff_est) <= 0.5 and r.grad_norm_f >= 0 for r in trace.rows)
        for s in (0, 10, 20, 30):
            assert (tmp_path / f"f_step{s}.json").exists() and (tmp_path / f"g_step{s}.json").exists()
        assert nnet.load(tmp_path / "f_step30.json").equals(f)
        lines = trace.to_csv().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER) and lines[1].endswith(",,")

    def test_csv_round_trip(self):
        _, _, trace = train(small_cfg(steps=12))
        back = TrainTrace.from_csv(trace.to_csv(), trace.initial)
        assert back == trace

    def test_replay_is_byte_identical(self):
        a = train(small_cfg())[2].to_csv()
        b = train(small_cfg())[2].to_csv()
        assert a == b

    def test_exchange_symmetry(self):
        t1 = train(small_cfg())[2]
        t2 = train(small_cfg(maximizer="g"))[2]
        for a, b in zip(t1.rows, t2.rows):
            assert b.payoff_est == -a.payoff_est
            assert (b.grad_norm_f, b.grad_norm_g) == (a.grad_norm_g, a.grad_norm_f)
            assert (b.subopt_f, b.subopt_g) == (a.subopt_g, a.subopt_f)
        assert t2.initial == t1.initial[::-1]

    def test_other_latent_prior(self):
        cfg = small_cfg(spec=LatentGameSpec(latent_dim=4, latent_dist="uniform01"), steps=5)
        _, _, trace = train(cfg)
        assert len(trace.rows) == 5


@pytest.mark.xfail(strict=True, reason="logged minibatch gradient norm rises while suboptimality falls; "
                                       "see the decisions ledger")
def test_grad_norm_and_suboptimality_co_decrease():
    rhos = []
    for seed in range(3):
        _, _, trace = train(TrainConfig(seed=seed, eval_every=100, eval_samples=1000, br_restarts=4))
        rows = [r for r in trace.rows if r.subopt_f is not None]
        rhos.append(spearmanr([r.grad_norm_f + r.grad_norm_g for r in rows],
                              [r.subopt_f + r.subopt_g for r in rows])[0])
    assert np.median(rhos) > 0
