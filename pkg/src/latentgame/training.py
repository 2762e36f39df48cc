"""Gradient descent-ascent with Adam on the latent differentiable-Blotto payoff."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nnet
from .exploit import suboptimality
from .games import ConfigError, LatentGameSpec, check_net_for_spec, latent_streams, payoff_on_latents
from .nnet import Architecture, GradBuffer, NetParams, ShapeError
from .seeding import derived_seed

log = logging.getLogger(__name__)

TRACE_HEADER = ["step", "payoff_est", "grad_norm_f", "grad_norm_g", "subopt_f", "subopt_g"]


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    spec: LatentGameSpec = field(default_factory=LatentGameSpec)
    arch: Architecture | None = None
    steps: int = 800
    batch_size: int = 128
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.99
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 100
    eval_samples: int = 5000
    init_scale: float = 6 ** 0.5  # He-uniform bound sqrt(6/fan_in)
    update: str = "simultaneous"
    maximizer: str = "f"
    br_iters: int = 500
    br_step_size: float = 0.1
    br_restarts: int = 10

    def __post_init__(self):
        if isinstance(self.spec, dict):
            self.spec = LatentGameSpec.from_dict(self.spec)
        if isinstance(self.arch, dict):
            self.arch = Architecture.from_dict(self.arch)
        if self.arch is None:
            self.arch = nnet.default_architecture(self.spec.battlefields, self.spec.latent_dim)
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be nonnegative")
        if self.update not in ("simultaneous", "alternating"):
            raise ConfigError(f"unknown update scheme {self.update!r}")
        if self.maximizer not in ("f", "g"):
            raise ConfigError(f"maximizer must be 'f' or 'g', got {self.maximizer!r}")
        if self.spec.payoff != "diff_blotto":
            raise ConfigError("training needs the differentiable payoff 'diff_blotto'")
        if self.arch.output_head != "softmax" or self.arch.d_out != self.spec.battlefields \
                or self.arch.d_in != self.spec.latent_dim:
            raise ConfigError("architecture must map latent_dim inputs to a softmax over the battlefields")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["spec"] = self.spec.to_dict()
        d["arch"] = self.arch.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class AdamState:
    m: GradBuffer
    v: GradBuffer
    t: int = 0

    @classmethod
    def fresh(cls, net: NetParams) -> "AdamState":
        return cls(GradBuffer.zeros_like(net), GradBuffer.zeros_like(net), 0)


@dataclass
class TraceRow:
    step: int
    payoff_est: float
    grad_norm_f: float
    grad_norm_g: float
    subopt_f: float | None = None
    subopt_g: float | None = None


@dataclass
class TrainTrace:
    rows: list[TraceRow] = field(default_factory=list)
    # suboptimality of the initial nets, before any update
    initial: tuple[float, float] | None = None

    def subopt_at(self, step: int) -> tuple[float, float]:
        if step == 0:
            if self.initial is None:
                raise KeyError("no initial evaluation recorded")
            return self.initial
        for r in self.rows:
            if r.step == step and r.subopt_f is not None:
                return r.subopt_f, r.subopt_g
        raise KeyError(f"no evaluation at step {step}")

    def eval_steps(self) -> list[int]:
        return ([0] if self.initial is not None else []) + [r.step for r in self.rows if r.subopt_f is not None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.rows:
            w.writerow([r.step] + [_fmt(getattr(r, k)) for k in TRACE_HEADER[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, initial=None) -> "TrainTrace":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        rows = [TraceRow(int(d["step"]), *(_parse(d[k]) for k in TRACE_HEADER[1:])) for d in reader]
        return cls(rows, initial)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _parse(s: str):
    return None if s == "" else float(s)


def adam_update(params: NetParams, grads: GradBuffer, state: AdamState, lr: float, beta1: float,
                beta2: float, eps: float, direction: str = "descent") -> tuple[NetParams, AdamState]:
    """One bias-corrected Adam step; ``direction`` picks ascent or descent."""
    if not grads.matches(params) or not state.m.matches(params):
        raise ShapeError("gradient / optimizer state shapes do not match the parameters")
    if direction not in ("ascent", "descent"):
        raise ValueError(f"direction must be 'ascent' or 'descent', got {direction!r}")
    sign = 1.0 if direction == "ascent" else -1.0
    t = state.t + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.weights + params.biases, grads.weights + grads.biases,
                          state.m.weights + state.m.biases, state.v.weights + state.v.biases):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_p.append(p + sign * lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    n = len(params.weights)
    out = NetParams(params.arch, new_p[:n], new_p[n:])
    return out, AdamState(GradBuffer(new_m[:n], new_m[n:]), GradBuffer(new_v[:n], new_v[n:]), t)


def _roles(f, g, cfg: TrainConfig):
    return (f, g) if cfg.maximizer == "f" else (g, f)


def gda_step(f: NetParams, g: NetParams, states: tuple[AdamState, AdamState], cfg: TrainConfig,
             step_index: int):
    """One descent-ascent step on a fresh latent batch keyed by ``step_index``.

    ``states`` is ``(state_f, state_g)``. In the simultaneous scheme both
    gradients are taken at the incoming ``(f, g)`` before either moves.
    Returns ``(f', g', states', row)``.
    """
    mx, mn = _roles(f, g, cfg)
    s_mx, s_mn = _roles(*states, cfg)
    z_mx, z_mn = latent_streams(derived_seed(cfg.seed, "batch", step_index), cfg.batch_size, cfg.spec)
    est = payoff_on_latents(mx, mn, z_mx, z_mn)
    g_mx, g_mn = est.grad_f, est.grad_g
    if not (g_mx.all_finite() and g_mn.all_finite() and np.isfinite(est.value)):
        raise TrainingAborted(f"non-finite payoff or gradient at step {step_index}")
    adam = dict(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    mx2, s_mx2 = adam_update(mx, g_mx, s_mx, direction="ascent", **adam)
    if cfg.update == "alternating":
        g_mn = payoff_on_latents(mx2, mn, z_mx, z_mn).grad_g
        if not g_mn.all_finite():
            raise TrainingAborted(f"non-finite gradient at step {step_index}")
    mn2, s_mn2 = adam_update(mn, g_mn, s_mn, direction="descent", **adam)

    value = est.value if cfg.maximizer == "f" else -est.value
    gn_f, gn_g = _roles(g_mx.norm(), g_mn.norm(), cfg)
    row = TraceRow(step_index, value, gn_f, gn_g)
    f2, g2 = _roles(mx2, mn2, cfg)
    st = _roles(s_mx2, s_mn2, cfg)
    return f2, g2, st, row


def init_players(cfg: TrainConfig) -> tuple[NetParams, NetParams]:
    mx = nnet.init(cfg.arch, derived_seed(cfg.seed, "init", "max"), cfg.init_scale)
    mn = nnet.init(cfg.arch, derived_seed(cfg.seed, "init", "min"), cfg.init_scale)
    return _roles(mx, mn, cfg)


def evaluate(f: NetParams, g: NetParams, cfg: TrainConfig, step: int) -> tuple[float, float]:
    mx, mn = _roles(f, g, cfg)
    cert = suboptimality(mx, mn, cfg.spec, cfg.eval_samples, derived_seed(cfg.seed, "eval", step),
                         cfg.br_iters, cfg.br_step_size, cfg.br_restarts)
    return _roles(cert.epsilon_f, cert.epsilon_g, cfg)


def train(cfg: TrainConfig, out_dir=None, evaluate_subopt: bool = True,
          init: tuple[NetParams, NetParams] | None = None):
    """Run ``cfg.steps`` GDA steps, evaluating suboptimality every ``eval_every`` steps.

    Trace rows are the steps ``1..steps``; the evaluation of the initial nets is
    kept in ``trace.initial``. With ``out_dir`` set, checkpoints
    ``f_step{N}.json`` / ``g_step{N}.json`` are written at every evaluation step.
    """
    f, g = init if init is not None else init_players(cfg)
    check_net_for_spec(f, cfg.spec, "f")
    check_net_for_spec(g, cfg.spec, "g")
    states = (AdamState.fresh(f), AdamState.fresh(g))
    trace = TrainTrace()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def checkpoint(step):
        if out is not None:
            nnet.save(f, out / f"f_step{step}.json")
            nnet.save(g, out / f"g_step{step}.json")

    if cfg.steps == 0:
        checkpoint(0)
        return f, g, trace
    if evaluate_subopt:
        trace.initial = evaluate(f, g, cfg, 0)
    checkpoint(0)
    for step in range(1, cfg.steps + 1):
        f, g, states, row = gda_step(f, g, states, cfg, step)
        is_eval = step == cfg.steps or (cfg.eval_every > 0 and step % cfg.eval_every == 0)
        if is_eval:
            if evaluate_subopt:
                row.subopt_f, row.subopt_g = evaluate(f, g, cfg, step)
                log.info("step %d payoff %.5f subopt f %.3e g %.3e", step, row.payoff_est, row.subopt_f, row.subopt_g)
            checkpoint(step)
        trace.rows.append(row)
    return f, g, trace
