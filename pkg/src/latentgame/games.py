"""Blotto payoffs and the Monte-Carlo latent-game payoff with pathwise gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import GradBuffer, NetParams, ShapeError, backward, centered_sigmoid, centered_sigmoid_grad, forward
from .seeding import substream

SIMPLEX_TOL = 1e-9
LATENT_DISTS = ("standard_normal", "uniform01")
PAYOFFS = ("diff_blotto", "indicator_blotto")


class ConfigError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class LatentGameSpec:
    battlefields: int = 3
    latent_dim: int = 16
    latent_dist: str = "standard_normal"
    payoff: str = "diff_blotto"

    def __post_init__(self):
        if self.battlefields < 2:
            raise ConfigError(f"need at least 2 battlefields, got {self.battlefields}")
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be positive, got {self.latent_dim}")
        if self.latent_dist not in LATENT_DISTS:
            raise ConfigError(f"unknown latent distribution {self.latent_dist!r}")
        if self.payoff not in PAYOFFS:
            raise ConfigError(f"unknown payoff {self.payoff!r}")

    def to_dict(self) -> dict:
        return {"battlefields": self.battlefields, "latent_dim": self.latent_dim,
                "latent_dist": self.latent_dist, "payoff": self.payoff}

    @classmethod
    def from_dict(cls, d: dict) -> "LatentGameSpec":
        return cls(**d)


@dataclass
class PayoffSample:
    value: float
    grad_f: GradBuffer | None
    grad_g: GradBuffer | None
    batch_size: int


def check_simplex(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < -tol) or np.any(np.abs(x.sum(axis=-1) - 1.0) > tol):
        raise DomainError(f"point(s) not on the simplex within {tol}")
    return x


def _same_length(a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"allocation shapes differ: {np.shape(a)} vs {np.shape(b)}")


def discrete_blotto_payoff(a1, a2) -> float:
    """Fraction of battlefields where ``a1`` has strictly more troops; ties score 0."""
    a1, a2 = np.asarray(a1), np.asarray(a2)
    _same_length(a1, a2)
    return float(np.mean(a1 > a2))


def diff_blotto_payoff(x, y) -> float:
    x, y = check_simplex(x), check_simplex(y)
    _same_length(x, y)
    return float(np.mean(centered_sigmoid(x - y)))


def indicator_blotto_payoff(x, y) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _same_length(x, y)
    return float(np.mean(x > y))


def draw_latents(spec: LatentGameSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.latent_dist == "standard_normal":
        return rng.standard_normal((n, spec.latent_dim))
    return rng.uniform(0.0, 1.0, size=(n, spec.latent_dim))


def latent_streams(seed: int, n: int, spec: LatentGameSpec, swap_streams: bool = False):
    """Latent batches for the first and second player under ``seed``.

    With ``swap_streams`` the players exchange streams, so
    ``estimate(f, g, seed)`` and ``estimate(g, f, seed, swap_streams=True)``
    push identical latents through each net.
    """
    za = draw_latents(spec, n, substream(seed, "latent", "first"))
    zb = draw_latents(spec, n, substream(seed, "latent", "second"))
    return (zb, za) if swap_streams else (za, zb)


def check_net_for_spec(net: NetParams, spec: LatentGameSpec, name: str = "net"):
    arch = net.arch
    if arch.output_head != "softmax" or arch.d_out != spec.battlefields:
        raise ConfigError(f"{name} must have a softmax head of width {spec.battlefields}, "
                          f"got {arch.output_head} of width {arch.d_out}")
    if arch.d_in != spec.latent_dim:
        raise ConfigError(f"{name} input width {arch.d_in} != latent_dim {spec.latent_dim}")


def payoff_on_latents(f: NetParams, g: NetParams, zf: np.ndarray, zg: np.ndarray,
                      payoff: str = "diff_blotto", grads: bool = True) -> PayoffSample:
    """Empirical payoff over the pairs ``(zf[i], zg[i])`` and its exact gradients."""
    n = zf.shape[0]
    x = forward(f, zf)
    y = forward(g, zg)
    if payoff == "indicator_blotto":
        return PayoffSample(float(np.mean(x > y)), None, None, n)
    d = x - y
    value = float(np.mean(centered_sigmoid(d)))
    if not grads:
        return PayoffSample(value, None, None, n)
    up = centered_sigmoid_grad(d) / d.size
    grad_f, _ = backward(f, zf, up)
    grad_g, _ = backward(g, zg, -up)
    return PayoffSample(value, grad_f, grad_g, n)


def latent_payoff_estimate(f: NetParams, g: NetParams, spec: LatentGameSpec, n: int, seed: int,
                           swap_streams: bool = False) -> PayoffSample:
    """Monte-Carlo estimate of the latent-game payoff over ``n`` independent latent pairs.

    For ``diff_blotto`` the gradients are those of this same empirical mean, so
    they are exact for a frozen seed. ``indicator_blotto`` is evaluation-only and
    returns no gradients.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    check_net_for_spec(f, spec, "f")
    check_net_for_spec(g, spec, "g")
    zf, zg = latent_streams(seed, n, spec, swap_streams)
    return payoff_on_latents(f, g, zf, zg, spec.payoff)
