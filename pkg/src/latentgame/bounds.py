"""Closed-form capacity bounds: finite-mixture sizes and the sub-network size/radius split.

Notation: the maximising player's parameters ``w`` live in ``R^d`` and the
minimising player's ``theta`` in ``R^p``, both in a ball/box of radius ``R``.
The mixture size needed by the maximiser is governed by how hard the
minimiser's set is to cover, and vice versa.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass


class BoundDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    D_w: float
    D_theta: float
    L: float
    L_tilde: float
    R: float
    p: int
    d: int
    epsilon: float

    def __post_init__(self):
        for name in ("D_w", "D_theta", "L", "L_tilde", "R", "p", "d", "epsilon"):
            if not getattr(self, name) > 0:
                raise BoundDomainError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass
class BoundReport:
    k_eps_omega: float
    k_eps_theta: float
    k_eps_omega_cover: float
    k_eps_theta_cover: float
    log_covering_theta: float
    log_covering_omega: float
    p_eps: int | None = None
    r_eps: float | None = None
    vacuous: bool | None = None
    eps_sqrt_p_below_one: bool | None = None
    k_eps_sub: float | None = None
    size_condition: bool | None = None
    radius_condition: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _log_arg(value: float, inequality: str) -> float:
    if not value > 1.0:
        raise BoundDomainError(f"logarithm argument must exceed 1: {inequality} (got {value:.6g})")
    return math.log(value)


def log_covering(dim: int, L: float, R: float, epsilon: float) -> float:
    """Upper bound ``dim * log(4 L R sqrt(dim) / eps)`` on the log covering number at scale ``eps/(2L)``."""
    return dim * _log_arg(4 * L * R * math.sqrt(dim) / epsilon, "4*L*R*sqrt(dim)/epsilon > 1")


def k_epsilon_bounds(inp: BoundInputs) -> BoundReport:
    """Mixture sizes sufficient for an epsilon-equilibrium of finite mixtures.

    ``k_eps_omega``/``k_eps_theta`` are the closed forms
    ``4 D^2 dim / eps^2 * ln(6 R L / eps^2)``; the ``_cover`` variants are
    ``4 D^2 / eps^2 * log N`` with the log covering bound. Real numbers;
    callers take the ceiling.
    """
    eps2 = inp.epsilon ** 2
    ln_main = _log_arg(6 * inp.R * inp.L / eps2, "6*R*L/epsilon^2 > 1")
    log_n_theta = log_covering(inp.p, inp.L, inp.R, inp.epsilon)
    log_n_omega = log_covering(inp.d, inp.L, inp.R, inp.epsilon)
    return BoundReport(
        k_eps_omega=4 * inp.D_w ** 2 * inp.p / eps2 * ln_main,
        k_eps_theta=4 * inp.D_theta ** 2 * inp.d / eps2 * ln_main,
        k_eps_omega_cover=4 * inp.D_w ** 2 / eps2 * log_n_theta,
        k_eps_theta_cover=4 * inp.D_theta ** 2 / eps2 * log_n_omega,
        log_covering_theta=log_n_theta,
        log_covering_omega=log_n_omega,
    )


def capacity_split(inp: BoundInputs) -> BoundReport:
    """Sub-network size ``p_eps`` and radius ``r_eps`` for which the big nets reach an approximate equilibrium.

    ``p_eps = floor(eps/(2D) * sqrt(p / ln(4 L R sqrt(p) / eps)) - 6)`` with
    ``D = max(D_w, D_theta)`` and ``r_eps = R p_eps / p``. A formula value
    below 1 is reported as ``p_eps = 0`` with ``vacuous`` set. The two
    sufficient conditions ``(p_eps + 6) K <= p`` and ``K r_eps <= R`` are
    checked with ``K = 4 D^2 p_eps / eps^2 * log(4 L r_eps sqrt(p_eps) / eps)``.
    """
    report = k_epsilon_bounds(inp)
    D = max(inp.D_w, inp.D_theta)
    ln_p = _log_arg(4 * inp.L * inp.R * math.sqrt(inp.p) / inp.epsilon, "4*L*R*sqrt(p)/epsilon > 1")
    raw = inp.epsilon / (2 * D) * math.sqrt(inp.p / ln_p) - 6
    p_eps = math.floor(raw)
    report.eps_sqrt_p_below_one = inp.epsilon * math.sqrt(inp.p) < 1
    report.vacuous = p_eps < 1 or report.eps_sqrt_p_below_one
    if p_eps < 1:
        p_eps = 0
    report.p_eps = p_eps
    report.r_eps = inp.R * p_eps / inp.p
    if p_eps >= 1:
        arg = 4 * inp.L * report.r_eps * math.sqrt(p_eps) / inp.epsilon
        if arg > 1:
            k = 4 * D ** 2 / inp.epsilon ** 2 * p_eps * math.log(arg)
            report.k_eps_sub = k
            report.size_condition = (p_eps + 6) * k <= inp.p
            report.radius_condition = k * report.r_eps <= inp.R
    if report.k_eps_sub is None:
        report.size_condition = False
        report.radius_condition = False
    return report
