"""Best responses against sampled latent strategies and the exploitability certificate.

The game value of symmetric differentiable Blotto is 0 (the payoff is
antisymmetric and both players have the same strategy class), so a best
response's value against a player's sampled mixture is directly how far that
player is from equilibrium.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .games import DomainError, LatentGameSpec, check_net_for_spec, check_simplex, draw_latents
from .nnet import NetParams, centered_sigmoid, forward
from .seeding import derived_seed, substream

FEASIBLE_TOL = 1e-12


@dataclass
class StrategySample:
    points: np.ndarray
    source_seed: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise DomainError(f"strategy sample must be 2-D, got shape {self.points.shape}")
        if len(self.points):
            check_simplex(self.points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]


@dataclass
class BestResponseResult:
    allocation: np.ndarray
    value: float
    iterations: int
    converged: bool
    restarts_used: int


@dataclass
class EquilibriumCertificate:
    epsilon_f: float
    epsilon_g: float
    game_value_assumed: float = 0.0
    n: int = 0
    seed: int = 0
    br_iters: int = 0
    indicator_f: float | None = None
    indicator_g: float | None = None
    br_f: list = field(default_factory=list)
    br_g: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.epsilon_f + self.epsilon_g

    def to_dict(self) -> dict:
        return {
            "epsilon_f": self.epsilon_f, "epsilon_g": self.epsilon_g,
            "game_value_assumed": self.game_value_assumed,
            "n": self.n, "seed": self.seed, "br_iters": self.br_iters,
            "indicator_f": self.indicator_f, "indicator_g": self.indicator_g,
            "br_f": list(self.br_f), "br_g": list(self.br_g),
        }


def sample_strategies(net: NetParams, spec: LatentGameSpec, n: int, seed: int) -> StrategySample:
    """Push ``n`` i.i.d. latents through ``net``."""
    check_net_for_spec(net, spec)
    if n == 0:
        return StrategySample(np.zeros((0, spec.battlefields)), seed)
    z = draw_latents(spec, n, substream(seed, "strategies"))
    return StrategySample(forward(net, z), seed)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (row-wise for 2-D input).

    Sort-and-threshold: with ``u`` sorted descending, ``rho`` is the largest
    index with ``u_rho > (sum_{i<=rho} u_i - 1) / rho`` and the result is
    ``max(v - tau, 0)`` for that threshold. Rows that are already feasible are
    returned untouched, which makes the map exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    out = V.copy()
    feasible = np.all(V >= 0.0, axis=1) & (np.abs(V.sum(axis=1) - 1.0) <= FEASIBLE_TOL)
    todo = ~feasible
    if np.any(todo):
        W = V[todo]
        u = -np.sort(-W, axis=1)
        css = np.cumsum(u, axis=1) - 1.0
        idx = np.arange(1, W.shape[1] + 1)
        rho = np.count_nonzero(u - css / idx > 0.0, axis=1)
        tau = css[np.arange(W.shape[0]), rho - 1] / rho
        out[todo] = np.maximum(W - tau[:, None], 0.0)
    return out[0] if single else out


def probe_points(sample: StrategySample) -> np.ndarray:
    """Vertices, edge midpoints, the barycentre and the sample mean."""
    k = sample.k
    eye = np.eye(k)
    mids = [(eye[i] + eye[j]) / 2 for i, j in combinations(range(k), 2)]
    pts = [*eye, *mids, np.full(k, 1.0 / k), project_simplex(sample.points.mean(axis=0))]
    return np.array(pts)


def _objective(X: np.ndarray, Y: np.ndarray, role: str) -> np.ndarray:
    """Exact mean payoff of each row of ``X`` against the sample ``Y``."""
    if role == "row":
        return np.array([np.mean(centered_sigmoid(x - Y)) for x in X])
    return np.array([-np.mean(centered_sigmoid(Y - x)) for x in X])


def _coordinate_tables(Y: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-battlefield mean payoff and its derivative, tabulated on ``grid``.

    The objective separates as ``(1/K) sum_k F_k(x_k)`` with
    ``F_k(s) = mean_j sigma(s - y_jk)``, so the ascent only needs these 1-D curves.
    """
    n, k = Y.shape
    val = np.empty((len(grid), k))
    der = np.empty((len(grid), k))
    for c in range(k):
        t = np.tanh(0.5 * (grid[:, None] - Y[None, :, c]))
        val[:, c] = 0.5 * t.mean(axis=1)
        der[:, c] = 0.25 * (1.0 - t * t).mean(axis=1)
    return val / k, der / k


def _interp_columns(X: np.ndarray, grid: np.ndarray, table: np.ndarray) -> np.ndarray:
    return np.column_stack([np.interp(X[:, c], grid, table[:, c]) for c in range(X.shape[1])])


def best_response(sample: StrategySample, maximize_for: str = "row", iters: int = 500,
                  step_size: float = 0.1, restarts: int = 10, seed: int = 0,
                  grid_size: int = 1025) -> BestResponseResult:
    """Projected gradient ascent on the simplex against an empirical mixture.

    ``row`` maximises ``x -> mean_y phi(x, y)``; ``column`` maximises
    ``x -> mean_y -phi(y, x)``, the same function by antisymmetry. Steps follow
    the normalised in-simplex gradient direction with length
    ``step_size / sqrt(t)``, using per-coordinate tables of the objective
    (``grid_size`` points on [0, 1]). Starting points are the probe set plus
    ``restarts`` Dirichlet(1) draws. Every start and the best iterate of every
    path are re-scored exactly and the best is returned.
    """
    if maximize_for not in ("row", "column"):
        raise ValueError(f"maximize_for must be 'row' or 'column', got {maximize_for!r}")
    if sample.n == 0:
        raise DomainError("cannot best-respond to an empty strategy sample")
    Y = sample.points
    k = sample.k
    rng = substream(seed, "best_response")
    starts = np.vstack([probe_points(sample), rng.dirichlet(np.ones(k), size=restarts).reshape(-1, k)])
    grid = np.linspace(0.0, 1.0, grid_size)
    val_tab, der_tab = _coordinate_tables(Y, grid)
    if not (np.all(np.isfinite(val_tab)) and np.all(np.isfinite(der_tab))):
        raise FloatingPointError("non-finite best-response objective")

    X = project_simplex(starts)
    best_x = X.copy()
    best_v = np.full(len(X), -np.inf)
    history = []
    it = 0
    for it in range(1, iters + 1):
        vals = _interp_columns(X, grid, val_tab).sum(axis=1)
        better = vals > best_v
        best_v[better] = vals[better]
        best_x[better] = X[better]
        history.append(best_v.max())
        grad = _interp_columns(X, grid, der_tab)
        d = grad - grad.mean(axis=1, keepdims=True)
        norm = np.linalg.norm(d, axis=1, keepdims=True)
        d = np.divide(d, norm, out=np.zeros_like(d), where=norm > 1e-300)
        X = project_simplex(X + (step_size / np.sqrt(it)) * d)

    cands = np.vstack([project_simplex(starts), best_x])
    final = _objective(cands, Y, maximize_for)
    j = int(np.argmax(final))
    window = max(1, iters // 10)
    converged = len(history) > window and history[-1] - history[-1 - window] <= 1e-12
    return BestResponseResult(cands[j].copy(), float(final[j]), it, bool(converged), restarts)


def suboptimality(f: NetParams, g: NetParams, spec: LatentGameSpec, n: int = 5000, seed: int = 0,
                  iters: int = 500, step_size: float = 0.1, restarts: int = 10) -> EquilibriumCertificate:
    """Exploitability of ``f`` (row player) and ``g`` (column player) against fresh best responses.

    ``epsilon_f`` is what a best-responding column player earns against ``f``'s
    sampled mixture and ``epsilon_g`` what a best-responding row player earns
    against ``g``'s, both measured above the game value 0.
    """
    sf = sample_strategies(f, spec, n, derived_seed(seed, "first"))
    sg = sample_strategies(g, spec, n, derived_seed(seed, "second"))
    br_seed = derived_seed(seed, "br")
    rf = best_response(sf, "column", iters, step_size, restarts, br_seed)
    rg = best_response(sg, "row", iters, step_size, restarts, br_seed)
    ind_f = float(np.mean(rf.allocation > sf.points))
    ind_g = float(np.mean(rg.allocation > sg.points))
    return EquilibriumCertificate(rf.value, rg.value, 0.0, n, seed, iters, ind_f, ind_g,
                                  rf.allocation.tolist(), rg.allocation.tolist())
