"""Small discrete games solved by multiplicative weights, as ground truth for the latent approach."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

DEFAULT_CAP = 10**6


class CapExceeded(ValueError):
    pass


@dataclass
class MatrixGame:
    payoff: np.ndarray
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.payoff = np.asarray(self.payoff, dtype=np.float64)
        if self.payoff.ndim != 2 or 0 in self.payoff.shape:
            raise ValueError(f"payoff must be a nonempty matrix, got shape {self.payoff.shape}")
        if not np.all(np.isfinite(self.payoff)):
            raise ValueError("payoff matrix has non-finite entries")
        n, m = self.payoff.shape
        self.row_labels = list(self.row_labels) or list(range(n))
        self.col_labels = list(self.col_labels) or list(range(m))
        if len(self.row_labels) != n or len(self.col_labels) != m:
            raise ValueError("label counts do not match the payoff shape")

    @property
    def shape(self):
        return self.payoff.shape


@dataclass
class SolveResult:
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    value_lower: float
    value_upper: float
    iterations: int

    @property
    def duality_gap(self) -> float:
        return self.value_upper - self.value_lower

    @property
    def value(self) -> float:
        return 0.5 * (self.value_lower + self.value_upper)

    def to_dict(self) -> dict:
        return {
            "value_lower": self.value_lower, "value_upper": self.value_upper,
            "duality_gap": self.duality_gap, "iterations": self.iterations,
            "row_strategy": self.row_strategy.tolist(), "col_strategy": self.col_strategy.tolist(),
        }


def enumerate_allocations(S: int, K: int, cap: int = DEFAULT_CAP) -> list[tuple[int, ...]]:
    """All ``a`` in ``N^K`` with ``sum(a) <= S``, in lexicographic order."""
    if S < 0 or K < 1:
        raise ValueError(f"need S >= 0 and K >= 1, got S={S}, K={K}")
    count = comb(S + K, K)
    if count > cap:
        raise CapExceeded(f"{count} allocations for S={S}, K={K} exceeds the cap {cap}")
    out = []

    def rec(prefix, left, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for v in range(left + 1):
            rec(prefix + [v], left - v, slots - 1)

    rec([], S, K)
    return out


def build_blotto_matrix(S1: int, S2: int, K: int, cap: int = DEFAULT_CAP) -> MatrixGame:
    """Win-fraction Blotto payoff between every pair of integer allocations."""
    rows = enumerate_allocations(S1, K, cap)
    cols = enumerate_allocations(S2, K, cap)
    if len(rows) * len(cols) > cap:
        raise CapExceeded(f"{len(rows)} x {len(cols)} matrix exceeds the cap {cap}")
    A = np.array(rows)
    B = np.array(cols)
    M = (A[:, None, :] > B[None, :, :]).mean(axis=2)
    return MatrixGame(M, rows, cols)


def antisymmetrized(game: MatrixGame) -> MatrixGame:
    if game.shape[0] != game.shape[1]:
        raise ValueError("antisymmetrization needs a square game")
    return MatrixGame(game.payoff - game.payoff.T, game.row_labels, game.col_labels)


def mw_solve(game: MatrixGame, iterations: int = 10_000, eta: float | None = None) -> SolveResult:
    """Both players run Hedge against each other; the averaged strategies bracket the value.

    Payoffs are rescaled to [0, 1] internally. With the default step
    ``sqrt(8 ln n / T)`` per player the bracket width is at most
    ``range * (sqrt(ln n_rows / 2T) + sqrt(ln n_cols / 2T))``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    A = game.payoff
    lo, hi = float(A.min()), float(A.max())
    span = hi - lo
    U = (A - lo) / span if span > 0 else np.zeros_like(A)
    n, m = A.shape
    eta_r = np.sqrt(8 * np.log(n) / iterations) if eta is None else eta
    eta_c = np.sqrt(8 * np.log(m) / iterations) if eta is None else eta
    gain_r = np.zeros(n)
    loss_c = np.zeros(m)
    sum_x = np.zeros(n)
    sum_y = np.zeros(m)
    for _ in range(iterations):
        x = np.exp(eta_r * (gain_r - gain_r.max()))
        x /= x.sum()
        y = np.exp(-eta_c * (loss_c - loss_c.min()))
        y /= y.sum()
        sum_x += x
        sum_y += y
        gain_r += U @ y
        loss_c += x @ U
    xbar = sum_x / iterations
    ybar = sum_y / iterations
    lower = float(np.min(xbar @ A))
    upper = float(np.max(A @ ybar))
    return SolveResult(xbar, ybar, lower, upper, iterations)


def exploitability(game: MatrixGame, row_strategy, col_strategy, value: float | None = None,
                   iterations: int = 10_000) -> tuple[float, float]:
    """How much each strategy concedes against a best response, relative to the game value.

    ``value`` defaults to the midpoint of the multiplicative-weights bracket.
    """
    x = np.asarray(row_strategy, dtype=np.float64)
    y = np.asarray(col_strategy, dtype=np.float64)
    n, m = game.shape
    if x.shape != (n,) or y.shape != (m,):
        raise ValueError(f"strategy shapes {x.shape}, {y.shape} do not match game {game.shape}")
    for s in (x, y):
        if np.any(s < -1e-12) or abs(s.sum() - 1) > 1e-9:
            raise ValueError("strategies must lie on the simplex")
    if value is None:
        value = mw_solve(game, iterations).value
    eps_row = value - float(np.min(x @ game.payoff))
    eps_col = float(np.max(game.payoff @ y)) - value
    return eps_row, eps_col
