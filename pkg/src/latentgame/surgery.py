"""Structural composition of networks.

``average_net`` builds one net computing a weighted average of K same-shaped
nets exactly. ``mixture_net`` builds one ReLU net on a scalar uniform[0, 1]
latent whose pushforward is within total variation ``(K-1)/(K R)`` of the
uniform mixture of the K pushforwards: the latent interval is split into K
segments, component k is replayed on segment k, and two ramp gadgets cancel
its constant tails outside that segment.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import block_diag

from .games import ConfigError
from .nnet import Architecture, NetParams, forward
from .seeding import substream

CONST_PROBES_LOW = (-10.0, -1.0, -0.5, 0.0)
CONST_PROBES_HIGH = (1.0, 1.5, 2.0, 11.0)


@dataclass
class SurgeryReport:
    input_count: int
    input_params: int
    output_params: int
    param_bound_in: float
    param_bound_out: float
    relu_units: int = 0
    delta: float | None = None
    tv_bound: float | None = None
    measured_tv: float | None = None
    tv_samples: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same_arch(nets: list[NetParams]):
    if not nets:
        raise ConfigError("need at least one net")
    arch = nets[0].arch
    for i, n in enumerate(nets[1:], 1):
        if n.arch != arch:
            raise ConfigError(f"net {i} architecture {n.arch.layer_widths} differs from net 0 {arch.layer_widths}")
    return arch


def average_param_vector(nets: list[NetParams], weights=None) -> np.ndarray:
    """The ``K*p`` parameter vector: each net's parameters with its last layer scaled by its weight."""
    lam = _simplex_weights(weights, len(nets))
    parts = []
    for net, l in zip(nets, lam):
        scaled = net.copy()
        scaled.weights[-1] = l * scaled.weights[-1]
        scaled.biases[-1] = l * scaled.biases[-1]
        parts.append(scaled.flat())
    return np.concatenate(parts)


def _simplex_weights(weights, k: int) -> np.ndarray:
    if weights is None:
        return np.full(k, 1.0 / k)
    lam = np.asarray(weights, dtype=np.float64)
    if lam.shape != (k,) or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise ConfigError(f"weights must be a point of the {k}-simplex, got {weights}")
    return lam


def average_net(nets: list[NetParams], weights=None) -> tuple[NetParams, SurgeryReport]:
    """One net whose output is ``sum_k weights[k] * forward(nets[k], x)`` at every ``x``.

    First-layer weights are stacked, hidden layers are block-diagonal, and the
    last layer concatenates the weight-scaled output maps with bias
    ``sum_k weights[k] * b_k``. Only linear heads are accepted: a softmax or clamp
    does not commute with averaging, so apply it afterwards.
    """
    arch = _check_same_arch(nets)
    if arch.output_head != "linear":
        raise ConfigError(f"average_net needs linear heads, got {arch.output_head!r}")
    lam = _simplex_weights(weights, len(nets))
    k = len(nets)
    L = arch.n_layers
    if L == 1:
        W = sum(l * n.weights[0] for l, n in zip(lam, nets))
        b = sum(l * n.biases[0] for l, n in zip(lam, nets))
        out = NetParams(arch, [W], [b])
    else:
        Ws = [np.vstack([n.weights[0] for n in nets])]
        bs = [np.concatenate([n.biases[0] for n in nets])]
        for i in range(1, L - 1):
            Ws.append(block_diag(*[n.weights[i] for n in nets]))
            bs.append(np.concatenate([n.biases[i] for n in nets]))
        Ws.append(np.hstack([l * n.weights[-1] for l, n in zip(lam, nets)]))
        bs.append(sum(l * n.biases[-1] for l, n in zip(lam, nets)))
        widths = (arch.d_in,) + tuple(k * w for w in arch.layer_widths[1:-1]) + (arch.d_out,)
        out = NetParams(Architecture(widths, arch.hidden_activation, "linear"), Ws, bs)
    report = SurgeryReport(
        input_count=k,
        input_params=arch.n_params,
        output_params=average_param_vector(nets, lam).size,
        param_bound_in=max(n.max_abs() for n in nets),
        param_bound_out=out.max_abs(),
        relu_units=sum(out.arch.layer_widths[1:-1]),
    )
    return out, report


def step_gadget(delta: float, shift: float = 0.0, sign: float = 1.0) -> NetParams:
    """Two-unit ReLU net for ``x -> h(sign * (x - shift))``, a ramp from 0 at 0 to 1 at ``delta``.

    ``h(s) = (relu(s) - relu(s - delta)) / delta``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if sign not in (1, -1, 1.0, -1.0):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    W1 = np.array([[sign], [sign]], dtype=np.float64)
    b1 = np.array([-sign * shift, -sign * shift - delta])
    W2 = np.array([[1.0 / delta, -1.0 / delta]])
    return NetParams(Architecture((1, 2, 1), "relu", "linear"), [W1, W2], [b1, np.zeros(1)])


def _unclamped(net: NetParams) -> NetParams:
    """Same function with a linear head; a clamp01 head becomes an extra ReLU layer."""
    if net.arch.output_head == "linear":
        return net
    if net.arch.output_head != "clamp01":
        raise ConfigError(f"mixture components need clamp01 or linear heads, got {net.arch.output_head!r}")
    d = net.arch.d_out
    # clamp(y) = relu(y) - relu(y - 1)
    Ws = net.weights[:-1] + [np.vstack([net.weights[-1], net.weights[-1]]), np.hstack([np.eye(d), -np.eye(d)])]
    bs = net.biases[:-1] + [np.concatenate([net.biases[-1], net.biases[-1] - 1.0]), np.zeros(d)]
    widths = net.arch.layer_widths[:-1] + (2 * d, d)
    return NetParams(Architecture(widths, "relu", "linear"), Ws, bs)


def check_mixture_component(net: NetParams, R: float | None = None, index: int = 0, atol: float = 1e-12):
    arch = net.arch
    if arch.d_in != 1:
        raise ConfigError(f"component {index}: mixture nets need d_in = 1, got {arch.d_in}")
    if arch.n_layers < 2:
        raise ConfigError(f"component {index}: needs at least one hidden ReLU layer")
    lo = forward(net, np.array(CONST_PROBES_LOW)[:, None])
    hi = forward(net, np.array(CONST_PROBES_HIGH)[:, None])
    for probes, vals, anchor in ((CONST_PROBES_LOW, lo, 3), (CONST_PROBES_HIGH, hi, 0)):
        bad = np.flatnonzero(np.max(np.abs(vals - vals[anchor]), axis=1) > atol)
        if bad.size:
            x = probes[bad[0]]
            raise ConfigError(f"component {index} is not constant outside [0, 1]: "
                              f"g({x}) = {vals[bad[0]].tolist()} vs g({probes[anchor]}) = {vals[anchor].tolist()}")
    if np.any(lo[3] < -atol) or np.any(lo[3] > 1 + atol) or np.any(hi[0] < -atol) or np.any(hi[0] > 1 + atol):
        raise ConfigError(f"component {index}: endpoint values must lie in [0, 1]^d")
    if R is not None and net.max_abs() > R:
        raise ConfigError(f"component {index}: parameter magnitude {net.max_abs()} exceeds R = {R}")


def mixture_net(nets: list[NetParams], R: float, tv_samples: int = 0, seed: int = 0,
                bins: int = 200) -> tuple[NetParams, SurgeryReport]:
    """Single ReLU net approximating the uniform mixture of the components' pushforwards.

    Segment ``k`` of the latent interval is ``[b_k, b_{k+1}]`` with ``b_k = k/K``
    and the ramp width is ``delta = 1/(K R)``. Component ``k`` contributes
    ``g_k(K (x - b_k)) - g_k(0) h(b_k - x) - g_k(1) h(x - b_{k+1} + delta)``,
    where ``h`` ramps from 0 to 1 over ``[0, delta]``; the last component uses
    ``h(x - 1)`` instead. Both ramps at an interior breakpoint fall in
    ``(b_k - delta, b_k)``, so outputs are exact except on ``K - 1`` intervals
    of length ``delta``. With ``tv_samples > 0`` the report carries a binned
    total-variation estimate against direct mixture sampling.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if not nets:
        raise ConfigError("need at least one component")
    for i, n in enumerate(nets):
        check_mixture_component(n, R, i)
    heads = {n.arch.output_head for n in nets}
    depths = {n.arch.n_layers for n in nets}
    dims = {n.arch.d_out for n in nets}
    if len(heads) > 1 or len(depths) > 1 or len(dims) > 1:
        raise ConfigError("components must share output head, depth and output dimension")
    K = len(nets)
    d = nets[0].arch.d_out
    delta = 1.0 / (K * R)
    lam = 1.0 / K
    flat = [_unclamped(n) for n in nets]
    L = flat[0].arch.n_layers
    g0 = [forward(n, np.zeros(1)) for n in nets]
    g1 = [forward(n, np.ones(1)) for n in nets]

    first_W, first_b, hidden_W, hidden_b, out_W = [], [], [[] for _ in range(L - 2)], [[] for _ in range(L - 2)], []
    out_b = np.zeros(d)
    for k, net in enumerate(flat):
        b_k = k * lam
        b_next = (k + 1) * lam
        W1, c1 = net.weights[0], net.biases[0]
        # x -> (x - b_k) / lam
        first_W.append(W1 / lam)
        first_b.append(c1 - W1[:, 0] * (b_k / lam))
        for i in range(1, L - 1):
            hidden_W[i - 1].append(net.weights[i])
            hidden_b[i - 1].append(net.biases[i])
        out_W.append(net.weights[-1])
        out_b = out_b + net.biases[-1]

        right_shift = b_next - delta if k < K - 1 else 1.0
        # gadget units: left ramp h(b_k - x), right ramp h(x - right_shift)
        first_W.append(np.array([[-1.0], [-1.0], [1.0], [1.0]]))
        first_b.append(np.array([b_k, b_k - delta, -right_shift, -right_shift - delta]))
        for i in range(1, L - 1):
            hidden_W[i - 1].append(np.eye(4))
            hidden_b[i - 1].append(np.zeros(4))
        out_W.append(np.column_stack([-g0[k] / delta, g0[k] / delta, -g1[k] / delta, g1[k] / delta]))

    Ws = [np.vstack(first_W)]
    bs = [np.concatenate(first_b)]
    for i in range(L - 2):
        Ws.append(block_diag(*hidden_W[i]))
        bs.append(np.concatenate(hidden_b[i]))
    Ws.append(np.hstack(out_W))
    bs.append(out_b)
    widths = (1,) + tuple(w.shape[0] for w in Ws)
    out = NetParams(Architecture(widths, "relu", "linear"), Ws, bs)

    p = nets[0].arch.n_params if len({n.arch for n in nets}) == 1 else max(n.arch.n_params for n in nets)
    report = SurgeryReport(
        input_count=K,
        input_params=p,
        output_params=K * (p + 6),
        param_bound_in=max(n.max_abs() for n in nets),
        param_bound_out=out.max_abs(),
        relu_units=sum(widths[1:-1]),
        delta=delta,
        tv_bound=K * delta,
    )
    if tv_samples > 0:
        report.measured_tv = mixture_tv(out, nets, tv_samples, seed, bins)
        report.tv_samples = tv_samples
    return out, report


def direct_mixture_sample(nets: list[NetParams], n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample the uniform mixture: pick a component uniformly, then push a uniform latent through it."""
    idx = rng.integers(len(nets), size=n)
    u = rng.uniform(0.0, 1.0, size=(n, 1))
    out = np.empty((n, nets[0].arch.d_out))
    for k, net in enumerate(nets):
        sel = idx == k
        if np.any(sel):
            out[sel] = forward(net, u[sel])
    return out


def binned_tv(a: np.ndarray, b: np.ndarray, bins: int = 200) -> float:
    """Total variation between two samples on ``bins`` equal bins per axis of [0, 1]^d.

    Points outside the unit box share one overflow cell.
    """
    a = np.atleast_2d(a.T).T if a.ndim == 1 else a
    b = np.atleast_2d(b.T).T if b.ndim == 1 else b
    d = a.shape[1]
    if d > 2:
        raise ValueError("binned TV is only supported for d <= 2")

    def hist(s):
        inside = np.all((s >= 0.0) & (s <= 1.0), axis=1)
        h, _ = np.histogramdd(s[inside], bins=bins, range=[(0.0, 1.0)] * d)
        return np.append(h.ravel(), np.count_nonzero(~inside)) / len(s)

    return 0.5 * float(np.abs(hist(a) - hist(b)).sum())


def mixture_tv(mix: NetParams, nets: list[NetParams], n: int, seed: int = 0, bins: int = 200) -> float:
    u = substream(seed, "mixture_tv", "surgery").uniform(0.0, 1.0, size=(n, 1))
    ours = forward(mix, u)
    ref = direct_mixture_sample(nets, n, substream(seed, "mixture_tv", "direct"))
    return binned_tv(ours, ref, bins)
