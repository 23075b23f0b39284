"""Trial simulation, consensus classification and Monte Carlo sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .core import Signal, interpret_many, leans_right
from .network import LABELS, BENCHMARK_NETWORKS, MixingMatrix, Network, from_label, mixing_matrix, stationary
from .rng import TrialStreams
from .theory import LimitPair, Side, less_biased_side, mean_gamma, network_consensus

log = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "sim_id", "network", "theta", "mu", "tau", "b", "seed", "classification", "less_biased",
    "final_opinion_mean", "opinion_spread", "fi", "om", "pca", "deg_left", "deg_right",
    "node_left", "node_right", "distance",
]


class Classification(str, Enum):
    LESS_BIASED = "less_biased"
    MORE_BIASED = "more_biased"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class TrialConfig:
    network: str
    theta: float
    mu: float
    b: float = 0.5
    gammas: float | tuple[float, ...] = 1.0
    tau_left: int = 0
    tau_right: int = 0
    horizon: int = 700
    seed: int = 0
    trial: int = 0
    epsilon: float | None = None
    per_agent_u: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        for k in ("theta", "mu", "b"):
            v = getattr(self, k)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{k} must lie in [0, 1], got {v}")
        if self.tau_left < 0 or self.tau_right < 0:
            raise ValueError("partisanship must be non-negative")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        g = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        if np.any((g < 0) | (g > 1)):
            raise ValueError("gamma values must lie in [0, 1]")

    @property
    def partisan(self) -> bool:
        return self.tau_left > 0 or self.tau_right > 0

    def gamma_vector(self, n: int) -> np.ndarray:
        g = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        if g.size == 1:
            return np.full(n, g[0])
        if g.size != n:
            raise ValueError(f"{g.size} gamma values given for {n} agents")
        return g


@dataclass
class SocietyState:
    alpha: np.ndarray
    beta: np.ndarray
    t: int = 0

    @property
    def opinions(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class Placement:
    left: int | None = None
    right: int | None = None


@dataclass
class TrialOutcome:
    opinions: np.ndarray
    classification: Classification | None
    distance: float
    spread: float
    targets: LimitPair | None
    epsilon: float | None
    placement: Placement
    fi: int
    om: int | None = None
    pca: int | None = None
    deg_left: int | None = None
    deg_right: int | None = None

    @property
    def mean_opinion(self) -> float:
        return float(np.mean(self.opinions))


@dataclass
class TrialResult:
    outcome: TrialOutcome
    state: SocietyState
    trajectory: np.ndarray | None = None  # (T + 1, n) opinions
    interpretations: np.ndarray | None = None  # (T, n) interpreted-as-one flags
    signals: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))


def default_epsilon(mu: float, gbar: float) -> float:
    """One tenth of the gap between the two consensus values."""
    return 0.1 * mu * abs(2.0 * gbar - 1.0)


def place_partisans(n: int, u_left, u_right):
    """Map two uniforms onto an ordered pair of distinct nodes."""
    if n < 2:
        raise ValueError("partisans need at least two agents")
    u_left = np.asarray(u_left)
    u_right = np.asarray(u_right)
    left = np.minimum((u_left * n).astype(np.int64), n - 1)
    r = np.minimum((u_right * (n - 1)).astype(np.int64), n - 2)
    right = np.where(r < left, r, r + 1)
    return left, right


def initial_shapes(n: int, tau: int, left, right):
    """Centrist (1, 1) priors with leftist (1, 1+tau) and rightist (1+tau, 1)."""
    left = np.atleast_1d(left)
    right = np.atleast_1d(right)
    S = left.size
    a = np.ones((S, n))
    b = np.ones((S, n))
    if tau > 0:
        rows = np.arange(S)
        a[rows, right] += tau
        b[rows, left] += tau
    return a, b


def init_society(cfg: TrialConfig, net: Network, streams: TrialStreams | None = None):
    """Initial state and partisan placement for one trial."""
    if cfg.partisan and net.n < 2:
        raise ValueError("partisan priors need at least two agents")
    placement = Placement()
    if net.n >= 2:
        if streams is None:
            streams = TrialStreams(cfg.seed, [cfg.trial], cfg.horizon)
        ul, ur = streams.placement()
        left, right = place_partisans(net.n, ul, ur)
        placement = Placement(int(left[0]), int(right[0]))
    a = np.ones(net.n)
    b = np.ones(net.n)
    if cfg.partisan:
        a[placement.right] += cfg.tau_right
        b[placement.left] += cfg.tau_left
    return SocietyState(a, b, 0), placement


def signal_codes(amb_draw, bit_draw, mu, theta):
    """Public signal codes from the two signal uniforms."""
    theta = np.asarray(theta)
    codes = np.where(bit_draw < theta, Signal.ONE, Signal.ZERO).astype(np.int8)
    codes[amb_draw < mu] = Signal.AMBIGUOUS
    return codes


def _advance(alpha, beta, W: MixingMatrix, codes, u, gammas):
    """One period for a batch: interpret with last opinions, update, mix."""
    y = alpha / (alpha + beta)
    s1 = interpret_many(codes[..., None], y, gammas, u)
    return W.apply(alpha) + W.b * s1, W.apply(beta) + W.b * (1.0 - s1), s1


def step(state: SocietyState, W: MixingMatrix, signal, u, gammas):
    """Advance one society by one period.

    ``u`` is the shared tie-break draw (scalar), a per-agent vector, or None
    when every gamma is 0 or 1. Returns the new state and the interpreted
    signals as an ``(n,)`` array of s1 values.
    """
    u_arr = None if u is None else np.broadcast_to(np.asarray(u, dtype=float), state.alpha.shape)
    a, b, s1 = _advance(state.alpha, state.beta, W, np.asarray(int(signal)), u_arr, gammas)
    return SocietyState(a, b, state.t + 1), s1


def simulate(alpha0, beta0, W: MixingMatrix, codes, gammas, u=None, record=False):
    """Run a batch of societies through ``codes`` of shape (T, S).

    ``alpha0``/``beta0`` are (S, n); ``u`` is None, (T, S) shared draws or
    (T, S, n) per-agent draws. With ``record`` the opinion path (T+1, S, n)
    and interpretations (T, S, n) are returned as well.

    Same arithmetic as repeated ``step`` calls, with alpha and beta mixed in
    one stacked pass.
    """
    # node-major layout (n, 2, S): row j holds (alpha, beta) of node j
    x = np.stack([np.asarray(alpha0, dtype=float).T, np.asarray(beta0, dtype=float).T], axis=1)
    gam = np.asarray(gammas, dtype=float)[:, None]
    T = codes.shape[0]
    amb = codes == Signal.AMBIGUOUS
    one = (codes == Signal.ONE).astype(np.float64)
    if u is None:
        if not np.all((gam == 0.0) | (gam == 1.0)):
            raise ValueError("tie-break draws are required unless every gamma is 0 or 1")
        read_right = (gam == 1.0).astype(np.float64)
        read_left = (gam == 0.0).astype(np.float64)
    path = interp = None
    if record:
        path = np.empty((T + 1,) + x.shape[2:] + x.shape[:1])
        interp = np.empty((T,) + x.shape[2:] + x.shape[:1])
        path[0] = (x[:, 0] / (x[:, 0] + x[:, 1])).T
    bw = W.b
    for t in range(T):
        right = leans_right(x[:, 0] / (x[:, 0] + x[:, 1]))
        if u is None:
            amb_read = np.where(right, read_right, read_left)
        else:
            ut = u[t] if u[t].ndim == 1 else u[t].T
            amb_read = ut <= np.where(right, gam, 1.0 - gam)
        s1 = np.where(amb[t], amb_read, one[t])
        x = W.apply_nodes(x)
        x[:, 0] += bw * s1
        x[:, 1] += bw * (1.0 - s1)
        if record:
            path[t + 1] = (x[:, 0] / (x[:, 0] + x[:, 1])).T
            interp[t] = s1.T
    return x[:, 0].T.copy(), x[:, 1].T.copy(), path, interp


def forward_iterate(W: MixingMatrix, alpha0, beta0, interpretations):
    """Closed-form state after t periods given every interpreted signal.

    alpha_t = W^t alpha_0 + sum_k W^k B s1_{t-k}, and likewise for beta with
    s0 = 1 - s1. ``interpretations`` is (t, n) with row k-1 for period k.
    """
    s1 = np.asarray(interpretations, dtype=float)
    t = s1.shape[0]
    M = W.W
    a = np.linalg.matrix_power(M, t) @ np.asarray(alpha0, dtype=float)
    b = np.linalg.matrix_power(M, t) @ np.asarray(beta0, dtype=float)
    Wk = np.eye(M.shape[0])
    for k in range(t):
        a = a + W.b * (Wk @ s1[t - 1 - k])
        b = b + W.b * (Wk @ (1.0 - s1[t - 1 - k]))
        Wk = Wk @ M
    return SocietyState(a, b, t)


def classify_many(mean_opinion, theta, targets: LimitPair, epsilon: float):
    """Vectorised classification; returns (labels, distance to nearest target)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta == 0.5):
        raise ValueError("the less biased side is undefined at theta = 1/2")
    right = theta > 0.5
    less = np.where(right, targets.y_right, targets.y_left)
    more = np.where(right, targets.y_left, targets.y_right)
    d_less = np.abs(mean_opinion - less)
    d_more = np.abs(mean_opinion - more)
    labels = np.full(np.shape(mean_opinion), Classification.UNRESOLVED.value, dtype=object)
    labels[d_more < epsilon] = Classification.MORE_BIASED.value
    labels[d_less < epsilon] = Classification.LESS_BIASED.value
    return labels, np.minimum(d_less, d_more)


def classify_outcome(opinions, theta: float, mu: float, gammas, pi, epsilon: float | None = None):
    """Classify final opinions against the two consensus values.

    Returns (classification, distance to nearest target, targets, epsilon).
    """
    if less_biased_side(theta) is Side.TIE:
        raise ValueError("the less biased side is undefined at theta = 1/2")
    targets = network_consensus(theta, mu, gammas, pi)
    if epsilon is None:
        epsilon = default_epsilon(mu, mean_gamma(gammas, pi))
        if epsilon <= 0:
            raise ValueError("consensus values coincide; pass an explicit epsilon")
    labels, dist = classify_many(np.mean(opinions), theta, targets, epsilon)
    return Classification(labels.item()), float(dist), targets, epsilon


def first_impression(first_code, theta):
    """1 when the first public signal points society toward the true side."""
    first_code = np.asarray(first_code)
    theta = np.asarray(theta)
    up = (first_code == Signal.AMBIGUOUS) | (first_code == Signal.ONE)
    return np.where(theta >= 0.5, up, first_code == Signal.ZERO).astype(np.int64)


def extract_covariates(placement: Placement, net: Network, first_signal, theta: float):
    """(FI, OM, PCA) for one trial; OM and PCA are None without two partisans."""
    fi = int(first_impression(int(first_signal), theta))
    if placement.left is None:
        return fi, None, None
    deg = net.degrees()
    om = int(net.adjacent(placement.left, placement.right))
    dl, dr = deg[placement.left], deg[placement.right]
    pca = int(dr > dl) if theta >= 0.5 else int(dl > dr)
    return fi, om, pca


def run_trial(cfg: TrialConfig, trace: bool = False) -> TrialResult:
    """Simulate one society for ``cfg.horizon`` periods."""
    net = from_label(cfg.network)
    W = mixing_matrix(net, cfg.b)
    gammas = cfg.gamma_vector(net.n)
    streams = TrialStreams(cfg.seed, [cfg.trial], cfg.horizon)
    state0, placement = init_society(cfg, net, streams)
    amb, bit = streams.signal_uniforms()
    codes = signal_codes(amb, bit, cfg.mu, cfg.theta)
    u = _tiebreak(streams, gammas, net.n, cfg.per_agent_u)
    a, b, path, interp = simulate(state0.alpha[None], state0.beta[None], W, codes, gammas, u, record=trace)
    state = SocietyState(a[0], b[0], cfg.horizon)
    y = state.opinions
    fi, om, pca = extract_covariates(placement, net, codes[0, 0], cfg.theta)
    cls = targets = eps = None
    dist = math.nan
    if (cfg.b < 1.0 or net.n == 1) and cfg.theta != 0.5:
        pi = stationary(W)
        if cfg.epsilon is not None or default_epsilon(cfg.mu, mean_gamma(gammas, pi)) > 0:
            cls, dist, targets, eps = classify_outcome(y, cfg.theta, cfg.mu, gammas, pi, cfg.epsilon)
    deg = net.degrees()
    outcome = TrialOutcome(
        opinions=y,
        classification=cls,
        distance=dist,
        spread=float(y.max() - y.min()),
        targets=targets,
        epsilon=eps,
        placement=placement if cfg.partisan else Placement(),
        fi=fi,
        om=om if cfg.partisan else None,
        pca=pca if cfg.partisan else None,
        deg_left=int(deg[placement.left]) if cfg.partisan else None,
        deg_right=int(deg[placement.right]) if cfg.partisan else None,
    )
    return TrialResult(
        outcome, state,
        trajectory=None if path is None else path[:, 0, :],
        interpretations=None if interp is None else interp[:, 0, :],
        signals=codes[:, 0],
    )


def _tiebreak(streams: TrialStreams, gammas, n, per_agent_u):
    g = np.asarray(gammas)
    if np.all((g == 0.0) | (g == 1.0)):
        # every ambiguous reading is deterministic; skip the draws
        return None
    return streams.tiebreak(n if per_agent_u else None)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of networks and partisanship levels sharing trial randomness."""

    networks: tuple[str, ...] = ("SA",) + BENCHMARK_NETWORKS
    taus: tuple[int, ...] = (0, 1, 10, 30)
    trials: int = 21040
    thetas: tuple[float, ...] = (0.2, 0.8)
    mu: float = 0.6
    b: float = 0.5
    gamma: float = 1.0
    horizon: int = 700
    seed: int = 0
    epsilon: float | None = None
    per_agent_u: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("at least one trial is required")
        for net in self.networks:
            if net.upper() not in LABELS:
                raise ValueError(f"unknown network label {net!r}")
        if any(t < 0 for t in self.taus):
            raise ValueError("partisanship must be non-negative")
        if any(th == 0.5 for th in self.thetas):
            raise ValueError("theta = 1/2 has no less biased consensus")

    @classmethod
    def benchmark(cls, trials: int = 21040, seed: int = 0, **kw) -> "SweepSpec":
        return cls(networks=("SA",) + BENCHMARK_NETWORKS, taus=(0, 1, 10, 30), trials=trials,
                   thetas=(0.2, 0.8), mu=0.6, b=0.5, gamma=1.0, horizon=700, seed=seed, **kw)

    def theta_of(self, sim_ids):
        """Trial s gets thetas[s mod k]: equal shares, no sampling noise."""
        return np.asarray(self.thetas, dtype=float)[np.asarray(sim_ids) % len(self.thetas)]

    def cells(self):
        for label in self.networks:
            n = LABELS[label.upper()][1]
            taus = [t for t in self.taus if t == 0 or n >= 2]
            if len(taus) < len(self.taus):
                log.info("network %s has one agent; partisan cells skipped", label)
            yield label.upper(), taus


def _sweep_chunk(spec: SweepSpec, sim_ids: np.ndarray, nets) -> dict:
    streams = TrialStreams(spec.seed, sim_ids, spec.horizon)
    amb, bit = streams.signal_uniforms()
    theta = spec.theta_of(sim_ids)
    codes = signal_codes(amb, bit, spec.mu, theta[None, :])
    ul, ur = streams.placement()
    fi = first_impression(codes[0], theta)
    need_u = spec.gamma not in (0.0, 1.0)
    u_cache = {}
    out = {}
    for label, taus, net, W, pi, targets_by_theta, eps in nets:
        n = net.n
        S = sim_ids.size
        if n >= 2:
            left, right = place_partisans(n, ul, ur)
        else:
            left = right = np.zeros(S, dtype=np.int64)
        a0 = np.concatenate([initial_shapes(n, tau, left, right)[0] for tau in taus])
        b0 = np.concatenate([initial_shapes(n, tau, left, right)[1] for tau in taus])
        reps = len(taus)
        u = None
        if need_u:
            lanes = n if spec.per_agent_u else None
            if lanes not in u_cache:
                u_cache[lanes] = streams.tiebreak(lanes)
            u = np.concatenate([u_cache[lanes]] * reps, axis=1)
        a, b, _, _ = simulate(a0, b0, W, np.tile(codes, (1, reps)), np.full(n, spec.gamma), u)
        y = a / (a + b)
        ymean = y.mean(axis=1)
        spread = y.max(axis=1) - y.min(axis=1)
        th = np.tile(theta, reps)
        labels = np.empty(th.size, dtype=object)
        dist = np.empty(th.size)
        for value, targets in targets_by_theta.items():
            m = th == value
            labels[m], dist[m] = classify_many(ymean[m], value, targets, eps)
        deg = net.degrees()
        if n >= 2:
            om = net.adjacency[left, right].astype(np.int64)
            dl, dr = deg[left], deg[right]
            pca = np.where(theta >= 0.5, dr > dl, dl > dr).astype(np.int64)
        for k, tau in enumerate(taus):
            sl = slice(k * S, (k + 1) * S)
            rec = {
                "sim_id": sim_ids, "theta": theta, "tau": np.full(S, tau),
                "classification": labels[sl], "final_opinion_mean": ymean[sl],
                "opinion_spread": spread[sl], "fi": fi, "distance": dist[sl],
            }
            if n >= 2:
                rec.update(om=om, pca=pca, deg_left=dl, deg_right=dr, node_left=left, node_right=right)
            out[(label, tau)] = rec
    return out


def monte_carlo(spec: SweepSpec, threads: int = 1, chunk: int = 4096) -> pd.DataFrame:
    """Run the sweep and return one row per (network, tau, trial).

    Trials are split into chunks that may run concurrently; every random
    input is addressed by trial index, so the table does not depend on
    ``threads`` or ``chunk``.
    """
    nets = []
    for label, taus in spec.cells():
        net = from_label(label)
        W = mixing_matrix(net, spec.b)
        pi = stationary(W)
        gammas = np.full(net.n, spec.gamma)
        gbar = mean_gamma(gammas, pi)
        eps = spec.epsilon if spec.epsilon is not None else default_epsilon(spec.mu, gbar)
        if eps <= 0:
            raise ValueError("consensus values coincide; pass an explicit epsilon")
        targets = {th: network_consensus(th, spec.mu, gammas, pi) for th in spec.thetas}
        nets.append((label, taus, net, W, pi, targets, eps))

    ids = np.arange(spec.trials, dtype=np.int64)
    blocks = [ids[i : i + chunk] for i in range(0, ids.size, chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda blk: _sweep_chunk(spec, blk, nets), blocks))
    else:
        parts = [_sweep_chunk(spec, blk, nets) for blk in blocks]

    frames = []
    for label, taus, net, *_ in nets:
        for tau in taus:
            cols = {}
            for key in parts[0][(label, tau)]:
                cols[key] = np.concatenate([p[(label, tau)][key] for p in parts])
            df = pd.DataFrame(cols)
            df["network"] = label
            frames.append(df)
    table = pd.concat(frames, ignore_index=True)
    table["mu"] = spec.mu
    table["b"] = spec.b
    table["seed"] = spec.seed
    table["less_biased"] = (table["classification"] == Classification.LESS_BIASED.value).astype(np.int64)
    for col in ("om", "pca", "deg_left", "deg_right", "node_left", "node_right"):
        if col not in table:
            table[col] = pd.NA
        table[col] = table[col].astype("Int64")
    return table[SWEEP_COLUMNS]
