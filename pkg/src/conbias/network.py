"""Fixed social networks, mixing matrices and stationary influence weights."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Topology(str, Enum):
    SINGLE_AGENT = "single_agent"
    LINE = "line"
    WHEEL = "wheel"
    COMPLETE = "complete"
    STAR = "star"
    PAW = "paw"


# Network labels used in the published tables.
LABELS = {
    "SA": (Topology.SINGLE_AGENT, 1),
    "A": (Topology.LINE, 2),
    "B": (Topology.LINE, 3),
    "C": (Topology.WHEEL, 3),
    "D": (Topology.LINE, 4),
    "E": (Topology.STAR, 4),
    "F": (Topology.WHEEL, 4),
    "G": (Topology.COMPLETE, 4),
    "H": (Topology.PAW, 4),
}
BENCHMARK_NETWORKS = ("A", "B", "C", "D", "E", "F", "G", "H")


@dataclass(frozen=True, eq=False)
class Network:
    """Directed graph where ``adjacency[i, j] = 1`` means i listens to j.

    Rows of ``out_weights`` spread each agent's attention evenly over the
    agents it listens to.
    """

    adjacency: np.ndarray
    label: str = ""
    out_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.adjacency, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.all((g == 0) | (g == 1)):
            raise ValueError("adjacency must be binary")
        out_deg = g.sum(axis=1)
        if np.any(out_deg == 0):
            bad = np.flatnonzero(out_deg == 0).tolist()
            raise ValueError(f"nodes {bad} listen to nobody; weights undefined")
        g.setflags(write=False)
        w = g / out_deg[:, None]
        w.setflags(write=False)
        object.__setattr__(self, "adjacency", g)
        object.__setattr__(self, "out_weights", w)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    def out_neighbors(self, i: int) -> list[int]:
        return [j for j in np.flatnonzero(self.adjacency[i]) if j != i]

    def adjacent(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def degrees(self) -> np.ndarray:
        g = self.adjacency.copy()
        np.fill_diagonal(g, 0)
        return g.sum(axis=1).astype(int)


def _from_edges(n, edges, label):
    g = np.zeros((n, n))
    for i, j in edges:
        g[i, j] = g[j, i] = 1
    return Network(g, label)


def build_topology(kind: Topology | str, n: int, label: str = "") -> Network:
    """Build one of the classic undirected topologies.

    Node order: line follows the path, star puts the centre at node 0, paw puts
    the pendant at node 0 (attached to node 1, triangle 1-2-3), wheel is the
    cycle 0-1-...-(n-1)-0. A single agent listens only to itself.
    """
    kind = Topology(kind)
    if kind is Topology.SINGLE_AGENT and n == 1:
        return Network(np.ones((1, 1)), label or "SA")
    if kind is Topology.LINE and n >= 2:
        return _from_edges(n, [(i, i + 1) for i in range(n - 1)], label)
    if kind is Topology.WHEEL and n >= 3:
        return _from_edges(n, [(i, (i + 1) % n) for i in range(n)], label)
    if kind is Topology.COMPLETE and n >= 2:
        return _from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], label)
    if kind is Topology.STAR and n >= 3:
        return _from_edges(n, [(0, j) for j in range(1, n)], label)
    if kind is Topology.PAW and n == 4:
        return _from_edges(4, [(0, 1), (1, 2), (1, 3), (2, 3)], label)
    raise ValueError(f"unsupported topology {kind.value!r} with n={n}")


def from_label(label: str) -> Network:
    try:
        kind, n = LABELS[label.upper()]
    except KeyError:
        raise ValueError(f"unknown network label {label!r}; expected one of {sorted(LABELS)}") from None
    return build_topology(kind, n, label.upper())


def degree(net: Network, i: int) -> int:
    return int(net.degrees()[i])


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    W: np.ndarray
    b: float

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def apply(self, x):
        """``x @ W.T`` along the last axis, summed in fixed node order.

        Elementwise accumulation keeps the rounding identical for any batch
        size, which matters because opinions sitting exactly at 1/2 are
        resolved by the tie-break rule.
        """
        x = np.asarray(x, dtype=float)
        W = self.W
        out = x[..., 0:1] * W[:, 0]
        for j in range(1, self.n):
            out = out + x[..., j : j + 1] * W[:, j]
        return out

    def apply_nodes(self, x):
        """Same as ``apply`` for node-major arrays, ``x[j]`` holding node j."""
        W = self.W
        shape = (self.n,) + (1,) * (np.ndim(x) - 1)
        out = W[:, 0].reshape(shape) * x[0]
        for j in range(1, self.n):
            out = out + W[:, j].reshape(shape) * x[j]
        return out


def mixing_matrix(net: Network, b: float) -> MixingMatrix:
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"self-reliance b must lie in [0, 1], got {b}")
    W = b * np.eye(net.n) + (1.0 - b) * net.out_weights
    W.setflags(write=False)
    return MixingMatrix(W, float(b))


def is_strongly_connected(net: Network) -> bool:
    g = net.adjacency > 0

    def reach(adj):
        seen = np.zeros(net.n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i] & ~seen):
                seen[j] = True
                stack.append(j)
        return seen.all()

    return reach(g) and reach(g.T)


def stationary(W: MixingMatrix, tol: float = 1e-10) -> np.ndarray:
    """Left unit eigenvector of W normalised to sum one."""
    n = W.n
    if n == 1:
        return np.ones(1)
    if W.b >= 1.0:
        raise ValueError("b = 1 decouples the agents; the stationary distribution is not unique")
    A = W.W.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        pi = None
    if pi is None or _residual(pi, W.W) > tol or np.any(pi < -tol):
        pi = _power_iteration(W.W)
        if _residual(pi, W.W) > tol:
            raise FloatingPointError("stationary distribution did not converge")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _residual(pi, W):
    return float(np.max(np.abs(pi @ W - pi)))


def _power_iteration(W, tol=1e-12, maxiter=100_000):
    n = W.shape[0]
    # lazy chain shares the stationary vector and is aperiodic
    P = 0.5 * (W + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(maxiter):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    return pi / pi.sum()
