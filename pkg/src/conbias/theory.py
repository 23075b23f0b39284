"""Closed-form limiting opinions and consensus values."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    TIE = "tie"


class Region(str, Enum):
    R = "R"
    L = "L"
    W = "W"


@dataclass(frozen=True)
class LimitPair:
    y_left: float
    y_right: float

    @property
    def gap(self) -> float:
        return self.y_right - self.y_left

    def target(self, side: Side) -> float:
        if side is Side.RIGHT:
            return self.y_right
        if side is Side.LEFT:
            return self.y_left
        raise ValueError("no single target on a tie")


def _check_unit(**kw):
    for k, v in kw.items():
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{k} must lie in [0, 1], got {v}")


def limiting_opinions(theta: float, mu: float, gamma: float) -> LimitPair:
    _check_unit(theta=theta, mu=mu, gamma=gamma)
    base = (1.0 - mu) * theta
    return LimitPair(base + mu * (1.0 - gamma), base + mu * gamma)


def bias_decomposition(theta: float, mu: float, gamma: float) -> tuple[float, float]:
    """(left bias, right bias): each limit minus the true state."""
    _check_unit(theta=theta, mu=mu, gamma=gamma)
    return mu * ((1.0 - gamma) - theta), mu * (gamma - theta)


def less_biased_side(theta: float) -> Side:
    if theta > 0.5:
        return Side.RIGHT
    if theta < 0.5:
        return Side.LEFT
    return Side.TIE


def classify_region(theta: float, mu: float, gamma: float) -> Region:
    """Region of the (theta, mu) square in which one limit is certain.

    Boundaries belong to W. Impartial agents (gamma = 1/2) are better served
    by ``impartial_limit``; the formulas are still applied as written.
    """
    _check_unit(theta=theta, mu=mu, gamma=gamma)
    if gamma < 0.5:
        raise ValueError("regions are defined for gamma >= 1/2")
    if theta > 0.5 and mu < (theta - 0.5) / (gamma + theta - 1.0):
        return Region.R
    if theta < 0.5 and mu < (theta - 0.5) / (theta - gamma):
        return Region.L
    return Region.W


def impartial_limit(theta: float, mu: float) -> float:
    _check_unit(theta=theta, mu=mu)
    return (1.0 - mu) * theta + mu * 0.5


def is_extreme_capable(mu: float, gamma: float) -> bool:
    return mu == 1.0 and gamma == 1.0


def degroot_consensus(pi, alpha0, beta0) -> float:
    """Consensus reached when signals are ignored (b = 0)."""
    pi, a, b = (np.asarray(x, dtype=float) for x in (pi, alpha0, beta0))
    return float(pi @ a / (pi @ (a + b)))


def mean_gamma(gammas, pi) -> float:
    g = np.broadcast_to(np.asarray(gammas, dtype=float), np.shape(pi))
    return float(np.asarray(pi, dtype=float) @ g)


def network_consensus(theta: float, mu: float, gammas, pi) -> LimitPair:
    """Limit pair of a connected society with influence weights ``pi``."""
    g = mean_gamma(gammas, pi)
    base = (1.0 - mu) * theta
    return LimitPair(base + mu * (1.0 - g), base + mu * g)
