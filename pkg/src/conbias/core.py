"""Beta beliefs, public signals and confirmation-biased interpretation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Signal(IntEnum):
    ZERO = 0
    ONE = 1
    AMBIGUOUS = 2


@dataclass(frozen=True)
class Belief:
    """Beta(alpha, beta) belief about the state."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta})")

    @property
    def opinion(self) -> float:
        return opinion(self)

    @property
    def precision(self) -> float:
        return precision(self)


@dataclass(frozen=True)
class InterpretedSignal:
    s0: int
    s1: int


def opinion(b: Belief) -> float:
    return b.alpha / (b.alpha + b.beta)


def precision(b: Belief) -> float:
    """Inverse variance of the Beta belief, (a+b)^2 (a+b+1) / (a b)."""
    n = b.alpha + b.beta
    return n * n * (n + 1.0) / (b.alpha * b.beta)


@dataclass(frozen=True)
class BetaStats:
    mean: float
    mode: float | None  # None when every point of (0, 1) is a mode
    median_approx: float


def beta_stats(b: Belief) -> BetaStats:
    """Mean, mode and the closed-form median approximation.

    Only defined for shapes >= 1, which is the regime the dynamics stay in.
    """
    a, c = b.alpha, b.beta
    if a < 1 or c < 1:
        raise ValueError("beta_stats requires alpha, beta >= 1")
    if a > 1 and c > 1:
        mode = (a - 1) / (a + c - 2)
    elif a == 1 and c > 1:
        mode = 0.0
    elif a > 1 and c == 1:
        mode = 1.0
    else:
        mode = None
    return BetaStats(a / (a + c), mode, (a - 1 / 3) / (a + c - 2 / 3))


def bias_type(gamma: float) -> str:
    """Name the interpretation profile of an agent."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.5:
        return "impartial"
    if gamma == 1.0:
        return "fully biased"
    if gamma > 0.5:
        return "confirmatory"
    return "contrarian"


def draw_signal(theta: float, mu: float, rng: np.random.Generator) -> Signal:
    if rng.random() < mu:
        return Signal.AMBIGUOUS
    return Signal.ONE if rng.random() < theta else Signal.ZERO


# Opinions within this distance of 1/2 count as exactly 1/2. Network mixing
# leaves rounding noise around 1e-15; without the snap, exact ties would be
# broken by that noise instead of by the tie-break rule.
TIE_TOL = 1e-9


def leans_right(y_prev):
    """``y_prev >= 1/2`` with near-ties resolved as ties."""
    return np.asarray(y_prev) >= 0.5 - TIE_TOL


def psi(y_prev, gamma):
    """Probability of reading an ambiguous signal as 1 (vectorised)."""
    return np.where(leans_right(y_prev), gamma, 1.0 - np.asarray(gamma))


def interpret(s: Signal, y_prev: float, gamma: float, u: float) -> InterpretedSignal:
    if s == Signal.ONE:
        return InterpretedSignal(0, 1)
    if s == Signal.ZERO:
        return InterpretedSignal(1, 0)
    p = gamma if leans_right(y_prev) else 1.0 - gamma
    return InterpretedSignal(0, 1) if u <= p else InterpretedSignal(1, 0)


def interpret_many(codes, y_prev, gamma, u=None):
    """Vectorised ``interpret`` returning s1 as float (s0 = 1 - s1).

    ``codes`` broadcasts against ``y_prev`` (e.g. shape (S, 1) vs (S, n)).
    ``u=None`` is only valid when every ``psi`` is 0 or 1; the tie-break draw
    lives in (0, 1], so the outcome is then fixed without sampling it.
    """
    p = psi(y_prev, gamma)
    if u is None:
        if not np.all((p == 0.0) | (p == 1.0)):
            raise ValueError("tie-break draws are required unless every gamma is 0 or 1")
        amb = p == 1.0
    else:
        amb = u <= p
    codes = np.asarray(codes)
    return np.where(codes == Signal.AMBIGUOUS, amb, codes == Signal.ONE).astype(np.float64)


def bayes_step(b: Belief, s: InterpretedSignal) -> Belief:
    return Belief(b.alpha + s.s1, b.beta + s.s0)


def is_valid_gamma(gamma) -> bool:
    g = np.asarray(gamma, dtype=float)
    return bool(np.all((g >= 0.0) & (g <= 1.0)) and not math.isnan(float(g.sum())))
