"""Counter-based random streams for reproducible Monte Carlo trials.

Every uniform used by a sweep is a pure function of
``(master_seed, period, trial, role, lane)``, evaluated with Philox4x32-10.
Nothing is consumed sequentially, so results do not depend on how trials are
chunked or how many workers run them.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
ROUNDS = 10


class Role(IntEnum):
    SIGNALS = 0
    TIEBREAK = 1
    PLACEMENT = 2


def philox4x32(counter, key, rounds=ROUNDS):
    """Philox4x32 block function over an array of counters.

    Parameters
    ----------
    counter : array_like of uint32, shape (..., 4)
    key : pair of uint32

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    ctr = np.asarray(counter, dtype=np.uint64)
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def seed_key(master_seed: int) -> tuple[int, int]:
    s = int(master_seed) & 0xFFFFFFFFFFFFFFFF
    return s & 0xFFFFFFFF, s >> 32


def to_unit(hi, lo):
    """Two uint32 words -> doubles in (0, 1] with 53 random bits.

    Zero is excluded so that ``u <= 0`` never fires for a fully biased agent.
    """
    hi = np.asarray(hi, dtype=np.uint64) >> np.uint64(5)
    lo = np.asarray(lo, dtype=np.uint64) >> np.uint64(6)
    return ((hi << np.uint64(26)) + lo + np.uint64(1)).astype(np.float64) * 2.0**-53


def uniforms(master_seed, periods, trials, role, lane=0):
    """Uniform pairs for the grid ``periods x trials``.

    Returns two arrays of shape ``(len(periods), len(trials))``; the first
    uses words 0-1 of each block and the second words 2-3.
    """
    periods = np.asarray(periods, dtype=np.uint64)
    trials = np.asarray(trials, dtype=np.uint64)
    shape = (periods.size, trials.size)
    ctr = np.empty(shape + (4,), dtype=np.uint64)
    ctr[..., 0] = periods[:, None]
    ctr[..., 1] = trials[None, :]
    ctr[..., 2] = int(role)
    ctr[..., 3] = int(lane)
    out = philox4x32(ctr, seed_key(master_seed))
    return to_unit(out[..., 0], out[..., 1]), to_unit(out[..., 2], out[..., 3])


class TrialStreams:
    """Random inputs for a block of trials over ``horizon`` periods.

    Trial ``s`` sees the same signals, tie-break draws and placement uniforms
    whatever network or partisanship level it is simulated under.
    """

    def __init__(self, master_seed: int, trials, horizon: int):
        self.master_seed = int(master_seed)
        self.trials = np.asarray(trials, dtype=np.int64)
        self.horizon = int(horizon)
        self._periods = np.arange(1, self.horizon + 1)

    def signal_uniforms(self):
        """(ambiguity draw, bit draw), each shaped (T, S)."""
        return uniforms(self.master_seed, self._periods, self.trials, Role.SIGNALS)

    def tiebreak(self, lanes: int | None = None):
        """Shared u of shape (T, S), or per-agent u of shape (T, S, lanes)."""
        if lanes is None:
            return uniforms(self.master_seed, self._periods, self.trials, Role.TIEBREAK)[0]
        return np.stack(
            [uniforms(self.master_seed, self._periods, self.trials, Role.TIEBREAK, lane)[0]
             for lane in range(lanes)],
            axis=-1,
        )

    def placement(self):
        """Two uniforms per trial, shape (S,) each."""
        a, b = uniforms(self.master_seed, [0], self.trials, Role.PLACEMENT)
        return a[0], b[0]
