"""Closed-form security estimates for lottery coalitions.

Evaluates, without running the simulator, how much a coalition can bias
block production: the expected run of consecutive coalition blocks with and
without beacon grinding, the chance of privately assembling an oversized
subDAG, and the resulting drag on honest payoffs.  Every estimate has a
Monte-Carlo branching-process counterpart used as a cross-check in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np


@dataclass(frozen=True)
class CoalitionParams:
    """Lottery environment seen by a coalition.

    ``p`` is the per-identity per-draw win probability and defaults to the
    fair target 1/n.  ``n_c`` may be fractional (for example a quarter of
    150 players); the binomial weights then use the gamma function.
    """

    n: int
    n_c: float
    p: Optional[float] = None

    def __post_init__(self) -> None:
        if self.p is None:
            object.__setattr__(self, "p", 1.0 / self.n)
        if not 0 < self.n_c <= self.n:
            raise ValueError(f"coalition size {self.n_c} out of (0, {self.n}]")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"win probability {self.p} out of (0, 1]")


def _binom_pmf(pop: float, x: int, p: float) -> float:
    """Binomial weight allowing a real-valued population size."""
    if x < 0 or x > pop:
        return 0.0
    if p >= 1.0:
        return 1.0 if x == pop else 0.0
    lg = (
        math.lgamma(pop + 1.0)
        - math.lgamma(x + 1.0)
        - math.lgamma(pop - x + 1.0)
        + x * math.log(p)
        + (pop - x) * math.log1p(-p)
    )
    return math.exp(lg)


def _group_win(pop: float, p: float) -> float:
    """P(at least one of ``pop`` identities wins a draw)."""
    return 1.0 - (1.0 - p) ** pop


def expected_consecutive(params: CoalitionParams) -> float:
    """Expected run of consecutive coalition blocks without grinding.

    Sums j * q^j * (1-q) over run lengths j, where q is the chance that any
    coalition member wins a given draw; truncated below 1e-12 relative
    error.  Diverges when the coalition wins every draw.
    """
    q = _group_win(params.n_c, params.p)
    if q >= 1.0:
        raise ValueError("coalition wins every draw; expected run diverges")
    total = 0.0
    power = 1.0
    j = 1
    while j < 5_000_000:
        power *= q
        term = j * power * (1.0 - q)
        total += term
        if j >= 8 and term <= total * 1e-13:
            break
        j += 1
    return total


_EXACT_LEVELS = 3
_SUCCESS_CAP = 64


def grinding_expectation(
    params: CoalitionParams,
    max_len: int = 12,
    trials: int = 200_000,
    seed: int = 0,
) -> float:
    """Expected consecutive coalition blocks when grinding the beacon.

    Each coalition block re-seeds the lottery for every member, so with x
    blocks at one level the next level draws from x * n_c identities.  The
    first three levels are summed exactly (success counts above 64 carry
    negligible mass at fair targets); deeper levels come from a seeded
    branching-process Monte-Carlo, skipped when ``trials`` is zero.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    n_c, p = params.n_c, params.p
    total = _group_win(n_c, p)  # level 1
    if max_len >= 2:
        level2 = 0.0
        level3 = 0.0
        for x1 in range(1, _SUCCESS_CAP + 1):
            w1 = _binom_pmf(n_c, x1, p)
            if w1 <= 0.0:
                continue
            pop2 = x1 * n_c
            level2 += w1 * _group_win(pop2, p)
            if max_len >= 3:
                for x2 in range(1, _SUCCESS_CAP + 1):
                    w2 = _binom_pmf(pop2, x2, p)
                    if w2 <= 0.0:
                        continue
                    level3 += w1 * w2 * _group_win(x2 * n_c, p)
        total += level2 + level3
    if max_len > _EXACT_LEVELS and trials > 0:
        rng = np.random.default_rng(seed)
        x = np.ones(trials, dtype=np.int64)
        for level in range(1, max_len + 1):
            pop = np.rint(x * n_c).astype(np.int64)
            x = rng.binomial(pop, p)
            if level > _EXACT_LEVELS:
                total += float(np.count_nonzero(x > 0)) / trials
    return total


def harm_subdag_probability(params: CoalitionParams, k: int = 3) -> float:
    """P(a private coalition subDAG grows beyond k blocks).

    Exact enumeration of the branching process: every path of per-level
    success counts with at most k total blocks contributes its extinction
    probability; the remainder is the harm mass.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n_c, p = params.n_c, params.p

    def survive_paths(pop: float, produced: int, weight: float) -> float:
        settled = weight * (1.0 - p) ** pop
        for x in range(1, k - produced + 1):
            w = _binom_pmf(pop, x, p)
            if w > 0.0:
                settled += survive_paths(x * n_c, produced + x, weight * w)
        return settled

    return 1.0 - survive_paths(float(n_c), 0, 1.0)


def immunity_ratio(
    params: CoalitionParams, pun: float = 6.0, c: float = 1.0, k: int = 3
) -> float:
    """How much a harming coalition divides honest per-hundred-block payoff.

    The honest side of the ledger is pinned at 67 winner blocks per hundred;
    each oversized private subDAG costs them ``pun`` per hundred blocks.
    """
    harm = harm_subdag_probability(params, k)
    honest = 67.0 * c
    denom = honest - 100.0 * harm * pun
    if denom <= 0.0:
        raise ValueError("punishment drag exceeds honest payoff; ratio undefined")
    return honest / denom


def estimates_table(
    params: CoalitionParams,
    pun: float = 6.0,
    c: float = 1.0,
    k: int = 3,
    max_len: int = 12,
    trials: int = 200_000,
    seed: int = 0,
) -> Dict[str, float]:
    """The four headline estimates, keyed for table printing."""
    return {
        "expected_consecutive": expected_consecutive(params),
        "grinding_expectation": grinding_expectation(params, max_len, trials, seed),
        "harm_subdag_probability": harm_subdag_probability(params, k),
        "immunity_ratio": immunity_ratio(params, pun, c, k),
    }
