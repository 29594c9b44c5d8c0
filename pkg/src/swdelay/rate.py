"""Minimum joint encoding rate as a quantile of accumulated conditional entropy.

The encoder only learns the marginal group of each block, so after K blocks
the admissible-rate question is a tail query on the distribution of the sum
of K conditional entropies, each drawn from its group's conditional prior.
``RateAccumulator`` maintains that sum distribution by incremental
convolution and answers the quantile of the outage constraint: the smallest
rate R with P{sum > R} <= epsilon (outage is strict exceedance, which makes
the quantile attainable on discrete support).

Internally the distribution lives on an arithmetic lattice.  When every
entropy value in the model is a multiple of a common step (up to 1e-9) the
lattice is exact and the support is the exact value list; otherwise values
are rounded *up* to a coarse 1e-3-bit grid, which can only overestimate the
quantile and therefore preserves the outage guarantee.  If the exact lattice
would ever exceed ``max_points`` support points the accumulator falls back
to the coarse grid on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import EntropyStats, ModelError, SourceModel, compute_stats

H_RES_EXACT = 1e-9
H_RES_COARSE = 1e-3
MAX_POINTS = 1_000_000

# index-space slack when locating a strict-exceedance threshold on the
# lattice: absorbs float rounding of K*c without ever crossing a full step
_IDX_EPS = 1e-6


@dataclass(frozen=True)
class SumDistribution:
    """Explicit distribution of the accumulated entropy sum (bits)."""

    support: np.ndarray
    probs: np.ndarray
    resolution: float

    def validate(self) -> list[str]:
        bad = []
        if self.support.shape != self.probs.shape or self.support.ndim != 1:
            bad.append("support and probs must be 1-D arrays of equal length")
            return bad
        if abs(float(self.probs.sum()) - 1.0) > 1e-10:
            bad.append(f"probabilities sum to {float(self.probs.sum())!r}")
        if np.any(self.support < 0):
            bad.append("support contains negative values")
        gaps = np.diff(self.support)
        if np.any(gaps < self.resolution / 2):
            bad.append("support gaps smaller than half the merge resolution")
        return bad


def _lattice_step(values: np.ndarray, tol: float = H_RES_EXACT) -> float | None:
    """Common arithmetic step of the values (approximate gcd), or None."""
    step = 0.0
    for v in np.abs(np.asarray(values, dtype=float)):
        a, b = step, float(v)
        while b > tol:
            a, b = b, math.fmod(a, b)
        step = a
    if step <= 1e-7:
        return None
    # snap to a round value when one fits (keeps exact decimal lattices exact)
    rounded = round(step, 9)
    if rounded > 0 and all(
        abs(v / rounded - round(v / rounded)) * rounded <= tol for v in values
    ):
        step = rounded
    if any(abs(v / step - round(v / step)) * step > tol for v in values):
        return None
    return step


class RateAccumulator:
    """Running distribution of the conditional entropy sum, one push per block.

    Single-owner mutable state; all queries are pure given the pushed groups.
    """

    def __init__(
        self,
        model: SourceModel,
        epsilon: float | None = None,
        h_res: float = H_RES_EXACT,
        h_res_coarse: float = H_RES_COARSE,
        max_points: int = MAX_POINTS,
    ):
        if epsilon is not None and not 0 < epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
        self.model = model
        self.epsilon = epsilon
        self.h_res = h_res
        self.h_res_coarse = h_res_coarse
        self.max_points = max_points

        values = np.array([e.cond_entropy for e in model.entries], dtype=float)
        step = _lattice_step(values, tol=h_res)
        if step is None:
            step = h_res_coarse
            self.exact = False
        else:
            self.exact = True
        self._step = step

        # per-group pmfs as dense lattice segments (offset index + prob array);
        # in coarse mode entry values are rounded up, never down
        self._gpmf: dict[int, tuple[int, np.ndarray]] = {}
        for g in range(1, model.m + 1):
            vals, probs = model.conditional_pmf(g)
            self._gpmf[g] = self._densify(vals, probs)

        self._dense = np.ones(1)
        self._off = 0
        self.k = 0

    def _index_of(self, value: float) -> int:
        q = value / self._step
        if self.exact:
            return int(round(q))
        return int(math.ceil(q - _IDX_EPS))  # round up: conservative

    def _densify(self, vals: np.ndarray, probs: np.ndarray) -> tuple[int, np.ndarray]:
        idx = np.array([self._index_of(v) for v in vals], dtype=np.int64)
        off = int(idx.min())
        dense = np.zeros(int(idx.max()) - off + 1)
        np.add.at(dense, idx - off, probs)
        return off, dense

    def _to_coarse(self) -> None:
        """Reproject the current lattice onto the coarse grid (round up)."""
        values = (self._off + np.arange(len(self._dense))) * self._step
        self._step = self.h_res_coarse
        self.exact = False
        nz = np.flatnonzero(self._dense)
        idx = np.ceil(values[nz] / self._step - _IDX_EPS).astype(np.int64)
        off = int(idx.min())
        dense = np.zeros(int(idx.max()) - off + 1)
        np.add.at(dense, idx - off, self._dense[nz])
        self._off, self._dense = off, dense
        self._gpmf = {}
        for g in range(1, self.model.m + 1):
            vals, probs = self.model.conditional_pmf(g)
            self._gpmf[g] = self._densify(vals, probs)

    def reset(self) -> None:
        self._dense = np.ones(1)
        self._off = 0
        self.k = 0

    def push_block(self, group: int) -> "RateAccumulator":
        """Convolve in the conditional entropy pmf of the observed group."""
        try:
            goff, gdense = self._gpmf[group]
        except KeyError:
            raise ModelError(f"unknown group index {group}") from None
        if len(self._dense) + len(gdense) - 1 > self.max_points:
            self._to_coarse()
            goff, gdense = self._gpmf[group]
        self._dense = np.convolve(self._dense, gdense)
        self._off += goff
        self.k += 1
        return self

    def tail_above(self, threshold: float) -> float:
        """P{accumulated sum > threshold} (strict exceedance)."""
        dense = self._dense
        i = int(math.floor(threshold / self._step - self._off + _IDX_EPS)) + 1
        if i <= 0:
            return float(dense.sum())
        if i >= len(dense):
            return 0.0
        return float(dense[i:].sum())

    def rate_quantile(self, epsilon: float | None = None) -> float:
        """Smallest support value R with P{sum > R} <= epsilon (bits, cumulative)."""
        eps = self.epsilon if epsilon is None else epsilon
        if eps is None or not 0 < eps < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {eps}")
        if self.k < 1:
            raise ValueError("empty accumulator: push at least one block first")
        dense = self._dense
        cdf = np.cumsum(dense)
        tails = cdf[-1] - cdf
        nz = np.flatnonzero(dense)
        ok = nz[tails[nz] <= eps]
        # the largest support point always has zero tail, so ok is non-empty
        return float((self._off + int(ok[0])) * self._step)

    def distribution(self) -> SumDistribution:
        nz = np.flatnonzero(self._dense)
        support = (self._off + nz) * self._step
        return SumDistribution(
            support=support.astype(float),
            probs=self._dense[nz].copy(),
            resolution=self.h_res if self.exact else self.h_res_coarse,
        )


def rate_quantile(acc: RateAccumulator, epsilon: float) -> float:
    """Functional form of RateAccumulator.rate_quantile."""
    return acc.rate_quantile(epsilon)


def push_block(acc: RateAccumulator, group: int) -> RateAccumulator:
    """Functional form of RateAccumulator.push_block."""
    return acc.push_block(group)


def rate_unconditional(model: SourceModel, K: int, epsilon: float) -> float:
    """Quantile of the K-fold convolution of the full prior (no marginal info)."""
    if K < 1:
        raise ValueError(f"block count must be >= 1, got {K}")
    acc = RateAccumulator(model.collapse_marginals())
    for _ in range(K):
        acc.push_block(1)
    return acc.rate_quantile(epsilon)


class ChernoffBatch(NamedTuple):
    """Closed-form batch-size surrogate: real value, integer ceiling, degeneracy."""

    value: float
    k_int: int
    degenerate: bool


def k_c_chernoff(stats: EntropyStats, eta: float, epsilon: float) -> ChernoffBatch:
    """Chernoff-bound batch size for channel rate c = E[H] / (1 - eta)."""
    if not 0 < eta < 1:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if stats.var_h == 0:
        return ChernoffBatch(0.0, 1, True)
    c = stats.e_h / (1.0 - eta)
    value = (-2.0 * math.log(epsilon) * stats.var_h) / (c * c * eta * eta) * (
        1.0 + stats.m_h * c * eta / (3.0 * stats.var_h)
    )
    return ChernoffBatch(value, max(1, math.ceil(value)), False)


def k_c(model: SourceModel, c: float, epsilon: float) -> int:
    """Smallest K with P{sum of K entropies > K*c} <= epsilon (exact DP).

    Searches incrementally; a Chernoff bound guarantees the search terminates,
    and a 10x cutoff above it guards against misuse.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    stats = compute_stats(model)
    if c <= stats.e_h:
        raise ModelError(
            f"no finite batch size exists: channel rate {c!r} does not exceed "
            f"the mean conditional entropy {stats.e_h!r}"
        )
    if c >= stats.h_max:
        return 1
    eta = 1.0 - stats.e_h / c
    cutoff = max(8, 10 * k_c_chernoff(stats, eta, epsilon).k_int)
    acc = RateAccumulator(model.collapse_marginals())
    for K in range(1, cutoff + 1):
        acc.push_block(1)
        if acc.tail_above(K * c) <= epsilon:
            return K
    raise RuntimeError(f"batch-size search exceeded cutoff {cutoff}")
