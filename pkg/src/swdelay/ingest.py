"""Model construction from symbol traces.

A paired symbol trace is cut into blocks of n symbols, each block is reduced
to its empirical joint pmf, and the relative entropy of every block against
block 1 becomes the quantization coordinate: the range of those divergences
is split into equal-width intervals, each occupied interval becomes one
joint-cdf level, and the block closest to the interval midpoint represents
the level.  The same procedure applied to the two marginal sequences yields
the marginal groups, and the occupancy fractions become the prior.

Marginal quantization is independent of the joint quantization and can
therefore break the members-share-marginals invariant; a final repair step
fits every member pmf to its group representative's marginals (iterative
proportional fitting) and reports the distortion it introduced.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .entropy import cond_entropy_x_given_y_bits, marginal_x, marginal_y, relative_entropy_bits
from .model import CdfEntry, SourceModel


class IngestError(ValueError):
    """Raised on malformed traces or impossible quantization requests."""


@dataclass(frozen=True)
class TraceBlock:
    index: int
    joint_pmf: np.ndarray
    marginal_x: np.ndarray
    marginal_y: np.ndarray
    d_to_ref: float
    d_to_ref_x: float
    d_to_ref_y: float


@dataclass(frozen=True)
class BlockAssignment:
    block: int
    group: int   # 0 when the block was quarantined
    member: int
    d_to_ref: float


@dataclass(frozen=True)
class IngestResult:
    model: SourceModel
    assignment: tuple[BlockAssignment, ...]
    marginal_distortion: float   # largest total-variation change of the repair
    quarantined: tuple[int, ...]  # blocks with infinite divergence to block 1


def blockify(trace, n: int, alphabet_x: int | None = None,
             alphabet_y: int | None = None) -> list[TraceBlock]:
    """Cut a paired symbol trace into blocks with empirical statistics.

    ``trace`` is a sequence of (x, y) integer pairs (array-like of shape
    (N, 2)).  A trailing partial block is dropped.  Divergences use the
    conventions 0*log(0/q) = 0 and p>0, q=0 -> infinity (block flagged).
    """
    arr = np.asarray(trace, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise IngestError("trace must be a non-empty sequence of (x, y) pairs")
    if n < 1:
        raise IngestError(f"block length must be >= 1, got {n}")
    if arr.shape[0] < n:
        raise IngestError(f"trace shorter than one block ({arr.shape[0]} < {n})")
    if arr.min() < 0:
        raise IngestError("symbols must be nonnegative integers")
    ax = int(alphabet_x if alphabet_x is not None else arr[:, 0].max() + 1)
    ay = int(alphabet_y if alphabet_y is not None else arr[:, 1].max() + 1)
    if arr[:, 0].max() >= ax or arr[:, 1].max() >= ay:
        raise IngestError("symbol outside the declared alphabet")

    blocks: list[TraceBlock] = []
    ref = ref_x = ref_y = None
    for t in range(arr.shape[0] // n):
        chunk = arr[t * n:(t + 1) * n]
        flat = np.bincount(chunk[:, 0] * ay + chunk[:, 1], minlength=ax * ay)
        pmf = flat.reshape(ax, ay) / n
        mx, my = marginal_x(pmf), marginal_y(pmf)
        if t == 0:
            ref, ref_x, ref_y = pmf, mx, my
            d = dx = dy = 0.0
        else:
            d = relative_entropy_bits(pmf, ref)
            dx = relative_entropy_bits(mx, ref_x)
            dy = relative_entropy_bits(my, ref_y)
        blocks.append(TraceBlock(t + 1, pmf, mx, my, d, dx, dy))
    return blocks


def _levels(values: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width interval index per value, plus the interval midpoints."""
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo or count == 1:
        return np.zeros(len(values), dtype=np.int64), np.array([lo])
    width = (hi - lo) / count
    idx = np.minimum(((values - lo) / width).astype(np.int64), count - 1)
    mids = lo + (np.arange(count) + 0.5) * width
    return idx, mids


def _fit_marginals(pmf: np.ndarray, tx: np.ndarray, ty: np.ndarray,
                   iters: int = 500, tol: float = 1e-13) -> np.ndarray:
    """Iterative proportional fitting of a pmf to target marginals."""
    q = pmf + 1e-15
    q /= q.sum()
    for _ in range(iters):
        rows = q.sum(axis=1)
        q *= np.divide(tx, rows, out=np.zeros_like(tx), where=rows > 0)[:, None]
        cols = q.sum(axis=0)
        q *= np.divide(ty, cols, out=np.zeros_like(ty), where=cols > 0)[None, :]
        if (np.abs(q.sum(axis=1) - tx).max() < tol
                and np.abs(q.sum(axis=0) - ty).max() < tol):
            break
    else:
        raise IngestError("marginal repair did not converge")
    return q / q.sum()


def quantize_model(
    blocks: list[TraceBlock],
    joint_levels: int,
    marginal_levels: int,
    *,
    representative: str = "midpoint",
    seed: int | None = None,
    block_len_n: int | None = None,
    slot_seconds: float | None = None,
) -> IngestResult:
    """Quantize block divergences into a SourceModel plus block assignments.

    ``representative="midpoint"`` picks the block whose divergence is closest
    to its interval midpoint (deterministic); ``"random"`` draws it uniformly
    from the interval's blocks with the given seed.
    """
    if joint_levels < 1 or marginal_levels < 1:
        raise IngestError("level counts must be >= 1")
    if representative not in ("midpoint", "random"):
        raise IngestError(f"unknown representative mode {representative!r}")
    if not blocks:
        raise IngestError("no blocks to quantize")

    finite = [b for b in blocks if math.isfinite(b.d_to_ref)
              and math.isfinite(b.d_to_ref_x) and math.isfinite(b.d_to_ref_y)]
    finite_idx = {b.index for b in finite}
    quarantined = tuple(b.index for b in blocks if b.index not in finite_idx)
    if not finite:
        raise IngestError("every block has infinite divergence to the reference")

    d = np.array([b.d_to_ref for b in finite])
    dx = np.array([b.d_to_ref_x for b in finite])
    dy = np.array([b.d_to_ref_y for b in finite])
    jl, jmids = _levels(d, joint_levels)
    xl, _ = _levels(dx, marginal_levels)
    yl, _ = _levels(dy, marginal_levels)
    if len(set(jl.tolist())) < joint_levels:
        warnings.warn(
            f"only {len(set(jl.tolist()))} of {joint_levels} joint levels are "
            "occupied; empty levels dropped",
            RuntimeWarning,
            stacklevel=2,
        )

    rng = np.random.default_rng(seed) if representative == "random" else None

    # groups = occupied (marginal-x level, marginal-y level) pairs;
    # members = occupied joint levels within a group
    pair_of = list(zip(xl.tolist(), yl.tolist()))
    group_keys = sorted(set(pair_of))
    group_index = {key: i + 1 for i, key in enumerate(group_keys)}
    cells: dict[tuple[int, int], list[int]] = {}
    for pos, (pair, lev) in enumerate(zip(pair_of, jl.tolist())):
        cells.setdefault((group_index[pair], lev), []).append(pos)

    member_keys: dict[int, list[int]] = {}
    for g, lev in sorted(cells):
        member_keys.setdefault(g, []).append(lev)

    def _representative(pos_list: list[int], lev: int) -> TraceBlock:
        if rng is not None:
            return finite[pos_list[int(rng.integers(len(pos_list)))]]
        mid = jmids[lev]
        best = min(pos_list, key=lambda p: (abs(float(d[p]) - mid), finite[p].index))
        return finite[best]

    entries: list[CdfEntry] = []
    assignment_of: dict[int, tuple[int, int]] = {}
    distortion = 0.0
    total = len(finite)
    for g, levels in member_keys.items():
        reps: list[tuple[int, TraceBlock, int]] = []  # (level, block, count)
        for j, lev in enumerate(levels, start=1):
            pos_list = cells[(g, lev)]
            reps.append((j, _representative(pos_list, lev), len(pos_list)))
            for p in pos_list:
                assignment_of[finite[p].index] = (g, j)
        # anchor = the member with the largest occupancy (ties: lowest level)
        anchor = max(reps, key=lambda r: (r[2], -r[0]))[1]
        tx, ty = anchor.marginal_x, anchor.marginal_y
        for j, rep, count in reps:
            fitted = _fit_marginals(rep.joint_pmf, tx, ty)
            distortion = max(distortion, float(np.abs(fitted - rep.joint_pmf).sum()) / 2)
            entries.append(
                CdfEntry(
                    group=g,
                    member=j,
                    prob=count / total,
                    cond_entropy=cond_entropy_x_given_y_bits(fitted),
                    joint_pmf=fitted,
                )
            )

    assignment = tuple(
        BlockAssignment(
            b.index,
            *(assignment_of.get(b.index, (0, 0))),
            d_to_ref=b.d_to_ref,
        )
        for b in blocks
    )
    model = SourceModel(
        tuple(entries),
        block_len_n=block_len_n if block_len_n is not None else 1,
        slot_seconds=slot_seconds,
    )
    return IngestResult(model, assignment, distortion, quarantined)
