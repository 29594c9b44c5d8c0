"""Desk-scale random-binning codec with a posterior-weighted typicality decoder.

Sequences of K blocks of n symbols are mapped to bin indices by a seeded
pseudo-random hash (no codebook is stored); the decoder enumerates the
sequences consistent with the received bin(s), keeps those typical under
some joint-cdf hypothesis compatible with the observed marginal groups, and
returns the candidate whose best hypothesis posterior is highest.  Ties
break to the lexicographically smallest candidate.

Typicality is the empirical log-likelihood kind: a sequence is typical when
its per-symbol log-likelihood deviates from the per-symbol entropy average
by at most ``delta`` bits.  When the bin count is at least the number of
possible sequences the binning degenerates to the identity map, which makes
it injective.

Everything here is exhaustive by design and guarded to small alphabets and
short blocks; the asymptotic guarantees of the rate oracle are *not*
reproducible at these sizes, so tests work with margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .entropy import entropy_bits, marginal_x, marginal_y
from .model import CdfEntry, ModelError, SourceModel

MAX_SEQUENCES = 10_000_000
_TYP_TOL = 1e-12  # absorbs float noise on the typicality boundary


@dataclass(frozen=True)
class CodecConfig:
    alphabet_x: int
    alphabet_y: int
    n: int
    blocks: int
    delta: float
    rate_bits: float
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.alphabet_x <= 4 or not 1 <= self.alphabet_y <= 4:
            raise ValueError("alphabet sizes must be between 1 and 4")
        if not 1 <= self.n <= 16:
            raise ValueError("block length n must be between 1 and 16")
        if not 1 <= self.blocks <= 2:
            raise ValueError("block count K must be 1 or 2")
        if self.alphabet_x ** (self.n * self.blocks) > MAX_SEQUENCES:
            raise ValueError("alphabet_x ** (n*K) exceeds the exhaustive-decoding guard")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.rate_bits < 0:
            raise ValueError("rate_bits must be nonnegative")


# ---------------------------------------------------------------------------
# typicality
# ---------------------------------------------------------------------------

def _log2_pmf(pmf: np.ndarray) -> np.ndarray:
    out = np.full(pmf.shape, -np.inf)
    mask = pmf > 0
    out[mask] = np.log2(pmf[mask])
    return out


def _as_blocks(seq, K: int, n: int) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64)
    if arr.size != K * n:
        raise ValueError(f"sequence length {arr.size} does not match K*n = {K * n}")
    return arr.reshape(K, n)


def _dev_x(x: np.ndarray, entries: tuple[CdfEntry, ...], delta: float) -> float:
    ll = 0.0
    hbar = 0.0
    for k, e in enumerate(entries):
        px = marginal_x(e.joint_pmf)
        lp = _log2_pmf(px)[x[k]]
        ll += float(lp.sum())
        hbar += entropy_bits(px)
    K, n = x.shape
    return abs(-ll / (K * n) - hbar / K)


def is_typical(x_blocks, cdf_sequence, delta: float) -> bool:
    """Empirical log-likelihood of x within delta of the mean block entropy."""
    entries = tuple(cdf_sequence)
    K = len(entries)
    x = np.asarray(x_blocks, dtype=np.int64).reshape(K, -1)
    return _dev_x(x, entries, delta) <= delta + _TYP_TOL


def jointly_typical(x_blocks, y_blocks, cdf_sequence, delta: float) -> bool:
    """X, Y and joint deviations all within delta under the hypothesis."""
    entries = tuple(cdf_sequence)
    K = len(entries)
    x = np.asarray(x_blocks, dtype=np.int64).reshape(K, -1)
    y = np.asarray(y_blocks, dtype=np.int64).reshape(K, -1)
    n = x.shape[1]
    ll_x = ll_y = ll_xy = 0.0
    h_x = h_y = h_xy = 0.0
    for k, e in enumerate(entries):
        pj = e.joint_pmf
        px, py = marginal_x(pj), marginal_y(pj)
        ll_x += float(_log2_pmf(px)[x[k]].sum())
        ll_y += float(_log2_pmf(py)[y[k]].sum())
        ll_xy += float(_log2_pmf(pj)[x[k], y[k]].sum())
        h_x += entropy_bits(px)
        h_y += entropy_bits(py)
        h_xy += entropy_bits(pj)
    bound = delta + _TYP_TOL
    return (
        abs(-ll_x / (K * n) - h_x / K) <= bound
        and abs(-ll_y / (K * n) - h_y / K) <= bound
        and abs(-ll_xy / (K * n) - h_xy / K) <= bound
    )


# ---------------------------------------------------------------------------
# binning
# ---------------------------------------------------------------------------

def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # uint64 wrap-around is the point
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def _hash_bins(indices: np.ndarray, bins: int, seed: int) -> np.ndarray:
    """Stable seeded map from sequence index to bin in 1..bins."""
    mixed = _splitmix64(indices.astype(np.uint64) ^ _splitmix64(np.uint64(seed)))
    return (mixed % np.uint64(bins)).astype(np.int64) + 1


BATCH = "batch"
SEQUENTIAL = "sequential"


class Codebook:
    """Seeded binning structure bound to a model and observed marginal groups.

    ``batch`` bins whole K-block sequences into 2**rate_bits bins (the
    deferred-encoding message); ``sequential`` bins every prefix of k blocks
    into 2**(rate_bits/K) bins and the message is the bin tuple (the
    deferred-decoding message stream).
    """

    def __init__(
        self,
        model: SourceModel,
        config: CodecConfig,
        groups: tuple[int, ...],
        kind: str = BATCH,
    ):
        if kind not in (BATCH, SEQUENTIAL):
            raise ValueError(f"kind must be {BATCH!r} or {SEQUENTIAL!r}")
        groups = tuple(int(g) for g in groups)
        if len(groups) != config.blocks:
            raise ValueError("one marginal group per block is required")
        for g in groups:
            for e in model.group_entries(g):
                if e.joint_pmf is None:
                    raise ModelError(f"cdf ({e.group},{e.member}) has no joint pmf")
                if e.joint_pmf.shape != (config.alphabet_x, config.alphabet_y):
                    raise ModelError(
                        f"cdf ({e.group},{e.member}) pmf shape {e.joint_pmf.shape} "
                        f"does not match the configured alphabets"
                    )
        self.model = model
        self.config = config
        self.groups = groups
        self.kind = kind
        ax = config.alphabet_x
        self.total = ax ** (config.n * config.blocks)
        if kind == BATCH:
            self.bins = max(1, round(2.0 ** config.rate_bits))
            self.injective = self.bins >= self.total
        else:
            per = config.rate_bits / config.blocks
            self.bins = max(1, round(2.0 ** per))
            self.injective = all(
                self.bins >= ax ** (config.n * k) for k in range(1, config.blocks + 1)
            )

    # -- sequence indexing (lexicographic, first symbol most significant) --

    def seq_index(self, x: np.ndarray) -> int:
        ax = self.config.alphabet_x
        idx = 0
        for s in np.asarray(x, dtype=np.int64).ravel():
            idx = idx * ax + int(s)
        return idx

    @cached_property
    def _all_sequences(self) -> np.ndarray:
        """(total, K*n) table of every X sequence, in index order."""
        ax = self.config.alphabet_x
        width = self.config.n * self.config.blocks
        idx = np.arange(self.total, dtype=np.int64)
        out = np.empty((self.total, width), dtype=np.int8)
        for pos in range(width - 1, -1, -1):
            out[:, pos] = idx % ax
            idx //= ax
        return out

    def _prefix_total(self, k: int) -> int:
        return self.config.alphabet_x ** (self.config.n * k)

    @cached_property
    def _bins_table(self) -> np.ndarray | list[np.ndarray]:
        """Bin of every sequence (batch) or of every prefix per k (sequential)."""
        if self.kind == BATCH:
            idx = np.arange(self.total, dtype=np.int64)
            if self.injective:
                return idx + 1
            return _hash_bins(idx, self.bins, self.config.seed)
        tables = []
        for k in range(1, self.config.blocks + 1):
            idx = np.arange(self._prefix_total(k), dtype=np.int64)
            if self.bins >= self._prefix_total(k):
                tables.append(idx + 1)
            else:
                tables.append(_hash_bins(idx, self.bins, self.config.seed + k))
        return tables

    def bin_of(self, x_blocks) -> int | tuple[int, ...]:
        """Raw binning map (total function; typicality is the encoder's job)."""
        x = _as_blocks(x_blocks, self.config.blocks, self.config.n)
        if self.kind == BATCH:
            return int(self._bins_table[self.seq_index(x)])
        out = []
        for k in range(1, self.config.blocks + 1):
            pref = self.seq_index(x[:k])
            out.append(int(self._bins_table[k - 1][pref]))
        return tuple(out)

    def marginal_entries(self) -> tuple[CdfEntry, ...]:
        """Representative entry per block (marginals are group properties)."""
        return tuple(self.model.group_entries(g)[0] for g in self.groups)


def encode(codebook: Codebook, x_blocks) -> int | tuple[int, ...]:
    """Bin index (batch) or per-block bin tuple (sequential); atypical -> bin 1."""
    cfg = codebook.config
    x = _as_blocks(x_blocks, cfg.blocks, cfg.n)
    entries = codebook.marginal_entries()
    if codebook.kind == BATCH:
        if _dev_x(x, entries, cfg.delta) > cfg.delta + _TYP_TOL:
            return 1
        return codebook.bin_of(x)
    bins = []
    for k in range(1, cfg.blocks + 1):
        if _dev_x(x[:k], entries[:k], cfg.delta) > cfg.delta + _TYP_TOL:
            bins.append(1)
        else:
            bins.append(int(codebook._bins_table[k - 1][codebook.seq_index(x[:k])]))
    return tuple(bins)


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

class _DecoderTables:
    """Vectorised per-(codebook, y) candidate scoring."""

    def __init__(self, codebook: Codebook):
        self.cb = codebook
        cfg = codebook.config
        self.K, self.n = cfg.blocks, cfg.n
        self.width = self.K * self.n
        self.delta = cfg.delta

        # hypotheses: one member choice per block, posterior per hypothesis
        member_lists = [codebook.model.group_entries(g) for g in codebook.groups]
        self.hypotheses: list[tuple[CdfEntry, ...]] = []
        self.posteriors: list[float] = []
        def _walk(k, chosen, post):
            if k == self.K:
                self.hypotheses.append(tuple(chosen))
                self.posteriors.append(post)
                return
            phi = sum(e.prob for e in member_lists[k])
            for e in member_lists[k]:
                _walk(k + 1, chosen + [e], post * e.prob / phi)
        _walk(0, [], 1.0)

        # X-side: marginals are shared within a group, so the X-typicality
        # mask over all sequences is hypothesis independent
        seqs = codebook._all_sequences
        logpx = np.zeros((self.width, cfg.alphabet_x))
        hx = 0.0
        for k, e in enumerate(codebook.marginal_entries()):
            px = marginal_x(e.joint_pmf)
            logpx[k * self.n:(k + 1) * self.n, :] = _log2_pmf(px)[None, :]
            hx += entropy_bits(px)
        ll = logpx[np.arange(self.width)[None, :], seqs].sum(axis=1)
        dev = np.abs(-ll / self.width - hx / self.K)
        self.x_typical = dev <= cfg.delta + _TYP_TOL

        # per-hypothesis constants for the Y and XY deviations
        self.h_y = []
        self.h_xy = []
        for hyp in self.hypotheses:
            self.h_y.append(sum(entropy_bits(marginal_y(e.joint_pmf)) for e in hyp))
            self.h_xy.append(sum(entropy_bits(e.joint_pmf) for e in hyp))

    def candidate_indices(self, bins) -> np.ndarray:
        cb = self.cb
        if cb.kind == BATCH:
            mask = cb._bins_table == int(bins)
        else:
            bins = tuple(bins)
            full = cb._all_sequences
            mask = np.ones(cb.total, dtype=bool)
            for k in range(1, self.K + 1):
                stride = cb.config.alphabet_x ** (self.width - k * self.n)
                prefix_idx = np.arange(cb.total, dtype=np.int64) // stride
                mask &= cb._bins_table[k - 1][prefix_idx] == bins[k - 1]
        mask &= self.x_typical
        return np.flatnonzero(mask)

    def score(self, cand: np.ndarray, y: np.ndarray, hyp_filter=None):
        """Per-candidate best posterior over hypotheses typical with y.

        Returns (best_posterior, typical_any, typical_per_hypothesis_matrix).
        """
        cb = self.cb
        seqs = cb._all_sequences[cand]
        y_flat = np.asarray(y, dtype=np.int64).reshape(self.K, self.n)
        best = np.zeros(len(cand))
        typical_mat = np.zeros((len(self.hypotheses), len(cand)), dtype=bool)
        pos = np.arange(self.width)[None, :]
        for hi, hyp in enumerate(self.hypotheses):
            if hyp_filter is not None and not hyp_filter(hi):
                continue
            # Y deviation: scalar for the trial under this hypothesis
            ll_y = 0.0
            table = np.zeros((self.width, cb.config.alphabet_x))
            for k, e in enumerate(hyp):
                py = _log2_pmf(marginal_y(e.joint_pmf))
                ll_y += float(py[y_flat[k]].sum())
                logj = _log2_pmf(e.joint_pmf)  # (ax, ay)
                table[k * self.n:(k + 1) * self.n, :] = logj[:, y_flat[k]].T
            if abs(-ll_y / self.width - self.h_y[hi] / self.K) > self.delta + _TYP_TOL:
                continue
            ll_xy = table[pos, seqs].sum(axis=1)
            dev = np.abs(-ll_xy / self.width - self.h_xy[hi] / self.K)
            ok = dev <= self.delta + _TYP_TOL
            typical_mat[hi] = ok
            post = self.posteriors[hi]
            better = ok & (post > best)
            best[better] = post
        return best, typical_mat


def decode(codebook: Codebook, bins, y_blocks) -> np.ndarray | None:
    """Posterior-argmax typicality decoding; None signals failure to decode."""
    tables = _DecoderTables(codebook)
    return _decode_with(tables, bins, y_blocks)[0]


def _decode_with(tables: _DecoderTables, bins, y_blocks):
    cand = tables.candidate_indices(bins)
    if cand.size == 0:
        return None, cand, None
    best, typ = tables.score(cand, y_blocks)
    qualified = best > 0
    if not np.any(qualified):
        return None, cand, typ
    sub = np.flatnonzero(qualified)
    winner = sub[int(np.argmax(best[sub]))]
    # argmax returns the first maximum, i.e. the lexicographically smallest
    x = tables.cb._all_sequences[cand[winner]].astype(np.int64)
    return x.reshape(tables.K, tables.n), cand, typ


# ---------------------------------------------------------------------------
# Monte Carlo trials with error-event classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodecTrialReport:
    trials: int
    errors: int
    failures: int
    eps1: int  # source pair atypical under the true cdf sequence
    eps2: int  # bin collision with a sequence typical under the true cdfs
    eps3: int  # bin collision typical only under a false hypothesis

    @property
    def err_rate(self) -> float:
        return self.errors / self.trials if self.trials else math.nan


def run_codec_trials(
    model: SourceModel,
    groups,
    config: CodecConfig,
    *,
    kind: str = BATCH,
    trials: int,
    seed: int,
) -> CodecTrialReport:
    """Encode/decode i.i.d. source pairs and classify every decoding error."""
    codebook = Codebook(model, config, tuple(groups), kind)
    tables = _DecoderTables(codebook)
    cfg = config
    rng = np.random.default_rng(seed)

    member_lists = [model.group_entries(g) for g in codebook.groups]
    hyp_index = {
        tuple(e.member for e in hyp): hi for hi, hyp in enumerate(tables.hypotheses)
    }

    errors = failures = eps1 = eps2 = eps3 = 0
    for _ in range(trials):
        xs, ys, members = [], [], []
        for k in range(cfg.blocks):
            mem = member_lists[k]
            probs = np.array([e.prob for e in mem])
            e = mem[rng.choice(len(mem), p=probs / probs.sum())]
            members.append(e.member)
            flat = rng.choice(
                e.joint_pmf.size, size=cfg.n, p=e.joint_pmf.ravel() / e.joint_pmf.sum()
            )
            xs.append(flat // cfg.alphabet_y)
            ys.append(flat % cfg.alphabet_y)
        x = np.array(xs, dtype=np.int64)
        y = np.array(ys, dtype=np.int64)
        true_hyp = hyp_index[tuple(members)]

        bins = encode(codebook, x)
        decoded, cand, typ = _decode_with(tables, bins, y)
        ok = decoded is not None and np.array_equal(decoded, x)
        if ok:
            continue
        errors += 1
        if decoded is None:
            failures += 1
        true_entries = tables.hypotheses[true_hyp]
        if not jointly_typical(x, y, true_entries, cfg.delta):
            eps1 += 1
            continue
        # the true pair is typical, so the error came from a collision
        true_idx = codebook.seq_index(x)
        collided_true = False
        if typ is not None:
            others = cand != true_idx
            collided_true = bool(np.any(typ[true_hyp] & others))
        if collided_true:
            eps2 += 1
        else:
            eps3 += 1

    return CodecTrialReport(trials, errors, failures, eps1, eps2, eps3)


def error_breakdown(report: CodecTrialReport) -> tuple[int, int, int]:
    """The three error-event counts of a trial run."""
    return report.eps1, report.eps2, report.eps3
