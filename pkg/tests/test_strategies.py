import math

import numpy as np
import pytest

from swdelay import (
    CdfEntry,
    Message,
    RateAccumulator,
    SourceModel,
    compute_stats,
    k_c,
    rate_unconditional,
    run_baseline_accumulate,
    run_baseline_blockwise,
    run_baseline_known_joint,
    run_strategy,
    run_wait_to_decode,
    run_wait_to_encode,
    sample_trace,
)

from conftest import lindley_wc


def test_message_invariants():
    Message(emitted_at=3, bits=8.0, covers=(1, 3), blank=False)
    Message(emitted_at=3, bits=0.0, covers=None, blank=True)
    with pytest.raises(ValueError):
        Message(emitted_at=3, bits=0.0, covers=(1, 3), blank=False)
    with pytest.raises(ValueError):
        Message(emitted_at=3, bits=4.0, covers=None, blank=True)


def test_we_single_entry_hand_trace(single_cdf_model):
    # H = 2, c = 4: every block flushes alone, service is half a block
    res = run_wait_to_encode(single_cdf_model, epsilon=0.01, T=100, seed=0, c=4.0)
    assert res.mean_w_e == 1.0
    assert res.mean_w_c == pytest.approx(0.5, abs=1e-12)
    assert res.mean_w_d == 0.0
    assert res.mean_delay == pytest.approx(1.5, abs=1e-12)
    assert res.outage_rate == 0.0
    assert res.batches == 100


def test_wd_single_entry_hand_trace(single_cdf_model):
    res = run_wait_to_decode(single_cdf_model, epsilon=0.01, T=100, seed=0, c=4.0)
    assert res.mean_delay == pytest.approx(2.0, abs=1e-12)
    assert (res.mean_w_e, res.mean_w_c, res.mean_w_d) == (1.0, 1.0, 0.0)
    assert res.mean_encoding_rate == pytest.approx(4.0)


def test_wd_collapsed_deterministic_cycle(six_cdf_model):
    """Blind decoding always happens at exactly K_c blocks."""
    flat = six_cdf_model.collapse_marginals()
    for eta in (0.5, 0.25):
        c = 4.17 / (1 - eta)
        kc = k_c(six_cdf_model, c, 0.01)
        res = run_wait_to_decode(
            flat, epsilon=0.01, T=4000, seed=2, eta=eta, collect_batches=True
        )
        assert res.mean_delay == pytest.approx(kc / 2 + 1.5, abs=1e-12)
        assert all(b.covers[1] - b.covers[0] + 1 == kc for b in res.batch_log)


def test_we_collapsed_deterministic_cycle(six_cdf_model):
    flat = six_cdf_model.collapse_marginals()
    for eta in (0.5, 0.25):
        c = compute_stats(flat).e_h / (1 - eta)
        kc = k_c(six_cdf_model, c, 0.01)
        rx = rate_unconditional(six_cdf_model, kc, 0.01)
        res = run_wait_to_encode(flat, epsilon=0.01, T=4000, seed=2, eta=eta)
        expected = (kc + 1) / 2 + rx / c
        assert res.mean_delay == pytest.approx(expected, abs=1e-9)
        assert res.mean_delay <= 1.5 * kc + 0.5 + 1e-9


def test_we_quantile_degenerates_at_large_epsilon(single_cdf_model):
    # eps -> 1: the quantile collapses to the minimum entropy sum
    model = SourceModel((CdfEntry(1, 1, 0.5, 1.0), CdfEntry(1, 2, 0.5, 3.0)))
    res = run_wait_to_encode(model, epsilon=0.99, T=50, seed=1, c=2.5)
    assert res.batches == 50  # 1.0 <= c always flushes immediately
    assert res.mean_encoding_rate == pytest.approx(1.0)
    assert res.outage_rate > 0.2  # min-entropy coding loses often


def test_known_joint_baseline(single_cdf_model, six_cdf_model):
    res = run_baseline_known_joint(single_cdf_model, T=200, seed=0, c=4.0)
    assert res.mean_delay == pytest.approx(1.5, abs=1e-12)
    assert res.outage_rate == 0.0

    # matches an independent Lindley replay of the same trace
    T = 3000
    res = run_baseline_known_joint(six_cdf_model, T=T, seed=7, eta=0.1)
    tr = sample_trace(six_cdf_model, T, seed=7)
    c = 4.17 / 0.9
    wcs = lindley_wc(tr.h.tolist(), [float(t) for t in range(1, T + 1)], c)
    assert res.mean_w_c == pytest.approx(float(np.mean(wcs)), abs=1e-9)
    assert res.mean_delay == pytest.approx(1.0 + float(np.mean(wcs)), abs=1e-9)


def test_blockwise_baseline(six_cdf_model):
    res = run_baseline_blockwise(six_cdf_model, T=500, seed=1, c=8.34)
    assert res.mean_delay == pytest.approx(1 + 6 / 8.34, abs=1e-12)
    assert not res.unstable
    assert res.outage_rate == 0.0
    res = run_baseline_blockwise(six_cdf_model, T=2000, seed=1, c=5.0)
    assert res.unstable  # H_max = 6 > c


def test_accumulate_baseline_n1_is_per_block_quantile(six_cdf_model):
    res = run_baseline_accumulate(
        six_cdf_model, epsilon=0.01, N=1, T=400, seed=3, c=8.34
    )
    assert res.batches == 400
    # every block ships the one-block unconditional quantile
    assert res.mean_encoding_rate == pytest.approx(
        rate_unconditional(six_cdf_model, 1, 0.01)
    )


def test_accumulate_at_kc_matches_we_worst_case(six_cdf_model):
    flat = six_cdf_model.collapse_marginals()
    eta = 0.25
    c = 4.17 / (1 - eta)
    kc = k_c(six_cdf_model, c, 0.01)
    we = run_wait_to_encode(flat, epsilon=0.01, T=2000, seed=5, eta=eta)
    accum = run_baseline_accumulate(
        six_cdf_model, epsilon=0.01, N=kc, T=2000, seed=5, eta=eta
    )
    assert accum.mean_delay == pytest.approx(we.mean_delay, abs=1e-9)
    assert accum.mean_encoding_rate == pytest.approx(we.mean_encoding_rate, abs=1e-12)


def test_accumulate_rate_approaches_mean_entropy(six_cdf_model):
    # larger batches average the source out: per-block rate drops toward E[H]
    rates = []
    for N in (1, 4, 16, 64):
        res = run_baseline_accumulate(
            six_cdf_model, epsilon=0.05, N=N, T=640, seed=9, c=8.34
        )
        rates.append(res.mean_encoding_rate / 1.0)
    assert rates == sorted(rates, reverse=True)
    assert rates[-1] < rates[0]
    assert rates[-1] >= 4.17


def test_delay_components_sum(six_cdf_model):
    for strategy in ("we", "wd", "known-joint", "blockwise"):
        res = run_strategy(
            strategy, six_cdf_model, epsilon=0.05, T=2000, seed=11, eta=0.25
        )
        assert res.mean_delay == pytest.approx(
            res.mean_w_e + res.mean_w_c + res.mean_w_d, abs=1e-9
        )


def test_flush_feasibility_and_decode_minimality(six_cdf_model):
    """Replay the trace and check the stopping rules block by block."""
    T = 1500
    eta, eps = 0.25, 0.05
    c = 4.17 / (1 - eta)
    for run, strategy in (
        (run_wait_to_encode, "we"),
        (run_wait_to_decode, "wd"),
    ):
        res = run(six_cdf_model, epsilon=eps, T=T, seed=13, eta=eta,
                  collect_batches=True)
        tr = sample_trace(six_cdf_model, T, seed=13)
        acc = RateAccumulator(six_cdf_model)
        for batch in res.batch_log:
            lo, hi = batch.covers
            acc.reset()
            for tau in range(lo, hi + 1):
                acc.push_block(int(tr.groups[tau - 1]))
                K = acc.k
                q = acc.rate_quantile(eps)
                if tau < hi:
                    assert q > K * c  # kept waiting strictly before the stop
                else:
                    assert q <= K * c  # feasible at the flush/decode block
            realized = float(np.sum(tr.h[lo - 1:hi]))
            assert batch.entropy_total == pytest.approx(realized, abs=1e-9)
            assert batch.outage == (realized > batch.rate_total + 1e-9)


def test_outage_guarantee_moderate_runs(six_cdf_model):
    for strategy, run in (("we", run_wait_to_encode), ("wd", run_wait_to_decode)):
        for eta, eps in ((0.25, 0.05), (0.1, 0.05)):
            res = run(six_cdf_model, epsilon=eps, T=30_000, seed=17, eta=eta)
            slack = 3 * math.sqrt(eps * (1 - eps) / res.batches)
            assert res.outage_rate <= eps + slack, (strategy, eta)


def test_records_stream(six_cdf_model):
    res = run_wait_to_decode(
        six_cdf_model, epsilon=0.05, T=300, seed=19, eta=0.25,
        collect_records=True,
    )
    recs = list(res.records)
    assert len(recs) == res.decoded_blocks
    assert all(r.w_e == 1.0 and r.w_c == 1.0 and r.w_d >= 0.0 for r in recs)
    mean = float(np.mean([r.total for r in recs]))
    assert mean == pytest.approx(res.mean_delay, abs=1e-9)
    # covered blocks are contiguous from the start
    assert [r.block for r in recs] == sorted(r.block for r in recs)


def test_overload_warns(six_cdf_model):
    with pytest.warns(RuntimeWarning, match="delay may diverge"):
        run_wait_to_encode(six_cdf_model, epsilon=0.05, T=50, seed=1, c=4.0)


def test_epsilon_required_and_bounded(six_cdf_model):
    for bad in (None, 0.0, 1.0, -0.1):
        with pytest.raises(ValueError, match="epsilon"):
            run_wait_to_encode(six_cdf_model, epsilon=bad, T=10, seed=1, eta=0.5)
        with pytest.raises(ValueError, match="epsilon"):
            run_wait_to_decode(six_cdf_model, epsilon=bad, T=10, seed=1, eta=0.5)


def test_determinism_same_seed(six_cdf_model):
    a = run_wait_to_encode(six_cdf_model, epsilon=0.05, T=5000, seed=23, eta=0.2)
    b = run_wait_to_encode(six_cdf_model, epsilon=0.05, T=5000, seed=23, eta=0.2)
    assert a == b


def test_compression_ratio_only_with_pmfs(six_cdf_model):
    res = run_wait_to_decode(six_cdf_model, epsilon=0.05, T=100, seed=1, eta=0.5)
    assert res.compression_ratio is None

    from swdelay import bsc_pair_model

    bsc = bsc_pair_model(0.1)  # uniform X: the marginal-entropy proxy is 1 bit
    res = run_wait_to_decode(bsc, epsilon=0.05, T=100, seed=1, eta=0.5)
    assert res.compression_ratio == pytest.approx(res.mean_encoding_rate / 1.0)


def test_message_streams(six_cdf_model):
    T = 200
    we = run_wait_to_encode(
        six_cdf_model, epsilon=0.05, T=T, seed=29, eta=0.25, collect_batches=True
    )
    # one non-blank message per batch, sized n * quantile, covering the batch
    assert len(we.messages) == we.batches
    for msg, batch in zip(we.messages, we.batch_log):
        assert not msg.blank
        assert msg.covers == batch.covers
        assert msg.emitted_at == batch.covers[1]
        assert msg.bits == pytest.approx(batch.rate_total * 1.0)
    total_bits = sum(m.bits for m in we.messages)
    assert we.mean_encoding_rate == pytest.approx(total_bits / T, abs=1e-12)

    wd = run_wait_to_decode(
        six_cdf_model, epsilon=0.05, T=T, seed=29, eta=0.25, collect_batches=True
    )
    # the saturated encoder ships one channel-rate message every block
    assert len(wd.messages) == T
    assert all(m.bits == pytest.approx(wd.c) for m in wd.messages)
    assert wd.messages[0].covers == (1, 1)
