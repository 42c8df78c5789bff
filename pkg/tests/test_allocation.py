"""Mode selection, budget splitting, RB assignment, and side-info codec."""

import numpy as np
import pytest

from sct.allocation import (BAND_FULL, BAND_SCALAR, AllocationPlan,
                            BandRecord, ChannelConfig,
                            InfeasibleAllocationError, allocate_budgets,
                            assign_rbs, decode_label_side_info,
                            decode_side_info, dequantize_band_sigma,
                            derive_n_rb, encode_label_side_info,
                            encode_side_info, quantize_band_sigma,
                            rb_capacity, realize_channel, select_mode,
                            side_info_symbol_cost, total_budget)


class TestSelectMode:
    def test_uniform_scores_stay_overall(self):
        assert select_mode([1.0, 1.0, 1.0]) == "overall"

    def test_spread_scores_go_selective(self):
        assert select_mode([0.01, 5.0]) == "selective"

    def test_all_zero_is_overall(self):
        assert select_mode([0.0, 0.0, 0.0]) == "overall"

    def test_threshold_is_strict(self):
        # CoV of [1, 3] is exactly 0.5: not strictly above the default tau
        assert select_mode([1.0, 3.0], tau=0.5) == "overall"
        assert select_mode([1.0, 3.001], tau=0.5) == "selective"

    def test_scale_invariance(self):
        rng = np.random.default_rng(30)
        for _ in range(200):
            scores = rng.uniform(0, 10, rng.integers(1, 9))
            for alpha in (1e-3, 0.7, 42.0):
                assert select_mode(scores) == select_mode(alpha * scores)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_mode([])


class TestBudgetSplit:
    def test_total_budget_floor(self):
        assert total_budget(0.125, 64, 64) == 512
        assert total_budget(0.1, 63, 63) == 396  # floor(396.9)

    def test_random_instances_respect_invariants(self):
        rng = np.random.default_rng(31)
        n_min = 16
        tested = 0
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            scores = np.round(rng.uniform(0, 10, n), 3)
            if rng.random() < 0.1:
                scores[:] = 0.0
            scored = list(zip(range(n), scores))
            budget = int(rng.integers(50, 3000))
            si = int(rng.integers(0, 60))
            mode = select_mode(scores) if n > 1 else "overall"
            try:
                plan = allocate_budgets(scored, budget, mode,
                                        n_min=n_min, side_info_symbols=si)
            except InfeasibleAllocationError:
                continue
            tested += 1
            kept = [e for e in plan.entries if not e.dropped]
            # budget exactly consumed, never exceeded
            assert sum(e.n_symbols for e in kept) == budget - si
            # per-entry floor
            assert all(e.n_symbols >= n_min for e in kept)
            # dropped entries get nothing
            assert all(e.n_symbols == 0 for e in plan.entries if e.dropped)
            # entries ordered by descending score
            entry_scores = [e.score for e in plan.entries]
            assert entry_scores == sorted(entry_scores, reverse=True)
            # higher score never receives fewer symbols
            sizes = [e.n_symbols for e in kept]
            assert sizes == sorted(sizes, reverse=True)
            if mode == "selective":
                cut = np.quantile(scores, 0.25)
                for e in plan.entries:
                    assert e.dropped == (e.score < cut)
            else:
                assert not any(e.dropped for e in plan.entries)
        assert tested > 800

    def test_infeasible_budget_raises(self):
        with pytest.raises(InfeasibleAllocationError):
            allocate_budgets([(0, 1.0), (1, 1.0)], 30, "overall", n_min=16)
        with pytest.raises(InfeasibleAllocationError):
            allocate_budgets([(0, 1.0)], 20, "overall", n_min=16,
                             side_info_symbols=10)

    def test_zero_scores_split_evenly(self):
        plan = allocate_budgets([(0, 0.0), (1, 0.0)], 100, "overall")
        sizes = sorted(e.n_symbols for e in plan.entries)
        assert sizes == [50, 50]

    def test_remainder_goes_to_top_score(self):
        plan = allocate_budgets([(0, 2.0), (1, 1.0), (2, 1.0)], 102,
                                "overall", n_min=16)
        by_label = {e.label: e.n_symbols for e in plan.entries}
        # floors: 51, 25, 25 -> remainder 1 goes to label 0
        assert by_label == {0: 52, 1: 25, 2: 25}

    def test_floor_overshoot_shrinks_lowest_first(self):
        # shares: [64.5, 2.1, 0.9] -> floors [64, 16, 16] = 96 > 80
        plan = allocate_budgets([(0, 9.0), (1, 0.3), (2, 0.12)], 80,
                                "overall", n_min=16)
        by_label = {e.label: e.n_symbols for e in plan.entries}
        assert sum(by_label.values()) == 80
        assert by_label[1] == by_label[2] == 16
        assert by_label[0] == 48


class TestChannel:
    def test_awgn_unit_gains_and_noise_power(self):
        ch = realize_channel(ChannelConfig(snr_db=3.0), n_rb=7)
        assert np.all(ch.gains == 1.0)
        assert ch.noise_var == pytest.approx(10 ** -0.3)

    def test_rayleigh_unit_mean_square_gain(self):
        cfg = ChannelConfig(snr_db=0.0, fading="rayleigh-block")
        rng = np.random.default_rng(32)
        ch = realize_channel(cfg, n_rb=200000, rng=rng)
        assert np.mean(ch.gains ** 2) == pytest.approx(1.0, abs=0.01)
        assert np.all(ch.gains >= 0)

    def test_rb_count_guard(self):
        with pytest.raises(ValueError):
            realize_channel(ChannelConfig(), n_rb=0)

    def test_derived_pool_has_slack(self):
        assert derive_n_rb(512, 12) == 43 + 4
        assert derive_n_rb(1, 12) == 1 + 4

    def test_rb_capacity_formula(self):
        assert rb_capacity(1.0, 1.0, 12) == pytest.approx(12.0)
        assert rb_capacity(2.0, 0.5, 6) == pytest.approx(6 * np.log2(9.0))


def make_plan(sizes, si=0):
    entries = [type(e)(**vars(e)) for e in []]  # keep mypy quiet
    from sct.allocation import PlanEntry
    entries = [PlanEntry(label=i, score=float(len(sizes) - i), n_symbols=s)
               for i, s in enumerate(sizes)]
    return AllocationPlan(mode="selective", entries=entries,
                          side_info_symbols=si)


class TestRbAssignment:
    def test_best_gains_serve_side_info_then_score_order(self):
        rng = np.random.default_rng(33)
        for _ in range(300):
            n_entries = int(rng.integers(1, 5))
            sizes = [int(rng.integers(1, 60)) for _ in range(n_entries)]
            si = int(rng.integers(0, 30))
            plan = make_plan(sizes, si)
            n_rb = int(np.ceil((sum(sizes) + si) / 12)) + n_entries + 1
            gains = rng.uniform(0.05, 2.0, n_rb)
            ch = realize_channel(ChannelConfig(fading="awgn"), n_rb=n_rb)
            ch = type(ch)(gains=gains, noise_var=ch.noise_var)
            plan = assign_rbs(plan, ch, n_re=12)
            seq = list(plan.side_info_rb_ids)
            for e in plan.entries:
                seq.extend(e.rb_ids)
            assert len(set(seq)) == len(seq)  # no RB reuse
            # assignment follows descending gain
            assert np.all(np.diff(gains[seq]) <= 1e-12)
            if si:
                assert len(plan.side_info_rb_ids) == int(np.ceil(si / 12))
            for e in plan.entries:
                assert not e.truncated
                assert len(e.rb_ids) == int(np.ceil(e.n_symbols / 12))

    def test_gain_tie_breaks_to_lower_index(self):
        plan = make_plan([12, 12])
        ch = realize_channel(ChannelConfig(), n_rb=4)  # all gains 1.0
        plan = assign_rbs(plan, ch, n_re=12)
        assert plan.entries[0].rb_ids == [0]
        assert plan.entries[1].rb_ids == [1]

    def test_pool_exhaustion_truncates_lowest_score(self):
        plan = make_plan([24, 24])
        ch = realize_channel(ChannelConfig(), n_rb=3)
        plan = assign_rbs(plan, ch, n_re=12)
        assert not plan.entries[0].truncated
        assert plan.entries[0].n_symbols == 24
        assert plan.entries[1].truncated
        assert plan.entries[1].n_symbols == 12  # one RB's worth

    def test_capacity_aligned_takes_extra_low_snr_rbs(self):
        plan_plain = make_plan([24])
        plan_wide = make_plan([24])
        # g=1, noise 1: 12 bits per RB < 2 bits/symbol target of 48 bits
        ch = realize_channel(ChannelConfig(snr_db=0.0), n_rb=6)
        a = assign_rbs(plan_plain, ch, n_re=12, capacity_aligned=False)
        b = assign_rbs(plan_wide, ch, n_re=12, capacity_aligned=True)
        assert len(a.entries[0].rb_ids) == 2
        assert len(b.entries[0].rb_ids) == 4  # 4 x 12 bits >= 48


class TestSideInfoCodec:
    def roundtrip(self, labels, fills, records=()):
        blob = encode_side_info(labels, fills, records)
        si = decode_side_info(blob, [r.label for r in records])
        assert si is not None
        assert np.array_equal(si.labels, labels)
        assert np.array_equal(si.fills, np.asarray(fills, dtype=np.uint8))
        assert len(si.band_records) == len(records)
        for got, sent in zip(si.band_records, records):
            assert got.label == sent.label and got.mode == sent.mode
            assert np.array_equal(got.sigmas, sent.sigmas)
        return blob

    def test_random_maps_round_trip(self):
        rng = np.random.default_rng(34)
        for _ in range(500):
            rows = int(rng.integers(1, 9))
            cols = int(rng.integers(1, 9))
            n_labels = int(rng.integers(1, 5))
            labels = rng.integers(0, n_labels, (rows, cols))
            fills = rng.integers(0, 256, n_labels)
            self.roundtrip(labels, list(fills))

    def test_band_records_round_trip(self):
        labels = np.array([[0, 0], [1, 1]])
        recs = [BandRecord(0, BAND_FULL,
                           np.arange(64, dtype=np.uint8)),
                BandRecord(1, BAND_SCALAR,
                           np.array([77], dtype=np.uint8))]
        blob = self.roundtrip(labels, [10, 20], recs)
        # header 3 + fills 2 + two runs (3 each) + records (66, 3) + crc 2
        assert len(blob) == 3 + 2 + 6 + 66 + 3 + 2

    def test_every_single_byte_corruption_detected(self):
        labels = np.array([[0, 1, 1], [2, 2, 2]])
        blob = bytearray(encode_side_info(labels, [5, 6, 7]))
        for i in range(len(blob)):
            bad = bytearray(blob)
            bad[i] ^= 0x41
            assert decode_side_info(bytes(bad)) is None

    def test_truncation_and_trailing_garbage_detected(self):
        blob = encode_side_info(np.array([[0, 0]]), [9])
        assert decode_side_info(blob[:-3]) is None
        assert decode_side_info(blob[:2]) is None
        assert decode_side_info(b"") is None

    def test_label_alias_helpers(self):
        labels = np.array([[1, 0], [0, 0]])
        blob = encode_label_side_info(labels, [3, 4])
        out = decode_label_side_info(blob)
        assert out is not None
        got_labels, got_fills = out
        assert np.array_equal(got_labels, labels)
        assert got_fills.tolist() == [3, 4]

    def test_record_label_mismatch_rejected(self):
        labels = np.array([[0]])
        recs = [BandRecord(0, BAND_SCALAR, np.array([5], dtype=np.uint8))]
        blob = encode_side_info(labels, [1], recs)
        assert decode_side_info(blob, record_labels=[2]) is None
        # expecting a record that is not there
        blob2 = encode_side_info(labels, [1])
        assert decode_side_info(blob2, record_labels=[0]) is None
        # not expecting a record that is there
        assert decode_side_info(blob, record_labels=[]) is None

    def test_long_run_splitting(self):
        labels = np.zeros((200, 400), dtype=np.int64)  # 80000 > 0xFFFF
        # header fields must fit in a byte, so encode a slice pattern instead
        with pytest.raises(ValueError):
            encode_side_info(labels, [0])

    def test_symbol_cost(self):
        assert side_info_symbol_cost(13) == 110
        assert side_info_symbol_cost(0) == 6

    def test_sigma_quantizer_round_trip(self):
        q = np.arange(256, dtype=np.uint8)
        sigma = dequantize_band_sigma(q)
        assert np.array_equal(quantize_band_sigma(sigma), q)
        # relative error bound from 32 steps per octave, within range
        s = np.array([0.5, 1.0, 9.3, 140.0, 245.0])
        err = np.abs(dequantize_band_sigma(quantize_band_sigma(s)) - s)
        assert np.all(err <= (s + 1.0) * (2 ** (1 / 64.0) - 1))
        # out-of-range sigmas saturate at the top code
        assert quantize_band_sigma(np.array([4000.0])).tolist() == [255]
