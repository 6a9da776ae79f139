import math

import numpy as np
import pytest

from aoicoop.chain import ChainParams, estimate_link_probabilities, joint_decode, realize_packet


class TestRealizePacket:
    def test_noiseless_links_decode_everywhere(self):
        params = ChainParams(payload_bytes=8)
        real = realize_packet([math.inf, math.inf], params, 3, 0)
        assert real.decoded_ok == [True, True]
        assert real.failed_secondaries == []
        for m in (1, 4, 8):
            assert joint_decode(real, m, [1], params)

    def test_deterministic_per_seed_and_index(self):
        params = ChainParams(payload_bytes=8)
        a = realize_packet([-3.0, -2.0], params, 11, 5)
        b = realize_packet([-3.0, -2.0], params, 11, 5)
        assert np.array_equal(a.info_bits, b.info_bits)
        assert a.decoded_ok == b.decoded_ok
        assert np.array_equal(a.qsv8[1].values, b.qsv8[1].values)

    def test_adding_an_ap_leaves_others_untouched(self):
        params = ChainParams(payload_bytes=8)
        two = realize_packet([-3.0, -2.0], params, 11, 5)
        three = realize_packet([-3.0, -2.0, -2.0], params, 11, 5)
        assert np.array_equal(two.info_bits, three.info_bits)
        assert two.decoded_ok == three.decoded_ok[:2]
        assert np.array_equal(two.qsv8[0].values, three.qsv8[0].values)
        assert np.array_equal(two.qsv8[1].values, three.qsv8[1].values)

    def test_soft_bytes_follow_255_means_one(self):
        # noiseless: coded bit 1 must sit above the byte midpoint
        params = ChainParams(payload_bytes=8)
        real = realize_packet([math.inf], params, 3, 1)
        from aoicoop.codec import encode
        coded = encode(real.info_bits)
        bytes8 = real.qsv8[0].values
        assert np.all(bytes8[coded == 1] > 128)
        assert np.all(bytes8[coded == 0] < 128)


class TestEstimateProbabilities:
    def test_noiseless_gives_all_ones(self):
        params = ChainParams(payload_bytes=8)
        table, outcomes = estimate_link_probabilities(
            (math.inf, math.inf), params, [4], 25, 1, collect_outcomes=True)
        assert np.allclose(table.p_ap, 1.0)
        assert table.n_cond[0] == 0
        assert math.isnan(table.p_joint[4][0])
        assert all(decoded == (True, True) for decoded, _ in outcomes)

    def test_conditioning_counts_only_failures(self):
        params = ChainParams(payload_bytes=12)
        table, outcomes = estimate_link_probabilities(
            (-5.0, -4.0), params, [1, 8], 300, 99, collect_outcomes=True)
        both_fail = sum(1 for decoded, _ in outcomes
                        if not decoded[0] and not decoded[1])
        assert table.n_cond[0] == both_fail
        assert 0.0 <= table.p_joint[1][0] <= table.p_joint[8][0] <= 1.0

    def test_joint_flags_only_when_branches_exist(self):
        params = ChainParams(payload_bytes=12)
        _, outcomes = estimate_link_probabilities(
            (-5.0, -4.0), params, [4], 200, 7, collect_outcomes=True)
        for decoded, joint in outcomes:
            if joint:
                assert not decoded[0] and not decoded[1]

    def test_three_ap_branch_counts(self):
        params = ChainParams(payload_bytes=12)
        table, _ = estimate_link_probabilities(
            (-5.0, -4.0, -4.0), params, [4], 250, 5)
        assert table.n_cond.size == 2
        # two remote branches recover at least as often as one
        if table.n_cond[1] > 30:
            assert table.p_joint[4][1] >= table.p_joint[4][0] - 0.1

    def test_forwarding_lifts_decode_probability_substantially(self):
        # at a mid-waterfall pair, adding the secondary's decoded packets
        # raises the reception probability by tens of points
        params = ChainParams(payload_bytes=12)
        table, outcomes = estimate_link_probabilities(
            (-3.0, -2.0), params, [4], 800, 2024, collect_outcomes=True)
        p_single = table.p_ap[0]
        p_coop = np.mean([decoded[0] or decoded[1] for decoded, _ in outcomes])
        assert p_coop - p_single >= 0.30

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            estimate_link_probabilities((0.0,), ChainParams(), [9], 10, 0)

    def test_rejects_zero_packets(self):
        with pytest.raises(ValueError):
            estimate_link_probabilities((0.0,), ChainParams(), [4], 0, 0)
