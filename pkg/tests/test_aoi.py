import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aoicoop.aoi import (AoiSeries, BernoulliSource, MonteCarloSource, SimConfig,
                         SlotOutcome, TraceSource, brute_force_oracle, emit_trace,
                         ingest_trace, run)
from aoicoop.backbone import ConstantDelayModel, ParametricDelayModel
from aoicoop.errors import ConfigError, TraceFormatError

T = 1.2e-3


def perfect_single(n_sensors, rounds=3000, warmup=10, seed=1):
    return SimConfig(mode="single_ap", n_sensors=n_sensors, rounds=rounds, n_aps=1,
                     warmup_rounds=warmup, seed=seed,
                     decode_source=BernoulliSource(np.ones((1, 1))))


def alternating_trace(rounds):
    return [SlotOutcome(round_index=j, sensor=0, gen_time_ms=j * 1.2,
                        decoded=(j % 2 == 0,)) for j in range(rounds)]


class TestClosedForms:
    def test_perfect_channel_sawtooth(self):
        res = run(perfect_single(1))
        assert res.network_avg_aoi == pytest.approx(1.8e-3, rel=1e-6)

    def test_perfect_channel_ten_sensors(self):
        res = run(perfect_single(10, rounds=1000))
        assert res.network_avg_aoi == pytest.approx(7.2e-3, rel=1e-6)

    def test_alternating_decode_doubles_the_gap(self):
        cfg = SimConfig(mode="single_ap", n_sensors=1, rounds=200, n_aps=1,
                        warmup_rounds=4,
                        decode_source=TraceSource(outcomes=alternating_trace(200)))
        res = run(cfg)
        assert res.network_avg_aoi == pytest.approx(2.4e-3, rel=1e-6)

    def test_aoi_lower_bound(self):
        for n in (1, 2, 5):
            res = run(perfect_single(n, rounds=500))
            floor = T + n * T / 2
            assert np.all(res.per_sensor_avg_aoi >= floor - 1e-12)


class TestSawtoothShape:
    def test_age_drops_exactly_to_arrival_minus_generation(self):
        src = BernoulliSource(np.array([[0.6, 0.8]]))
        cfg = SimConfig(mode="co_ap", n_sensors=2, rounds=50, warmup_rounds=2,
                        decode_source=src, delay_model=ConstantDelayModel(2e-3), seed=3)
        res = run(cfg)
        for updates in res.updates:
            series = AoiSeries(updates)
            for wall, gen in updates:
                age_after = series.age_at(wall + 1e-12)
                assert age_after == pytest.approx(wall - gen, abs=1e-9)
            walls = np.array([u[0] for u in updates])
            gens = np.array([u[1] for u in updates])
            assert np.all(np.diff(gens) > 0)
            assert np.all(walls > gens)

    def test_area_accounting_consistency(self):
        src = BernoulliSource(np.array([[0.5, 0.9]]))
        cfg = SimConfig(mode="co_ap", n_sensors=1, rounds=400, warmup_rounds=0,
                        decode_source=src, delay_model=ConstantDelayModel(2e-3), seed=9)
        res = run(cfg)
        series = AoiSeries(res.updates[0])
        walls = [u[0] for u in res.updates[0]]
        total_area = series.areas().sum()
        span = walls[-1] - walls[0]
        assert series.average(walls[0], walls[-1]) * span == pytest.approx(total_area)
        assert np.all(series.gaps() > 0)


class TestOracle:
    def test_matches_engine_across_modes_and_delays(self):
        rng = np.random.default_rng(17)
        checked = 0
        for mode in ("single_ap", "co_ap", "soft_co_ap"):
            for delay in (ConstantDelayModel(3e-3), ParametricDelayModel()):
                seed = int(rng.integers(0, 2 ** 31))
                n = int(rng.integers(1, 4))
                src = BernoulliSource(rng.uniform(0.3, 0.95, (n, 2)),
                                      p_joint={4: rng.uniform(0.2, 0.8, (n, 1))})
                cfg = SimConfig(mode=mode, n_sensors=n, rounds=80, warmup_rounds=4,
                                decode_source=src,
                                delay_model=delay if mode != "single_ap" else None,
                                n_aps=1 if mode == "single_ap" else 2,
                                m=4 if mode == "soft_co_ap" else None, seed=seed)
                got = run(cfg).network_avg_aoi
                want = brute_force_oracle(cfg).network_avg_aoi
                assert abs(got - want) / want < 1e-3
                checked += 1
        assert checked == 6

    def test_soft_constant_delay_instance(self):
        src = BernoulliSource(np.array([[0.5, 0.6], [0.5, 0.6]]),
                              p_joint={4: np.full((2, 1), 0.5)})
        cfg = SimConfig(mode="soft_co_ap", n_sensors=2, rounds=90, warmup_rounds=5,
                        m=4, decode_source=src,
                        delay_model=ConstantDelayModel(10e-3), seed=7)
        got = run(cfg).network_avg_aoi
        want = brute_force_oracle(cfg).network_avg_aoi
        assert abs(got - want) / want < 1e-3

    def test_perfect_channel_matches_closed_form(self):
        cfg = perfect_single(1, rounds=100, warmup=10)
        res = brute_force_oracle(cfg)
        assert res.network_avg_aoi == pytest.approx(1.8e-3, rel=1e-3)

    def test_refuses_large_instances(self):
        with pytest.raises(ValueError):
            brute_force_oracle(perfect_single(4, rounds=50))
        with pytest.raises(ValueError):
            brute_force_oracle(perfect_single(1, rounds=101))


class TestDominance:
    def test_soft_le_co_le_single_with_constant_delays(self):
        kw = dict(n_sensors=3, rounds=500, warmup_rounds=5, seed=11,
                  delay_model=ConstantDelayModel(2e-3))
        src = BernoulliSource(np.array([[0.5, 0.7]]),
                              p_joint={4: np.array([[0.45]])})
        rs = run(SimConfig(mode="single_ap", decode_source=src, n_aps=2, **kw))
        rc = run(SimConfig(mode="co_ap", decode_source=src, n_aps=2, **kw))
        rf = run(SimConfig(mode="soft_co_ap", decode_source=src, n_aps=2, m=4, **kw))
        assert np.all(rf.per_sensor_avg_aoi <= rc.per_sensor_avg_aoi + 1e-12)
        assert np.all(rc.per_sensor_avg_aoi <= rs.per_sensor_avg_aoi + 1e-12)

    def test_adding_a_secondary_never_hurts(self):
        # same seed, monotone joint table: updates with 3 APs dominate 2 APs
        p = np.array([[0.5, 0.7, 0.7]])
        pj = {4: np.array([[0.4, 0.7]])}
        kw = dict(mode="soft_co_ap", n_sensors=2, rounds=600, warmup_rounds=5,
                  m=4, seed=23, delay_model=ConstantDelayModel(2e-3))
        two = run(SimConfig(decode_source=BernoulliSource(p, pj), n_aps=2, **kw))
        three = run(SimConfig(decode_source=BernoulliSource(p, pj), n_aps=3, **kw))
        assert np.all(three.per_sensor_avg_aoi <= two.per_sensor_avg_aoi + 1e-12)

    def test_stale_arrivals_are_noops(self):
        src = BernoulliSource(np.array([[0.5, 0.9]]))
        kw = dict(n_sensors=2, rounds=300, warmup_rounds=5, seed=4, decode_source=src)
        horizon = 300 * 2 * T
        delayed = run(SimConfig(mode="co_ap", n_aps=2,
                                delay_model=ConstantDelayModel(2 * horizon), **kw))
        single = run(SimConfig(mode="single_ap", n_aps=1, **kw))
        assert np.allclose(delayed.per_sensor_avg_aoi, single.per_sensor_avg_aoi)


class TestDeterminism:
    def test_identical_runs_bit_for_bit(self):
        src = BernoulliSource(np.array([[0.6, 0.8]]),
                              p_joint={3: np.array([[0.5]])})
        cfg = SimConfig(mode="soft_co_ap", n_sensors=3, rounds=400, warmup_rounds=5,
                        m=3, decode_source=src,
                        delay_model=ParametricDelayModel(), seed=99)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.per_sensor_avg_aoi, b.per_sensor_avg_aoi)
        assert a.updates == b.updates
        assert set(a.observed) == set(b.observed)
        for key, value in a.observed.items():
            np.testing.assert_array_equal(value, b.observed[key])

    def test_montecarlo_source_replays(self):
        src = MonteCarloSource(snr_db=np.array([[-3.0, -2.0]]), payload_bytes=8)
        cfg = SimConfig(mode="soft_co_ap", n_sensors=1, rounds=40, warmup_rounds=2,
                        m=4, decode_source=src,
                        delay_model=ConstantDelayModel(1e-3), seed=12)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.per_sensor_avg_aoi, b.per_sensor_avg_aoi)

    def test_montecarlo_incremental_joint_with_three_aps(self):
        # two failing secondaries forward soft bits with staggered delays;
        # the primary re-decodes at each arrival with the branches so far
        src = MonteCarloSource(snr_db=np.array([[-6.0, -5.0, -5.0]]),
                               payload_bytes=8)
        cfg = SimConfig(mode="soft_co_ap", n_sensors=1, rounds=60, warmup_rounds=2,
                        m=8, n_aps=3, decode_source=src,
                        delay_model=ParametricDelayModel(jitter=0.25), seed=21)
        res = run(cfg)
        assert res.observed["joint_attempts"] > 0
        assert res.observed["p_joint"] > 0
        again = run(cfg)
        assert np.array_equal(res.per_sensor_avg_aoi, again.per_sensor_avg_aoi)


class TestConfigValidation:
    def test_mode_checked(self):
        with pytest.raises(ConfigError):
            SimConfig(mode="dual_ap", n_sensors=1, rounds=10,
                      decode_source=BernoulliSource(np.ones((1, 1)))).validate()

    def test_soft_needs_m(self):
        cfg = SimConfig(mode="soft_co_ap", n_sensors=1, rounds=10,
                        decode_source=BernoulliSource(np.ones((1, 2))),
                        delay_model=ConstantDelayModel(1e-3))
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_soft_needs_joint_table(self):
        cfg = SimConfig(mode="soft_co_ap", n_sensors=1, rounds=10, m=4,
                        decode_source=BernoulliSource(np.ones((1, 2))),
                        delay_model=ConstantDelayModel(1e-3))
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_forwarding_needs_delay_model(self):
        cfg = SimConfig(mode="co_ap", n_sensors=1, rounds=10,
                        decode_source=BernoulliSource(np.ones((1, 2))))
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_warmup_below_rounds(self):
        with pytest.raises(ConfigError):
            SimConfig(mode="single_ap", n_sensors=1, rounds=10, warmup_rounds=10,
                      n_aps=1, decode_source=BernoulliSource(np.ones((1, 1)))).validate()

    def test_probabilities_in_range(self):
        with pytest.raises(ValueError):
            BernoulliSource(np.array([[1.2]]))


class TestTraceIO:
    def _soft_outcomes(self):
        return [
            SlotOutcome(0, 0, 0.0, (False, False), {1: False, 4: True}),
            SlotOutcome(0, 1, 1.2, (True, True), {}),
            SlotOutcome(1, 0, 2.4, (False, True), {}),
            SlotOutcome(1, 1, 3.6, (True, False), {4: False}),
        ]

    def test_round_trip_lossless(self, tmp_path):
        path = tmp_path / "trace.csv"
        outcomes = self._soft_outcomes()
        emit_trace(outcomes, path)
        assert ingest_trace(path) == outcomes

    @given(st.data())
    def test_round_trip_lossless_property(self, data):
        import os
        import tempfile
        n_aps = data.draw(st.integers(1, 4))
        outcomes = []
        for slot in range(data.draw(st.integers(1, 12))):
            decoded = tuple(data.draw(st.booleans()) for _ in range(n_aps))
            joint = {}
            if n_aps > 1 and not all(decoded[1:]):
                for m in range(1, 9):
                    if data.draw(st.booleans()):
                        joint[m] = data.draw(st.booleans())
            outcomes.append(SlotOutcome(
                round_index=slot, sensor=0,
                gen_time_ms=data.draw(st.floats(0, 1e4, allow_nan=False,
                                                allow_infinity=False)),
                decoded=decoded, joint=joint))
        fd, path = tempfile.mkstemp(suffix=".csv")
        os.close(fd)
        try:
            emit_trace(outcomes, path)
            assert ingest_trace(path) == outcomes
        finally:
            os.unlink(path)

    def test_empty_trace_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# columns: only a header\n")
        with pytest.raises(TraceFormatError):
            ingest_trace(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "trace.csv"
        emit_trace(self._soft_outcomes(), path)
        with open(path, "a") as fh:
            fh.write("2,0,4.8,not-a-flag,1,,,,,,,,\n")
        with pytest.raises(TraceFormatError, match="trace.csv:6"):
            ingest_trace(path)

    def test_joint_without_branch_data_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        # joint_m4 = 1 while both APs decoded: nothing was ever forwarded
        path.write_text("0,0,0.0,1,1,,,,1,,,,\n")
        with pytest.raises(TraceFormatError, match="trace.csv:1"):
            ingest_trace(path)

    def test_short_trace_rejected_by_engine(self, tmp_path):
        path = tmp_path / "trace.csv"
        emit_trace(alternating_trace(10), path)
        cfg = SimConfig(mode="single_ap", n_sensors=1, rounds=20, n_aps=1,
                        warmup_rounds=2, decode_source=TraceSource(path=path))
        with pytest.raises(ConfigError):
            run(cfg)

    def test_mismatched_slot_grid_rejected(self):
        skewed = [SlotOutcome(j, 0, j * 1.3, (True,)) for j in range(10)]
        cfg = SimConfig(mode="single_ap", n_sensors=1, rounds=10, n_aps=1,
                        warmup_rounds=2, decode_source=TraceSource(outcomes=skewed))
        with pytest.raises(ConfigError):
            run(cfg)

    def test_hand_written_trace_file(self, tmp_path):
        # a literal decode-every-other-round pattern, written by hand,
        # repeated to fill the horizon: averages T + 2T/2 = 2.4 ms
        rows = [f"{j},0,{j * 1.2},{1 - j % 2}" + "," * 8 for j in range(120)]
        path = tmp_path / "hand.csv"
        path.write_text("\n".join(rows) + "\n")
        cfg = SimConfig(mode="single_ap", n_sensors=1, rounds=120, n_aps=1,
                        warmup_rounds=4, decode_source=TraceSource(path=path))
        res = run(cfg)
        assert res.network_avg_aoi == pytest.approx(2.4e-3, rel=1e-6)

    def test_trace_replay_reproduces_simulation(self, tmp_path):
        outcomes = alternating_trace(120)
        path = tmp_path / "trace.csv"
        emit_trace(outcomes, path)
        from_file = run(SimConfig(mode="single_ap", n_sensors=1, rounds=120, n_aps=1,
                                  warmup_rounds=4, decode_source=TraceSource(path=path)))
        in_memory = run(SimConfig(mode="single_ap", n_sensors=1, rounds=120, n_aps=1,
                                  warmup_rounds=4,
                                  decode_source=TraceSource(outcomes=outcomes)))
        assert np.array_equal(from_file.per_sensor_avg_aoi, in_memory.per_sensor_avg_aoi)


class TestCoApBehaviour:
    def test_forwarding_reduces_aoi(self):
        src = BernoulliSource(np.array([[0.7, 0.95]]))
        kw = dict(n_sensors=10, rounds=2000, warmup_rounds=10, seed=31,
                  decode_source=src)
        single = run(SimConfig(mode="single_ap", n_aps=1, **kw))
        coop = run(SimConfig(mode="co_ap", n_aps=2,
                             delay_model=ParametricDelayModel(), **kw))
        assert coop.network_avg_aoi < single.network_avg_aoi

    def test_forward_arrival_time_is_slot_end_plus_delay(self):
        # primary never decodes; secondary always does, with constant delay
        src = BernoulliSource(np.array([[0.0, 1.0]]))
        delay = 2.5e-3
        cfg = SimConfig(mode="co_ap", n_sensors=1, rounds=30, warmup_rounds=2,
                        decode_source=src, delay_model=ConstantDelayModel(delay),
                        seed=0)
        res = run(cfg)
        for wall, gen in res.updates[0]:
            assert wall == pytest.approx(gen + T + delay)

    def test_arrival_tied_with_slot_boundary(self):
        # constant delay of exactly two slots lands arrivals on later slot
        # ends; the (time, sensor, ap) order still delivers every update.
        # Slot 0 never counts (its generation time equals the initial
        # condition) and the last two arrivals fall past the horizon.
        src = BernoulliSource(np.array([[0.0, 1.0]]))
        delay = 2 * T
        cfg = SimConfig(mode="co_ap", n_sensors=1, rounds=40, warmup_rounds=2,
                        decode_source=src, delay_model=ConstantDelayModel(delay),
                        seed=0)
        res = run(cfg)
        assert len(res.updates[0]) == 37
        assert res.updates[0][0] == (pytest.approx(4 * T), pytest.approx(T))
        for wall, gen in res.updates[0]:
            assert wall == pytest.approx(gen + T + delay)

    def test_observed_statistics(self):
        src = BernoulliSource(np.array([[0.5, 1.0]]))
        cfg = SimConfig(mode="co_ap", n_sensors=1, rounds=4000, warmup_rounds=10,
                        decode_source=src, delay_model=ConstantDelayModel(1e-3),
                        seed=5)
        res = run(cfg)
        assert res.observed["p_primary"] == pytest.approx(0.5, abs=0.03)
        assert res.observed["p_secondary"][0] == 1.0
        assert res.observed["delay_decoded_mean_s"] == pytest.approx(1e-3)
