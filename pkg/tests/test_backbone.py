import numpy as np
import pytest

from aoicoop.backbone import (ConstantDelayModel, EmpiricalDelayModel, ParametricDelayModel,
                              load_delay_samples, payload_for, sample_delay)
from aoicoop.errors import ConfigError, TraceFormatError


class TestPayloadSizing:
    def test_decoded_reference_packet(self):
        p = payload_for("decoded", 768)
        assert p.payload_bytes == 798
        assert p.fragments == 1
        assert p.code == "decoded"

    def test_soft_eight_bits(self):
        p = payload_for("soft", 768, m=8)
        assert p.payload_bytes == 12318
        assert p.fragments == 9
        assert p.code == "soft_m8"

    def test_soft_four_bits(self):
        p = payload_for("soft", 768, m=4)
        assert p.payload_bytes == 6174
        assert p.fragments == 5

    def test_fragments_monotone_in_m(self):
        payloads = [payload_for("soft", 768, m=m) for m in range(1, 9)]
        sizes = [p.payload_bytes for p in payloads]
        frags = [p.fragments for p in payloads]
        assert all(b > a for a, b in zip(sizes, sizes[1:]))
        assert all(b >= a for a, b in zip(frags, frags[1:]))

    def test_soft_needs_m(self):
        with pytest.raises(ValueError):
            payload_for("soft", 768)

    def test_positive_data_bytes(self):
        with pytest.raises(ValueError):
            payload_for("decoded", 0)


class TestConstantModel:
    def test_always_the_same(self):
        model = ConstantDelayModel(10e-3)
        p = payload_for("decoded", 768)
        assert all(sample_delay(model, p, s) == 10e-3 for s in range(5))

    def test_positive_required(self):
        with pytest.raises(ValueError):
            ConstantDelayModel(0.0)


class TestParametricModel:
    def test_calibrated_means(self):
        model = ParametricDelayModel()
        assert model.mean(payload_for("soft", 768, m=8)) == pytest.approx(19.9e-3)
        assert model.mean(payload_for("soft", 768, m=4)) == pytest.approx(11.5e-3)
        assert model.mean(payload_for("decoded", 768)) == pytest.approx(3.1e-3)

    def test_sample_mean_matches_model_mean(self):
        model = ParametricDelayModel()
        p = payload_for("soft", 768, m=8)
        rng = np.random.default_rng(3)
        draws = np.array([model.sample(p, rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(model.mean(p), rel=0.01)

    def test_jitter_bounds(self):
        model = ParametricDelayModel(jitter=0.25)
        p = payload_for("soft", 768, m=4)
        rng = np.random.default_rng(4)
        draws = np.array([model.sample(p, rng) for _ in range(5000)])
        mean = model.mean(p)
        assert draws.min() >= 0.75 * mean
        assert draws.max() <= 1.25 * mean
        assert np.all(draws > 0)

    def test_mean_increases_with_fragments(self):
        model = ParametricDelayModel()
        means = [model.mean(payload_for("soft", 768, m=m)) for m in range(1, 9)]
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ParametricDelayModel(jitter=1.0)
        with pytest.raises(ValueError):
            ParametricDelayModel(base_s=0.0, per_fragment_s=0.0)


class TestEmpiricalModel:
    def _write(self, path, header, values):
        lines = ([header] if header else []) + [str(v) for v in values]
        path.write_text("\n".join(lines) + "\n")

    def test_resampling_matches_file_mean(self, tmp_path):
        rng = np.random.default_rng(11)
        values_ms = rng.uniform(5.0, 25.0, 400)
        f = tmp_path / "soft8.txt"
        self._write(f, "# kind=soft_m8 unit=ms oneway=true", values_ms)
        model = EmpiricalDelayModel.from_files([f])
        p = payload_for("soft", 768, m=8)
        draws = np.array([sample_delay(model, p, s) for s in range(10000)])
        assert draws.mean() == pytest.approx(values_ms.mean() * 1e-3, rel=0.02)

    def test_round_trip_files_are_halved(self, tmp_path):
        f = tmp_path / "dec.txt"
        self._write(f, "# kind=decoded unit=ms oneway=false", [6.0, 6.0])
        kind, arr = load_delay_samples(f)
        assert kind == "decoded"
        assert np.allclose(arr, 3e-3)

    def test_oneway_override(self, tmp_path):
        f = tmp_path / "dec.txt"
        self._write(f, "# kind=decoded unit=ms oneway=false", [6.0])
        _, arr = load_delay_samples(f, assume_oneway=True)
        assert np.allclose(arr, 6e-3)

    def test_seconds_unit(self, tmp_path):
        f = tmp_path / "dec.txt"
        self._write(f, "# kind=decoded unit=s", [0.004])
        _, arr = load_delay_samples(f)
        assert np.allclose(arr, 4e-3)

    def test_nonpositive_rejected(self, tmp_path):
        f = tmp_path / "bad.txt"
        self._write(f, "# kind=decoded unit=ms", [3.0, -1.0])
        with pytest.raises(TraceFormatError, match="bad.txt:3"):
            load_delay_samples(f)

    def test_malformed_line_names_its_number(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("# kind=decoded unit=ms\n3.0\nnot-a-number\n")
        with pytest.raises(TraceFormatError, match="bad.txt:3"):
            load_delay_samples(f)

    def test_empty_file_rejected(self, tmp_path):
        f = tmp_path / "empty.txt"
        f.write_text("# kind=decoded unit=ms\n")
        with pytest.raises(TraceFormatError):
            load_delay_samples(f)

    def test_missing_kind_is_config_error(self, tmp_path):
        f = tmp_path / "soft8.txt"
        self._write(f, "# kind=soft_m8 unit=ms", [10.0])
        model = EmpiricalDelayModel.from_files([f])
        with pytest.raises(ConfigError):
            model.sample(payload_for("decoded", 768), np.random.default_rng(0))

    def test_unknown_kind_rejected(self, tmp_path):
        f = tmp_path / "odd.txt"
        self._write(f, "# kind=soft_m9 unit=ms", [10.0])
        with pytest.raises(TraceFormatError):
            load_delay_samples(f)

    def test_sampling_is_deterministic_per_seed(self, tmp_path):
        f = tmp_path / "dec.txt"
        self._write(f, "# kind=decoded unit=ms", list(range(1, 50)))
        model = EmpiricalDelayModel.from_files([f])
        p = payload_for("decoded", 768)
        assert sample_delay(model, p, 9) == sample_delay(model, p, 9)
