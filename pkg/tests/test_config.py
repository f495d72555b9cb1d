import pytest
import yaml
from pydantic import ValidationError

from spadesim.config import (ExperimentConfig, MotionSpec, SchemeSpec,
                             SweepSpec, canonical_json, config_hash,
                             deep_merge, load_config_file)
from spadesim.core import MotionKind
from spadesim.modes import DirectImaging, HgSpade, PmSpade


class TestValidation:
    def test_defaults_valid(self):
        cfg = ExperimentConfig()
        assert cfg.version == 1
        assert cfg.schemes[0].kind == "pm"

    def test_frequency_out_of_range(self):
        with pytest.raises(ValidationError):
            MotionSpec(f=0.6)

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValidationError):
            SweepSpec(axis="frequency", values=[])

    def test_frequency_sweep_range_checked(self):
        with pytest.raises(ValidationError):
            SweepSpec(axis="frequency", values=[0.2, 0.55])

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(bogus=1)

    def test_unsupported_version(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(version=2)

    def test_negative_b_over_nu(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(noise={"b_over_nu": -0.1})


class TestConversion:
    def test_motion_to_model(self):
        spec = MotionSpec(kind="square_wave", amplitude=0.47, f=0.2)
        model = spec.to_model()
        assert model.kind is MotionKind.SQUARE_WAVE
        assert model.amplitude == 0.47

    def test_motion_frequency_override(self):
        model = MotionSpec(kind="sinusoid").to_model(f=0.35)
        assert model.f == 0.35

    def test_scheme_mapping(self):
        cfg = ExperimentConfig()
        motion = cfg.motion.to_model()
        assert isinstance(SchemeSpec(kind="pm").to_scheme(103.0, 0, 1), PmSpade)
        assert isinstance(SchemeSpec(kind="hg").to_scheme(103.0, 0, 1), HgSpade)
        di = cfg.scheme_for(SchemeSpec(kind="di"), motion)
        assert isinstance(di, DirectImaging)
        assert di.pixel_size == pytest.approx(4.6 / 103.0)

    def test_default_photon_budgets(self):
        assert SchemeSpec(kind="di").resolve_nu() == 400.0
        assert SchemeSpec(kind="pm").resolve_nu() == 60.0
        assert SchemeSpec(kind="hg", nu=123.0).resolve_nu() == 123.0

    def test_schedule_jitter(self):
        cfg = ExperimentConfig(schedule={"jitter": {"mean_ms": 2.8, "sd_ms": 0.48}})
        sch = cfg.schedule.to_schedule()
        assert sch.delay_jitter.mean_s == pytest.approx(2.8e-3)


class TestSerialization:
    def test_yaml_round_trip_lossless(self, tmp_path):
        cfg = ExperimentConfig(seed=7, trials=13,
                               motion={"kind": "sinusoid", "amplitude": 0.28},
                               sweep={"axis": "frequency", "values": [0.1, 0.2]})
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(cfg.model_dump(mode="json")))
        reloaded = ExperimentConfig(**load_config_file(str(path)))
        assert reloaded == cfg
        assert config_hash(reloaded) == config_hash(cfg)

    def test_hash_changes_with_content(self):
        a = ExperimentConfig(seed=1)
        b = ExperimentConfig(seed=2)
        assert config_hash(a) != config_hash(b)

    def test_canonical_json_is_sorted_and_stable(self):
        cfg = ExperimentConfig()
        assert canonical_json(cfg) == canonical_json(ExperimentConfig())


class TestDeepMerge:
    def test_nested_override(self):
        base = {"a": {"x": 1, "y": 2}, "b": 3}
        out = deep_merge(base, {"a": {"y": 9}})
        assert out == {"a": {"x": 1, "y": 9}, "b": 3}
        assert base["a"]["y"] == 2  # original untouched

    def test_override_replaces_lists(self):
        out = deep_merge({"v": [1, 2]}, {"v": [3]})
        assert out == {"v": [3]}

    def test_none_clears_section(self):
        out = deep_merge({"schedule": {"jitter": {"mean_ms": 2.8}}},
                         {"schedule": {"jitter": None}})
        assert out["schedule"]["jitter"] is None
