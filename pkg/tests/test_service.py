import csv
import io

import pytest
from fastapi.testclient import TestClient

from spadesim.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def tiny_sweep_config(**extra):
    cfg = {
        "seed": 99,
        "trials": 4,
        "schedule": {"n_frames": 16, "f_s": 20.0},
        "motion": {"kind": "sinusoid", "amplitude": 0.6, "f": 0.2,
                   "offset": 0.6},
        "schemes": [{"kind": "pm"}],
        "sweep": {"axis": "frequency", "values": [0.2]},
    }
    cfg.update(extra)
    return cfg


class TestHealth:
    def test_health(self, client):
        res = client.get("/health")
        assert res.status_code == 200
        assert res.json()["status"] == "ok"


class TestValidateConfig:
    def test_valid(self, client):
        res = client.post("/v1/validate-config", json=tiny_sweep_config())
        assert res.status_code == 200
        assert res.json() == {"valid": True, "issues": []}

    def test_invalid_field(self, client):
        res = client.post("/v1/validate-config",
                          json={"motion": {"kind": "sinusoid", "f": 0.7}})
        body = res.json()
        assert res.status_code == 200
        assert not body["valid"]
        assert any("motion" in issue["location"] for issue in body["issues"])

    def test_unknown_key(self, client):
        res = client.post("/v1/validate-config", json={"nonsense": 1})
        assert not res.json()["valid"]


class TestFisherScan:
    def test_gamma_scan(self, client):
        cfg = tiny_sweep_config(sweep={"axis": "s", "values": [0.0, 0.5, 0.94]})
        res = client.post("/v1/fisher-scan", json=cfg)
        assert res.status_code == 200
        body = res.json()
        table = body["tables"][0]
        assert table["name"] == "gamma_scan"
        assert table["columns"][0] == "s_sigma"
        assert len(table["rows"]) == 3
        # at s=0 with b=0 the PM factor reaches the ceiling 1/sigma^2
        row0 = dict(zip(table["columns"], table["rows"][0]))
        assert row0["gamma_pm"] == pytest.approx(1.0)
        assert row0["gamma_ceiling"] == pytest.approx(1.0)

    def test_fi_scan_pm_beats_di_under_noise(self, client):
        cfg = tiny_sweep_config(
            sweep={"axis": "b_over_nu", "values": [0.0, 0.05, 0.1]},
            motion={"kind": "sinusoid", "amplitude": 0.47, "f": 0.2},
        )
        res = client.post("/v1/fisher-scan", json=cfg)
        assert res.status_code == 200
        table = res.json()["tables"][0]
        cols = table["columns"]
        for row in table["rows"][1:]:  # noisy points
            r = dict(zip(cols, row))
            assert r["cfi_pm"] > r["cfi_di"]
            assert r["cfi_norm_pm"] <= r["qfi_norm"] + 1e-12

    def test_csv_round_trip_exact(self, client):
        cfg = tiny_sweep_config(sweep={"axis": "s", "values": [0.1, 0.7]})
        res = client.post("/v1/fisher-scan", json=cfg)
        table = res.json()["tables"][0]
        parsed = list(csv.reader(io.StringIO(table["csv"])))
        assert parsed[0] == table["columns"]
        for text_row, row in zip(parsed[1:], table["rows"]):
            assert [float(c) for c in text_row] == [float(v) for v in row]

    def test_frequency_axis_rejected(self, client):
        res = client.post("/v1/fisher-scan", json=tiny_sweep_config())
        assert res.status_code == 422

    def test_missing_sweep_rejected(self, client):
        cfg = tiny_sweep_config()
        cfg.pop("sweep")
        res = client.post("/v1/fisher-scan", json=cfg)
        assert res.status_code == 422


class TestIdealSweep:
    def test_small_run(self, client):
        res = client.post("/v1/ideal-sweep", json=tiny_sweep_config())
        assert res.status_code == 200
        body = res.json()
        table = body["tables"][0]
        assert table["name"] == "ideal_sweep_pm"
        row = dict(zip(table["columns"], table["rows"][0]))
        assert 0.0 < row["mean_f_hat"] < 0.5
        assert row["trials"] == 4
        assert body["manifest"]["command"] == "ideal-sweep"
        assert body["manifest"]["config_hash"]
        assert body["config"]["seed"] == 99

    def test_requires_b_zero(self, client):
        res = client.post("/v1/ideal-sweep",
                          json=tiny_sweep_config(noise={"b_over_nu": 0.1}))
        assert res.status_code == 422

    def test_single_trial_yields_nan_variance(self, client):
        res = client.post("/v1/ideal-sweep", json=tiny_sweep_config(trials=1))
        assert res.status_code == 200
        table = res.json()["tables"][0]
        row = dict(zip(table["columns"], table["rows"][0]))
        assert row["nu_var"] == "nan"

    def test_deterministic_csv_bytes(self, client):
        cfg = tiny_sweep_config()
        a = client.post("/v1/ideal-sweep", json=cfg).json()["tables"][0]["csv"]
        b = client.post("/v1/ideal-sweep", json=cfg).json()["tables"][0]["csv"]
        assert a == b

    def test_malformed_body_rejected(self, client):
        res = client.post("/v1/ideal-sweep", json={"trials": "many"})
        assert res.status_code == 422


class TestNoiseSweep:
    def test_small_run_columns(self, client):
        cfg = tiny_sweep_config(
            sweep={"axis": "b_over_nu", "values": [0.0, 0.05]})
        res = client.post("/v1/noise-sweep", json=cfg)
        assert res.status_code == 200
        table = res.json()["tables"][0]
        assert table["columns"] == ["b_over_nu", "mean_f_hat", "nu_var",
                                    "crb_nu_var", "qcrb_nu_var", "n_flagged"]
        rows = [dict(zip(table["columns"], r)) for r in table["rows"]]
        assert rows[0]["crb_nu_var"] >= rows[0]["qcrb_nu_var"] - 1e-12
        assert rows[1]["crb_nu_var"] > rows[1]["qcrb_nu_var"]


class TestJitterStudy:
    def test_small_run(self, client):
        cfg = tiny_sweep_config(
            trials=3,
            motion={"kind": "square_wave", "amplitude": 0.47, "f": 0.2},
            sweep={"axis": "frequency", "values": [0.2]})
        res = client.post("/v1/jitter-study", json=cfg)
        assert res.status_code == 200
        table = res.json()["tables"][0]
        waveforms = {row[0] for row in table["rows"]}
        assert waveforms == {"square_wave", "sinusoid"}


class TestHolo:
    def test_holo_small_grid(self, client):
        cfg = {
            "seed": 5,
            "holo": {"nx": 256, "ny": 256, "pitch_um": 8.0,
                     "carrier_bins_x": 32, "carrier_bins_y": 16,
                     "check_points": 6},
        }
        res = client.post("/v1/holo", json=cfg)
        assert res.status_code == 200
        body = res.json()
        assert body["self_check_passed"] is True
        assert body["max_fraction_error"] < 0.02
        assert body["j1_residual"] < 1e-10
        assert body["max_c1_error"] < 1e-6
        assert body["sidecar"]["nx"] == 256
        assert len(body["hologram_png_base64"]) > 100
        table = body["tables"][0]
        assert table["name"] == "holo_readout"
        assert len(table["rows"]) == 6

    def test_aliased_carrier_rejected(self, client):
        cfg = {"holo": {"nx": 256, "ny": 256, "carrier_bins_x": 128,
                        "carrier_bins_y": 16}}
        res = client.post("/v1/holo", json=cfg)
        assert res.status_code == 422
