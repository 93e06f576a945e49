import csv
import io

import pytest
from fastapi.testclient import TestClient

from combpilot.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


SMALL_CONFIG = {
    "base": {"n_channels": 5, "n_symbols": 1000, "pilot_rate": 0.05},
    "sweep": {"channel_counts": [5]},
    "schemes": [{"kind": "rat", "d": 2}, {"kind": "wdt"}],
    "trials": 2,
    "seed": 21,
}


def test_health(client):
    data = client.get("/health").json()
    assert data["status"] == "ok"
    assert data["name"] == "combpilot"


class TestOptimizeEndpoint:
    def test_both_methods_agree(self, client):
        r = client.post("/optimize", json={"n_channels": 7, "d": 2})
        assert r.status_code == 200
        data = r.json()
        assert data["closed_form"]["indices"] == [-3, 3]
        assert data["brute_force"]["indices"] == [-3, 3]
        assert data["agree"] is True
        assert data["closed_form"]["criterion"] == pytest.approx(91 / 18)

    def test_single_method(self, client):
        r = client.post("/optimize", json={"n_channels": 9, "d": 3,
                                           "method": "closed_form"})
        data = r.json()
        assert data["closed_form"]["indices"] == [-4, -3, 4]
        assert data["brute_force"] is None
        assert data["agree"] is None

    def test_table_sorted_by_criterion(self, client):
        r = client.post("/optimize", json={"n_channels": 5, "d": 2,
                                           "include_table": True})
        table = r.json()["table"]
        assert len(table) == 10
        crits = [e["criterion"] for e in table]
        assert crits == sorted(crits)
        assert table[0]["indices"] == [-2, 2]

    def test_invalid_d_is_422(self, client):
        assert client.post("/optimize", json={"n_channels": 7, "d": 1}).status_code == 422
        assert client.post("/optimize", json={"n_channels": 7, "d": 8}).status_code == 422

    def test_even_l_is_422(self, client):
        assert client.post("/optimize", json={"n_channels": 6, "d": 2}).status_code == 422


class TestCalibrateEndpoint:
    def test_default_target(self, client):
        data = client.post("/calibrate-snr", json={}).json()
        assert data["order"] == 64
        assert data["snr_db"] == pytest.approx(22.549008, abs=1e-5)
        assert data["analytic_ber"] == pytest.approx(1e-3, rel=1e-5)

    def test_bad_target(self, client):
        r = client.post("/calibrate-snr", json={"target_ber": 0.7})
        assert r.status_code == 422


class TestSimulateEndpoint:
    def test_rows_and_csv(self, client):
        r = client.post("/simulate", json=SMALL_CONFIG)
        assert r.status_code == 200
        data = r.json()
        assert len(data["rows"]) == 2
        assert data["rows"][0]["scheme"] == "rat"
        assert data["rows"][0]["config_hash"] == data["config_hash"]
        parsed = list(csv.reader(io.StringIO(data["csv"])))
        assert len(parsed) == 3  # header + 2 rows
        assert parsed[0][0] == "sweep"
        # resolved config echoes defaults
        assert data["resolved_config"]["trials"] == 2
        assert data["resolved_config"]["modulation_order"] == 64

    def test_deterministic_repeat(self, client):
        a = client.post("/simulate", json=SMALL_CONFIG).json()
        b = client.post("/simulate", json=SMALL_CONFIG).json()
        assert a["csv"] == b["csv"]

    def test_unknown_key_names_location(self, client):
        r = client.post("/simulate", json={**SMALL_CONFIG, "surprise": 1})
        assert r.status_code == 422
        assert "surprise" in str(r.json()["detail"])

    def test_domain_error_is_422(self, client):
        bad = dict(SMALL_CONFIG)
        bad["schemes"] = [{"kind": "rat", "indices": [-7, 7]}]  # outside [-2, 2]
        r = client.post("/simulate", json=bad)
        assert r.status_code == 422

    def test_subset_scan_route(self, client):
        cfg = {
            "base": {"n_channels": 5, "n_symbols": 500, "pilot_rate": 0.1},
            "sweep": {"subset_scan_d": 2},
            "trials": 1,
            "seed": 3,
        }
        data = client.post("/simulate", json=cfg).json()
        assert len(data["rows"]) == 10
        errs = [row["mean_est_error"] for row in data["rows"]]
        assert errs == sorted(errs)
