import pytest
from fastapi.testclient import TestClient

from backend.envs import COIN_TOSS_TABLE
from backend.main import app

client = TestClient(app)


def test_root_lists_endpoints():
    response = client.get("/")
    assert response.status_code == 200
    assert "/solve" in response.json()["endpoints"]


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_solve_coin_toss_mean():
    response = client.post("/solve", json={"env": {"preset": "coin_toss"}, "inner": {"kind": "mean"}})
    assert response.status_code == 200
    body = response.json()
    assert body["env"] == "coin_toss"
    assert body["actions"] == COIN_TOSS_TABLE["mean"].tolist()
    assert len(body["value"]) == 11


def test_solve_rejects_bad_risk_level():
    response = client.post("/solve", json={"inner": {"kind": "cvar", "alpha": 1.5}})
    assert response.status_code == 422


def test_bounds_example():
    response = client.post("/bounds", json={"alpha1": 0.5, "alpha2": 0.5, "delta_total": 4.0})
    assert response.status_code == 200
    body = response.json()
    assert body["stage_iteration_bound"] == 109
    assert body["perturbation_bound"] == pytest.approx(8872.28, rel=1e-5)
    assert "note" in body


def test_evaluate_policy_over_grid():
    actions = [2] * 6 + [1] + [0] * 4
    response = client.post("/evaluate", json={"actions": actions, "grid": {"p_head": [0.5, 0.6, 0.7]}})
    assert response.status_code == 200
    body = response.json()
    assert body["labels"] == ["p_head=0.5", "p_head=0.6", "p_head=0.7"]
    assert body["worst"] == max(body["values"])


def test_evaluate_rejects_short_action_list():
    response = client.post("/evaluate", json={"actions": [0, 1], "grid": {"p_head": [0.5]}})
    assert response.status_code == 400


def test_evaluate_rejects_grid_for_other_preset():
    response = client.post("/evaluate", json={"actions": [1] * 11, "grid": {"tilt": [1.0]}})
    assert response.status_code == 400


def test_bounds_report_overflow_as_inf():
    response = client.post("/bounds", json={"theta": 1e-320, "c_bar": 1e10, "delta_total": 4.0})
    assert response.status_code == 200
    body = response.json()
    assert body["stage_iteration_bound"] == "inf"
    assert body["sweep_iteration_bound"] == "inf"
