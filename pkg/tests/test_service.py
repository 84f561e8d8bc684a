import json
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from seqoed import casestudy
from seqoed.service import make_server
from seqoed.storage import load_stage_records


@pytest.fixture(scope="module")
def server():
    srv, api = make_server(host="127.0.0.1", port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base
    srv.shutdown()


def request(base, method, path, payload=None, raw=None, content_type="application/json"):
    url = base + path
    data = None
    if payload is not None:
        data = json.dumps(payload).encode()
    elif raw is not None:
        data = raw.encode()
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(req) as resp:
            body = resp.read().decode()
            ctype = resp.headers.get("Content-Type", "")
            return resp.status, json.loads(body) if "json" in ctype else body
    except urllib.error.HTTPError as err:
        body = err.read().decode()
        try:
            return err.code, json.loads(body)
        except json.JSONDecodeError:
            return err.code, body


def small_campaign_payload(n_starts=6):
    config = casestudy.study_campaign_config()
    from seqoed.storage import config_to_dict

    doc = config_to_dict(config)
    doc["n_starts"] = n_starts
    records = load_stage_records("init")
    return {
        "config": doc,
        "initial_design": [[r.l_planned, r.P_planned] for r in records],
    }


def record_rows():
    return [
        {
            "design_label": r.design_label,
            "l_planned": r.l_planned,
            "l_actual": r.l_actual,
            "P_planned": r.P_planned,
            "P_actual": r.P_actual,
            "v": r.v,
            "T": r.T,
        }
        for r in load_stage_records("init")
    ]


def wait_for_job(base, job_id, timeout=240.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status, doc = request(base, "GET", f"/jobs/{job_id}")
        assert status == 200
        if doc["status"] in ("done", "failed"):
            return doc
        time.sleep(0.2)
    raise TimeoutError("job did not finish")


class TestLifecycle:
    def test_full_flow(self, server):
        status, doc = request(server, "POST", "/campaigns", small_campaign_payload())
        assert status == 201
        cid = doc["id"]
        assert doc["status"] == "awaiting_measurements"

        # propose before measurements -> 409
        status, err = request(server, "POST", f"/campaigns/{cid}/propose", {})
        assert status == 409

        # invalid measurement (v out of range) -> 400, state unchanged
        rows = record_rows()
        rows[0]["v"] = 1.2
        status, err = request(server, "POST", f"/campaigns/{cid}/measurements", {"records": rows})
        assert status == 400
        status, doc2 = request(server, "GET", f"/campaigns/{cid}")
        assert doc2["state_hash"] == doc["state_hash"]

        # valid measurements
        status, doc3 = request(
            server, "POST", f"/campaigns/{cid}/measurements", {"records": record_rows()}
        )
        assert status == 200
        assert doc3["status"] == "ready_to_propose"

        # propose (async job)
        status, job = request(server, "POST", f"/campaigns/{cid}/propose", {})
        assert status == 202
        result = wait_for_job(server, job["job_id"])
        assert result["status"] == "done", result
        batch = result["result"]["batch"]
        assert 1 <= len(batch) <= 3
        assert result["result"]["report"]["min_sensitivity"] >= -5e-5

        # metrics: 404 until assessed, then available
        status, _ = request(server, "GET", f"/campaigns/{cid}/metrics")
        assert status == 404
        status, job = request(server, "POST", f"/campaigns/{cid}/assess", {})
        assert status == 202
        result = wait_for_job(server, job["job_id"])
        assert result["status"] == "done", result
        status, metrics = request(server, "GET", f"/campaigns/{cid}/metrics")
        assert status == 200
        curves = metrics["lin"]["curves"]
        assert abs(curves[0][0]) < 1e-12 and abs(curves[0][-1]) < 1e-12

        # CSV export round trip
        status, text = request(server, "GET", f"/campaigns/{cid}/export.csv")
        assert status == 200
        assert text.splitlines()[0].startswith("design_label,")
        assert len(text.strip().splitlines()) == 1 + 6

    def test_prediction_curves_endpoint(self, server):
        status, doc = request(server, "POST", "/campaigns", small_campaign_payload())
        cid = doc["id"]
        status, curves = request(
            server, "GET", f"/campaigns/{cid}/prediction-curves?P=100000&points=51"
        )
        assert status == 200
        # pure propanol boils at about 369.78 K at 1 bar
        assert curves["l"][-1] == 1.0
        assert curves["T"][-1] == pytest.approx(369.78, abs=0.01)
        assert curves["v"][-1] == pytest.approx(1.0, abs=1e-9)

    def test_validation_and_missing_resources(self, server):
        status, _ = request(server, "GET", "/campaigns/doesnotexist")
        assert status == 404
        status, _ = request(server, "GET", "/jobs/doesnotexist")
        assert status == 404
        status, _ = request(server, "POST", "/campaigns", {"config": {}})
        assert status == 400
        status, doc = request(server, "POST", "/campaigns", small_campaign_payload())
        cid = doc["id"]
        status, _ = request(
            server, "GET", f"/campaigns/{cid}/prediction-curves?P=999"
        )
        assert status == 400

    def test_stale_hash_conflict(self, server):
        status, doc = request(server, "POST", "/campaigns", small_campaign_payload())
        cid = doc["id"]
        stale = "0" * 64
        status, err = request(
            server,
            "POST",
            f"/campaigns/{cid}/measurements",
            {"records": record_rows(), "state_hash": stale},
        )
        assert status == 409

    def test_import_csv(self, server):
        from seqoed.storage import format_measurement_csv

        status, doc = request(server, "POST", "/campaigns", small_campaign_payload())
        cid = doc["id"]
        text = format_measurement_csv(load_stage_records("init"))
        status, doc = request(
            server, "POST", f"/campaigns/{cid}/import-csv", raw=text, content_type="text/csv"
        )
        assert status == 200
        assert doc["status"] == "ready_to_propose"


class TestStateMachineSafety:
    def test_random_call_sequences_cannot_corrupt_state(self, server):
        status, doc = request(server, "POST", "/campaigns", small_campaign_payload(n_starts=2))
        cid = doc["id"]
        rng = np.random.default_rng(77)
        proposes_left = 1
        for _ in range(24):
            status, doc = request(server, "GET", f"/campaigns/{cid}")
            assert status == 200
            pre_hash = doc["state_hash"]
            op = rng.integers(0, 5)
            if op == 0:  # bad measurements (wrong count)
                status, _ = request(
                    server, "POST", f"/campaigns/{cid}/measurements",
                    {"records": record_rows()[:2]},
                )
                expect_mutation = len(doc["state"]["pending"]) == 2
            elif op == 1:  # malformed body
                status, _ = request(
                    server, "POST", f"/campaigns/{cid}/measurements", {"records": "x"}
                )
                expect_mutation = False
            elif op == 2:  # stale hash
                status, _ = request(
                    server, "POST", f"/campaigns/{cid}/measurements",
                    {"records": record_rows(), "state_hash": "f" * 64},
                )
                expect_mutation = False
            elif op == 3:  # valid or invalid full record post
                status, _ = request(
                    server, "POST", f"/campaigns/{cid}/measurements", {"records": record_rows()}
                )
                expect_mutation = status == 200
            else:  # propose when possible
                status, out = request(server, "POST", f"/campaigns/{cid}/propose", {})
                if status == 202 and proposes_left:
                    proposes_left -= 1
                    wait_for_job(server, out["job_id"])
                    expect_mutation = True
                else:
                    expect_mutation = status == 202
            status, post = request(server, "GET", f"/campaigns/{cid}")
            if not expect_mutation:
                assert post["state_hash"] == pre_hash


class TestPersistence:
    def test_campaigns_survive_a_registry_restart(self, tmp_path):
        from seqoed.service import Api

        api = Api(data_dir=tmp_path)
        doc = api.create_campaign(small_campaign_payload())
        cid = doc["id"]
        api.post_measurements(cid, {"records": record_rows()})
        persisted_hash = api.get_campaign(cid)["state_hash"]
        assert (tmp_path / f"{cid}.json").exists()

        fresh = Api(data_dir=tmp_path)  # simulates a service restart
        reloaded = fresh.get_campaign(cid)
        assert reloaded["state_hash"] == persisted_hash
        assert reloaded["status"] == "ready_to_propose"
        assert len(reloaded["state"]["records"]) == 6
