"""HTTP service exposing campaign operations as a JSON API.

Built on the standard-library threading HTTP server: no framework, no extra
dependencies.  Mutations take a per-campaign lock and accept an optional
``state_hash`` for optimistic locking; long-running operations (propose,
assess) run on a single background worker and are polled through job ids, so
campaign steps are strictly serialized.

Routes
------
POST /campaigns                        create (config + initial design)
GET  /campaigns/{id}                   current document and state hash
POST /campaigns/{id}/measurements      append measurements for the pending batch
POST /campaigns/{id}/propose           start an estimate+design job -> job id
POST /campaigns/{id}/assess            start a metrics job -> job id
GET  /campaigns/{id}/metrics           last finished metrics for the campaign
GET  /campaigns/{id}/prediction-curves bubble/dew curve data at a pressure
GET  /campaigns/{id}/export.csv        measurements as CSV
POST /campaigns/{id}/import-csv        measurements for the pending batch, CSV body
GET  /jobs/{id}                        job status and result

Errors: 400 invalid input, 404 unknown resource, 409 state conflict,
500 unexpected (with a diagnostic id).  A campaign mutates only on 2xx.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import traceback
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import casestudy
from .assess import rmse, worst_case_sigma
from .campaign import CampaignStatus, new_campaign, propose_next, record_measurements, scaled_distance
from .errors import ParseError, SeqoedError
from .estimation import EstimateConfig, wls_estimate
from .modeling import UnweightedDesign
from .storage import (
    CampaignBundle,
    MeasurementRecord,
    config_from_dict,
    format_measurement_csv,
    load_campaign,
    parse_measurement_csv,
    save_campaign,
)

def _static_dir() -> Path:
    return Path(os.environ.get("SEQOED_STATIC_DIR", Path(__file__).parent / "static"))


class HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class CampaignEntry:
    bundle: CampaignBundle
    lock: threading.Lock = field(default_factory=threading.Lock)
    job_in_flight: str | None = None
    metrics: dict | None = None


class Registry:
    """In-memory campaign store with optional on-disk persistence."""

    def __init__(self, data_dir: str | None = None):
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        self._campaigns: dict[str, CampaignEntry] = {}
        self._guard = threading.Lock()

    def create(self, bundle: CampaignBundle) -> str:
        campaign_id = uuid.uuid4().hex[:12]
        with self._guard:
            self._campaigns[campaign_id] = CampaignEntry(bundle)
        self.persist(campaign_id)
        return campaign_id

    def get(self, campaign_id: str) -> CampaignEntry:
        with self._guard:
            entry = self._campaigns.get(campaign_id)
        if entry is None and self.data_dir:
            path = self.data_dir / f"{campaign_id}.json"
            if path.exists():
                entry = CampaignEntry(load_campaign(path))
                with self._guard:
                    self._campaigns.setdefault(campaign_id, entry)
                    entry = self._campaigns[campaign_id]
        if entry is None:
            raise HttpError(404, f"unknown campaign {campaign_id!r}")
        return entry

    def persist(self, campaign_id: str):
        if not self.data_dir:
            return
        entry = self._campaigns[campaign_id]
        save_campaign(entry.bundle, self.data_dir / f"{campaign_id}.json")


class JobRunner:
    """Single-worker job queue: jobs run one at a time, results are polled."""

    def __init__(self):
        self._jobs: dict[str, dict] = {}
        self._queue: queue.Queue = queue.Queue()
        self._guard = threading.Lock()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def submit(self, kind: str, fn) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._guard:
            self._jobs[job_id] = {"id": job_id, "kind": kind, "status": "queued"}
        self._queue.put((job_id, fn))
        return job_id

    def status(self, job_id: str) -> dict:
        with self._guard:
            job = self._jobs.get(job_id)
        if job is None:
            raise HttpError(404, f"unknown job {job_id!r}")
        return dict(job)

    def _run(self):
        while True:
            job_id, fn = self._queue.get()
            with self._guard:
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
                with self._guard:
                    self._jobs[job_id].update(status="done", result=result)
            except Exception as exc:
                with self._guard:
                    self._jobs[job_id].update(status="failed", error=str(exc))


class Api:
    """Transport-independent request handling; the HTTP layer stays thin."""

    def __init__(self, data_dir: str | None = None):
        self.registry = Registry(data_dir)
        self.jobs = JobRunner()

    # -- helpers -------------------------------------------------------------

    def _document(self, campaign_id: str, entry: CampaignEntry) -> dict:
        doc = entry.bundle.to_dict()
        return {
            "id": campaign_id,
            "state_hash": entry.bundle.state_hash,
            "status": entry.bundle.state.status.value,
            "config": doc["config"],
            "state": doc["state"],
        }

    def _check_hash(self, entry: CampaignEntry, payload: dict):
        expected = payload.get("state_hash")
        if expected is not None and expected != entry.bundle.state_hash:
            raise HttpError(409, "state hash mismatch: campaign changed underneath you")

    @staticmethod
    def _records_from_payload(payload: dict) -> list[MeasurementRecord]:
        rows = payload.get("records")
        if not isinstance(rows, list) or not rows:
            raise HttpError(400, "body needs a nonempty 'records' list")
        records = []
        for i, row in enumerate(rows):
            try:
                records.append(
                    MeasurementRecord(
                        design_label=str(row.get("design_label", "manual")),
                        l_planned=float(row["l_planned"]),
                        l_actual=float(row["l_actual"]),
                        P_planned=float(row["P_planned"]),
                        P_actual=float(row["P_actual"]),
                        v=float(row["v"]),
                        T=float(row["T"]),
                        sigma_v=float(row.get("sigma_v", casestudy.SIGMA_V)),
                        sigma_T=float(row.get("sigma_T", casestudy.SIGMA_T)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise HttpError(400, f"record {i}: missing or bad field ({exc})") from None
            except ParseError as exc:
                raise HttpError(400, f"record {i}: {exc}") from None
        return records

    @staticmethod
    def _match_pending(state, records: list[MeasurementRecord]):
        if not state.pending:
            raise HttpError(409, "campaign has no pending batch awaiting measurements")
        if len(records) != len(state.pending):
            raise HttpError(
                400,
                f"campaign expects {len(state.pending)} measurements, got {len(records)}",
            )
        remaining = list(records)
        measured = []
        for planned in state.pending:
            match = None
            for r in remaining:
                if (
                    abs(r.l_planned - planned[0]) < 1e-6
                    and abs(r.P_planned - planned[1]) <= 1e-3 * max(planned[1], 1.0)
                ):
                    match = r
                    break
            if match is None:
                raise HttpError(400, f"no measurement row for planned point {list(planned)}")
            remaining.remove(match)
            measured.append(((match.l_actual, match.P_actual), (match.v, match.T)))
        return measured

    # -- operations ----------------------------------------------------------

    def create_campaign(self, payload: dict) -> dict:
        try:
            config = config_from_dict(payload["config"])
            design = UnweightedDesign(np.asarray(payload["initial_design"], dtype=float))
            state = new_campaign(design, config)
        except (KeyError, TypeError, ValueError, SeqoedError) as exc:
            raise HttpError(400, f"invalid campaign definition: {exc}") from None
        bundle = CampaignBundle(config=config, model=casestudy.case_study_model(), state=state)
        campaign_id = self.registry.create(bundle)
        return self._document(campaign_id, self.registry.get(campaign_id))

    def get_campaign(self, campaign_id: str) -> dict:
        return self._document(campaign_id, self.registry.get(campaign_id))

    def post_measurements(self, campaign_id: str, payload: dict) -> dict:
        entry = self.registry.get(campaign_id)
        records = self._records_from_payload(payload)
        with entry.lock:
            self._check_hash(entry, payload)
            if entry.job_in_flight:
                raise HttpError(409, "a step is already running for this campaign")
            state = entry.bundle.state
            measured = self._match_pending(state, records)
            try:
                new_state = record_measurements(state, measured)
            except SeqoedError as exc:
                raise HttpError(409, str(exc)) from None
            entry.bundle = CampaignBundle(entry.bundle.config, entry.bundle.model, new_state)
            self.registry.persist(campaign_id)
        return self._document(campaign_id, entry)

    def import_csv(self, campaign_id: str, text: str) -> dict:
        try:
            records = parse_measurement_csv(text)
        except ParseError as exc:
            raise HttpError(400, str(exc)) from None
        return self.post_measurements(campaign_id, {"records": [vars(r) for r in records]})

    def export_csv(self, campaign_id: str) -> str:
        entry = self.registry.get(campaign_id)
        state = entry.bundle.state
        records = [
            MeasurementRecord(
                design_label=r.label or "measured",
                l_planned=r.x_planned[0],
                l_actual=r.x_actual[0],
                P_planned=r.x_planned[1],
                P_actual=r.x_actual[1],
                v=r.y[0],
                T=r.y[1],
                sigma_v=casestudy.SIGMA_V,
                sigma_T=casestudy.SIGMA_T,
            )
            for r in state.records
        ]
        if not records:
            raise HttpError(409, "campaign has no measurements to export")
        return format_measurement_csv(records)

    def start_propose(self, campaign_id: str, payload: dict) -> dict:
        entry = self.registry.get(campaign_id)
        with entry.lock:
            self._check_hash(entry, payload)
            if entry.job_in_flight:
                raise HttpError(409, "a step is already running for this campaign")
            state = entry.bundle.state
            if state.status is not CampaignStatus.READY_TO_PROPOSE:
                raise HttpError(
                    409, f"cannot propose while campaign status is {state.status.value}"
                )

            def work():
                bundle = entry.bundle
                try:
                    new_state = propose_next(bundle.state, bundle.config, bundle.model)
                    with entry.lock:
                        entry.bundle = CampaignBundle(bundle.config, bundle.model, new_state)
                        entry.job_in_flight = None
                        self.registry.persist(campaign_id)
                    report = new_state.reports[-1]
                    existing = bundle.state.planned_points()
                    distances = [
                        min(
                            scaled_distance(p, q, bundle.config.space)
                            for q in existing
                        )
                        for p in report["batch"]
                    ]
                    return {
                        "status": new_state.status.value,
                        "batch": report["batch"],
                        "batch_distances": distances,
                        "unfunded_batch": [list(p) for p in new_state.unfunded_batch],
                        "report": {
                            "criterion_value": report["criterion_value"],
                            "min_sensitivity": report["min_sensitivity"],
                            "iterations": report["iterations"],
                            "epsilon": report["epsilon"],
                            "support_points": report["support_points"],
                            "weights": report["weights"],
                        },
                        "state_hash": entry.bundle.state_hash,
                    }
                except BaseException:
                    with entry.lock:
                        entry.job_in_flight = None
                    raise

            job_id = self.jobs.submit("propose", work)
            entry.job_in_flight = job_id
        return {"job_id": job_id}

    def start_assess(self, campaign_id: str, payload: dict) -> dict:
        entry = self.registry.get(campaign_id)
        sampling = bool(payload.get("sampling", False))
        n_sam = int(payload.get("n_sam", entry.bundle.config.n_sam))
        seed = int(payload.get("seed", entry.bundle.config.seed))
        with entry.lock:
            if entry.job_in_flight:
                raise HttpError(409, "a step is already running for this campaign")
            if not entry.bundle.state.records:
                raise HttpError(409, "campaign has no measurements to assess")

            def work():
                try:
                    bundle = entry.bundle
                    state, config, model = bundle.state, bundle.config, bundle.model
                    data = state.dataset()
                    theta = state.current_estimate
                    if theta is None:
                        theta = wls_estimate(
                            model,
                            data,
                            config.noise,
                            EstimateConfig(n_starts=config.n_starts, seed=config.seed),
                        ).theta
                    design = UnweightedDesign(state.actual_points())
                    rho = rmse(model, theta, data)
                    lin = worst_case_sigma("lin", model, design, theta, config.noise)
                    result = {
                        "rmse": rho.tolist(),
                        "theta": [float(t) for t in theta],
                        "lin": lin.to_dict(),
                    }
                    if sampling:
                        sam = worst_case_sigma(
                            "sam", model, design, theta, config.noise, n_sam=n_sam, seed=seed
                        )
                        result["sam"] = sam.to_dict()
                    with entry.lock:
                        entry.metrics = result
                        entry.job_in_flight = None
                        return result
                except BaseException:
                    with entry.lock:
                        entry.job_in_flight = None
                    raise

            job_id = self.jobs.submit("assess", work)
            entry.job_in_flight = job_id
        return {"job_id": job_id}

    def get_metrics(self, campaign_id: str) -> dict:
        entry = self.registry.get(campaign_id)
        if entry.metrics is None:
            raise HttpError(404, "no metrics computed yet; POST .../assess first")
        return entry.metrics

    def prediction_curves(self, campaign_id: str, query: dict) -> dict:
        entry = self.registry.get(campaign_id)
        bundle = entry.bundle
        try:
            pressure = float(query.get("P", ["1e5"])[0])
            n_points = int(query.get("points", ["101"])[0])
        except ValueError as exc:
            raise HttpError(400, f"bad query parameter: {exc}") from None
        lo, hi = bundle.model.pressure_range
        if not lo <= pressure <= hi or not 2 <= n_points <= 2001:
            raise HttpError(400, "pressure or resolution outside the supported range")
        theta = bundle.state.current_estimate
        if theta is None:
            theta = casestudy.THETA_TOT.as_array()
        l = np.linspace(0.0, 1.0, n_points)
        v, T = bundle.model.predict_many(l, np.full_like(l, pressure), theta)
        return {
            "P": pressure,
            "l": l.tolist(),
            "v": v.tolist(),
            "T": T.tolist(),
            "theta": [float(t) for t in theta],
        }

    def job_status(self, job_id: str) -> dict:
        return self.jobs.status(job_id)


def make_handler(api: Api):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # tests stay quiet
            pass

        def _send(self, status: int, payload, content_type="application/json"):
            body = (
                payload.encode("utf-8")
                if isinstance(payload, str)
                else json.dumps(payload).encode("utf-8")
            )
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length") or 0)
            return self.rfile.read(length)

        def _json_body(self) -> dict:
            raw = self._body()
            if not raw:
                return {}
            try:
                doc = json.loads(raw.decode("utf-8"))
            except json.JSONDecodeError as exc:
                raise HttpError(400, f"request body is not valid JSON: {exc}") from None
            if not isinstance(doc, dict):
                raise HttpError(400, "request body must be a JSON object")
            return doc

        def _dispatch(self, method: str):
            parsed = urlparse(self.path)
            parts = [p for p in parsed.path.split("/") if p]
            query = parse_qs(parsed.query)
            try:
                result = self._route(method, parts, query)
            except HttpError as exc:
                self._send(exc.status, {"error": exc.message})
                return
            except Exception:
                diagnostic_id = uuid.uuid4().hex[:8]
                traceback.print_exc()
                self._send(500, {"error": "internal error", "diagnostic_id": diagnostic_id})
                return
            if isinstance(result, tuple):
                status, payload, ctype = result
                self._send(status, payload, ctype)
            else:
                self._send(200, result)

        def _route(self, method: str, parts: list[str], query: dict):
            if method == "GET" and parts == []:
                index = _static_dir() / "index.html"
                if index.exists():
                    return 200, index.read_text("utf-8"), "text/html; charset=utf-8"
                raise HttpError(404, "no UI bundled")
            if method == "GET" and len(parts) == 2 and parts[0] == "static":
                target = _static_dir() / parts[1]
                if not target.exists() or not target.is_file():
                    raise HttpError(404, "unknown static file")
                ctype = "text/javascript" if target.suffix == ".js" else "text/css"
                return 200, target.read_text("utf-8"), ctype
            if parts and parts[0] == "campaigns":
                if method == "POST" and len(parts) == 1:
                    return 201, api.create_campaign(self._json_body()), "application/json"
                if len(parts) >= 2:
                    cid = parts[1]
                    rest = parts[2:]
                    if method == "GET" and rest == []:
                        return api.get_campaign(cid)
                    if method == "POST" and rest == ["measurements"]:
                        return api.post_measurements(cid, self._json_body())
                    if method == "POST" and rest == ["propose"]:
                        return 202, api.start_propose(cid, self._json_body()), "application/json"
                    if method == "POST" and rest == ["assess"]:
                        return 202, api.start_assess(cid, self._json_body()), "application/json"
                    if method == "GET" and rest == ["metrics"]:
                        return api.get_metrics(cid)
                    if method == "GET" and rest == ["prediction-curves"]:
                        return api.prediction_curves(cid, query)
                    if method == "GET" and rest == ["export.csv"]:
                        return 200, api.export_csv(cid), "text/csv; charset=utf-8"
                    if method == "POST" and rest == ["import-csv"]:
                        return api.import_csv(cid, self._body().decode("utf-8"))
            if parts and parts[0] == "jobs" and method == "GET" and len(parts) == 2:
                return api.job_status(parts[1])
            raise HttpError(404, f"no route for {method} /{'/'.join(parts)}")

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

    return Handler


def make_server(host="127.0.0.1", port=0, data_dir=None) -> tuple[ThreadingHTTPServer, Api]:
    api = Api(data_dir=data_dir or os.environ.get("SEQOED_DATA_DIR"))
    server = ThreadingHTTPServer((host, port), make_handler(api))
    return server, api


def serve_forever(host="127.0.0.1", port=8543, data_dir=None):
    server, _ = make_server(host, port, data_dir)
    print(f"seqoed service listening on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
