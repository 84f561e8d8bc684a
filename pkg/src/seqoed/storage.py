"""Persistence: measurement CSV files, campaign JSON documents, and the
bundled propanol / propyl-acetate measurement fixtures.

CSV dialect: comma separated, dot decimal, UTF-8, mandatory header.  Numeric
columns are written in fixed canonical formats so that exporting an imported
file is byte-identical (modulo a trailing newline).  Campaign documents are
versioned JSON written atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .campaign import CampaignConfig, CampaignState, CampaignStatus, ExperimentRecord
from .criteria import Criterion
from .errors import ParseError, SchemaVersionError
from .estimation import Dataset
from .modeling import NoiseModel
from .solver import DesignSpace
from .vle import AntoineParams, BinaryVleModel

SCHEMA_VERSION = 1

CSV_HEADER = [
    "design_label",
    "l_planned",
    "l_actual",
    "P_planned",
    "P_actual",
    "v",
    "T",
    "sigma_v",
    "sigma_T",
]

#: Canonical column formats; keep in sync with the bundled fixture file.
_FORMATS = {
    "l_planned": "{:.6f}",
    "l_actual": "{:.4f}",
    "P_planned": "{:.1f}",
    "P_actual": "{:.1f}",
    "v": "{:.4f}",
    "T": "{:.2f}",
    "sigma_v": "{:.4f}",
    "sigma_T": "{:.2f}",
}

_FRACTION_COLUMNS = ("l_planned", "l_actual", "v")


@dataclass(frozen=True)
class MeasurementRecord:
    """One row of a measurement table: planned and realized conditions plus
    the observed outputs and their instrument accuracies."""

    design_label: str
    l_planned: float
    l_actual: float
    P_planned: float
    P_actual: float
    v: float
    T: float
    sigma_v: float
    sigma_T: float

    def __post_init__(self):
        for name in ("l_planned", "l_actual", "v"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ParseError(f"{name}={val} outside [0, 1]", column=name)
        for name in _FORMATS:
            if not np.isfinite(getattr(self, name)):
                raise ParseError(f"{name} is not finite", column=name)


def parse_measurement_csv(text: str) -> list[MeasurementRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty measurement file", row=1) from None
    if header != CSV_HEADER:
        raise ParseError(
            f"header mismatch: expected {','.join(CSV_HEADER)}, got {','.join(header)}", row=1
        )
    records = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} cells, got {len(row)}", row=row_no)
        values: dict[str, object] = {"design_label": row[0]}
        for col, cell in zip(CSV_HEADER[1:], row[1:]):
            try:
                values[col] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", row=row_no, column=col) from None
        for col in _FRACTION_COLUMNS:
            if not 0.0 <= values[col] <= 1.0:
                raise ParseError(
                    f"{col}={values[col]} outside [0, 1]", row=row_no, column=col
                )
        try:
            records.append(MeasurementRecord(**values))
        except ParseError as exc:
            raise ParseError(str(exc), row=row_no) from None
    if not records:
        raise ParseError("measurement file contains no data rows", row=1)
    return records


def format_measurement_csv(records) -> str:
    out = [",".join(CSV_HEADER)]
    for r in records:
        cells = [r.design_label]
        for col in CSV_HEADER[1:]:
            cells.append(_FORMATS[col].format(getattr(r, col)))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def records_to_dataset(records) -> Dataset:
    return Dataset(
        x_actual=np.array([[r.l_actual, r.P_actual] for r in records]),
        y=np.array([[r.v, r.T] for r in records]),
        x_planned=np.array([[r.l_planned, r.P_planned] for r in records]),
        labels=tuple(r.design_label for r in records),
    )


# -- bundled case-study fixtures ---------------------------------------------

#: Stage composition of the bundled measurement table.  ``init`` is the
#: six-experiment starting design; ``fed0`` is its first five rows; each
#: ``*+`` block extends the previous stage; ``tot`` is everything combined
#: (the sixth init row re-enters verbatim inside fed2+, so tot is assembled
#: from fed0 and has exactly 36 records).
STAGE_BLOCKS: dict[str, tuple[str, ...]] = {
    "init": ("init",),
    "fed1": ("fed0", "fed0+"),
    "fed2": ("fed0", "fed0+", "fed1+"),
    "fed3": ("fed0", "fed0+", "fed1+", "fed2+"),
    "oed1": ("init", "oed0+"),
    "oed2": ("init", "oed0+", "oed1+"),
    "oed3": ("init", "oed0+", "oed1+", "oed2+"),
    "tot": ("fed0", "fed0+", "fed1+", "fed2+", "oed0+", "oed1+", "oed2+"),
}

STAGES = tuple(STAGE_BLOCKS)


def _bundled_records() -> list[MeasurementRecord]:
    text = resources.files("seqoed.data").joinpath("measurements.csv").read_text("utf-8")
    return parse_measurement_csv(text)


def load_stage_records(stage: str) -> list[MeasurementRecord]:
    if stage not in STAGE_BLOCKS:
        raise ParseError(f"unknown fixture stage {stage!r}; known: {', '.join(STAGES)}")
    records = _bundled_records()
    by_label: dict[str, list[MeasurementRecord]] = {}
    for r in records:
        by_label.setdefault(r.design_label, []).append(r)
    by_label["fed0"] = by_label["init"][:5]
    out: list[MeasurementRecord] = []
    for block in STAGE_BLOCKS[stage]:
        out.extend(by_label[block])
    return out


def load_measurements(source: str | os.PathLike) -> Dataset:
    """Dataset from a bundled stage id (e.g. "tot") or a CSV file path."""
    if isinstance(source, str) and source in STAGE_BLOCKS:
        return records_to_dataset(load_stage_records(source))
    path = Path(source)
    return records_to_dataset(parse_measurement_csv(path.read_text("utf-8")))


def load_antoine_components() -> tuple[AntoineParams, AntoineParams]:
    raw = json.loads(
        resources.files("seqoed.data").joinpath("antoine_params.json").read_text("utf-8")
    )
    comps = [AntoineParams(c["name"], c["A"], c["B"], c["C"]) for c in raw["components"]]
    return comps[0], comps[1]


# -- campaign documents -------------------------------------------------------


def _atomic_write(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_to_dict(model: BinaryVleModel) -> dict:
    return {
        "component1": vars(model.component1),
        "component2": vars(model.component2),
        "pressure_range": list(model.pressure_range),
        "param_lower": model.param_lower.tolist(),
        "param_upper": model.param_upper.tolist(),
    }


def model_from_dict(doc: dict) -> BinaryVleModel:
    return BinaryVleModel(
        AntoineParams(**doc["component1"]),
        AntoineParams(**doc["component2"]),
        tuple(doc["pressure_range"]),
        np.asarray(doc["param_lower"]),
        np.asarray(doc["param_upper"]),
    )


def config_to_dict(config: CampaignConfig) -> dict:
    return {
        "space_points": config.space.points.tolist(),
        "noise_covariance": config.noise.covariance.tolist(),
        "alpha": config.alpha,
        "epsilon": config.epsilon,
        "min_batch_weight": config.min_batch_weight,
        "max_batch_size": config.max_batch_size,
        "budget": config.budget,
        "progress_tol": config.progress_tol,
        "criterion": config.criterion.value,
        "seed": config.seed,
        "n_sam": config.n_sam,
        "n_starts": config.n_starts,
    }


def config_from_dict(doc: dict) -> CampaignConfig:
    return CampaignConfig(
        space=DesignSpace(np.asarray(doc["space_points"], dtype=float)),
        noise=NoiseModel(np.asarray(doc["noise_covariance"], dtype=float)),
        alpha=doc["alpha"],
        epsilon=doc["epsilon"],
        min_batch_weight=doc["min_batch_weight"],
        max_batch_size=doc["max_batch_size"],
        budget=doc["budget"],
        progress_tol=doc["progress_tol"],
        criterion=Criterion(doc["criterion"]),
        seed=doc["seed"],
        n_sam=doc["n_sam"],
        n_starts=doc.get("n_starts", 32),
    )


def state_to_dict(state: CampaignState) -> dict:
    return {
        "iteration": state.iteration,
        "records": [
            {
                "x_planned": list(r.x_planned),
                "x_actual": list(r.x_actual),
                "y": list(r.y),
                "iteration": r.iteration,
                "label": r.label,
            }
            for r in state.records
        ],
        "pending": [list(p) for p in state.pending],
        "estimates": list(state.estimates),
        "reports": list(state.reports),
        "status": state.status.value,
        "unfunded_batch": [list(p) for p in state.unfunded_batch],
    }


def state_from_dict(doc: dict) -> CampaignState:
    return CampaignState(
        iteration=doc["iteration"],
        records=tuple(
            ExperimentRecord(
                x_planned=tuple(r["x_planned"]),
                x_actual=tuple(r["x_actual"]),
                y=tuple(r["y"]),
                iteration=r["iteration"],
                label=r.get("label", ""),
            )
            for r in doc["records"]
        ),
        pending=tuple(tuple(p) for p in doc["pending"]),
        estimates=tuple(doc["estimates"]),
        reports=tuple(doc["reports"]),
        status=CampaignStatus(doc["status"]),
        unfunded_batch=tuple(tuple(p) for p in doc["unfunded_batch"]),
    )


@dataclass(frozen=True)
class CampaignBundle:
    """A campaign document: configuration, model definition, and state."""

    config: CampaignConfig
    model: BinaryVleModel
    state: CampaignState

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": config_to_dict(self.config),
            "model": model_to_dict(self.model),
            "state": state_to_dict(self.state),
        }

    @property
    def state_hash(self) -> str:
        return document_hash(self.to_dict())


def document_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_campaign(bundle: CampaignBundle, path: str | os.PathLike):
    _atomic_write(Path(path), json.dumps(bundle.to_dict(), indent=2, sort_keys=True) + "\n")


def load_campaign(path: str | os.PathLike) -> CampaignBundle:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"campaign file is not valid JSON: {exc}") from None
    return bundle_from_dict(doc)


def bundle_from_dict(doc: dict) -> CampaignBundle:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported campaign schema version {version!r}; this build reads {SCHEMA_VERSION}"
        )
    return CampaignBundle(
        config=config_from_dict(doc["config"]),
        model=model_from_dict(doc["model"]),
        state=state_from_dict(doc["state"]),
    )
