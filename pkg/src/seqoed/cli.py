"""Command-line interface for campaign management and design assessment.

Commands mirror the library operations one-to-one: create a campaign from a
config and an initial design, record measurements, propose the next batch,
run a fully simulated campaign, compute quality metrics, and replay the
bundled study stages.  All failures exit nonzero with a single
``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import casestudy
from .assess import rmse, worst_case_sigma
from .campaign import (
    CampaignStatus,
    SimulatedSource,
    campaign_step,
    new_campaign,
    propose_next,
    record_measurements,
)
from .errors import ParseError, SeqoedError
from .estimation import EstimateConfig, wls_estimate
from .modeling import NoiseModel, UnweightedDesign
from .solver import DesignSpace
from .storage import (
    CSV_HEADER,
    CampaignBundle,
    STAGES,
    config_from_dict,
    load_campaign,
    parse_measurement_csv,
    save_campaign,
)
from .vle import ParamVector


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_config_file(path: str):
    doc = json.loads(Path(path).read_text("utf-8"))
    grid = doc.pop("grid", "oed")
    if grid == "oed":
        space = casestudy.oed_grid()
    elif grid == "fed":
        space = casestudy.fed_grid()
    elif isinstance(grid, dict) and "points" in grid:
        space = DesignSpace(np.asarray(grid["points"], dtype=float))
    elif isinstance(grid, dict) and "l_values" in grid:
        space = DesignSpace.from_grid(grid["l_values"], grid["P_values"])
    else:
        raise ParseError(f"unrecognized grid specification {grid!r}")
    sigmas = doc.pop("sigmas", [casestudy.SIGMA_V, casestudy.SIGMA_T])
    cov = doc.pop("noise_covariance", None)
    noise = NoiseModel(np.asarray(cov, float)) if cov is not None else NoiseModel.from_sigmas(*sigmas)
    return config_from_dict(
        {
            "space_points": space.points.tolist(),
            "noise_covariance": noise.covariance.tolist(),
            "alpha": doc.get("alpha", 0.5),
            "epsilon": doc.get("epsilon", 5e-5),
            "min_batch_weight": doc.get("min_batch_weight", 0.95),
            "max_batch_size": doc.get("max_batch_size", 3),
            "budget": doc.get("budget", 27),
            "progress_tol": doc.get("progress_tol", 0.1),
            "criterion": doc.get("criterion", "D"),
            "seed": doc.get("seed", 0),
            "n_sam": doc.get("n_sam", 1000),
            "n_starts": doc.get("n_starts", 32),
        }
    )


def _load_initial_design(path: str) -> UnweightedDesign:
    text = Path(path).read_text("utf-8")
    first = text.splitlines()[0] if text.splitlines() else ""
    if first.split(",") == CSV_HEADER:
        records = parse_measurement_csv(text)
        return UnweightedDesign(np.array([[r.l_planned, r.P_planned] for r in records]))
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["l", "P"]:
        raise ParseError("initial design CSV needs header 'l,P' or the full measurement header")
    pts = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            pts.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            raise ParseError("bad design point", row=row_no) from None
    return UnweightedDesign(np.array(pts))


def _print_batch(points) -> None:
    print(f"{'l':>10} {'P':>12}")
    for l, P in points:
        print(f"{l:>10.6f} {P:>12.1f}")


def _parse_truth(path: str) -> ParamVector:
    doc = json.loads(Path(path).read_text("utf-8"))
    if "theta" in doc:
        return ParamVector.from_array(doc["theta"])
    return ParamVector(doc["a12"], doc["a21"], doc["b12"], doc["b21"], doc["c12"])


def cmd_campaign_new(args) -> int:
    config = _load_config_file(args.config)
    design = _load_initial_design(args.initial_design)
    state = new_campaign(design, config)
    bundle = CampaignBundle(config=config, model=casestudy.case_study_model(), state=state)
    save_campaign(bundle, args.out)
    print(f"created campaign {args.out} with {design.size} pending initial experiments")
    return 0


def cmd_campaign_record(args) -> int:
    bundle = load_campaign(args.campaign)
    records = parse_measurement_csv(Path(args.measurements).read_text("utf-8"))
    state = bundle.state
    if len(records) != len(state.pending):
        raise ParseError(
            f"campaign expects {len(state.pending)} measurements, file has {len(records)}"
        )
    remaining = list(records)
    measured = []
    for planned in state.pending:
        match = None
        for r in remaining:
            if abs(r.l_planned - planned[0]) < 1e-6 and abs(r.P_planned - planned[1]) <= 1e-3 * planned[1]:
                match = r
                break
        if match is None:
            raise ParseError(f"no measurement row for planned point {planned}")
        remaining.remove(match)
        measured.append(((match.l_actual, match.P_actual), (match.v, match.T)))
    new_state = record_measurements(state, measured)
    save_campaign(CampaignBundle(bundle.config, bundle.model, new_state), args.campaign)
    print(f"recorded {len(measured)} measurements; campaign now has {new_state.n_measured}")
    return 0


def cmd_campaign_propose(args) -> int:
    bundle = load_campaign(args.campaign)
    state = propose_next(bundle.state, bundle.config, bundle.model)
    save_campaign(CampaignBundle(bundle.config, bundle.model, state), args.campaign)
    print(f"status: {state.status.value}")
    if state.status is CampaignStatus.TERMINATED_BUDGET:
        print("budget reached; unperformed batch:")
        _print_batch(state.unfunded_batch)
    else:
        print("proposed batch:")
        _print_batch(state.pending)
    return 0


def cmd_campaign_run_sim(args) -> int:
    bundle = load_campaign(args.campaign)
    truth = _parse_truth(args.truth)
    source = SimulatedSource(bundle.model, truth, bundle.config.noise, seed=args.seed)
    state = bundle.state
    if state.terminated:
        raise SeqoedError("campaign already terminated")
    while not state.terminated:
        state = campaign_step(state, bundle.config, source, bundle.model)
        print(
            f"iteration {state.iteration}: {state.n_measured} experiments, "
            f"status {state.status.value}"
        )
    save_campaign(CampaignBundle(bundle.config, bundle.model, state), args.campaign)
    print(f"terminated: {state.status.value} with {state.n_measured} experiments")
    return 0


def cmd_assess(args) -> int:
    bundle = load_campaign(args.campaign)
    state, config, model = bundle.state, bundle.config, bundle.model
    data = state.dataset()
    theta = state.current_estimate
    if theta is None:
        est = wls_estimate(
            model, data, config.noise, EstimateConfig(n_starts=config.n_starts, seed=config.seed)
        )
        theta = est.theta
    design = UnweightedDesign(state.actual_points())
    rho = rmse(model, theta, data)
    print(f"rmse: v={rho[0]:.6e} T={rho[1]:.6e}  (n={data.size})")
    lin = worst_case_sigma("lin", model, design, theta, config.noise)
    print(f"sigma_lin worst: v={lin.worst[0]:.6e} T={lin.worst[1]:.6e}")
    reports = {"lin": lin}
    if args.sampling:
        sam = worst_case_sigma(
            "sam", model, design, theta, config.noise, n_sam=args.n_sam, seed=args.seed
        )
        print(f"sigma_sam worst: v={sam.worst[0]:.6e} T={sam.worst[1]:.6e} (n_sam={args.n_sam})")
        reports["sam"] = sam
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        for kind, rep in reports.items():
            path = out_dir / f"sigma_{kind}_curves.csv"
            with path.open("w", encoding="utf-8") as fh:
                fh.write("l,sigma_v,sigma_T\n")
                for l, sv, sT in zip(rep.l_values, rep.curves[0], rep.curves[1]):
                    fh.write(f"{l:.6f},{sv:.8e},{sT:.8e}\n")
            print(f"wrote {path}")
        (out_dir / "metrics.json").write_text(
            json.dumps(
                {
                    "rmse": rho.tolist(),
                    **{k: r.to_dict() for k, r in reports.items()},
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"wrote {out_dir / 'metrics.json'}")
    return 0


def cmd_replay(args) -> int:
    stages = [args.stage] if args.stage else list(STAGES)
    model = casestudy.case_study_model()
    noise = casestudy.measurement_noise()
    reference = casestudy.stage_dataset("tot")
    theta_ref = casestudy.THETA_TOT
    print(f"{'stage':>6} {'size':>4} {'rho_v/1e-4':>11} {'rho_T/1e-2':>11} "
          f"{'siglin_v/1e-4':>14} {'siglin_T/1e-2':>14}")
    for stage in stages:
        data = casestudy.stage_dataset(stage)
        est = wls_estimate(model, data, noise, EstimateConfig(n_starts=32, seed=args.seed))
        rho = rmse(model, est.theta, reference)
        design = casestudy.stage_design(stage, actual=True)
        lin = worst_case_sigma("lin", model, design, theta_ref, noise)
        row = (
            f"{stage:>6} {data.size:>4} {rho[0] / 1e-4:>11.2f} {rho[1] / 1e-2:>11.2f} "
            f"{lin.worst[0] / 1e-4:>14.2f} {lin.worst[1] / 1e-2:>14.2f}"
        )
        if args.sampling:
            sam = worst_case_sigma(
                "sam", model, design, theta_ref, noise, n_sam=args.n_sam, seed=args.seed
            )
            row += f" sigsam_v/1e-4={sam.worst[0] / 1e-4:.2f} sigsam_T/1e-2={sam.worst[1] / 1e-2:.2f}"
        print(row)
        if stage == "tot":
            print(
                f"{'':>6} fit sse={est.sse:.6f} vs bundled reference estimate "
                f"sse={_reference_sse(model, noise, reference):.6f}"
            )
    return 0


def _reference_sse(model, noise, reference) -> float:
    from .estimation import weighted_sse

    return weighted_sse(model, casestudy.THETA_TOT, reference, noise)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqoed",
        description="Sequential locally optimal experimental design for VLE models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    campaign = sub.add_parser("campaign", help="campaign lifecycle commands")
    csub = campaign.add_subparsers(dest="subcommand", required=True)

    new = csub.add_parser("new", help="create a campaign document")
    new.add_argument("--config", required=True)
    new.add_argument("--initial-design", required=True)
    new.add_argument("--out", default="campaign.json")
    new.set_defaults(func=cmd_campaign_new)

    rec = csub.add_parser("record", help="append measurements for the pending batch")
    rec.add_argument("campaign")
    rec.add_argument("--measurements", required=True)
    rec.set_defaults(func=cmd_campaign_record)

    prop = csub.add_parser("propose", help="estimate parameters and propose the next batch")
    prop.add_argument("campaign")
    prop.set_defaults(func=cmd_campaign_propose)

    sim = csub.add_parser("run-sim", help="run the remaining campaign against a simulated lab")
    sim.add_argument("campaign")
    sim.add_argument("--truth", required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_campaign_run_sim)

    assess = sub.add_parser("assess", help="quality metrics for a campaign's design")
    assess.add_argument("campaign")
    assess.add_argument("--sampling", action="store_true")
    assess.add_argument("--n-sam", type=int, default=1000)
    assess.add_argument("--seed", type=int, default=0)
    assess.add_argument("--out-dir")
    assess.set_defaults(func=cmd_assess)

    replay = sub.add_parser(
        "replay-paper", help="recompute quality metrics for the bundled study stages"
    )
    replay.add_argument("--stage", choices=list(STAGES))
    replay.add_argument("--sampling", action="store_true")
    replay.add_argument("--n-sam", type=int, default=1000)
    replay.add_argument("--seed", type=int, default=0)
    replay.set_defaults(func=cmd_replay)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8543)
    serve.add_argument("--data-dir", default=None)
    serve.set_defaults(func=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        from .service import serve_forever

        serve_forever(host=args.host, port=args.port, data_dir=args.data_dir)
        return 0
    try:
        return args.func(args)
    except SeqoedError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc.filename}")
    except json.JSONDecodeError as exc:
        return _fail(f"invalid JSON: {exc}")


if __name__ == "__main__":
    sys.exit(main())
