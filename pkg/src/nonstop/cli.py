"""Command-line front end.

Exit codes: 0 ok, 1 bad input, 2 degenerate layout, 3 invalid orbit,
4 artifact/recomputation mismatch, 5 planning failed, 6 simulation diverged.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig
from .connect import PlanningFailed, plan_path, segment_clearance
from .geometry import (
    AttachmentLayout,
    DegenerateLayout,
    NotWrenchConsistent,
    Wrench,
    build_grasp_model,
    lambda_from_forces,
)
from .orbit import LinearOrbit, verify_orbit
from .sim import NumericalDivergence, run_scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_LAYOUT = 2
EXIT_ORBIT = 3
EXIT_VERIFY = 4
EXIT_PLAN = 5
EXIT_SIM = 6

ARTIFACT_FORMAT = "nonstop-orbit/1"
FINGERPRINT_DECIMALS = 9
REPORT_RTOL = 1e-9
REPORT_ATOL = 1e-12


class CommandError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def atomic_write(path, data: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def fingerprint(M: np.ndarray) -> dict:
    """Shape plus a hash of the entries rounded to 1e-9."""
    R = np.round(np.asarray(M, dtype=np.float64), FINGERPRINT_DECIMALS) + 0.0
    return {"shape": list(M.shape), "sha256": hashlib.sha256(np.ascontiguousarray(R).tobytes()).hexdigest()}


def _layout(cfg: ScenarioConfig):
    try:
        return cfg.layout.build()
    except ValueError as exc:
        raise CommandError(EXIT_INPUT, f"invalid layout: {exc}") from exc


def _select_orbit(cfg: ScenarioConfig, gm, w):
    """First valid candidate orbit, or the last one tried; with its seed and report."""
    v = cfg.verify
    try:
        candidates = list(cfg.orbit.candidates(gm, w))
    except ConfigError as exc:
        raise CommandError(EXIT_INPUT, str(exc)) from exc
    for seed, orbit in candidates:
        report = verify_orbit(gm, w, orbit, v.samples, v.eps_tension, v.eps_speed, cfg.cable.rest_length)
        if report.valid:
            break
    return seed, orbit, report, len(candidates)


def _grasp(layout):
    try:
        return build_grasp_model(layout)
    except DegenerateLayout as exc:
        raise CommandError(EXIT_LAYOUT, f"DegenerateLayout: {exc}") from exc


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CommandError(EXIT_INPUT, f"cannot read {what} {path}: {exc}") from exc


def _load_config(path, seed_override=None, seed_target=None) -> ScenarioConfig:
    try:
        cfg = ScenarioConfig.load_file(path)
    except OSError as exc:
        raise CommandError(EXIT_INPUT, f"cannot read config {path}: {exc}") from exc
    except ConfigError as exc:
        raise CommandError(EXIT_INPUT, f"invalid config: {exc}") from exc
    if seed_override is not None:
        if seed_target == "orbit":
            cfg.orbit.sampler.seed = seed_override
        elif seed_target == "plan":
            cfg.plan.seed = seed_override
    return cfg


# ---------------------------------------------------------------------------
# generate / verify


def build_artifact(cfg: ScenarioConfig, layout, gm, w, orbit, seed, report) -> dict:
    return {
        "format": ARTIFACT_FORMAT,
        "layout": {"points": layout.b.tolist()},
        "wrench": {"force": w.force.tolist(), "torque": w.torque.tolist()},
        "grasp": {"n": gm.n, "k": gm.k, "G": fingerprint(gm.G), "N": fingerprint(gm.N)},
        "orbit": {"A": orbit.A.tolist(), "omega": orbit.omega, "amplitude": orbit.amplitude},
        "seeds": {"sampler_seed": seed, "trials": None if seed is None else cfg.orbit.sampler.trials,
                  "layout_seed": cfg.layout.params.get("seed")},
        "lengths": [cfg.cable.rest_length] * gm.n,
        "verify": {"samples": report.samples, "eps_tension": report.eps_tension,
                   "eps_speed": report.eps_speed},
        "report": report.to_dict(),
        "config": cfg.to_dict(),
    }


def cmd_generate(args) -> int:
    cfg = _load_config(args.config, args.seed, "orbit")
    layout = _layout(cfg)
    gm = _grasp(layout)
    w = cfg.build_wrench()
    seed, orbit, report, attempts = _select_orbit(cfg, gm, w)
    artifact = build_artifact(cfg, layout, gm, w, orbit, seed, report)
    text = dumps(artifact)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    if not report.valid:
        raise CommandError(EXIT_ORBIT, f"no valid orbit after {attempts} attempt(s)")
    return EXIT_OK


def load_artifact(path):
    art = _load_json(path, "orbit artifact")
    if not isinstance(art, dict) or art.get("format") != ARTIFACT_FORMAT:
        raise CommandError(EXIT_INPUT, f"{path}: not a {ARTIFACT_FORMAT} artifact")
    try:
        layout = AttachmentLayout(np.asarray(art["layout"]["points"], dtype=float))
        w = Wrench(art["wrench"]["force"], art["wrench"]["torque"])
        o = art["orbit"]
        orbit = LinearOrbit(np.asarray(o["A"], dtype=float), o["omega"], o["amplitude"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(EXIT_INPUT, f"{path}: malformed artifact ({exc})") from exc
    return art, layout, w, orbit


def _close(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, int) and isinstance(b, int):
        return a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_close(x, y) for x, y in zip(a, b))
    try:
        return abs(float(a) - float(b)) <= REPORT_ATOL + REPORT_RTOL * max(abs(float(a)), abs(float(b)))
    except (TypeError, ValueError):
        return a == b


def report_mismatches(stored: dict, fresh: dict) -> list:
    keys = sorted(set(stored) | set(fresh))
    return [k for k in keys if k not in stored or k not in fresh or not _close(stored[k], fresh[k])]


def cmd_verify(args) -> int:
    art, layout, w, orbit = load_artifact(args.config)
    gm = _grasp(layout)
    stored_fp = art.get("grasp", {})
    for name, M in (("G", gm.G), ("N", gm.N)):
        if stored_fp.get(name) != fingerprint(M):
            raise CommandError(EXIT_VERIFY, f"{name} fingerprint differs from the artifact")
    lengths = art.get("lengths")
    vp = art["verify"]
    fresh = verify_orbit(gm, w, orbit, vp["samples"], vp["eps_tension"], vp["eps_speed"], lengths)
    bad = report_mismatches(art["report"], fresh.to_dict())
    if bad:
        raise CommandError(EXIT_VERIFY, "stored report differs from recomputation in: " + ", ".join(bad))

    samples = args.samples if args.samples is not None else vp["samples"]
    eps_T = args.eps_tension if args.eps_tension is not None else vp["eps_tension"]
    eps_v = args.eps_speed if args.eps_speed is not None else vp["eps_speed"]
    if samples < 64:
        raise CommandError(EXIT_INPUT, "--samples must be >= 64")
    report = verify_orbit(gm, w, orbit, samples, eps_T, eps_v, lengths)
    text = dumps(report.to_dict())
    sys.stdout.write(text)
    if args.out:
        atomic_write(args.out, text)
    return EXIT_OK if report.valid else EXIT_ORBIT


# ---------------------------------------------------------------------------
# plan


def _read_lambda(path, gm, w):
    data = _load_json(path, "lambda file")
    if not isinstance(data, dict) or len(data) != 1 or not ({"lambda", "forces"} & set(data)):
        raise CommandError(EXIT_INPUT, f"{path}: expected an object with one key, 'lambda' or 'forces'")
    try:
        if "lambda" in data:
            lam = np.asarray(data["lambda"], dtype=float)
            if lam.shape != (gm.k,):
                raise ValueError(f"lambda must have length {gm.k}")
            return lam
        return lambda_from_forces(gm, w, np.asarray(data["forces"], dtype=float).reshape(-1)).lam
    except (ValueError, NotWrenchConsistent) as exc:
        raise CommandError(EXIT_INPUT, f"{path}: {exc}") from exc


def cmd_plan(args) -> int:
    cfg = _load_config(args.config, args.seed, "plan")
    gm = _grasp(_layout(cfg))
    w = cfg.build_wrench()
    a = _read_lambda(args.from_path, gm, w)
    b = _read_lambda(args.to_path, gm, w)
    p = cfg.plan
    try:
        path = plan_path(gm, w, a, b, p.min_clearance, p.seed, p.max_retries)
    except PlanningFailed as exc:
        raise CommandError(EXIT_PLAN, f"PlanningFailed: {exc}") from exc
    segments = []
    for u, v in zip(path.waypoints[:-1], path.waypoints[1:]):
        sc = segment_clearance(gm, w, u, v)
        segments.append({"clearance": sc.clearance, "t": sc.t, "carrier": sc.carrier})
    out = {
        "waypoints": path.waypoints.tolist(),
        "clearance": path.clearance,
        "segments": segments,
        "min_clearance": p.min_clearance,
        "seed": p.seed,
    }
    text = dumps(out)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def csv_header(n):
    cols = ["t", "pL_x", "pL_y", "pL_z", "phi", "theta", "psi"]
    for i in range(n):
        cols += [f"p{i}_x", f"p{i}_y", f"p{i}_z", f"v{i}_x", f"v{i}_y", f"v{i}_z", f"T{i}"]
    return cols


def timeseries_csv(ts, skip_first=True) -> str:
    """CSV text (CRLF rows, 17 significant digits) of every sample after the first."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(csv_header(ts.n))
    start = 1 if skip_first else 0
    for j in range(start, len(ts.t)):
        row = [ts.t[j], *ts.load_pos[j], *ts.euler[j]]
        for i in range(ts.n):
            row += [*ts.carrier_pos[j, i], *ts.carrier_vel[j, i], ts.tension[j, i]]
        writer.writerow([format(float(x), ".17g") for x in row])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args.seed, "orbit")
    if args.orbit:
        _, layout, w, orbit = load_artifact(args.orbit)
        gm = _grasp(layout)
    else:
        layout = _layout(cfg)
        gm = _grasp(layout)
        w = cfg.build_wrench()
        _, orbit, report, attempts = _select_orbit(cfg, gm, w)
        if not report.valid:
            raise CommandError(EXIT_ORBIT, f"no valid orbit after {attempts} attempt(s)")
    world = cfg.build_world(layout)
    try:
        ts = run_scenario(gm, w, orbit, world, record_every=cfg.sim.record_every)
    except NumericalDivergence as exc:
        raise CommandError(EXIT_SIM, f"NumericalDivergence: {exc}") from exc
    summary = ts.summary()
    summary["initial"] = {
        "t": float(ts.t[0]),
        "load_position": ts.load_pos[0].tolist(),
        "euler": ts.euler[0].tolist(),
        "carrier_positions": ts.carrier_pos[0].tolist(),
        "tensions": ts.tension[0].tolist(),
    }
    out = Path(args.out)
    atomic_write(out, timeseries_csv(ts))
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".summary.json")
    text = dumps(summary)
    atomic_write(summary_path, text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nonstop", description="Periodic non-stop carrier trajectories for a cable-suspended load")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample and verify a linear orbit, write an orbit artifact")
    g.add_argument("--config", required=True, help="scenario config (JSON)")
    g.add_argument("--out", help="artifact path (stdout if omitted)")
    g.add_argument("--seed", type=int, help="override orbit.sampler.seed")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="recompute and check an orbit artifact")
    v.add_argument("--config", required=True, help="orbit artifact (JSON) written by generate")
    v.add_argument("--out", help="also write the report here")
    v.add_argument("--samples", type=int)
    v.add_argument("--eps-tension", type=float)
    v.add_argument("--eps-speed", type=float)
    v.add_argument("--seed", type=int, help="accepted for symmetry; verification draws nothing")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("plan", help="join two admissible configurations")
    p.add_argument("--config", required=True, help="scenario config (JSON)")
    p.add_argument("--from", dest="from_path", required=True, help="JSON with 'lambda' or 'forces'")
    p.add_argument("--to", dest="to_path", required=True, help="JSON with 'lambda' or 'forces'")
    p.add_argument("--out", help="waypoint file (stdout if omitted)")
    p.add_argument("--seed", type=int, help="override plan.seed")
    p.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="track an orbit in the physics simulator")
    s.add_argument("--config", required=True, help="scenario config (JSON)")
    s.add_argument("--orbit", help="orbit artifact; generated from the config if omitted")
    s.add_argument("--out", required=True, help="CSV time series path")
    s.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    s.add_argument("--seed", type=int, help="override orbit.sampler.seed when generating")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"nonstop {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"nonstop {args.command}: invalid config: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
