"""``rl-lab`` command line.

Every subcommand builds a job dict (the same shape as a job file), so flags
and job files go through one validator and one dispatcher.  Exit codes:
0 success, 2 refutation or failed check, 1 error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .jobs import EXIT_ERROR, JobError, dumps, execute, load_job

log = logging.getLogger("rllab")


def parse_space(text: str) -> dict:
    """``p2:3``, ``p1:2``, ``pinf:4``, ``w2:1,4`` or a JSON space object."""
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    kind, _, rest = text.partition(":")
    if kind == "w2":
        weights = json.loads("[" + rest + "]")
        return {"dim": len(weights), "norm": {"w2": weights}}
    if kind not in ("p1", "p2", "pinf") or not rest:
        raise argparse.ArgumentTypeError(f"bad space {text!r}; use e.g. p2:1 or w2:1,4")
    return {"dim": int(rest), "norm": kind}


def parse_numbers(text: str) -> list:
    try:
        out = json.loads("[" + text + "]")
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not all(isinstance(v, (int, float)) for v in out):
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return [float(v) for v in out]


def split_pair(values: list, dim: int) -> list:
    """``[y..., y*...]`` -> ``[[y...], [y*...]]``."""
    if len(values) != 2 * dim:
        raise JobError(f"a pair in dimension {dim} needs {2 * dim} numbers, got {len(values)}")
    return [values[:dim], values[dim:]]


def _common(p):
    p.add_argument("--space", type=parse_space, default=None,
                   help="p1:n, p2:n, pinf:n, w2:w1,w2,... or JSON (default p2:1)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--json-out", default=None)
    p.add_argument("--csv-out", default=None)
    p.add_argument("--canonical", action="store_true",
                   help="sorted keys and no wall time, for byte-identical reruns")
    p.add_argument("-v", "--verbose", action="store_true")


def _graph_args(p):
    p.add_argument("--graph", help="sampled graph JSON file")
    p.add_argument("--operator", help="registry operator name")
    p.add_argument("--params", type=json.loads, default=None, help="operator parameters as JSON")
    p.add_argument("--f", help="function text; its subdifferential is the graph")
    p.add_argument("--engine", choices=["convex1d", "smooth", "polynomial", "piecewise"])
    p.add_argument("--convex", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rl-lab", description="r_L-density and monotone-operator toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify or refute r_L-density at targets")
    _common(p)
    _graph_args(p)
    p.add_argument("--target", action="append", type=parse_numbers, required=True,
                   help="y,y* coordinates (repeatable)")
    p.add_argument("--eps", type=parse_numbers)
    p.add_argument("--box", type=parse_numbers)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("certify-subdiff", help="constructive certificate for a subdifferential")
    _common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--engine", choices=["convex1d", "smooth", "polynomial", "piecewise"])
    p.add_argument("--convex", action="store_true")
    p.add_argument("--a0", type=float, required=True)
    p.add_argument("--b0", type=float, default=0.0)
    p.add_argument("--c0", type=float, default=0.0)
    p.add_argument("--target", action="append", type=parse_numbers, required=True)
    p.add_argument("--eps", type=parse_numbers)
    p.add_argument("--box", type=parse_numbers)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("minty", help="solve s* + s = y* exactly, or run the diagonal ladder")
    _common(p)
    _graph_args(p)
    p.add_argument("--ystar", type=parse_numbers)
    p.add_argument("--ladder", type=lambda t: [int(v) for v in parse_numbers(t)])
    p.add_argument("--truncation", type=int)
    p.add_argument("--box", type=parse_numbers)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("hyperdense", help="bounded preimages approaching y*")
    _common(p)
    _graph_args(p)
    p.add_argument("--ystar", type=parse_numbers, required=True)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--eps", type=parse_numbers)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("polar", help="monotone polar membership, region or maximality audit")
    _common(p)
    _graph_args(p)
    p.add_argument("--point", type=parse_numbers)
    p.add_argument("--region", action="store_true")
    p.add_argument("--audit", action="store_true")
    p.add_argument("--box", type=parse_numbers, help="xlo,xhi,x*lo,x*hi for region/audit")
    p.add_argument("--grid", type=int)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("ekeland", help="Ekeland point of g from an approximate minimiser u")
    _common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--u", type=parse_numbers, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--box", type=parse_numbers)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("br", help="exact subgradient pair near an approximate one")
    _common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--engine", choices=["convex1d", "smooth", "polynomial", "piecewise"])
    p.add_argument("--convex", action="store_true")
    p.add_argument("--u", type=parse_numbers, required=True)
    p.add_argument("--ustar", type=parse_numbers, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--box", type=parse_numbers)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("examples", help="run the reference examples against the expected table")
    _common(p)

    p = sub.add_parser("run", help="run a JSON job file")
    _common(p)
    p.add_argument("job", help="path to the job file")
    return ap


def job_from_args(a: argparse.Namespace) -> dict:
    """Translate parsed flags into a job dict."""
    if a.command == "run":
        job = load_job(a.job)
        if a.space is not None:
            job["space"] = a.space
        if a.seed is not None:
            job["seed"] = a.seed
        return job
    space = a.space or {"dim": 1, "norm": "p2"}
    dim = space["dim"]
    job = {"command": a.command, "space": space, "seed": a.seed if a.seed is not None else 0}
    v = vars(a)

    def put(key, value):
        if value is not None and value is not False:
            job[key] = value

    for key in ("f", "engine", "graph", "budget", "grid", "alpha", "beta", "M", "truncation",
                "ladder", "eps"):
        put(key, v.get(key))
    if v.get("convex"):
        job["convex"] = True
    if v.get("operator"):
        job["operator"] = {"name": a.operator, "params": a.params or {}}
    if v.get("target"):
        job["targets"] = [split_pair(t, dim) for t in a.target]
    for key in ("u", "ustar", "ystar"):
        put(key, v.get(key))
    if v.get("point"):
        job["point"] = split_pair(a.point, dim)
    if a.command == "certify-subdiff":
        job["downside"] = {"a0": a.a0, "b0": a.b0, "c0": a.c0}
    if a.command == "polar":
        put("region", a.region)
        put("audit", a.audit)
        if a.box is not None:
            if len(a.box) != 4:
                raise JobError("polar --box takes xlo,xhi,x*lo,x*hi")
            job["region_box"] = [a.box[:2], a.box[2:]]
    elif v.get("box") is not None:
        if len(a.box) != 2:
            raise JobError("--box takes lo,hi")
        job["box"] = a.box
    return job


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        job = job_from_args(a)
        if a.json_out or a.csv_out:
            job.setdefault("outputs", {})
            if a.json_out:
                job["outputs"]["json"] = a.json_out
            if a.csv_out:
                job["outputs"]["csv"] = a.csv_out
        report, csv_text, status = execute(job, a.threads, a.canonical)
        text = dumps(report, a.canonical)
        outputs = job.get("outputs", {})
        if "json" in outputs:
            Path(outputs["json"]).write_text(text)
        else:
            sys.stdout.write(text)
        if "csv" in outputs:
            if csv_text is None:
                log.warning("command %s has no CSV output", job["command"])
            else:
                Path(outputs["csv"]).write_text(csv_text)
        log.info("status %s", report["status"])
        return status
    except Exception as e:  # noqa: BLE001 - every failure maps to exit code 1
        log.debug("failure", exc_info=True)
        sys.stderr.write(f"rl-lab: error: {type(e).__name__}: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
